"""Numerical Laplace inversion by the Abate-Whitt alternating Riemann sum.

    f(t) ~ e^{H/2}/(2t) Re F(H/(2t)) + e^{H/2}/t sum_{k>=1} (-1)^k Re F((H + 2k pi i)/(2t))

The discretization error is bounded by ``1/(e^H - 1)``.  The series is summed
by Euler (binomial) averaging of partial sums or by the Levin t-transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import comb

__all__ = [
    "LaplaceGrid",
    "AcceleratorState",
    "InversionResult",
    "InversionError",
    "make_grid",
    "levin_accelerate",
    "euler_accelerate",
    "series_terms",
    "sum_series",
    "levin_mask",
    "invert",
]


class InversionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LaplaceGrid:
    t: float
    H: float
    k_max: int = 400

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not self.H > 0:
            raise ValueError("H must be positive")

    def points(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """``s_k = (H + 2 k pi i) / (2 t)`` for ``start <= k < stop``."""
        stop = self.k_max + 1 if stop is None else stop
        k = np.arange(start, stop)
        return (self.H + 2j * math.pi * k) / (2.0 * self.t)

    @property
    def error_bound(self) -> float:
        return 1.0 / math.expm1(self.H)


def make_grid(t: float, tol: float = 1e-12, k_max: int = 400) -> LaplaceGrid:
    """Grid whose discretization error bound ``1/(e^H - 1)`` is at most ``tol``.

    ``H = ln(1/tol + 1)`` rounded up to one decimal.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    H = math.ceil(math.log1p(1.0 / tol) * 10.0 - 1e-9) / 10.0
    return LaplaceGrid(t=float(t), H=H, k_max=int(k_max))


@dataclass
class AcceleratorState:
    """Settings for summing the inversion series.

    ``method`` picks the summation: ``"euler"`` (binomial averaging of the
    last ``euler_order + 1`` partial sums), ``"levin"`` (t-transform of order
    ``order``) or ``"auto"`` (Levin for cells whose first ``sign_window``
    real parts share one sign, Euler elsewhere).  ``order == 0`` disables
    acceleration altogether.  ``tol`` is the agreement between successive
    accelerated values that ends summation and ``min_terms`` the number of
    series terms always computed.

    Euler is the default: transforms that vary slowly in ``k`` (large ``t``
    against fast rates) can keep one sign for hundreds of terms before
    turning, and the Levin remainder estimate then settles on a wrong limit.
    """

    method: str = "euler"
    order: int = 8
    tol: float = 1e-11
    min_terms: int = 24
    sign_window: int = 8
    euler_order: int = 11

    def __post_init__(self):
        if self.method not in ("euler", "levin", "auto"):
            raise ValueError(f"unknown summation method {self.method!r}")
        if self.order < 0 or self.euler_order < 1:
            raise ValueError("orders must be non-negative")


@dataclass
class InversionResult:
    value: np.ndarray | float
    n_terms: int
    converged: bool | np.ndarray
    change: np.ndarray | float = field(default=0.0)


def _partial_sums(a: np.ndarray, head=0.0) -> np.ndarray:
    """Running sums of ``a`` along the last axis, continuing from ``head``.

    The additions happen in the same order as a single pass over the whole
    series, so a windowed evaluation reproduces the full one bit for bit.
    """
    if np.ndim(head) == 0 and head == 0.0:
        return np.cumsum(a, axis=-1)
    h = np.broadcast_to(np.asarray(head, dtype=float), a.shape[:-1])[..., None]
    return np.cumsum(np.concatenate([h, a], axis=-1), axis=-1)[..., 1:]


def levin_accelerate(terms, order: int = 8, beta: float = 1.0, start: int = 0, head=0.0):
    """Levin t-transform estimate of ``sum(terms)`` using the last ``order + 1`` partial sums.

    ``terms`` may have leading batch dimensions; the series runs along the
    last axis.  Remainder estimates are the terms themselves.  Where a
    denominator vanishes, or ``order == 0``, the plain partial sum is returned.
    A window of a longer series is passed as its terms from index ``start``
    on together with ``head``, the sum of the terms before it.
    """
    a = np.asarray(terms, dtype=float)
    N = a.shape[-1]
    S = _partial_sums(a, head)
    if order == 0:
        return S[..., -1]
    if N < order + 2:
        raise ValueError(f"need at least order + 2 = {order + 2} terms, got {N}")
    k = order
    n = N - k - 1
    j = np.arange(k + 1)
    w = (-1.0) ** j * comb(k, j) * ((beta + start + n + j) / (beta + start + n + k)) ** (k - 1)
    omega = a[..., n:n + k + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / omega
        num = np.sum(w * S[..., n:n + k + 1] * inv, axis=-1)
        den = np.sum(w * inv, axis=-1)
        est = num / den
    plain = S[..., -1]
    bad = ~np.isfinite(est) | (np.abs(den) < 1e-300) | np.any(omega == 0, axis=-1)
    return np.where(bad, plain, est)


def euler_accelerate(terms, order: int = 11, head=0.0):
    """Binomial average of the last ``order + 1`` partial sums (``head`` as in :func:`levin_accelerate`)."""
    a = np.asarray(terms, dtype=float)
    S = _partial_sums(a, head)
    N = a.shape[-1]
    m = min(order, N - 1)
    w = comb(m, np.arange(m + 1)) / 2.0 ** m
    return np.sum(w * S[..., N - m - 1:], axis=-1)


def series_terms(re_values, grid: LaplaceGrid, start: int = 0) -> np.ndarray:
    """Scale ``Re F(s_k)`` (last axis indexed by ``k = start, start+1, ...``) into series terms."""
    re_values = np.asarray(re_values, dtype=float)
    k = np.arange(start, start + re_values.shape[-1])
    c = math.exp(grid.H / 2.0) / grid.t
    coef = np.where(k == 0, 0.5 * c, c * (-1.0) ** k)
    return re_values * coef


def _accelerate(terms: np.ndarray, use_levin, accel: AcceleratorState, start: int = 0,
                head=0.0) -> np.ndarray:
    if accel.order == 0:
        return _partial_sums(terms, head)[..., -1]
    if use_levin is True:
        return levin_accelerate(terms, accel.order, start=start, head=head)
    eul = euler_accelerate(terms, accel.euler_order, head)
    if use_levin is False or not np.any(use_levin):
        return eul
    return np.where(use_levin, levin_accelerate(terms, accel.order, start=start, head=head), eul)


def _one_sign(x: np.ndarray) -> np.ndarray:
    return np.all(x > 0, axis=-1) | np.all(x < 0, axis=-1)


def sum_series(re_values, grid: LaplaceGrid, accel: AcceleratorState | None = None,
               start: int = 0, head=0.0, use_levin=None):
    """Accelerated inversion sum for a block of ``Re F(s_k)``, ``k = start..start+n-1``.

    Returns ``(value, change)`` where ``change`` is the absolute difference
    between the accelerated values using ``n`` and ``n - 1`` terms.  A
    trailing window (``start > 0``) needs ``head``, the sum of the earlier
    series terms, and for ``method="auto"`` the Levin mask ``use_levin``
    from :func:`levin_mask`.
    """
    accel = accel or AcceleratorState()
    re_values = np.asarray(re_values, dtype=float)
    terms = series_terms(re_values, grid, start)
    n = terms.shape[-1]
    if use_levin is None:
        if accel.method == "auto" and start > 0:
            raise ValueError("a trailing window in auto mode needs use_levin")
        use_levin = levin_mask(re_values, accel)
    cur = _accelerate(terms, use_levin, accel, start, head)
    prev = _accelerate(terms[..., :n - 1], use_levin, accel, start, head)
    return cur, np.abs(cur - prev)


def levin_mask(re_values, accel: AcceleratorState):
    """Cells summed with Levin: all of them, none, or (``auto``) those whose early terms keep one sign."""
    if accel.method == "auto":
        return _one_sign(np.asarray(re_values)[..., 1:1 + accel.sign_window])
    return accel.method == "levin"


def invert(F: Callable[[complex], complex], grid: LaplaceGrid,
           accel: AcceleratorState | None = None, chunk: int = 8) -> InversionResult:
    """Invert a scalar Laplace transform at ``grid.t``.

    ``F`` is evaluated at grid points in increasing ``k``; summation stops once
    two successive accelerated values agree within ``accel.tol`` (after at
    least ``accel.min_terms`` terms) or at ``grid.k_max``, in which case the
    result is flagged unconverged.  Without ``accel`` the agreement required
    is the grid's discretization bound.
    """
    accel = accel or AcceleratorState(tol=grid.error_bound)
    vals: list[float] = []
    k = 0
    need = max(accel.min_terms, accel.order + 3, accel.euler_order + 3)
    value, change = math.nan, math.inf
    while k <= grid.k_max:
        stop = min(k + (need if k == 0 else chunk), grid.k_max + 1)
        for s in grid.points(k, stop):
            fs = complex(F(s))
            if not (math.isfinite(fs.real) and math.isfinite(fs.imag)):
                raise InversionError(f"non-finite transform value {fs} at s={s}")
            vals.append(fs.real)
        k = stop
        value, change = sum_series(np.array(vals), grid, accel)
        value, change = float(value), float(change)
        if change <= accel.tol:
            return InversionResult(value, k, True, change)
    return InversionResult(value, k, False, change)
