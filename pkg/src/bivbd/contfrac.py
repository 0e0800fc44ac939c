"""Continued fractions of the tridiagonal Laplace-domain systems.

For a fixed type-1 row ``a`` the Laplace transforms ``f_b(s)``, ``0 <= b <= B``
solve the tridiagonal system ``M f = g`` with

    M[b, b]     = s + lambda1_b + lambda2_b + mu2_b + gamma_b
    M[b, b - 1] = -lambda2_{b-1}
    M[b, b + 1] = -mu2_{b+1}

Its Green's function ``phi[m][b] = (M^-1)[b, m]`` is expressed through the
continued fraction with partial numerators ``x_1 = 1``,
``x_k = -lambda2_{k-2} mu2_{k-1}`` and denominators ``y_k = s + q_{k-1}``
(``q`` the total exit rate), whose convergent denominators ``Y_k`` are the
leading principal minors of ``M``.  Truncation at ``B`` makes ``x_{B+2} = 0``
so every tail fraction terminates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

TINY = 1e-16

__all__ = [
    "CfTerms",
    "CfResult",
    "ConvergentDenominators",
    "ContinuedFractionError",
    "RowRates",
    "lentz_eval",
    "denominators",
    "row_terms",
    "phi",
]


class ContinuedFractionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CfTerms:
    """Term generators ``x(k)``, ``y(k)`` for ``k >= 1`` of ``x1/(y1 + x2/(y2 + ...))``."""

    x: Callable[[int], complex]
    y: Callable[[int], complex]


@dataclass(frozen=True)
class CfResult:
    value: complex
    iterations: int
    converged: bool
    residual: float


def _bad(z: complex) -> bool:
    return not (math.isfinite(z.real) and math.isfinite(z.imag))


def lentz_eval(terms: CfTerms, tol: float = 1e-12, max_depth: int = 10_000) -> CfResult:
    """Evaluate a continued fraction with the modified Lentz algorithm.

    The ratios ``A_n = X_n / X_{n-1}`` and ``B_n = Y_{n-1} / Y_n`` are updated as
    ``A_n = y_n + x_n / A_{n-1}`` and ``B_n = 1 / (y_n + x_n B_{n-1})``; zero
    pivots are replaced by ``TINY``.  Iteration stops when the Craviotto bound
    ``|1/B_n| / |Im(1/B_n)| * |phi_n - phi_{n-1}|`` falls below
    ``tol * |phi_n|``.  If ``1/B_n`` is real the bound is undefined and the plain
    relative update is used instead.

    Hitting ``max_depth`` is not an error: the result is returned with
    ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")

    f = complex(TINY)
    c = f
    d = 0j
    residual = math.inf
    for n in range(1, max_depth + 1):
        x = complex(terms.x(n))
        y = complex(terms.y(n))
        if _bad(x) or _bad(y):
            raise ContinuedFractionError(f"non-finite continued fraction term at k={n}: x={x}, y={y}")
        d = y + x * d
        if d == 0:
            d = complex(TINY)
        c = y + x / c
        if c == 0:
            c = complex(TINY)
        d = 1.0 / d
        f_new = f * c * d
        if _bad(f_new):
            raise ContinuedFractionError(f"continued fraction iterate overflowed at k={n}")
        change = abs(f_new - f)
        f = f_new
        if n == 1:
            # the first convergent carries the TINY seed; no update to compare
            continue
        inv_d = 1.0 / d
        scale = abs(f) if f != 0 else 1.0
        if inv_d.imag != 0.0 and math.isfinite(abs(inv_d) / abs(inv_d.imag)):
            residual = abs(inv_d) / abs(inv_d.imag) * change / scale
        else:
            residual = change / scale
        if residual <= tol or change == 0.0:
            return CfResult(f, n, True, residual)
    return CfResult(f, max_depth, False, residual)


@dataclass(frozen=True)
class ConvergentDenominators:
    """Denominators ``Y_0..Y_n`` stored as ``mantissa[k] * 2**exponent[k]``."""

    mantissa: np.ndarray
    exponent: np.ndarray

    def __len__(self):
        return self.mantissa.size

    @property
    def values(self) -> np.ndarray:
        """Unscaled values; may overflow to inf for long sequences."""
        return np.array([_ldexp(m, int(e)) for m, e in zip(self.mantissa, self.exponent)],
                        dtype=complex)

    def ratio(self, i: int, j: int) -> complex:
        """``Y_i / Y_j`` computed from the scaled representation."""
        return _ldexp(self.mantissa[i] / self.mantissa[j],
                      int(self.exponent[i] - self.exponent[j]))


def _ldexp(z: complex, e: int) -> complex:
    """``z * 2**e`` saturating to signed infinity on overflow."""
    def part(x: float) -> float:
        try:
            return math.ldexp(x, e)
        except OverflowError:
            return math.copysign(math.inf, x)

    z = complex(z)
    return complex(part(z.real), part(z.imag))


_RESCALE_AT = 2.0 ** 400


def denominators(terms: CfTerms, n: int) -> ConvergentDenominators:
    """Convergent denominators via ``Y_k = y_k Y_{k-1} + x_k Y_{k-2}``.

    ``Y_{-1} = 0`` and ``Y_0 = 1``.  The two working values are rescaled by a
    power of two whenever they grow large, and the exponent is carried along
    so ratios stay exact.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    mant = np.empty(n + 1, dtype=complex)
    expo = np.zeros(n + 1, dtype=np.int64)
    prev, cur = 0j, 1 + 0j
    e = 0
    mant[0] = cur
    for k in range(1, n + 1):
        prev, cur = cur, complex(terms.y(k)) * cur + complex(terms.x(k)) * prev
        big = max(abs(cur.real), abs(cur.imag), abs(prev.real), abs(prev.imag))
        if big > _RESCALE_AT:
            shift = math.frexp(big)[1]
            prev = _ldexp(prev, -shift)
            cur = _ldexp(cur, -shift)
            e += shift
        elif 0 < big < 1.0 / _RESCALE_AT:
            shift = math.frexp(big)[1]
            prev = _ldexp(prev, -shift)
            cur = _ldexp(cur, -shift)
            e += shift
        mant[k] = cur
        expo[k] = e
    return ConvergentDenominators(mant, expo)


@dataclass(frozen=True)
class RowRates:
    """Rates of a single type-1 row ``a``, indexed by ``b = 0..B`` (at least)."""

    lambda1: np.ndarray
    lambda2: np.ndarray
    mu2: np.ndarray
    gamma: np.ndarray

    @classmethod
    def from_rates(cls, rates, a: int, B: int) -> "RowRates":
        tab = rates.tabulate([a], np.arange(B + 1))
        return cls(tab["lambda1"][0], tab["lambda2"][0], tab["mu2"][0], tab["gamma"][0])

    @property
    def exit_rate(self) -> np.ndarray:
        return self.lambda1 + self.lambda2 + self.mu2 + self.gamma


def row_terms(s: complex, row: RowRates, B: int, start: int = 1) -> CfTerms:
    """Reparametrized terms of the truncated row fraction, shifted to begin at ``start``.

    ``row_terms(s, row, B, start=j)`` yields the tail ``x_j / (y_j + x_{j+1} / ...)``
    whose generator index 1 corresponds to term ``j``.  Terms beyond ``B + 1``
    are ``x = 0`` (the truncation), ``y = 1``.
    """
    q = row.exit_rate
    lam2 = row.lambda2
    mu2 = row.mu2
    s = complex(s)

    def x(k: int) -> complex:
        j = k + start - 1
        if j == 1:
            return 1 + 0j
        if j > B + 1:
            return 0j
        return complex(-lam2[j - 2] * mu2[j - 1])

    def y(k: int) -> complex:
        j = k + start - 1
        if j > B + 1:
            return 1 + 0j
        return s + q[j - 1]

    return CfTerms(x, y)


def phi(s: complex, row: RowRates, m: int, b: int, B: int,
        tol: float = 1e-12, max_depth: int = 10_000) -> tuple[complex, CfResult]:
    """Green's function entry ``(M^-1)[b, m]`` of the truncated row system.

    For ``b <= m``::

        phi = prod_{i=b+1}^{m} mu2_i * Y_b / (Y_{m+1} + Y_m * T_{m+2})

    and for ``b >= m``::

        phi = prod_{i=m}^{b-1} lambda2_i * Y_m / (Y_{b+1} + Y_b * T_{b+2})

    where ``T_j = x_j / (y_j + x_{j+1} / (y_{j+1} + ...))`` is the tail fraction,
    evaluated with :func:`lentz_eval`.  Returns the value together with the
    tail's :class:`CfResult` so callers can react to non-convergence.
    """
    if not (0 <= m <= B and 0 <= b <= B):
        raise ValueError("need 0 <= m, b <= B")
    lo, hi = min(b, m), max(b, m)
    if b <= m:
        pref = float(np.prod(row.mu2[b + 1:m + 1]))
    else:
        pref = float(np.prod(row.lambda2[m:b]))
    dens = denominators(row_terms(s, row, B), hi + 1)
    if hi + 2 > B + 1:
        tail = CfResult(0j, 0, True, 0.0)
    else:
        # one extra step reaches the terminating x = 0 term
        depth = min(max_depth, B + 1 - hi)
        tail = lentz_eval(row_terms(s, row, B, start=hi + 2), tol=tol, max_depth=depth)
    if pref == 0.0:
        return 0j, tail
    # Y_lo / (Y_{hi+1} + Y_hi T) = (Y_lo / Y_hi) / (Y_{hi+1} / Y_hi + T)
    denom = dens.ratio(hi + 1, hi) + tail.value
    return pref * dens.ratio(lo, hi) / denom, tail
