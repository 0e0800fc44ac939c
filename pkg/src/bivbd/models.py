"""Rate bundles for birth/birth-death and death/birth-death processes.

A birth/birth-death (BBD) process ``(X1, X2)`` has four event types at state
``(a, b)``:

* ``lambda1``: ``(a, b) -> (a + 1, b)``
* ``lambda2``: ``(a, b) -> (a, b + 1)``
* ``mu2``:     ``(a, b) -> (a, b - 1)``
* ``gamma``:   ``(a, b) -> (a + 1, b - 1)``

A death/birth-death (DBD) process replaces the type-1 birth by a type-1 death
``mu1`` and the transfer by ``(a, b) -> (a - 1, b + 1)``.

Rates are plain callables of ``(a, b)``.  They should accept numpy integer
arrays (broadcasting) as well as scalars; the bundles fall back to
``np.vectorize`` when a callable does not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

RateFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

__all__ = [
    "BBDRates",
    "DBDRates",
    "SirParams",
    "RegularityReport",
    "sir_rates",
    "monomolecular_rates",
    "bds_rates",
    "parasite_rates",
    "regularity_diagnostic",
    "ode_trajectory",
]


def _evaluate(fn: RateFn, a, b) -> np.ndarray:
    a_arr = np.asarray(a)
    b_arr = np.asarray(b)
    try:
        out = np.asarray(fn(a_arr, b_arr), dtype=float)
        out = np.broadcast_to(out, np.broadcast(a_arr, b_arr).shape)
    except (TypeError, ValueError):
        out = np.vectorize(lambda i, j: float(fn(int(i), int(j))), otypes=[float])(a_arr, b_arr)
    return out


class _RateBundle:
    """Shared evaluation logic; subclasses declare the rate names and boundaries."""

    _names: tuple[str, ...] = ()
    __slots__ = ("_fns", "name")

    def __init__(self, *fns: RateFn, name: str = "custom"):
        if len(fns) != len(self._names):
            raise TypeError(f"expected {len(self._names)} rate functions")
        object.__setattr__(self, "_fns", dict(zip(self._names, fns)))
        object.__setattr__(self, "name", name)

    def __setattr__(self, key, value):
        raise AttributeError("rate bundles are immutable")

    def _boundary(self, name: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rate(self, name: str, a, b):
        """Evaluate one named rate with the boundary zeros applied."""
        a_arr = np.asarray(a)
        b_arr = np.asarray(b)
        vals = _evaluate(self._fns[name], a_arr, b_arr)
        vals = np.where(self._boundary(name, a_arr, b_arr), 0.0, vals)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError(f"rate {name} must be finite and non-negative")
        if vals.ndim == 0:
            return float(vals)
        return vals

    def tabulate(self, a_values, b_values) -> dict[str, np.ndarray]:
        """Evaluate all four rates on the outer grid ``a_values x b_values``."""
        aa, bb = np.meshgrid(np.asarray(a_values, dtype=np.int64),
                             np.asarray(b_values, dtype=np.int64), indexing="ij")
        return {name: np.ascontiguousarray(self.rate(name, aa, bb), dtype=float)
                for name in self._names}

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r})"


class BBDRates(_RateBundle):
    """Rates of a birth/birth-death process.

    ``mu2(a, 0)`` and ``gamma(a, 0)`` are forced to zero regardless of what the
    supplied callables return.
    """

    _names = ("lambda1", "lambda2", "mu2", "gamma")
    __slots__ = ()

    def _boundary(self, name, a, b):
        if name in ("mu2", "gamma"):
            return (b <= 0) | (a < 0)
        return (a < 0) | (b < 0)

    def lambda1(self, a, b):
        return self.rate("lambda1", a, b)

    def lambda2(self, a, b):
        return self.rate("lambda2", a, b)

    def mu2(self, a, b):
        return self.rate("mu2", a, b)

    def gamma(self, a, b):
        return self.rate("gamma", a, b)


class DBDRates(_RateBundle):
    """Rates of a death/birth-death process.

    Boundary zeros: ``mu1(0, b) = gamma(0, b) = 0`` and ``mu2(a, 0) = 0``.
    """

    _names = ("mu1", "lambda2", "mu2", "gamma")
    __slots__ = ()

    def _boundary(self, name, a, b):
        if name in ("mu1", "gamma"):
            return (a <= 0) | (b < 0)
        if name == "mu2":
            return (b <= 0) | (a < 0)
        return (a < 0) | (b < 0)

    def mu1(self, a, b):
        return self.rate("mu1", a, b)

    def lambda2(self, a, b):
        return self.rate("lambda2", a, b)

    def mu2(self, a, b):
        return self.rate("mu2", a, b)

    def gamma(self, a, b):
        return self.rate("gamma", a, b)


@dataclass(frozen=True)
class SirParams:
    alpha: float
    beta: float
    n_total: int = 1

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if self.n_total < 1:
            raise ValueError("n_total must be >= 1")

    @property
    def r0(self) -> float:
        return self.beta * self.n_total / self.alpha


def _zero(a, b):
    return np.zeros(np.broadcast(np.asarray(a), np.asarray(b)).shape)


def sir_rates(params: SirParams) -> DBDRates:
    """Stochastic SIR as a DBD process on ``(S, I)``: infection moves S -> I."""
    alpha, beta = float(params.alpha), float(params.beta)
    return DBDRates(
        _zero,
        _zero,
        lambda s, i: alpha * i,
        lambda s, i: beta * s * i,
        name="sir",
    )


def monomolecular_rates(r_ab: float, r_ba: float, o_b: float, a0: int, b0: int) -> BBDRates:
    """Reaction system A <-> B -> * as a BBD process on (outflow count L, A count).

    ``a0`` and ``b0`` are the initial molecule counts of species A and B.
    """
    total = int(a0) + int(b0)

    def n_b(i, j):
        return np.maximum(total - np.asarray(i) - np.asarray(j), 0)

    return BBDRates(
        lambda i, j: o_b * n_b(i, j),
        lambda i, j: r_ba * n_b(i, j),
        lambda i, j: r_ab * np.asarray(j, dtype=float),
        _zero,
        name="mono",
    )


def bds_rates(lam: float, mu: float, nu: float) -> DBDRates:
    """Birth-death-shift model on (initially occupied sites, newly occupied sites)."""
    return DBDRates(
        lambda a, b: mu * np.asarray(a, dtype=float),
        lambda a, b: lam * (np.asarray(a) + np.asarray(b)),
        lambda a, b: mu * np.asarray(b, dtype=float),
        lambda a, b: nu * np.asarray(a, dtype=float),
        name="bds",
    )


def parasite_rates(muL: float, muM: float, eta: float, gamma_mat: float) -> DBDRates:
    """Within-host macro-parasite model on (larvae L, mature parasites M)."""
    return DBDRates(
        lambda i, j: muL * np.asarray(i, dtype=float) + eta * np.asarray(i, dtype=float) ** 2,
        _zero,
        lambda i, j: muM * np.asarray(j, dtype=float),
        lambda i, j: gamma_mat * np.asarray(i, dtype=float),
        name="parasite",
    )


@dataclass(frozen=True)
class RegularityReport:
    """Finite-horizon partial sum of the regularity series.

    ``partial_sums[k-1]`` is the partial sum through term ``k``.  When some
    birth maximum vanishes the series diverges from that term on; the report
    then sets ``diverged_early`` and ``partial_sum`` is ``inf``.
    """

    horizon: int
    partial_sum: float
    diverged_early: bool
    diverged_at: int | None = None
    overflow: bool = False
    partial_sums: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


def regularity_diagnostic(rates, K: int, a0: int = 0) -> RegularityReport:
    """Partial sums of the sufficient regularity series up to horizon ``K``.

    For a BBD process the series is ``sum_{k>=1} 1/lambda_k`` with
    ``lambda_k`` the maximum of ``lambda1 + lambda2`` over the anti-diagonal
    ``a + b = k`` restricted to ``a >= a0``.  For a DBD process the series is
    ``sum_{k>=0} (1/(lambda_k sigma_k)) sum_{i<=k} sigma_i`` with
    ``lambda_k = max lambda2`` and ``mu_k = min(mu1 + mu2)`` over
    ``a + b = k, a <= a0`` and ``sigma_k = prod lambda_{<k} / prod mu_{<=k}``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if isinstance(rates, BBDRates):
        return _regularity_bbd(rates, K, a0)
    if isinstance(rates, DBDRates):
        return _regularity_dbd(rates, K, a0)
    raise TypeError("rates must be BBDRates or DBDRates")


def _regularity_bbd(rates: BBDRates, K: int, a0: int) -> RegularityReport:
    sums = np.empty(K)
    total = 0.0
    for k in range(1, K + 1):
        a = np.arange(max(a0, 0), k + 1)
        if a.size:
            b = k - a
            lam_k = float(np.max(rates.lambda1(a, b) + rates.lambda2(a, b)))
            if lam_k == 0.0:
                sums[k - 1:] = np.inf
                return RegularityReport(K, math.inf, True, k, partial_sums=sums)
            total += 1.0 / lam_k
        sums[k - 1] = total
    return RegularityReport(K, total, False, partial_sums=sums)


def _regularity_dbd(rates: DBDRates, K: int, a0: int) -> RegularityReport:
    # the series starts at k = 0; term number n corresponds to k = n - 1
    lam = np.empty(K)
    mu = np.empty(K)
    for k in range(K):
        a = np.arange(0, min(k, a0) + 1)
        b = k - a
        lam[k] = float(np.max(rates.lambda2(a, b)))
        mu[k] = float(np.min(rates.mu1(a, b) + rates.mu2(a, b)))
    sums = np.empty(K)
    log_sigma = 0.0
    sigma_cum = 0.0
    total = 0.0
    for k in range(K):
        if k > 0:
            if mu[k] == 0.0:
                sums[k:] = np.inf
                return RegularityReport(K, math.inf, True, k + 1, partial_sums=sums)
            if lam[k - 1] == 0.0:
                log_sigma = -math.inf
            else:
                log_sigma += math.log(lam[k - 1]) - math.log(mu[k])
        if lam[k] == 0.0 or log_sigma == -math.inf:
            # lambda_k sigma_k = 0: this term is infinite
            sums[k:] = np.inf
            return RegularityReport(K, math.inf, True, k + 1, partial_sums=sums)
        if log_sigma > 700.0:
            sums[k:] = total
            return RegularityReport(K, total, False, None, True, sums)
        sigma = math.exp(log_sigma)
        sigma_cum += sigma
        total += sigma_cum / (lam[k] * sigma)
        sums[k] = total
    return RegularityReport(K, total, False, partial_sums=sums)


def _sir_rhs(params: dict, y: np.ndarray) -> np.ndarray:
    s, i, _ = y
    inf = params["beta"] * s * i
    rem = params["alpha"] * i
    return np.array([-inf, inf - rem, rem])


def _parasite_rhs(params: dict, y: np.ndarray) -> np.ndarray:
    larvae, mature = y
    dl = -params["muL"] * larvae - params["eta"] * larvae ** 2 - params["gamma"] * larvae
    dm = params["gamma"] * larvae - params["muM"] * mature
    return np.array([dl, dm])


_ODE_MODELS = {
    "sir": (_sir_rhs, ("alpha", "beta"), 3),
    "parasite": (_parasite_rhs, ("muL", "muM", "eta", "gamma"), 2),
}


def ode_trajectory(model: str, params: dict, initial_state, t_grid) -> np.ndarray:
    """Integrate the deterministic counterpart of a model with classical RK4.

    ``model`` is ``"sir"`` (state ``S, I, R``) or ``"parasite"`` (state
    ``L, M``).  The step size is 1/100 of each ``t_grid`` spacing.  Returns
    an array of shape ``(len(t_grid), n_state)``.
    """
    if model not in _ODE_MODELS:
        raise ValueError(f"unknown model {model!r}")
    rhs, needed, dim = _ODE_MODELS[model]
    missing = [p for p in needed if p not in params]
    if missing:
        raise ValueError(f"missing parameters: {missing}")
    y = np.asarray(initial_state, dtype=float)
    if y.shape != (dim,):
        raise ValueError(f"initial_state must have {dim} components")
    if np.any(y < 0):
        raise ValueError("initial state must be non-negative")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must start at 0 and be strictly increasing")

    out = np.empty((t_grid.size, dim))
    out[0] = y
    for n in range(1, t_grid.size):
        h = (t_grid[n] - t_grid[n - 1]) / 100.0
        for _ in range(100):
            k1 = rhs(params, y)
            k2 = rhs(params, y + 0.5 * h * k1)
            k3 = rhs(params, y + 0.5 * h * k2)
            k4 = rhs(params, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[n] = y
    return out
