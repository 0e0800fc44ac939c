"""Two-type branching approximation to the SIR model.

Over an interval of length ``t`` the infection rate ``beta * X2 * X1`` is
replaced by ``beta * n * X1`` with ``n = X2(0)`` frozen, so susceptibles
and infecteds evolve independently.  One susceptible has PGF

    phi1(t, s1, s2) = p1 s1 + c s2 + c0,   p1 = e^{-beta n t},
    c = beta n (e^{-alpha t} - e^{-beta n t}) / (beta n - alpha),
    c0 = 1 - p1 - c,

and one infected ``phi2(t, s2) = 1 + (s2 - 1) e^{-alpha t}``.  The transition
probability ``(m, n) -> (k, l)`` is the ``s1^k s2^l`` coefficient of
``phi1^m phi2^n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

__all__ = [
    "BranchingParams",
    "pgf_phi1",
    "pgf_phi2",
    "branching_weights",
    "branching_trans_prob",
    "branching_matrix",
    "pgf_coefficients",
]

DEGENERATE_RTOL = 1e-8


@dataclass(frozen=True)
class BranchingParams:
    alpha: float
    beta: float
    i0: int

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.i0 < 0:
            raise ValueError("i0 must be non-negative")


def _transfer(t: float, alpha: float, rate: float) -> float:
    """``rate (e^{-alpha t} - e^{-rate t}) / (rate - alpha)`` with its limit at ``rate = alpha``."""
    d = rate - alpha
    if abs(d) < DEGENERATE_RTOL * alpha:
        return rate * t * math.exp(-alpha * t)
    # e^{-alpha t} (1 - e^{-d t}) / d without cancellation
    return rate * math.exp(-alpha * t) * (-math.expm1(-d * t)) / d


def branching_weights(t: float, alpha: float, beta: float, i0: int) -> tuple[float, float, float, float]:
    """``(p1, c, c0, q)``: susceptible stays / becomes infected and is still
    infected / is gone, and the survival probability ``q = e^{-alpha t}`` of
    an initial infected."""
    if t < 0:
        raise ValueError("t must be non-negative")
    rate = beta * i0
    p1 = math.exp(-rate * t)
    c = _transfer(t, alpha, rate) if rate > 0 else 0.0
    c0 = max(-math.expm1(-rate * t) - c, 0.0)
    return p1, c, c0, math.exp(-alpha * t)


def pgf_phi2(t: float, s2, alpha: float):
    """PGF of the infected count descending from one infected (a pure death process)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return 1.0 + (np.asarray(s2) - 1.0) * math.exp(-alpha * t)


def pgf_phi1(t: float, s1, s2, alpha: float, beta: float, i0: int):
    """PGF of (susceptible, infected) counts descending from one susceptible."""
    p1, c, c0, _ = branching_weights(t, alpha, beta, i0)
    return p1 * np.asarray(s1) + c * np.asarray(s2) + c0


def _log_terms(m, n, k, l, t, alpha, beta):
    """Log of the ``i``-th summand (``i`` infecteds surviving from the start), ``-inf`` off support."""
    p1, c, c0, q = branching_weights(t, alpha, beta, n)
    i = np.arange(0, min(n, l) + 1)
    j = l - i  # infecteds descending from susceptibles
    ok = j <= m - k
    i, j = i[ok], j[ok]
    r = m - k - j
    with np.errstate(divide="ignore"):
        la = (gammaln(m + 1) - gammaln(k + 1) - gammaln(j + 1) - gammaln(r + 1)
              + xlogy(k, p1) + xlogy(j, c) + xlogy(r, c0))
        lb = (gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
              + xlogy(i, q) + xlogy(n - i, -math.expm1(-alpha * t)))
    return la + lb


def branching_trans_prob(m: int, n: int, k: int, l: int, t: float, alpha: float, beta: float) -> float:
    """``P[(X1, X2)(t) = (k, l) | (X1, X2)(0) = (m, n)]`` under the branching approximation."""
    if min(m, n, k, l) < 0:
        raise ValueError("counts must be non-negative")
    if not t > 0:
        raise ValueError("t must be positive")
    if not alpha > 0 or beta < 0:
        raise ValueError("need alpha > 0 and beta >= 0")
    if k > m or l > n + m - k:
        return 0.0
    if n == 0:
        return float(k == m and l == 0)
    lt = _log_terms(m, n, k, l, t, alpha, beta)
    if lt.size == 0 or not np.any(np.isfinite(lt)):
        return 0.0
    top = np.max(lt)
    p = float(np.exp(top) * np.sum(np.exp(lt - top)))
    return min(max(p, 0.0), 1.0)


def branching_matrix(m: int, n: int, t: float, alpha: float, beta: float) -> np.ndarray:
    """All probabilities ``P[k, l]`` for ``0 <= k <= m``, ``0 <= l <= m + n``.

    Built as the coefficient array of ``phi1^m phi2^n``: a trinomial in
    ``(s1, s2)`` convolved with a binomial in ``s2``.
    """
    p1, c, c0, q = branching_weights(t, alpha, beta, n)
    k = np.arange(m + 1)[:, None]
    j = np.arange(m + 1)[None, :]
    r = m - k - j
    ok = r >= 0
    rr = np.where(ok, r, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        la = (gammaln(m + 1) - gammaln(k + 1) - gammaln(j + 1) - gammaln(rr + 1)
              + xlogy(k, p1) + xlogy(j, c) + xlogy(rr, c0))
    A = np.where(ok, np.exp(la), 0.0)
    i = np.arange(n + 1)
    with np.errstate(divide="ignore"):
        lb = (gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
              + xlogy(i, q) + xlogy(n - i, -math.expm1(-alpha * t)))
    Bv = np.exp(lb)
    out = np.zeros((m + 1, m + n + 1))
    for kk in range(m + 1):
        out[kk] = np.convolve(A[kk], Bv)
    return out


def pgf_coefficients(m: int, n: int, t: float, alpha: float, beta: float,
                     radius: float = 1.0) -> np.ndarray:
    """Coefficients of ``phi1^m phi2^n`` by a 2-D discrete Cauchy integral.

    The PGF is sampled on circles of the given radius with ``m + 1`` and
    ``m + n + 1`` nodes (the exact degrees, so nothing aliases) and
    transformed with an FFT.  Independent of the closed-form sums; radius
    below 1 amplifies roundoff by ``radius^{-(k + l)}`` and only suits small
    ``m + n``.
    """
    n1, n2 = m + 1, m + n + 1
    w1 = radius * np.exp(2j * np.pi * np.arange(n1) / n1)
    w2 = radius * np.exp(2j * np.pi * np.arange(n2) / n2)
    S1, S2 = np.meshgrid(w1, w2, indexing="ij")
    vals = pgf_phi1(t, S1, S2, alpha, beta, n) ** m * pgf_phi2(t, S2, alpha) ** n
    coef = np.fft.fft2(vals) / (n1 * n2)
    scale = radius ** (np.arange(n1)[:, None] + np.arange(n2)[None, :])
    return (coef / scale).real
