"""Likelihoods of discretely observed SIR data and random-walk Metropolis.

The log-likelihood of counts ``(S_k, I_k)`` observed at times ``t_k`` is the
sum over consecutive records of ``log P[(S_{k+1}, I_{k+1}) | (S_k, I_k)]``
at the elapsed time.  Two engines supply the transition probabilities: the
continued-fraction solver on the exact SIR process (``"cf"``) and the closed
form of the branching approximation (``"branching"``).
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from .branching import branching_trans_prob
from .models import SirParams, sir_rates
from .solver import ProbRequest, SolverError, dbd_prob

log = logging.getLogger(__name__)

__all__ = [
    "ObservationSeries",
    "LikelihoodError",
    "McmcError",
    "McmcChain",
    "PosteriorSummary",
    "ENGINES",
    "PRIOR_SD",
    "LOG_FLOOR",
    "interval_log_probs",
    "log_likelihood",
    "log_prior",
    "log_posterior",
    "rwm_sample",
    "tune_proposal",
    "summarize",
]

ENGINES = ("cf", "branching")
PRIOR_SD = 100.0
# probabilities that underflow (or come out as roundoff below zero) for a
# possible transition are floored here so one interval cannot veto a state
LOG_FLOOR = -700.0


class LikelihoodError(ArithmeticError):
    def __init__(self, interval: int, cause: Exception):
        super().__init__(f"interval {interval}: {cause}")
        self.interval = interval


class McmcError(RuntimeError):
    def __init__(self, message: str, chain: "McmcChain | None" = None):
        super().__init__(message)
        self.chain = chain


@dataclass(frozen=True)
class ObservationSeries:
    """Counts ``S``, ``I`` observed at strictly increasing ``times`` (months)."""

    times: np.ndarray
    S: np.ndarray
    I: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.S, dtype=np.int64)
        i = np.asarray(self.I, dtype=np.int64)
        if not (t.ndim == s.ndim == i.ndim == 1 and t.size == s.size == i.size):
            raise ValueError("times, S and I must be 1-D and of equal length")
        if t.size == 0:
            raise ValueError("need at least one record")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(s < 0) or np.any(i < 0):
            raise ValueError("counts must be non-negative")
        if np.any(np.diff(s) > 0):
            raise ValueError("S must be non-increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "S", s)
        object.__setattr__(self, "I", i)

    def __len__(self):
        return self.times.size

    @property
    def n_total(self) -> int:
        return int(self.S[0] + self.I[0])

    def intervals(self):
        """``(k, dt, (s0, i0), (s1, i1))`` for consecutive records."""
        for k in range(len(self) - 1):
            yield (k, float(self.times[k + 1] - self.times[k]),
                   (int(self.S[k]), int(self.I[k])), (int(self.S[k + 1]), int(self.I[k + 1])))

    @classmethod
    def from_csv(cls, path) -> "ObservationSeries":
        with open(path, newline="") as fh:
            return cls._from_rows(csv.DictReader(fh), str(path))

    @classmethod
    def _from_rows(cls, reader, source: str) -> "ObservationSeries":
        if reader.fieldnames is None or not {"time", "S", "I"} <= set(reader.fieldnames):
            raise ValueError(f"{source}: header must contain time,S,I")
        rows = list(reader)
        try:
            t = [float(r["time"]) for r in rows]
            s = [int(r["S"]) for r in rows]
            i = [int(r["I"]) for r in rows]
        except ValueError as exc:
            raise ValueError(f"{source}: {exc}") from None
        return cls(np.array(t), np.array(s), np.array(i))

    @classmethod
    def eyam(cls) -> "ObservationSeries":
        """The 1666 Eyam plague counts (Raggett's reconstruction), time in months."""
        with resources.files("bivbd").joinpath("data/eyam.csv").open(newline="") as fh:
            return cls._from_rows(csv.DictReader(fh), "eyam.csv")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "S", "I"])
            for t, s, i in zip(self.times, self.S, self.I):
                w.writerow([repr(float(t)), int(s), int(i)])


def _cf_prob(alpha, beta, dt, start, end, B, n_total, req_kw):
    s0, i0 = start
    s1, i1 = end
    # infecteds can only come from the s0 - s1 infections in the interval
    B_need = i0 + s0 - s1
    B = B_need if B is None else max(int(B), i0)
    if i1 > B:
        return 0.0
    rates = sir_rates(SirParams(alpha, beta, n_total))
    req = ProbRequest(t=dt, a0=s0, b0=i0, A=s1, B=B, **req_kw)
    tm = dbd_prob(req, rates, last_row_only=True, focus_b=i1)
    if not tm.converged:
        log.warning("inversion unsettled for %s -> %s over %g", start, end, dt)
    return tm.prob(s1, i1)


def _possible(start, end) -> bool:
    s0, i0 = start
    s1, i1 = end
    return s1 <= s0 and s1 + i1 <= s0 + i0


def interval_log_probs(alpha: float, beta: float, obs: ObservationSeries, engine: str = "cf",
                       B: int | None = None, **req_kw) -> tuple[np.ndarray, int]:
    """Per-interval log transition probabilities and the number of floored ones.

    Impossible transitions (``S`` rising, or ``S + I`` rising) give ``-inf``.
    A computed probability ``<= e^LOG_FLOOR`` for a possible transition is
    floored at ``LOG_FLOOR``.  ``B`` bounds the infected count for the
    continued-fraction engine; by default the exact bound ``I_k + S_k - S_{k+1}``
    is used per interval.  Extra keyword arguments go to :class:`ProbRequest`.
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    out = np.zeros(len(obs) - 1)
    floored = 0
    for k, dt, start, end in obs.intervals():
        if not _possible(start, end):
            out[k] = -math.inf
            continue
        try:
            if engine == "cf":
                p = _cf_prob(alpha, beta, dt, start, end, B, obs.n_total, req_kw)
            else:
                p = branching_trans_prob(start[0], start[1], end[0], end[1], dt, alpha, beta)
        except (SolverError, ArithmeticError, ValueError) as exc:
            raise LikelihoodError(k, exc) from exc
        if not p > math.exp(LOG_FLOOR):
            floored += 1
            out[k] = LOG_FLOOR
        else:
            out[k] = math.log(p)
    return out, floored


def log_likelihood(alpha: float, beta: float, obs: ObservationSeries, engine: str = "cf",
                   B: int | None = None, **req_kw) -> float:
    """Sum of log transition probabilities between consecutive records."""
    vals, _ = interval_log_probs(alpha, beta, obs, engine, B, **req_kw)
    return float(np.sum(vals))


def log_prior(log_alpha: float, log_beta: float, sd: float = PRIOR_SD) -> float:
    """Independent ``Normal(0, sd)`` densities on the log parameters."""
    c = -math.log(sd) - 0.5 * math.log(2 * math.pi)
    return 2 * c - (log_alpha ** 2 + log_beta ** 2) / (2 * sd * sd)


def log_posterior(log_alpha: float, log_beta: float, obs: ObservationSeries,
                  engine: str = "cf", **kw) -> float:
    """Unnormalized log posterior on the log scale."""
    return log_prior(log_alpha, log_beta) + log_likelihood(
        math.exp(log_alpha), math.exp(log_beta), obs, engine, **kw)


@dataclass
class McmcChain:
    """Draws (one row per iteration, after the initial state) and their log densities."""

    draws: np.ndarray
    log_density: np.ndarray
    accepted: int
    proposal_scale: np.ndarray
    seed: int
    burn_in: int = 0
    names: tuple[str, ...] = ("log_alpha", "log_beta")
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.draws.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / len(self) if len(self) else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", *self.names, "log_density"])
            for k, (row, lp) in enumerate(zip(self.draws, self.log_density)):
                w.writerow([k + 1, *(repr(float(v)) for v in row), repr(float(lp))])


def _chol(scale, d: int) -> np.ndarray:
    sc = np.asarray(scale, dtype=float)
    if sc.ndim == 0:
        if not sc > 0:
            raise ValueError("proposal scale must be positive")
        return float(sc) * np.eye(d)
    if sc.shape != (d, d):
        raise ValueError(f"proposal scale must be scalar or {d}x{d}")
    try:
        return np.linalg.cholesky(sc)
    except np.linalg.LinAlgError:
        raise ValueError("proposal covariance must be positive definite") from None


def _partial(draws, lps, it, accepted, scale, seed, x) -> McmcChain:
    return McmcChain(draws[:it].copy(), lps[:it].copy(), accepted, np.asarray(scale, dtype=float),
                     seed, meta={"last_state": x.tolist()})


def rwm_sample(target: Callable[[np.ndarray], float], init, n_iter: int, proposal_scale,
               seed: int) -> McmcChain:
    """Random-walk Metropolis with Gaussian proposals.

    ``proposal_scale`` is a standard deviation (scalar, isotropic) or a
    covariance matrix.  A ``-inf`` target is a certain rejection.  A NaN
    target, or an exception inside it, raises :class:`McmcError` carrying the
    chain up to the last valid state.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    x = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    d = x.size
    L = _chol(proposal_scale, d)
    rng = np.random.default_rng(seed)
    lp = float(target(x))
    if math.isnan(lp) or lp == -math.inf:
        raise McmcError(f"target is {lp} at the initial state {x.tolist()}")
    draws = np.empty((n_iter, d))
    lps = np.empty(n_iter)
    accepted = 0
    for it in range(n_iter):
        y = x + L @ rng.standard_normal(d)
        u = rng.random()
        try:
            lq = float(target(y))
        except Exception as exc:
            raise McmcError(f"target failed at {y.tolist()} (iteration {it + 1}): {exc}",
                            _partial(draws, lps, it, accepted, proposal_scale, seed, x)) from exc
        if math.isnan(lq):
            raise McmcError(f"target returned NaN at {y.tolist()} (iteration {it + 1})",
                            _partial(draws, lps, it, accepted, proposal_scale, seed, x))
        if math.log(u) < lq - lp:
            x, lp = y, lq
            accepted += 1
        draws[it] = x
        lps[it] = lp
    return McmcChain(draws, lps, accepted, np.asarray(proposal_scale, dtype=float), seed)


def tune_proposal(target, init, seed: int, scale: float = 0.1, pilot: int = 2000,
                  window: tuple[float, float] = (0.2, 0.4), batch: int = 250) -> tuple[float, np.ndarray]:
    """Isotropic proposal scale giving an acceptance rate inside ``window``.

    Runs ``pilot`` iterations in batches, rescaling after each batch that
    misses the window.  Returns the scale and the last pilot state.
    """
    x = np.asarray(init, dtype=float)
    done = 0
    k = 0
    while done < pilot:
        n = min(batch, pilot - done)
        ch = rwm_sample(target, x, n, scale, seed + 7919 * (k + 1))
        x = ch.draws[-1]
        rate = ch.acceptance_rate
        if rate < window[0]:
            scale *= max(0.3, rate / 0.3)
        elif rate > window[1]:
            scale *= min(3.0, rate / 0.3)
        done += n
        k += 1
    return scale, x


@dataclass(frozen=True)
class PosteriorSummary:
    """Means and central 95% intervals on the natural scale, plus ``R0 = beta N / alpha``."""

    stats: dict
    n_draws: int
    n_total_population: int
    corr_log: float

    def __getitem__(self, name: str) -> dict:
        return self.stats[name]

    def to_dict(self) -> dict:
        return {
            "params": [{"param": k, **v} for k, v in self.stats.items()],
            "n_draws": self.n_draws,
            "n_total_population": self.n_total_population,
            "corr_log_alpha_log_beta": self.corr_log,
        }

    def to_json(self, path, extra: dict | None = None) -> None:
        out = self.to_dict()
        if extra:
            out.update(extra)
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2)


def _stats(x: np.ndarray) -> dict:
    q025, q975 = np.quantile(x, [0.025, 0.975])
    return {"mean": float(np.mean(x)), "q025": float(q025), "q975": float(q975)}


def summarize(chain: McmcChain, burn_in: int, n_total_population: int) -> PosteriorSummary:
    """Posterior summary of the draws after ``burn_in``."""
    if not 0 <= burn_in < len(chain):
        raise ValueError("burn_in must be smaller than the chain length")
    kept = chain.draws[burn_in:]
    alpha = np.exp(kept[:, 0])
    beta = np.exp(kept[:, 1])
    r0 = beta * n_total_population / alpha
    if np.ptp(kept[:, 0]) > 0 and np.ptp(kept[:, 1]) > 0:
        corr = float(np.corrcoef(kept[:, 0], kept[:, 1])[0, 1])
    else:
        corr = 0.0
    return PosteriorSummary({"alpha": _stats(alpha), "beta": _stats(beta), "R0": _stats(r0)},
                            kept.shape[0], int(n_total_population), corr)
