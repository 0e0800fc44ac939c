"""Independent ground truth for the solver.

* exact event-by-event simulation (a reference Python path sampler and a
  JIT-compiled replicate loop over tabulated rates),
* uniformization of the generator on a bounded rectangle,
* the analytic law of the monomolecular reaction system A <-> B -> *.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.signal import convolve2d
from numba import njit, prange
from scipy.special import gammaln, xlogy
from scipy.stats import norm, poisson

from .models import BBDRates, DBDRates
from .solver import TransitionMatrix

__all__ = [
    "SimConfig",
    "EmpiricalMatrix",
    "SimulationError",
    "StateSpaceTooLarge",
    "simulate_path",
    "mc_transition_matrix",
    "generator_matrix",
    "uniformized_expm",
    "matexp_prob",
    "monomolecular_analytic",
    "two_state_expm",
    "wald_interval",
    "wilson_interval",
    "replicate_seeds",
]

MAX_EVENTS = 10_000_000
MAX_STATES = 20_000


class SimulationError(RuntimeError):
    pass


class StateSpaceTooLarge(ValueError):
    pass


def _moves(rates):
    """Event names and (da, db) jumps for a rate bundle."""
    if isinstance(rates, BBDRates):
        return (("lambda1", 1, 0), ("lambda2", 0, 1), ("mu2", 0, -1), ("gamma", 1, -1))
    if isinstance(rates, DBDRates):
        return (("mu1", -1, 0), ("lambda2", 0, 1), ("mu2", 0, -1), ("gamma", -1, 1))
    raise TypeError("rates must be BBDRates or DBDRates")


def simulate_path(rates, initial, t_end: float, rng: np.random.Generator,
                  max_events: int = MAX_EVENTS) -> tuple[int, int]:
    """Final state at ``t_end`` of one exactly simulated path.

    Holding times are exponential at the total exit rate and the event is
    chosen in proportion to the four rates.
    """
    moves = _moves(rates)
    a, b = int(initial[0]), int(initial[1])
    t = 0.0
    for _ in range(max_events):
        w = np.array([rates.rate(name, a, b) for name, _, _ in moves])
        total = w.sum()
        if total <= 0:
            return a, b
        t += rng.exponential(1.0 / total)
        if t > t_end:
            return a, b
        i = rng.choice(4, p=w / total)
        a += moves[i][1]
        b += moves[i][2]
    raise SimulationError(f"more than {max_events} events before t={t_end}")


@dataclass(frozen=True)
class SimConfig:
    """Replicate ``i`` draws from its own stream, seeded by :func:`replicate_seeds`."""

    n_replicates: int
    rng_seed: int = 0
    max_events: int = MAX_EVENTS

    def __post_init__(self):
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")


def replicate_seeds(master: int, n: int, start: int = 0) -> np.ndarray:
    """Seeds ``splitmix64(splitmix64(master) + i)`` for replicates ``i = start..start+n-1``.

    Returned as 31-bit integers accepted by the JIT generator.  Replicate
    ``i`` gets the same seed however the batch is split or scheduled.
    """
    def mix(x):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    with np.errstate(over="ignore"):
        base = mix(np.array([master % 2**64], dtype=np.uint64))[0]
        z = mix(base + np.arange(start, start + n, dtype=np.uint64))
    return (z >> np.uint64(33)).astype(np.int64)


@njit(cache=True, parallel=True)
def _ssa_batch(table, a_lo, da, db, a0, b0, times, seeds, max_events, out_a, out_b, status):
    """Simulate one path per entry of ``seeds`` over tabulated rates ``table[4, n_a, n_b]``.

    ``out_a[i, j]``/``out_b[i, j]`` receive the state of replicate ``i`` at
    ``times[j]``.  ``status[i]`` is 0 (ok), 1 (left the table), 2 (too many events).
    """
    n_a = table.shape[1]
    n_b = table.shape[2]
    n_t = times.shape[0]
    for i in prange(seeds.shape[0]):
        np.random.seed(seeds[i])
        a = a0
        b = b0
        t = 0.0
        j = 0
        n_ev = 0
        st = 0
        while j < n_t:
            ia = a - a_lo
            if ia < 0 or ia >= n_a or b < 0 or b >= n_b:
                st = 1
                break
            w0 = table[0, ia, b]
            w1 = table[1, ia, b]
            w2 = table[2, ia, b]
            w3 = table[3, ia, b]
            tot = w0 + w1 + w2 + w3
            if tot <= 0.0:
                t_next = np.inf
            else:
                t_next = t - math.log(1.0 - np.random.random()) / tot
            while j < n_t and times[j] < t_next:
                out_a[i, j] = a
                out_b[i, j] = b
                j += 1
            if j >= n_t:
                break
            u = np.random.random() * tot
            if u < w0:
                e = 0
            elif u < w0 + w1:
                e = 1
            elif u < w0 + w1 + w2:
                e = 2
            else:
                e = 3
            a += da[e]
            b += db[e]
            t = t_next
            n_ev += 1
            if n_ev > max_events:
                st = 2
                break
        status[i] = st


def wald_interval(p, n: int, z: float, widen: float = 1.0):
    """Plain normal-approximation interval ``p +- z sqrt(p (1 - p) / n)``."""
    p = np.asarray(p, dtype=float)
    half = z * widen * np.sqrt(p * (1 - p) / n)
    return np.clip(p - half, 0.0, 1.0), np.clip(p + half, 0.0, 1.0)


def wilson_interval(p, n: int, z: float, widen: float = 1.0):
    """Wilson score interval for a binomial proportion (normal approximation).

    Unlike the plain Wald interval it does not collapse to ``{0}`` when a
    cell was never hit.  ``widen`` scales ``z``.
    """
    z = z * widen
    p = np.asarray(p, dtype=float)
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4.0 * n * n)) / denom
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)


_INTERVALS = {"wilson": wilson_interval, "wald": wald_interval}


@dataclass
class EmpiricalMatrix:
    """Monte Carlo transition frequencies with 95% binomial intervals.

    ``ci_method`` is ``"wilson"`` (score interval, the default) or ``"wald"``.
    """

    counts: np.ndarray
    a_values: np.ndarray
    n: int
    t: float
    z: float = float(norm.ppf(0.975))
    settings: dict = field(default_factory=dict)
    ci_method: str = "wilson"

    def __post_init__(self):
        if self.ci_method not in _INTERVALS:
            raise ValueError(f"unknown ci_method {self.ci_method!r}")

    @property
    def estimate(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def ci(self) -> tuple[np.ndarray, np.ndarray]:
        return _INTERVALS[self.ci_method](self.estimate, self.n, self.z)

    def _index(self, a: int, b: int):
        i = int(a) - int(self.a_values[0])
        if 0 <= i < self.counts.shape[0] and 0 <= b < self.counts.shape[1]:
            return i
        return None

    def prob(self, a: int, b: int) -> float:
        i = self._index(a, b)
        return 0.0 if i is None else float(self.estimate[i, b])

    def interval(self, a: int, b: int, widen: float = 1.0) -> tuple[float, float]:
        """CI of one cell; states outside the tabulated box were never reachable."""
        i = self._index(a, b)
        if i is None:
            return 0.0, 0.0
        lo, hi = _INTERVALS[self.ci_method](self.estimate[i, b], self.n, self.z, widen)
        return float(lo), float(hi)

    def to_csv(self, path) -> None:
        lo, hi = self.ci
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b", "prob", "ci_low", "ci_high", "count"])
            for i, a in enumerate(self.a_values):
                for b in range(self.counts.shape[1]):
                    w.writerow([int(a), b, repr(float(self.estimate[i, b])),
                                repr(float(lo[i, b])), repr(float(hi[i, b])), int(self.counts[i, b])])


def _table(rates, a_range, b_max):
    a_vals = np.arange(a_range[0], a_range[1] + 1)
    tab = rates.tabulate(a_vals, np.arange(b_max + 1))
    moves = _moves(rates)
    table = np.stack([tab[name] for name, _, _ in moves])
    da = np.array([m[1] for m in moves], dtype=np.int64)
    db = np.array([m[2] for m in moves], dtype=np.int64)
    return np.ascontiguousarray(table), da, db


def mc_transition_matrix(rates, initial, t, config: SimConfig, a_range=None, b_max=None,
                         ci_method: str = "wilson"):
    """Empirical transition matrix from ``config.n_replicates`` exact simulations.

    ``t`` may be a scalar or a sequence of times (one path per replicate is
    recorded at every time; a list of matrices is returned then).  Rates are
    tabulated on ``a_range x 0..b_max``; these default to the reachable box of
    a process whose type-1 count is monotone and whose type-2 count cannot
    exceed ``a0 + b0`` (true for SIR-like models).  A replicate leaving the box
    raises :class:`SimulationError`.  ``ci_method`` is passed on to
    :class:`EmpiricalMatrix`.
    """
    a0, b0 = int(initial[0]), int(initial[1])
    if a_range is None:
        a_range = (0, a0) if isinstance(rates, DBDRates) else (a0, a0 + b0)
    if b_max is None:
        b_max = a0 + b0
    table, da, db = _table(rates, a_range, b_max)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be non-negative and sorted")
    n = config.n_replicates
    out_a = np.zeros((n, times.size), dtype=np.int64)
    out_b = np.zeros((n, times.size), dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    _ssa_batch(table, a_range[0], da, db, a0, b0, times, replicate_seeds(config.rng_seed, n),
               config.max_events, out_a, out_b, status)
    if np.any(status == 2):
        raise SimulationError(f"replicate {int(np.argmax(status == 2))} exceeded {config.max_events} events")
    if np.any(status == 1):
        raise SimulationError(f"replicate {int(np.argmax(status == 1))} left the tabulated box "
                              f"{a_range} x [0, {b_max}]")
    n_a = a_range[1] - a_range[0] + 1
    mats = []
    for j, tj in enumerate(times):
        counts = np.zeros((n_a, b_max + 1), dtype=np.int64)
        np.add.at(counts, (out_a[:, j] - a_range[0], out_b[:, j]), 1)
        mats.append(EmpiricalMatrix(counts, np.arange(a_range[0], a_range[1] + 1), n, float(tj),
                                    settings={"seed": config.rng_seed, "n": n, "start": [a0, b0]},
                                    ci_method=ci_method))
    return mats[0] if np.ndim(t) == 0 else mats


def generator_matrix(rates, a_range, b_max, edges: str = "block"):
    """Sparse generator on ``[a_lo, a_hi] x [0, b_max]``.

    With ``edges="block"`` moves leaving the box are suppressed, so rows sum
    to zero.  With ``edges="kill"`` they still drain the state, so mass that
    leaves is lost (rows of a sub-generator).  State ``(a, b)`` has index
    ``(a - a_lo) * (b_max + 1) + b``.
    """
    if edges not in ("block", "kill"):
        raise ValueError("edges must be 'block' or 'kill'")
    a_lo, a_hi = a_range
    n_a = a_hi - a_lo + 1
    n_b = b_max + 1
    n = n_a * n_b
    if n > MAX_STATES:
        raise StateSpaceTooLarge(f"{n} states exceed {MAX_STATES}; use the continued-fraction solver")
    a_vals = np.arange(a_lo, a_hi + 1)
    tab = rates.tabulate(a_vals, np.arange(n_b))
    rows, cols, data = [], [], []
    drain = np.zeros(n)
    aa, bb = np.meshgrid(np.arange(n_a), np.arange(n_b), indexing="ij")
    idx = aa * n_b + bb
    for name, da, db in _moves(rates):
        w = tab[name]
        na, nb = aa + da, bb + db
        inside = (na >= 0) & (na < n_a) & (nb >= 0) & (nb < n_b)
        ok = inside & (w > 0)
        if edges == "kill":
            drain += np.where(inside, 0.0, w).ravel()
        rows.append(idx[ok])
        cols.append((na * n_b + nb)[ok])
        data.append(w[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)
    Q = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    out = np.asarray(Q.sum(axis=1)).ravel() + drain
    Q = Q - sp.diags(out)
    return Q.tocsr()


def uniformized_expm(Q, t: float, v0=None, tol: float = 1e-12):
    """``v0 exp(Q t)`` (or the full ``exp(Q t)`` when ``v0`` is None) by uniformization.

    ``exp(Qt) = sum_n Pois(n; L t) U^n`` with ``U = I + Q / L`` and ``L`` the
    largest exit rate.  The Poisson series is cut where its remaining mass is
    below ``tol``.
    """
    Q = sp.csr_matrix(Q)
    n = Q.shape[0]
    v = np.eye(n) if v0 is None else np.asarray(v0, dtype=float).copy()
    lam = float(np.max(-Q.diagonal())) if n else 0.0
    if lam == 0.0 or t == 0.0:
        return v
    U = (sp.identity(n, format="csr") + Q / lam).tocsr()
    mu = lam * t
    n_hi = int(poisson.isf(tol, mu)) + 1
    log_w = np.arange(n_hi + 1) * math.log(mu) - mu - gammaln(np.arange(n_hi + 1) + 1)
    w = np.exp(log_w)
    UT = U.T.tocsr()
    acc = w[0] * v
    cur = v
    for k in range(1, n_hi + 1):
        cur = (UT @ cur.T).T if cur.ndim == 2 else UT @ cur
        if w[k] > 0:
            acc = acc + w[k] * cur
    return acc


def matexp_prob(rates, state_bounds, t: float, initial=None, tol: float = 1e-12,
                edges: str = "block"):
    """Transition probabilities by uniformization on a bounded rectangle.

    ``state_bounds = (a_lo, a_hi, b_max)``; ``edges`` as in
    :func:`generator_matrix`.  With ``initial=(a0, b0)`` a
    :class:`TransitionMatrix` of the distribution at ``t`` is returned;
    without it the full dense matrix ``exp(Qt)`` is returned.
    """
    a_lo, a_hi, b_max = state_bounds
    Q = generator_matrix(rates, (a_lo, a_hi), b_max, edges)
    n_b = b_max + 1
    if initial is None:
        return uniformized_expm(Q, t, tol=tol)
    a0, b0 = initial
    v0 = np.zeros(Q.shape[0])
    v0[(a0 - a_lo) * n_b + b0] = 1.0
    p = uniformized_expm(Q, t, v0, tol=tol)
    return TransitionMatrix(values=p.reshape(a_hi - a_lo + 1, n_b),
                            a_values=np.arange(a_lo, a_hi + 1), t=t, start=(a0, b0),
                            settings={"method": "uniformization", "bounds": list(state_bounds)})


def two_state_expm(Q, t: float) -> np.ndarray:
    """Closed-form ``exp(Q t)`` of a 2x2 matrix with real eigenvalues."""
    Q = np.asarray(Q, dtype=float)
    tr = Q[0, 0] + Q[1, 1]
    det = Q[0, 0] * Q[1, 1] - Q[0, 1] * Q[1, 0]
    half = tr / 2.0
    disc = half * half - det
    if disc < 0:
        raise ValueError("complex eigenvalues")
    d = math.sqrt(disc)
    ch = math.cosh(d * t)
    sh_over = t if d * t < 1e-8 else math.sinh(d * t) / d
    return math.exp(half * t) * (ch * np.eye(2) + sh_over * (Q - half * np.eye(2)))


def _multinomial_table(n: int, p) -> np.ndarray:
    """``P(N_A = i, N_B = j)`` for a multinomial with categories (A, B, gone)."""
    pa, pb = float(p[0]), float(p[1])
    pc = max(1.0 - pa - pb, 0.0)
    out = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        j = np.arange(n + 1 - i)
        k = n - i - j
        lw = gammaln(n + 1) - gammaln(i + 1) - gammaln(j + 1) - gammaln(k + 1)
        with np.errstate(divide="ignore"):
            terms = lw + xlogy(i, pa) + xlogy(j, pb) + xlogy(k, pc)
        out[i, :n + 1 - i] = np.exp(terms)
    return out


def monomolecular_analytic(r_ab, r_ba, o_b, a0: int, b0: int, t: float) -> TransitionMatrix:
    """Exact law of (outflow count L, A count) at ``t`` starting from ``a0`` A's and ``b0`` B's.

    Each molecule moves independently by the 2x2 sub-generator, so the
    ``(N_A, N_B)`` law is a convolution of two multinomials; ``L`` is what has
    left, ``a0 + b0 - N_A - N_B``.
    """
    Q = np.array([[-r_ab, r_ba], [r_ab, -r_ba - o_b]], dtype=float)
    E = two_state_expm(Q, t)
    pa = E[:, 0]
    pb = E[:, 1]
    n = a0 + b0
    joint = convolve2d(_multinomial_table(a0, pa), _multinomial_table(b0, pb))  # [N_A, N_B]
    P = np.zeros((n + 1, n + 1))  # [L, A]
    for na in range(n + 1):
        for nb in range(n + 1 - na):
            P[n - na - nb, na] += joint[na, nb]
    return TransitionMatrix(values=P, a_values=np.arange(n + 1), t=t, start=(0, a0),
                            settings={"method": "analytic"})
