"""Transition probabilities of BBD and DBD processes.

Rows of Laplace transforms are built in increasing type-1 count: the first
row is the Green's function column of the initial type-2 count, and each
later row solves its truncated tridiagonal system with input
``lambda1_{a-1,m} f_{a-1,m} + gamma_{a-1,m+1} f_{a-1,m+1}``.  Every grid point
``s_k`` is independent, so the grid is processed in blocks until the
accelerated inversion sums settle.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .inversion import (AcceleratorState, LaplaceGrid, _partial_sums, levin_mask, make_grid, series_terms,
                        sum_series)
from .models import BBDRates, DBDRates

log = logging.getLogger(__name__)

__all__ = [
    "ProbRequest",
    "TransitionMatrix",
    "SolverError",
    "TruncationError",
    "bbd_prob",
    "dbd_prob",
    "bbd_transform",
    "auto_truncate",
]

PROB_EPS = 1e-9
TAIL_WARN = 1e-6


class SolverError(ArithmeticError):
    pass


class TruncationError(SolverError):
    pass


@dataclass(frozen=True)
class ProbRequest:
    """What to compute.

    For a BBD request rows run ``a0..A`` (``A >= a0``); for a DBD request
    rows run ``A..a0`` (``A <= a0``).  ``B`` bounds the type-2 count.
    ``row_method`` selects how each row system is solved: ``"elimination"``
    (linear in ``B``) or ``"green"`` (the explicit Green's function sum,
    quadratic in ``B``).
    """

    t: float
    a0: int
    b0: int
    A: int
    B: int
    cf_tol: float = 1e-12
    inv_tol: float = 1e-12
    accel: AcceleratorState = field(default_factory=AcceleratorState)
    k_max: int = 400
    threads: int | None = None
    row_method: str = "elimination"

    def __post_init__(self):
        if self.row_method not in ("elimination", "green"):
            raise ValueError("row_method must be 'elimination' or 'green'")
        if not self.t > 0:
            raise ValueError("t must be positive")
        if min(self.a0, self.b0, self.A, self.B) < 0:
            raise ValueError("state indices must be non-negative")
        if self.b0 > self.B:
            raise ValueError("b0 must not exceed B")

    def grid(self) -> LaplaceGrid:
        return make_grid(self.t, self.inv_tol, self.k_max)


@dataclass
class TransitionMatrix:
    """Probabilities ``values[i, b]`` for type-1 counts ``a_values[i]`` and ``b = 0..B``."""

    values: np.ndarray
    a_values: np.ndarray
    t: float
    start: tuple[int, int]
    converged: bool = True
    n_terms: int = 0
    imag_residual: float = 0.0
    warnings: list[str] = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def B(self) -> int:
        return self.values.shape[1] - 1

    @property
    def tail_mass(self) -> float:
        return float(np.sum(self.values[:, -1]))

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.values))

    def prob(self, a: int, b: int) -> float:
        idx = np.nonzero(self.a_values == a)[0]
        if idx.size == 0 or not 0 <= b <= self.B:
            return 0.0
        return float(self.values[idx[0], b])

    def clamped(self) -> np.ndarray:
        return np.clip(self.values, 0.0, 1.0)

    def as_dense(self, a_values=None, B=None) -> np.ndarray:
        """Values on another ``a_values x 0..B`` grid, zero outside this matrix."""
        a_values = self.a_values if a_values is None else np.asarray(a_values)
        B = self.B if B is None else B
        out = np.zeros((len(a_values), B + 1))
        nb = min(B, self.B) + 1
        lookup = {int(a): i for i, a in enumerate(self.a_values)}
        for i, a in enumerate(a_values):
            j = lookup.get(int(a))
            if j is not None:
                out[i, :nb] = self.values[j, :nb]
        return out

    def l1(self, other: "TransitionMatrix") -> float:
        """L1 distance on the union of both index ranges."""
        a_all = np.union1d(self.a_values, other.a_values)
        B = max(self.B, other.B)
        return float(np.sum(np.abs(self.as_dense(a_all, B) - other.as_dense(a_all, B))))

    def rows(self, clamp: bool = True):
        vals = self.clamped() if clamp else self.values
        for i, a in enumerate(self.a_values):
            for b in range(self.B + 1):
                yield int(a), b, float(vals[i, b])

    def to_csv(self, path, clamp: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b", "prob"])
            for a, b, p in self.rows(clamp):
                w.writerow([a, b, repr(p)])

    def check(self) -> list[str]:
        """Sanity checks on ranges; returns warning strings."""
        out = []
        if np.any(self.values < -PROB_EPS) or np.any(self.values > 1 + PROB_EPS):
            out.append("entries outside [0, 1] beyond roundoff")
        if self.total_mass > 1 + 1e-6:
            out.append(f"total mass {self.total_mass:.3g} exceeds 1")
        return out


def _set_threads(threads):
    if threads:
        import numba
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))


def _laplace_series(tables: dict[str, np.ndarray], b0: int, req: ProbRequest,
                    last_only: bool = False, focus: tuple[int, int] | None = None):
    """Drive the kernel over grid blocks until the inversion sums settle.

    Returns ``(probabilities, n_terms, converged, imag_residual)``.  With
    ``focus=(row, b)`` only that cell is used to decide convergence.
    """
    _set_threads(req.threads)
    grid = req.grid()
    accel = req.accel
    lam1, lam2, mu2, gam = (tables[k] for k in ("lambda1", "lambda2", "mu2", "gamma"))
    n_rows, width = lam1.shape
    out_rows = 1 if last_only else n_rows
    # only a trailing window of transform values is kept; earlier terms live on in ``head``
    keep = max(accel.order, accel.euler_order) + 3
    window = np.zeros((out_rows, width, 0))
    start = 0
    head = np.zeros((out_rows, width))
    use_levin = None
    im0 = np.zeros(1)
    k = 0
    first = max(accel.min_terms, accel.order + 3, accel.euler_order + 3, accel.sign_window + 1)
    values = change = None
    converged = False
    while k <= grid.k_max:
        stop = min(k + (first if k == 0 else 8), grid.k_max + 1)
        s = grid.points(k, stop)
        out = np.zeros((out_rows, width, s.size))
        im_blk = np.zeros(1)
        _kernels.bbd_laplace(s, lam1, lam2, mu2, gam, b0, out, im_blk, last_only,
                             req.row_method == "green")
        if not np.all(np.isfinite(out)):
            bad = np.argwhere(~np.isfinite(out))[0]
            raise SolverError(f"non-finite transform at row {bad[0]}, b={bad[1]}, "
                              f"s={grid.points(k + bad[2], k + bad[2] + 1)[0]}")
        if k == 0:
            im0 = im_blk
            use_levin = levin_mask(out, accel)
        k = stop
        window = np.concatenate([window, out], axis=-1)
        values, change = sum_series(window, grid, accel, start, head, use_levin)
        crit = change if focus is None else change[focus]
        if np.max(crit) <= accel.tol:
            converged = True
            break
        drop = window.shape[-1] - keep
        if drop > 0:
            head = _partial_sums(series_terms(window[..., :drop], grid, start), head)[..., -1]
            window = window[..., drop:]
            start += drop
    return values, k, converged, float(im0[0])


def bbd_prob(req: ProbRequest, rates: BBDRates, *, last_row_only: bool = False,
             focus_b: int | None = None) -> TransitionMatrix:
    """Transition probabilities ``P(a, b)`` for ``a0 <= a <= A``, ``0 <= b <= B``."""
    if req.A < req.a0:
        raise ValueError("BBD request needs A >= a0")
    a_values = np.arange(req.a0, req.A + 1)
    tables = rates.tabulate(a_values, np.arange(req.B + 1))
    return _solve(tables, req.b0, req, a_values, last_row_only, focus_b)


def _solve(tables, b0, req, a_values, last_row_only, focus_b, index_map=None):
    t0 = time.perf_counter()
    focus = None
    if focus_b is not None:
        focus = (0 if last_row_only else len(a_values) - 1, focus_b)
    values, n_terms, converged, im0 = _laplace_series(tables, b0, req, last_row_only, focus)
    if last_row_only:
        a_out = a_values[-1:]
    else:
        a_out = a_values
    if index_map is not None:
        values, a_out = index_map(values, a_out)
    tm = TransitionMatrix(
        values=np.asarray(values, dtype=float),
        a_values=np.asarray(a_out),
        t=req.t,
        start=(req.a0, req.b0),
        converged=converged,
        n_terms=n_terms,
        imag_residual=im0,
        settings={"t": req.t, "a0": req.a0, "b0": req.b0, "A": req.A, "B": req.B,
                  "cf_tol": req.cf_tol, "inv_tol": req.inv_tol, "H": req.grid().H,
                  "levin_order": req.accel.order, "accel_tol": req.accel.tol,
                  "k_max": req.k_max, "row_method": req.row_method,
                  "summation": req.accel.method, "wall_s": time.perf_counter() - t0},
    )
    if not converged:
        tm.warnings.append(f"inversion did not settle within k_max={req.k_max}")
    if tm.tail_mass > TAIL_WARN:
        tm.warnings.append(f"tail mass {tm.tail_mass:.3g} at b=B={req.B} exceeds {TAIL_WARN:g}; "
                           "consider a larger B")
    tm.warnings.extend(tm.check())
    return tm


def bbd_transform(rates: DBDRates, a0: int, B: int) -> BBDRates:
    """BBD rates of ``(a0 - X1, B - X2)`` for a DBD process ``(X1, X2)``.

    Type-1 deaths become type-1 births, type-2 deaths become type-2 births
    and vice versa, and the type-1 -> type-2 transfer becomes a type-2 ->
    type-1 transfer.
    """
    def conv(name):
        return lambda y1, y2: rates.rate(name, a0 - np.asarray(y1), B - np.asarray(y2))

    return BBDRates(conv("mu1"), conv("mu2"), conv("lambda2"), conv("gamma"),
                    name=f"{rates.name}-reflected")


def dbd_prob(req: ProbRequest, rates: DBDRates, *, last_row_only: bool = False,
             focus_b: int | None = None) -> TransitionMatrix:
    """Transition probabilities ``P(a, b)`` for ``A <= a <= a0``, ``0 <= b <= B``.

    Solved as the BBD process ``(a0 - X1, B - X2)``; mass that would push
    ``X2`` above ``B`` is lost (and shows up in ``total_mass < 1``).
    """
    if req.A > req.a0:
        raise ValueError("DBD request needs A <= a0")
    B = req.B
    y1 = np.arange(0, req.a0 - req.A + 1)
    a_orig = req.a0 - y1
    yb = np.arange(B + 1)
    # tabulate straight from the DBD bundle on the reflected grid
    aa, bb = np.meshgrid(a_orig, B - yb, indexing="ij")
    tables = {
        "lambda1": np.ascontiguousarray(rates.mu1(aa, bb)),
        "lambda2": np.ascontiguousarray(rates.mu2(aa, bb)),
        "mu2": np.ascontiguousarray(rates.lambda2(aa, bb)),
        "gamma": np.ascontiguousarray(rates.gamma(aa, bb)),
    }
    # the reflected process must not move below y2 = 0 through mu2/gamma at y2 = 0 ...
    # ... those moves leave the truncated window and are dropped by the solver.

    def index_map(values, a_out_y):
        vals = values[::-1, ::-1]
        return vals, req.a0 - a_out_y[::-1]

    bb_req = replace(req, a0=0, b0=B - req.b0, A=req.a0 - req.A)
    focus = None if focus_b is None else B - focus_b
    tm = _solve(tables, B - req.b0, bb_req, y1, last_row_only, focus, index_map)
    tm.start = (req.a0, req.b0)
    tm.settings.update({"a0": req.a0, "b0": req.b0, "A": req.A, "orientation": "dbd"})
    return tm


def _closed_above(req: ProbRequest, rates) -> bool:
    """True when no transition out of ``b = B`` raises the type-2 count."""
    if isinstance(rates, DBDRates):
        a = np.arange(req.A, req.a0 + 1)
        up = rates.lambda2(a, req.B) + rates.gamma(a, req.B)
    else:
        a = np.arange(req.a0, req.A + 1)
        up = rates.lambda2(a, req.B)
    return bool(np.all(np.asarray(up) == 0))


def auto_truncate(req: ProbRequest, rates, tail_threshold: float = 1e-6,
                  max_growths: int = 8) -> ProbRequest:
    """Grow ``B`` geometrically (``B <- ceil(1.5 B)``) until the tail mass is small.

    The tail mass is ``sum_a P(a, B)``.  A level ``B`` that no transition can
    exceed is exact and returned as is.  Raises :class:`TruncationError`
    after ``max_growths`` enlargements.
    """
    if not 0 < tail_threshold < 1:
        raise ValueError("tail_threshold must lie in (0, 1)")
    solve = dbd_prob if isinstance(rates, DBDRates) else bbd_prob
    cur = req
    for _ in range(max_growths + 1):
        if _closed_above(cur, rates):
            return cur
        tm = solve(cur, rates)
        if abs(tm.tail_mass) <= tail_threshold:
            return cur
        cur = replace(cur, B=max(cur.B + 1, math.ceil(1.5 * cur.B)))
    raise TruncationError(f"tail mass still {tm.tail_mass:.3g} at B={tm.B}; choose B manually")
