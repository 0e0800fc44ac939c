"""Command-line entry points: ``prob``, ``validate``, ``fit`` and ``bench``.

Exit codes: 0 success, 2 invalid configuration, 3 computation failure,
4 a validation threshold was missed.  ``BIVBD_THREADS`` and ``BIVBD_TOL``
override the default thread count and inversion tolerance.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .inference import (
    ENGINES,
    McmcError,
    ObservationSeries,
    log_posterior,
    rwm_sample,
    summarize,
    tune_proposal,
)
from .inversion import AcceleratorState
from .models import BBDRates, DBDRates, SirParams, bds_rates, monomolecular_rates, parasite_rates, sir_rates
from .oracles import (
    SimConfig,
    SimulationError,
    StateSpaceTooLarge,
    matexp_prob,
    mc_transition_matrix,
    monomolecular_analytic,
)
from .solver import ProbRequest, SolverError, bbd_prob, dbd_prob

log = logging.getLogger("bivbd")

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_THRESHOLD = 0, 2, 3, 4

MODELS = ("sir", "parasite", "bds", "mono", "custom-table")
MODEL_PARAMS = {
    "sir": ("alpha", "beta"),
    "parasite": ("muL", "muM", "eta", "gamma"),
    "bds": ("lam", "mu", "nu"),
    "mono": ("r_ab", "r_ba", "o_b"),
    "custom-table": (),
}
ALL_PARAMS = sorted({p for ps in MODEL_PARAMS.values() for p in ps})
NATURAL = {"sir": "dbd", "parasite": "dbd", "bds": "dbd", "mono": "bbd"}
DEFAULT_THRESHOLD = {"mono": 1e-8, "bds": 1e-7, "parasite": 1e-7, "custom-table": 1e-7}
CONFIG_KEYS = {"model", "params", "orientation", "start", "t", "A", "B", "table", "tol", "cf_tol",
               "k_max", "summation", "threads", "molecules"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Fully resolved settings of one model run; written into every sidecar."""

    model: str
    params: dict
    orientation: str
    start: tuple[int, int]
    t: list[float]
    A: int
    B: int
    table: str | None = None
    tol: float = 1e-12
    cf_tol: float = 1e-12
    k_max: int = 400
    summation: str = "euler"
    threads: int | None = None
    # mono only: initial (A, B) molecule counts; the process starts at (0, A)
    molecules: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in sorted(CONFIG_KEYS)}
        d["start"] = list(self.start)
        d["molecules"] = None if self.molecules is None else list(self.molecules)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"model", "params", "orientation", "start", "t", "A", "B"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        d = dict(d)
        d["start"] = tuple(d["start"])
        if d.get("molecules") is not None:
            d["molecules"] = tuple(d["molecules"])
        cfg = cls(**d)
        _check(cfg)
        return cfg

    def request(self, t: float) -> ProbRequest:
        return ProbRequest(t=t, a0=self.start[0], b0=self.start[1], A=self.A, B=self.B,
                           cf_tol=self.cf_tol, inv_tol=self.tol, k_max=self.k_max,
                           accel=AcceleratorState(method=self.summation), threads=self.threads)


# ---------------------------------------------------------------- models

def _table_rates(path: str, orientation: str):
    names = ("lambda1", "lambda2", "mu2", "gamma") if orientation == "bbd" else ("mu1", "lambda2", "mu2", "gamma")
    try:
        with open(path, newline="") as fh:
            rd = csv.DictReader(fh)
            if rd.fieldnames is None or not {"a", "b", *names} <= set(rd.fieldnames):
                raise ConfigError(f"table: header must contain a,b,{','.join(names)}")
            rows = list(rd)
        a = np.array([int(r["a"]) for r in rows])
        b = np.array([int(r["b"]) for r in rows])
        vals = {n: np.array([float(r[n]) for r in rows]) for n in names}
    except (OSError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"table: {exc}") from None
    if a.size == 0 or a.min() < 0 or b.min() < 0:
        raise ConfigError("table: needs rows with non-negative a, b")
    dense = {}
    for n in names:
        arr = np.zeros((a.max() + 1, b.max() + 1))
        arr[a, b] = vals[n]
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ConfigError(f"table: column {n} must be finite and non-negative")
        dense[n] = arr

    def lookup(arr):
        def f(x, y):
            x = np.asarray(x)
            y = np.asarray(y)
            inside = (x >= 0) & (x < arr.shape[0]) & (y >= 0) & (y < arr.shape[1])
            return np.where(inside, arr[np.clip(x, 0, arr.shape[0] - 1), np.clip(y, 0, arr.shape[1] - 1)], 0.0)
        return f

    cls = BBDRates if orientation == "bbd" else DBDRates
    return cls(*(lookup(dense[n]) for n in names), name=f"table:{Path(path).name}")


def build_rates(cfg: RunConfig):
    p = cfg.params
    if cfg.model == "sir":
        return sir_rates(SirParams(p["alpha"], p["beta"], sum(cfg.start)))
    if cfg.model == "parasite":
        return parasite_rates(p["muL"], p["muM"], p["eta"], p["gamma"])
    if cfg.model == "bds":
        return bds_rates(p["lam"], p["mu"], p["nu"])
    if cfg.model == "mono":
        n = cfg.molecules or (cfg.start[1], 0)
        return monomolecular_rates(p["r_ab"], p["r_ba"], p["o_b"], n[0], n[1])
    return _table_rates(cfg.table, cfg.orientation)


def _check(cfg: RunConfig) -> None:
    if cfg.model not in MODELS:
        raise ConfigError(f"model: must be one of {MODELS}")
    need = set(MODEL_PARAMS[cfg.model])
    got = set(cfg.params)
    if got - need:
        raise ConfigError(f"params: {sorted(got - need)} not used by model {cfg.model}")
    if need - got:
        raise ConfigError(f"params: model {cfg.model} needs {sorted(need - got)}")
    for k, v in cfg.params.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
            raise ConfigError(f"{k}: must be a finite non-negative number")
    if cfg.model == "sir" and not (cfg.params["alpha"] > 0 and cfg.params["beta"] > 0):
        raise ConfigError("alpha, beta: must be positive")
    if cfg.orientation not in ("bbd", "dbd"):
        raise ConfigError("orientation: must be bbd or dbd")
    if cfg.model in NATURAL and cfg.orientation != NATURAL[cfg.model]:
        raise ConfigError(f"orientation: model {cfg.model} is {NATURAL[cfg.model]}")
    if cfg.model == "mono" and (cfg.molecules is None or min(cfg.molecules) < 0):
        raise ConfigError("from: mono needs non-negative molecule counts")
    if cfg.model == "custom-table" and not cfg.table:
        raise ConfigError("table: custom-table needs --table")
    if not cfg.t or any(not (isinstance(t, (int, float)) and t > 0 and math.isfinite(t)) for t in cfg.t):
        raise ConfigError("t: every time must be positive")
    a0, b0 = cfg.start
    if a0 < 0 or b0 < 0:
        raise ConfigError("from: counts must be non-negative")
    if cfg.B < b0:
        raise ConfigError("B: must be at least the initial type-2 count")
    if cfg.orientation == "bbd" and cfg.A < a0:
        raise ConfigError("A: must be >= the initial type-1 count for bbd")
    if cfg.orientation == "dbd" and not 0 <= cfg.A <= a0:
        raise ConfigError("A: must lie in [0, initial type-1 count] for dbd")
    if not 0 < cfg.tol < 1 or not 0 < cfg.cf_tol < 1:
        raise ConfigError("tol: must lie in (0, 1)")
    if cfg.k_max < 16:
        raise ConfigError("k-max: must be at least 16")
    if cfg.summation not in ("euler", "levin", "auto"):
        raise ConfigError("summation: must be euler, levin or auto")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads: must be >= 1")


def _pair(text: str, name: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"{name}: expected two integers 'a,b', got {text!r}") from None
    return a, b


def _times(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"t: expected comma-separated numbers, got {text!r}") from None


def _env_threads():
    v = os.environ.get("BIVBD_THREADS")
    if v is None:
        return None
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"BIVBD_THREADS: not an integer: {v!r}") from None


def _env_tol():
    v = os.environ.get("BIVBD_TOL")
    if v is None:
        return 1e-12
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"BIVBD_TOL: not a number: {v!r}") from None


def config_from_args(args) -> RunConfig:
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: {exc}") from None
        return RunConfig.from_dict(d.get("config", d))
    if args.model is None:
        raise ConfigError("model: required (or pass --config)")
    params = {k: getattr(args, k) for k in ALL_PARAMS if getattr(args, k) is not None}
    if args.start is None:
        raise ConfigError("from: required")
    start = _pair(args.start, "from")
    molecules = None
    if args.model == "mono":
        # --from gives molecule counts (A, B); the process starts at (L=0, A)
        molecules = start
        start = (0, start[0])
    if args.t is None:
        raise ConfigError("t: required")
    t = _times(args.t)
    orientation = args.orientation or NATURAL.get(args.model)
    if orientation is None:
        raise ConfigError("orientation: custom-table needs --orientation")
    A, B = args.A, args.B
    if args.model == "mono":
        n = sum(molecules)
        A = n if A is None else A
        B = n if B is None else B
    if args.model == "sir" and B is None:
        B = sum(start)
    if orientation == "dbd" and A is None:
        A = 0
    if A is None or B is None:
        raise ConfigError("A, B: grid bounds required for this model")
    tol = args.tol if args.tol is not None else _env_tol()
    threads = args.threads if args.threads is not None else _env_threads()
    cfg = RunConfig(model=args.model, params=params, orientation=orientation, start=start, t=t,
                    A=A, B=B, table=args.table, tol=tol, cf_tol=args.cf_tol, k_max=args.k_max,
                    summation=args.summation, threads=threads, molecules=molecules)
    _check(cfg)
    return cfg


def solve(cfg: RunConfig, t: float):
    rates = build_rates(cfg)
    req = cfg.request(t)
    return dbd_prob(req, rates) if cfg.orientation == "dbd" else bbd_prob(req, rates)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def _write_json(path: Path, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------- commands

def cmd_prob(args) -> int:
    cfg = config_from_args(args)
    if len(cfg.t) != 1:
        raise ConfigError("t: prob takes a single time")
    out = Path(args.out)
    t0 = time.perf_counter()
    tm = solve(cfg, cfg.t[0])
    wall = time.perf_counter() - t0
    tm.to_csv(out)
    settings = {k: v for k, v in tm.settings.items() if k != "wall_s"}
    _write_json(_sidecar(out), {
        "version": __version__, "config": cfg.to_dict(),
        "t": cfg.t[0], "tail_mass": tm.tail_mass, "total_mass": tm.total_mass,
        "converged": tm.converged, "n_terms": tm.n_terms, "imag_residual": tm.imag_residual,
        "warnings": tm.warnings, "settings": settings, "timing": {"wall_s": wall},
    })
    for w in tm.warnings:
        log.warning("%s", w)
    print(f"wrote {out} ({tm.values.size} cells, total mass {tm.total_mass:.12g})")
    return EXIT_OK


def _reference(cfg: RunConfig, t: float):
    a0, b0 = cfg.start
    if cfg.model == "mono":
        n = cfg.molecules
        p = cfg.params
        return monomolecular_analytic(p["r_ab"], p["r_ba"], p["o_b"], n[0], n[1], t), "analytic"
    rates = build_rates(cfg)
    if cfg.orientation == "dbd":
        bounds = (cfg.A, a0, cfg.B)
    else:
        bounds = (a0, cfg.A, cfg.B)
    return matexp_prob(rates, bounds, t, (a0, b0), edges="kill"), "uniformization"


def _validate_mc(cfg: RunConfig, args) -> dict:
    rates = build_rates(cfg)
    cf = {t: solve(cfg, t) for t in cfg.t}
    t_ref = cfg.t[len(cfg.t) // 2] if args.ref_t is None else args.ref_t
    if t_ref not in cf:
        cf[t_ref] = solve(cfg, t_ref)
    top = np.argsort(cf[t_ref].values.ravel())[::-1][:args.top]
    cells = [(int(cf[t_ref].a_values[i // (cfg.B + 1)]), int(i % (cfg.B + 1))) for i in top]
    mats = mc_transition_matrix(rates, cfg.start, sorted(cf), SimConfig(args.n_sims, args.seed),
                                b_max=cfg.B)
    emp = dict(zip(sorted(cf), mats))
    rows = []
    inside = 0
    for t in cfg.t:
        for a, b in cells:
            lo, hi = emp[t].interval(a, b, args.widen)
            p = cf[t].prob(a, b)
            ok = bool(lo <= p <= hi)
            inside += int(ok)
            rows.append({"t": t, "a": a, "b": b, "cf": p, "mc": emp[t].prob(a, b),
                         "ci_low": lo, "ci_high": hi, "inside": bool(ok)})
    need = args.min_inside if args.min_inside is not None else math.ceil(0.9 * len(rows))
    return {"method": "monte-carlo", "n_sims": args.n_sims, "seed": args.seed, "widen": args.widen,
            "reference_t": t_ref, "cells": rows, "inside": inside, "checks": len(rows),
            "required": need, "pass": inside >= need}


def cmd_validate(args) -> int:
    cfg = config_from_args(args)
    out = Path(args.out)
    if cfg.model == "sir":
        report = _validate_mc(cfg, args)
    else:
        thr = args.threshold if args.threshold is not None else DEFAULT_THRESHOLD[cfg.model]
        rows = []
        for t in cfg.t:
            t0 = time.perf_counter()
            tm = solve(cfg, t)
            t1 = time.perf_counter()
            ref, method = _reference(cfg, t)
            l1 = tm.l1(ref)
            rows.append({"t": t, "l1": l1, "pass": l1 <= thr, "converged": tm.converged,
                         "cf_wall_s": t1 - t0, "oracle_wall_s": time.perf_counter() - t1})
        report = {"method": method, "threshold": thr, "results": rows,
                  "pass": all(r["pass"] for r in rows)}
    report["config"] = cfg.to_dict()
    _write_json(out, report)
    print(f"{'pass' if report['pass'] else 'FAIL'}: report in {out}")
    return EXIT_OK if report["pass"] else EXIT_THRESHOLD


def cmd_fit(args) -> int:
    if args.iters < 1:
        raise ConfigError("iters: must be >= 1")
    if not 0 <= args.burnin < args.iters:
        raise ConfigError("burnin: must lie in [0, iters)")
    if args.engine not in ENGINES:
        raise ConfigError(f"engine: must be one of {ENGINES}")
    if args.scale is not None and not args.scale > 0:
        raise ConfigError("scale: must be positive")
    try:
        obs = ObservationSeries.from_csv(args.data) if args.data else ObservationSeries.eyam()
    except (OSError, ValueError) as exc:
        raise ConfigError(f"data: {exc}") from None
    n_total = args.n_total or obs.n_total
    init = np.log(_floats(args.init, "init"))
    threads = args.threads if args.threads is not None else _env_threads()
    tol = args.tol if args.tol is not None else _env_tol()
    if not 0 < tol < 1:
        raise ConfigError("tol: must lie in (0, 1)")
    kw = {"threads": threads, "inv_tol": tol} if args.engine == "cf" else {}

    def target(x):
        return log_posterior(x[0], x[1], obs, args.engine, **kw)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = {"engine": args.engine, "iters": args.iters, "burnin": args.burnin, "seed": args.seed,
              "init": np.exp(init).tolist(), "n_total": n_total, "data": args.data or "eyam (bundled)",
              "pilot": args.pilot, "tol": tol, "threads": threads}
    t0 = time.perf_counter()
    try:
        if args.scale is None:
            scale, _ = tune_proposal(target, init, seed=args.seed, pilot=args.pilot)
        else:
            scale = args.scale
        config["proposal_scale"] = scale
        chain = rwm_sample(target, init, args.iters, scale, args.seed)
    except McmcError as exc:
        if exc.chain is not None:
            exc.chain.to_csv(out / "chain_partial.csv")
            _write_json(out / "last_state.json", {"config": config, "error": str(exc),
                                                  "last_state": exc.chain.meta.get("last_state")})
        log.error("%s", exc)
        return EXIT_COMPUTE
    chain.to_csv(out / "chain.csv")
    summ = summarize(chain, args.burnin, n_total)
    summ.to_json(out / "summary.json", extra={
        "config": config, "acceptance_rate": chain.acceptance_rate,
        "timing": {"wall_s": time.perf_counter() - t0}})
    r0 = summ["R0"]
    print(f"alpha mean {summ['alpha']['mean']:.4g}, beta mean {summ['beta']['mean']:.4g}, "
          f"R0 mean {r0['mean']:.4g} ({r0['q025']:.3g}, {r0['q975']:.3g}); outputs in {out}")
    return EXIT_OK


def _floats(text: str, name: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"{name}: expected numbers, got {text!r}") from None
    if len(vals) != 2 or min(vals) <= 0:
        raise ConfigError(f"{name}: expected two positive numbers")
    return vals


def cmd_bench(args) -> int:
    cfg = config_from_args(args)
    out = Path(args.out)
    rows = []
    for t in cfg.t:
        t0 = time.perf_counter()
        tm = solve(cfg, t)
        cf_ms = 1e3 * (time.perf_counter() - t0)
        t0 = time.perf_counter()
        try:
            ref, method = _reference(cfg, t)
        except StateSpaceTooLarge as exc:
            log.warning("%s", exc)
            ref, method = None, "uniformization"
        ref_ms = 1e3 * (time.perf_counter() - t0)
        rows.append(("cf", cfg.model, t, cf_ms, tm.l1(ref) if ref is not None else math.nan))
        if ref is not None:
            rows.append((method, cfg.model, t, ref_ms, 0.0))
        if args.n_sims:
            t0 = time.perf_counter()
            emp = mc_transition_matrix(build_rates(cfg), cfg.start, t, SimConfig(args.n_sims, args.seed),
                                       a_range=(min(cfg.A, cfg.start[0]), max(cfg.A, cfg.start[0])),
                                       b_max=cfg.B)
            mc_ms = 1e3 * (time.perf_counter() - t0)
            l1 = float(np.sum(np.abs(emp.estimate - tm.as_dense(emp.a_values, cfg.B)))) if ref is None \
                else float(np.sum(np.abs(emp.estimate - ref.as_dense(emp.a_values, cfg.B))))
            rows.append(("monte-carlo", cfg.model, t, mc_ms, l1))
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "model", "t", "wall_ms", "l1_vs_reference"])
        for r in rows:
            w.writerow([r[0], r[1], repr(float(r[2])), f"{r[3]:.3f}", repr(float(r[4]))])
    _write_json(_sidecar(out), {"config": cfg.to_dict(), "n_sims": args.n_sims, "seed": args.seed})
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--config", help="re-run from a JSON sidecar (its 'config' block)")
    g.add_argument("--model", choices=MODELS)
    g.add_argument("--orientation", choices=("bbd", "dbd"))
    g.add_argument("--table", help="CSV of rates for --model custom-table")
    g.add_argument("--from", dest="start", metavar="A0,B0",
                   help="initial state; for mono the counts of A and B molecules")
    g.add_argument("--t", help="time, or comma-separated times")
    g.add_argument("--A", type=int, help="last type-1 row (default: 0 for dbd)")
    g.add_argument("--B", type=int, help="type-2 truncation level")
    for name in ALL_PARAMS:
        g.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    n = p.add_argument_group("numerics")
    n.add_argument("--tol", type=float, help="inversion tolerance (env BIVBD_TOL, default 1e-12)")
    n.add_argument("--cf-tol", type=float, default=1e-12)
    n.add_argument("--k-max", type=int, default=400)
    n.add_argument("--summation", choices=("euler", "levin", "auto"), default="euler")
    n.add_argument("--threads", type=int, help="worker cap (env BIVBD_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bivbd", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prob", help="transition probability matrix to CSV")
    _model_args(p)
    p.add_argument("--out", default="prob.csv")
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("validate", help="compare against an independent oracle")
    _model_args(p)
    p.add_argument("--out", default="validate.json")
    p.add_argument("--threshold", type=float, help="L1 threshold")
    p.add_argument("--n-sims", type=int, default=150_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--top", type=int, default=9, help="cells tracked in Monte Carlo validation")
    p.add_argument("--ref-t", type=float, help="time whose largest cells are tracked")
    p.add_argument("--min-inside", type=int, help="checks that must fall inside the CIs")
    p.add_argument("--widen", type=float, default=1.0, help="CI half-width multiplier")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fit", help="random-walk Metropolis for SIR data")
    p.add_argument("--data", help="CSV with header time,S,I (default: bundled Eyam data)")
    p.add_argument("--engine", default="cf", choices=ENGINES)
    p.add_argument("--iters", type=int, default=100_000)
    p.add_argument("--burnin", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--init", default="3.39,0.0212", help="initial alpha,beta")
    p.add_argument("--scale", type=float, help="proposal sd (default: tuned in a pilot run)")
    p.add_argument("--pilot", type=int, default=2000)
    p.add_argument("--n-total", type=int, help="population size for R0 (default S0+I0)")
    p.add_argument("--tol", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--out-dir", default="fit")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="timing table of solver and oracles")
    _model_args(p)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--n-sims", type=int, default=0)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"bivbd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, SimulationError, StateSpaceTooLarge, ArithmeticError) as exc:
        print(f"bivbd: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except ValueError as exc:
        # raised by model/solver constructors on values that passed parsing
        print(f"bivbd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
