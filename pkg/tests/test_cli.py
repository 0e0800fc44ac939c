import csv
import hashlib
import json
import time

import numpy as np
import pytest

from bivbd.cli import EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK, EXIT_THRESHOLD, main

MONO = ["--model", "mono", "--r-ab", "2", "--r-ba", "0.5", "--o-b", "1", "--from", "20,0"]
SIR = ["--model", "sir", "--alpha", "3.2", "--beta", "0.025", "--from", "110,15"]
BDS = ["--model", "bds", "--lam", "0.0188", "--mu", "0.0147", "--nu", "0.00268", "--from", "10,0", "--B", "50"]
PARASITE = ["--model", "parasite", "--muL", "0.0682", "--muM", "0.0015", "--eta", "0.0009",
            "--gamma", "0.04", "--from", "100,0", "--B", "100"]


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_prob_mono_writes_csv_and_sidecar(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["prob", *MONO, "--t", "1", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert set(rows[0]) == {"a", "b", "prob"}
    assert abs(sum(float(r["prob"]) for r in rows) - 1.0) <= 1e-8
    side = json.loads(out.with_suffix(".json").read_text())
    for key in ("tail_mass", "total_mass", "settings", "timing", "config"):
        assert key in side
    assert side["config"]["model"] == "mono"


def test_prob_sir_top_cells_sum(tmp_path):
    out = tmp_path / "sir.csv"
    assert main(["prob", *SIR, "--t", "0.5", "--B", "125", "--out", str(out)]) == EXIT_OK
    probs = np.array([float(r["prob"]) for r in read_csv(out)])
    assert np.all(probs >= -1e-12)
    assert abs(probs.sum() - 1.0) <= 1e-6


def test_prob_rejects_zero_time(tmp_path, capsys):
    code = main(["prob", *MONO, "--t", "0", "--out", str(tmp_path / "p.csv")])
    assert code == EXIT_CONFIG
    assert "t:" in capsys.readouterr().err
    assert not (tmp_path / "p.csv").exists()


@pytest.mark.parametrize("argv,field", [
    (["--model", "sir", "--alpha", "3.2", "--from", "110,15", "--t", "0.5"], "beta"),
    (["--model", "bds", "--lam", "1", "--mu", "1", "--nu", "1", "--from", "10,0", "--t", "1", "--B", "-1"], "B"),
    (["--model", "bds", "--lam", "1", "--mu", "1", "--nu", "1", "--from", "10,0", "--t", "1", "--A", "10", "--B", "5",
      "--orientation", "bbd"], "orientation"),
    (["--model", "custom-table", "--orientation", "bbd", "--from", "0,0", "--t", "1", "--A", "2", "--B", "2"],
     "table"),
    ([*MONO, "--t", "1", "--threads", "0"], "threads"),
])
def test_prob_config_errors_name_field(tmp_path, capsys, argv, field):
    assert main(["prob", *argv, "--out", str(tmp_path / "p.csv")]) == EXIT_CONFIG
    assert field in capsys.readouterr().err


def test_prob_byte_identical_across_threads(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["prob", *SIR, "--t", "0.5", "--B", "125", "--threads", "1", "--out", str(a)]) == EXIT_OK
    assert main(["prob", *SIR, "--t", "0.5", "--B", "125", "--threads", "8", "--out", str(b)]) == EXIT_OK
    assert digest(a) == digest(b)


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("BIVBD_TOL", "1e-9")
    monkeypatch.setenv("BIVBD_THREADS", "2")
    out = tmp_path / "p.csv"
    assert main(["prob", *MONO, "--t", "1", "--out", str(out)]) == EXIT_OK
    cfg = json.loads(out.with_suffix(".json").read_text())["config"]
    assert cfg["tol"] == 1e-9 and cfg["threads"] == 2
    monkeypatch.setenv("BIVBD_THREADS", "many")
    assert main(["prob", *MONO, "--t", "1", "--out", str(out)]) == EXIT_CONFIG


def test_sidecar_rerun_reproduces_bytes(tmp_path):
    first = tmp_path / "first.csv"
    assert main(["prob", *BDS, "--t", "5", "--out", str(first)]) == EXIT_OK
    again = tmp_path / "again.csv"
    assert main(["prob", "--config", str(first.with_suffix(".json")), "--out", str(again)]) == EXIT_OK
    assert digest(first) == digest(again)
    strip = lambda p: {k: v for k, v in json.loads(p.read_text()).items() if k != "timing"}
    assert strip(first.with_suffix(".json")) == strip(again.with_suffix(".json"))


def test_sidecar_unknown_key_rejected(tmp_path):
    first = tmp_path / "first.csv"
    assert main(["prob", *MONO, "--t", "1", "--out", str(first)]) == EXIT_OK
    side = json.loads(first.with_suffix(".json").read_text())
    side["config"]["colour"] = "blue"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(side))
    assert main(["prob", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_custom_table_matches_builtin(tmp_path):
    # a small bbd model written out as a table and solved both ways
    lam1, lam2, mu2, gam = 0.4, 0.3, 0.5, 0.2
    table = tmp_path / "rates.csv"
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "lambda1", "lambda2", "mu2", "gamma"])
        for a in range(4):
            for b in range(5):
                w.writerow([a, b, lam1 if a < 3 else 0, lam2 * b if b < 4 else 0, mu2 * b, gam * b])
    out = tmp_path / "t.csv"
    args = ["--model", "custom-table", "--orientation", "bbd", "--table", str(table), "--from", "0,1",
            "--t", "0.7", "--A", "3", "--B", "4"]
    assert main(["prob", *args, "--out", str(out)]) == EXIT_OK
    rep = tmp_path / "v.json"
    assert main(["validate", *args, "--out", str(rep)]) == EXIT_OK
    assert json.loads(rep.read_text())["method"] == "uniformization"


def test_custom_table_bad_header(tmp_path):
    table = tmp_path / "rates.csv"
    table.write_text("a,b,lambda1\n0,0,1\n")
    argv = ["prob", "--model", "custom-table", "--orientation", "bbd", "--table", str(table),
            "--from", "0,0", "--t", "1", "--A", "1", "--B", "1", "--out", str(tmp_path / "p.csv")]
    assert main(argv) == EXIT_CONFIG


def test_validate_mono_passes(tmp_path):
    out = tmp_path / "v.json"
    assert main(["validate", *MONO, "--t", "1", "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["pass"] and rep["method"] == "analytic"
    assert rep["results"][0]["l1"] < 1e-8


def test_validate_bds_passes(tmp_path):
    out = tmp_path / "v.json"
    assert main(["validate", *BDS, "--t", "1,5,10", "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert [r["t"] for r in rep["results"]] == [1.0, 5.0, 10.0]
    assert all(r["l1"] <= 1e-7 for r in rep["results"])


def test_validate_threshold_failure_exit_code(tmp_path):
    out = tmp_path / "v.json"
    code = main(["validate", *BDS, "--t", "1", "--tol", "1e-3", "--threshold", "1e-15", "--out", str(out)])
    assert code == EXIT_THRESHOLD
    assert json.loads(out.read_text())["pass"] is False


def test_validate_sir_coverage(tmp_path):
    out = tmp_path / "v.json"
    code = main(["validate", *SIR, "--t", "0.5", "--n-sims", "20000", "--seed", "1", "--min-inside", "8",
                 "--out", str(out)])
    rep = json.loads(out.read_text())
    assert code == EXIT_OK
    assert rep["checks"] == 9 and rep["inside"] >= 8 and rep["seed"] == 1


def test_fit_rejects_zero_iterations(tmp_path):
    assert main(["fit", "--iters", "0", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_fit_rejects_bad_burnin(tmp_path):
    assert main(["fit", "--iters", "10", "--burnin", "10", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_fit_small_branching_run(tmp_path):
    code = main(["fit", "--engine", "branching", "--iters", "400", "--burnin", "100", "--seed", "3",
                 "--scale", "0.2", "--out-dir", str(tmp_path)])
    assert code == EXIT_OK
    summ = json.loads((tmp_path / "summary.json").read_text())
    assert summ["config"]["seed"] == 3
    names = {p["param"] for p in summ["params"]}
    assert names == {"alpha", "beta", "R0"}
    lines = (tmp_path / "chain.csv").read_text().splitlines()
    assert len(lines) == 401


def test_fit_custom_data(tmp_path):
    data = tmp_path / "obs.csv"
    data.write_text("time,S,I\n0,50,5\n0.5,44,9\n1,38,10\n")
    code = main(["fit", "--data", str(data), "--engine", "cf", "--iters", "60", "--burnin", "10",
                 "--scale", "0.1", "--init", "3,0.05", "--out-dir", str(tmp_path / "fit")])
    assert code == EXIT_OK
    summ = json.loads((tmp_path / "fit" / "summary.json").read_text())
    assert summ["config"]["n_total"] == 55


def test_fit_bad_data(tmp_path):
    data = tmp_path / "obs.csv"
    data.write_text("day,S,I\n0,50,5\n")
    assert main(["fit", "--data", str(data), "--iters", "10", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_fit_rejects_bad_tol(tmp_path):
    assert main(["fit", "--iters", "10", "--tol", "2", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_fit_likelihood_failure_dumps_state(tmp_path, monkeypatch):
    import bivbd.cli as cli

    real = cli.log_posterior
    calls = {"n": 0}

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] > 5:
            raise ArithmeticError("solver blew up")
        return real(*args, **kw)

    monkeypatch.setattr(cli, "log_posterior", flaky)
    code = main(["fit", "--engine", "branching", "--iters", "20", "--burnin", "0", "--scale", "0.1",
                 "--out-dir", str(tmp_path)])
    assert code == EXIT_COMPUTE
    state = json.loads((tmp_path / "last_state.json").read_text())
    assert "solver blew up" in state["error"] and state["config"]["seed"] == 1
    assert len(state["last_state"]) == 2
    assert (tmp_path / "chain_partial.csv").exists()


def test_bench_trivial_instance_fast(tmp_path):
    out = tmp_path / "b.csv"
    argv = ["bench", "--model", "mono", "--r-ab", "1", "--r-ba", "1", "--o-b", "1", "--from", "1,0",
            "--t", "1", "--n-sims", "1000", "--out", str(out)]
    main(argv)  # warm the compiled kernels
    t0 = time.perf_counter()
    assert main(argv) == EXIT_OK
    assert time.perf_counter() - t0 < 1.0
    rows = read_csv(out)
    assert [r["method"] for r in rows] == ["cf", "analytic", "monte-carlo"]
    assert set(rows[0]) == {"method", "model", "t", "wall_ms", "l1_vs_reference"}
    assert float(rows[0]["l1_vs_reference"]) < 1e-10


def test_bench_parasite_cf_faster_than_matexp(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", *PARASITE, "--t", "400", "--out", str(out)]) == EXIT_OK
    rows = {r["method"]: r for r in read_csv(out)}
    assert float(rows["cf"]["wall_ms"]) < float(rows["uniformization"]["wall_ms"])
    assert float(rows["cf"]["l1_vs_reference"]) <= 1e-7


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "bivbd" in capsys.readouterr().out
