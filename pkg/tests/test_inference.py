import json
import math

import numpy as np
import pytest

from bivbd.inference import (
    LOG_FLOOR,
    PRIOR_SD,
    LikelihoodError,
    McmcChain,
    McmcError,
    ObservationSeries,
    interval_log_probs,
    log_likelihood,
    log_posterior,
    log_prior,
    rwm_sample,
    summarize,
    tune_proposal,
)
from bivbd.models import SirParams, sir_rates
from bivbd.oracles import matexp_prob

EYAM_T = [0, 0.5, 1, 1.5, 2, 2.5, 3, 4]
EYAM_S = [254, 235, 201, 153, 121, 110, 97, 83]
EYAM_I = [7, 14, 22, 29, 20, 8, 8, 0]


def oracle_log_likelihood(alpha, beta, obs):
    """Uniformization on the box each interval can reach; moves out of it cannot return."""
    rates = sir_rates(SirParams(alpha, beta))
    total = 0.0
    for _, dt, (s0, i0), (s1, i1) in obs.intervals():
        top = i0 + s0 - s1
        tm = matexp_prob(rates, (s1, s0, top), dt, initial=(s0, i0), edges="kill")
        total += math.log(tm.prob(s1, i1))
    return total


def test_eyam_bundled_data():
    obs = ObservationSeries.eyam()
    np.testing.assert_array_equal(obs.times, EYAM_T)
    np.testing.assert_array_equal(obs.S, EYAM_S)
    np.testing.assert_array_equal(obs.I, EYAM_I)
    assert obs.n_total == 261


def test_csv_roundtrip(tmp_path):
    obs = ObservationSeries.eyam()
    obs.to_csv(tmp_path / "obs.csv")
    back = ObservationSeries.from_csv(tmp_path / "obs.csv")
    np.testing.assert_array_equal(back.times, obs.times)
    np.testing.assert_array_equal(back.S, obs.S)
    np.testing.assert_array_equal(back.I, obs.I)


def test_csv_bad_header(tmp_path):
    (tmp_path / "bad.csv").write_text("t,S,I\n0,1,1\n")
    with pytest.raises(ValueError, match="header"):
        ObservationSeries.from_csv(tmp_path / "bad.csv")


def test_observation_validation():
    with pytest.raises(ValueError):
        ObservationSeries(np.array([0.0, 0.0]), np.array([5, 5]), np.array([1, 1]))
    with pytest.raises(ValueError):
        ObservationSeries(np.array([0.0, 1.0]), np.array([5, 6]), np.array([1, 1]))
    with pytest.raises(ValueError):
        ObservationSeries(np.array([0.0, 1.0]), np.array([5, 4]), np.array([1, -1]))


@pytest.mark.parametrize("engine", ["cf", "branching"])
def test_near_zero_gap_identity(engine):
    obs = ObservationSeries(np.array([0.0, 1e-8]), np.array([50, 50]), np.array([4, 4]))
    assert log_likelihood(3.2, 0.025, obs, engine) == pytest.approx(0.0, abs=1e-5)


def test_eyam_cf_matches_uniformization():
    obs = ObservationSeries.eyam()
    cf = log_likelihood(3.39, 0.0212, obs, "cf")
    assert abs(cf - oracle_log_likelihood(3.39, 0.0212, obs)) <= 1e-5


def test_first_interval_consistency():
    obs = ObservationSeries.eyam()
    first = ObservationSeries(obs.times[:2], obs.S[:2], obs.I[:2])
    for alpha, beta in [(3.39, 0.0212), (2.5, 0.03)]:
        cf = log_likelihood(alpha, beta, first, "cf")
        assert abs(cf - oracle_log_likelihood(alpha, beta, first)) <= 1e-6


def test_explicit_B_does_not_change_value():
    obs = ObservationSeries.eyam()
    a = log_likelihood(3.39, 0.0212, obs, "cf")
    b = log_likelihood(3.39, 0.0212, obs, "cf", B=125)
    assert abs(a - b) <= 1e-8


def test_eyam_ordering():
    obs = ObservationSeries.eyam()
    for engine in ("cf", "branching"):
        good = log_likelihood(3.22, 0.0197, obs, engine)
        bad = log_likelihood(10.0, 0.1, obs, engine)
        assert good - bad > 50


def test_impossible_transition_is_minus_inf():
    obs = ObservationSeries(np.array([0.0, 1.0]), np.array([10, 8]), np.array([2, 5]))
    vals, floored = interval_log_probs(1.0, 0.1, obs)
    assert vals[0] == -math.inf and floored == 0


def test_underflow_is_floored_and_counted():
    obs = ObservationSeries(np.array([0.0, 0.01]), np.array([200, 0]), np.array([5, 205]))
    for engine in ("cf", "branching"):
        vals, floored = interval_log_probs(0.5, 0.001, obs, engine)
        assert vals[0] == LOG_FLOOR and floored == 1


def test_solver_failure_names_interval():
    obs = ObservationSeries.eyam()
    with pytest.raises(LikelihoodError) as err:
        log_likelihood(3.2, 0.02, obs, "cf", row_method="nope")
    assert err.value.interval == 0


def test_likelihood_argument_checks():
    obs = ObservationSeries.eyam()
    with pytest.raises(ValueError):
        log_likelihood(3.2, 0.02, obs, "abc")
    with pytest.raises(ValueError):
        log_likelihood(-3.2, 0.02, obs)


def test_prior_only_difference():
    single = ObservationSeries(np.array([0.0]), np.array([10]), np.array([1]))
    diff = log_posterior(0.0, 0.0, single) - log_posterior(1.0, 0.0, single)
    assert diff == pytest.approx(1.0 / (2 * PRIOR_SD ** 2), rel=1e-12)


def test_prior_symmetric():
    for x, y in [(0.3, -1.2), (4.0, 2.0)]:
        assert log_prior(x, y) == log_prior(-x, -y)


def test_cf_posterior_mode_grid_scan():
    obs = ObservationSeries.eyam()
    la = np.log(3.2) + np.linspace(-0.5, 0.5, 21)
    lb = np.log(0.0197) + np.linspace(-0.5, 0.5, 21)
    grid = np.array([[log_posterior(x, y, obs, "cf") for y in lb] for x in la])
    i, j = np.unravel_index(np.argmax(grid), grid.shape)
    # the grid spacing is 0.05 on the log scale
    assert abs(la[i] - np.log(3.2)) <= 0.1
    assert abs(lb[j] - np.log(0.0197)) <= 0.1


def std_normal(x):
    return -0.5 * float(x @ x)


def test_rwm_standard_normal():
    ch = rwm_sample(std_normal, np.zeros(2), 50_000, 1.7, seed=3)
    assert len(ch) == 50_000
    assert np.all(np.abs(ch.draws.mean(axis=0)) <= 0.03)
    assert np.all(np.abs(ch.draws.var(axis=0) - 1.0) <= 0.05)
    assert 0 <= ch.acceptance_rate <= 1


def test_rwm_tiny_scale_accepts_everything():
    ch = rwm_sample(std_normal, np.array([0.5, -0.5]), 2000, 1e-9, seed=0)
    assert ch.acceptance_rate > 0.99
    assert np.max(np.abs(ch.draws - [0.5, -0.5])) < 1e-6


def test_rwm_deterministic():
    a = rwm_sample(std_normal, np.zeros(2), 500, 0.8, seed=12)
    b = rwm_sample(std_normal, np.zeros(2), 500, 0.8, seed=12)
    assert a.draws.tobytes() == b.draws.tobytes() and a.accepted == b.accepted


def test_rwm_minus_inf_rejects():
    half = lambda x: 0.0 if x[0] >= 0 else -math.inf
    ch = rwm_sample(half, np.array([0.1]), 3000, 1.0, seed=1)
    assert np.all(ch.draws >= 0)


def test_rwm_nan_aborts_with_partial_chain():
    calls = {"n": 0}

    def target(x):
        calls["n"] += 1
        return math.nan if calls["n"] > 50 else 0.0

    with pytest.raises(McmcError) as err:
        rwm_sample(target, np.zeros(2), 100, 0.1, seed=0)
    assert len(err.value.chain) == 49
    assert "last_state" in err.value.chain.meta


def test_rwm_exception_aborts():
    def target(x):
        if x[0] > 0.5:
            raise ArithmeticError("boom")
        return 0.0

    with pytest.raises(McmcError, match="boom"):
        rwm_sample(target, np.zeros(1), 10_000, 1.0, seed=0)


def test_rwm_argument_checks():
    with pytest.raises(ValueError):
        rwm_sample(std_normal, np.zeros(2), 0, 1.0, seed=0)
    with pytest.raises(ValueError):
        rwm_sample(std_normal, np.zeros(2), 10, -1.0, seed=0)
    with pytest.raises(ValueError):
        rwm_sample(std_normal, np.zeros(2), 10, np.array([[1.0, 2.0], [2.0, 1.0]]), seed=0)


def test_rwm_covariance_proposal():
    cov = np.array([[0.5, 0.2], [0.2, 0.3]])
    ch = rwm_sample(std_normal, np.zeros(2), 1000, cov, seed=2)
    assert 0.2 < ch.acceptance_rate < 0.9


def test_detailed_balance_two_state():
    w = 0.7

    def target(x):
        if abs(x[0]) > 1:
            return -math.inf
        return math.log(w) if x[0] >= 0 else math.log(1 - w)

    ch = rwm_sample(target, np.array([0.5]), 60_000, 0.8, seed=5)
    hit = (ch.draws[:, 0] >= 0).astype(float)
    batches = hit.reshape(60, -1).mean(axis=1)
    se = batches.std(ddof=1) / math.sqrt(len(batches))
    assert abs(hit.mean() - w) <= 3 * se


def test_tune_proposal_window():
    scale, x = tune_proposal(std_normal, np.zeros(2), seed=4, scale=0.01)
    ch = rwm_sample(std_normal, x, 4000, scale, seed=9)
    assert 0.15 <= ch.acceptance_rate <= 0.45


def test_summarize_constant_chain():
    draws = np.tile(np.log([3.0, 0.02]), (100, 1))
    ch = McmcChain(draws, np.zeros(100), 0, np.array(0.1), 0)
    sm = summarize(ch, 10, 261)
    assert sm["alpha"]["mean"] == pytest.approx(3.0)
    assert sm["alpha"]["q025"] == pytest.approx(3.0) and sm["alpha"]["q975"] == pytest.approx(3.0)
    assert sm["R0"]["mean"] == pytest.approx(0.02 * 261 / 3.0)
    assert sm.n_draws == 90


def test_summarize_ordering_and_r0(tmp_path):
    ch = rwm_sample(lambda x: -0.5 * float(((x - [1.0, -4.0]) / [0.1, 0.2]) @ ((x - [1.0, -4.0]) / [0.1, 0.2])),
                    np.array([1.0, -4.0]), 3000, 0.1, seed=1)
    sm = summarize(ch, 500, 100)
    for name in ("alpha", "beta", "R0"):
        assert sm[name]["q025"] <= sm[name]["mean"] <= sm[name]["q975"]
    kept = ch.draws[500:]
    assert sm["R0"]["mean"] == pytest.approx(np.mean(np.exp(kept[:, 1]) * 100 / np.exp(kept[:, 0])))
    sm.to_json(tmp_path / "s.json", extra={"seed": 1})
    out = json.loads((tmp_path / "s.json").read_text())
    assert out["seed"] == 1
    assert {tuple(sorted(p)) for p in out["params"]} == {("mean", "param", "q025", "q975")}


def test_summarize_burn_in_check():
    ch = McmcChain(np.zeros((5, 2)), np.zeros(5), 0, np.array(0.1), 0)
    with pytest.raises(ValueError):
        summarize(ch, 5, 10)


def test_chain_csv(tmp_path):
    ch = rwm_sample(std_normal, np.zeros(2), 10, 0.5, seed=0)
    ch.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "iter,log_alpha,log_beta,log_density"
    assert len(lines) == 11
