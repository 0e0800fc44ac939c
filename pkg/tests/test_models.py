import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bivbd.models import (
    BBDRates,
    DBDRates,
    SirParams,
    bds_rates,
    monomolecular_rates,
    ode_trajectory,
    parasite_rates,
    regularity_diagnostic,
    sir_rates,
)


def test_sir_rate_values():
    r = sir_rates(SirParams(3.2, 0.025))
    assert r.mu2(110, 15) == pytest.approx(48.0)
    assert r.gamma(110, 15) == pytest.approx(41.25)
    assert r.mu1(110, 15) == 0.0
    assert r.lambda2(110, 15) == 0.0


def test_sir_boundaries():
    r = sir_rates(SirParams(1.7, 0.3))
    i = np.arange(50)
    assert np.all(r.gamma(0, i) == 0)
    assert np.all(r.mu2(i, 0) == 0)


def test_sir_eyam_point_estimate():
    r = sir_rates(SirParams(3.39, 0.0212))
    assert r.gamma(254, 7) == pytest.approx(37.6936, rel=1e-12)


def test_sir_params_validation():
    with pytest.raises(ValueError):
        SirParams(0.0, 0.1)
    with pytest.raises(ValueError):
        SirParams(1.0, -0.1)
    with pytest.raises(ValueError):
        SirParams(1.0, 0.1, n_total=0)
    assert SirParams(3.22, 0.0197, 261).r0 == pytest.approx(0.0197 * 261 / 3.22)


def test_monomolecular_rates():
    r = monomolecular_rates(2.0, 0.5, 1.0, 20, 0)
    assert r.lambda1(0, 5) == 15.0
    assert r.mu2(0, 5) == 10.0
    assert r.lambda2(10, 10) == 0.0
    assert r.lambda1(15, 10) == 0.0 and r.lambda2(15, 10) == 0.0
    assert r.gamma(3, 4) == 0.0


def test_bds_rates():
    r = bds_rates(0.0188, 0.0147, 0.00268)
    assert r.lambda2(10, 0) == pytest.approx(0.188)
    assert r.gamma(10, 5) == pytest.approx(0.0268)
    assert np.all(r.gamma(0, np.arange(100)) == 0)


def test_parasite_rates():
    r = parasite_rates(0.0682, 0.0015, 0.0009, 0.04)
    assert r.mu1(100, 0) == pytest.approx(15.82)
    assert r.gamma(100, 0) == pytest.approx(4.0)
    assert r.mu2(50, 20) == pytest.approx(0.03)
    assert r.lambda2(50, 20) == 0.0


ALL_BUNDLES = [
    sir_rates(SirParams(3.2, 0.025)),
    monomolecular_rates(2.0, 0.5, 1.0, 20, 3),
    bds_rates(0.0188, 0.0147, 0.00268),
    parasite_rates(0.0682, 0.0015, 0.0009, 0.04),
]


@pytest.mark.parametrize("rates", ALL_BUNDLES, ids=lambda r: r.name)
def test_boundary_zeros_on_lattice(rates):
    a, b = np.meshgrid(np.arange(200), np.arange(200), indexing="ij")
    if isinstance(rates, BBDRates):
        assert np.all(rates.mu2(a[:, 0], 0) == 0)
        assert np.all(rates.gamma(a[:, 0], 0) == 0)
    else:
        assert np.all(rates.mu1(0, b[0]) == 0)
        assert np.all(rates.gamma(0, b[0]) == 0)
        assert np.all(rates.mu2(a[:, 0], 0) == 0)
    for vals in rates.tabulate(np.arange(200), np.arange(200)).values():
        assert np.all(vals >= 0) and np.all(np.isfinite(vals))


@pytest.mark.parametrize("rates", ALL_BUNDLES, ids=lambda r: r.name)
def test_rates_are_pure(rates):
    a = np.arange(60)[:, None]
    b = np.arange(60)[None, :]
    first = rates.tabulate(a.ravel(), b.ravel())
    second = rates.tabulate(a.ravel(), b.ravel())
    for name in first:
        assert first[name].tobytes() == second[name].tobytes()


def test_supplied_boundary_values_are_overridden():
    one = lambda a, b: np.ones(np.broadcast(a, b).shape)
    r = BBDRates(one, one, one, one)
    assert r.mu2(4, 0) == 0.0 and r.gamma(4, 0) == 0.0 and r.mu2(4, 1) == 1.0
    d = DBDRates(one, one, one, one)
    assert d.mu1(0, 3) == 0.0 and d.gamma(0, 3) == 0.0 and d.mu2(3, 0) == 0.0


def test_scalar_callables_are_vectorized():
    r = BBDRates(lambda a, b: float(a + b), lambda a, b: 0.0, lambda a, b: 1.0 * b, lambda a, b: 0.0)
    tab = r.tabulate([0, 1, 2], [0, 1])
    np.testing.assert_array_equal(tab["lambda1"], [[0, 1], [1, 2], [2, 3]])


def test_negative_rate_rejected():
    r = BBDRates(lambda a, b: -1.0 + 0 * a, lambda a, b: 0 * a, lambda a, b: 0 * a, lambda a, b: 0 * a)
    with pytest.raises(ValueError):
        r.lambda1(1, 1)


def test_bundles_immutable():
    r = sir_rates(SirParams(1.0, 1.0))
    with pytest.raises(AttributeError):
        r.name = "other"


def test_regularity_linear_pure_birth_harmonic():
    c, K = 0.7, 40
    r = BBDRates(lambda a, b: c * (np.asarray(a) + np.asarray(b)),
                 lambda a, b: 0 * a, lambda a, b: 0 * a, lambda a, b: 0 * a)
    rep = regularity_diagnostic(r, K)
    harmonic = sum(1.0 / k for k in range(1, K + 1))
    assert rep.partial_sum == pytest.approx(harmonic / c, rel=1e-13)
    assert not rep.diverged_early


def test_regularity_sir_diverges_immediately():
    rep = regularity_diagnostic(sir_rates(SirParams(3.2, 0.025)), 10)
    assert rep.diverged_early and rep.diverged_at == 1
    assert math.isinf(rep.partial_sum)


@pytest.mark.parametrize("K", [15, 50])
def test_regularity_monomolecular_matches_loop(K):
    r_ab, r_ba, o_b, a0, b0 = 2.0, 0.5, 1.0, 20, 0
    rep = regularity_diagnostic(monomolecular_rates(r_ab, r_ba, o_b, a0, b0), K)
    total, hit_zero = 0.0, None
    for k in range(1, K + 1):
        best = 0.0
        for a in range(0, k + 1):
            nb = max(a0 + b0 - k, 0)
            best = max(best, (o_b + r_ba) * nb)
        if best == 0.0:
            hit_zero = k
            break
        total += 1.0 / best
    if hit_zero is None:
        assert rep.partial_sum == pytest.approx(total, rel=1e-13)
    else:
        assert rep.diverged_early and rep.diverged_at == hit_zero


@given(st.floats(0.01, 5.0), st.floats(0.0, 2.0), st.integers(0, 5))
@settings(max_examples=30, deadline=None)
def test_regularity_partial_sums_monotone(c, d, a0):
    r = BBDRates(lambda a, b: c * (np.asarray(a) + 1.0), lambda a, b: d * np.asarray(b, dtype=float),
                 lambda a, b: 0 * a, lambda a, b: 0 * a)
    rep = regularity_diagnostic(r, 30, a0=a0)
    assert np.all(np.diff(rep.partial_sums) >= 0)


def test_regularity_dbd_monotone():
    rep = regularity_diagnostic(bds_rates(0.0188, 0.0147, 0.00268), 40, a0=10)
    finite = rep.partial_sums[np.isfinite(rep.partial_sums)]
    assert np.all(np.diff(finite) >= 0)


def test_regularity_rejects_bad_horizon():
    with pytest.raises(ValueError):
        regularity_diagnostic(sir_rates(SirParams(1, 1)), 0)


def test_ode_sir_conserves_population():
    t = np.linspace(0, 4, 41)
    y = ode_trajectory("sir", {"alpha": 3.2, "beta": 0.025}, [110, 15, 0], t)
    tot = y.sum(axis=1)
    assert np.max(np.abs(tot - 125.0)) / 125.0 <= 1e-9


def test_ode_sir_without_infection_decays():
    t = np.linspace(0, 2, 21)
    y = ode_trajectory("sir", {"alpha": 1.3, "beta": 0.0}, [50, 10, 0], t)
    np.testing.assert_allclose(y[:, 0], 50.0)
    np.testing.assert_allclose(y[:, 1], 10 * np.exp(-1.3 * t), rtol=1e-9)


def test_ode_zero_rates_constant():
    t = np.linspace(0, 10, 11)
    y = ode_trajectory("parasite", {"muL": 0, "muM": 0, "eta": 0, "gamma": 0}, [100, 3], t)
    np.testing.assert_array_equal(y, np.tile([100.0, 3.0], (11, 1)))


def test_ode_parasite_shape():
    t = np.linspace(0, 400, 401)
    y = ode_trajectory("parasite", {"muL": 0.0682, "muM": 0.0015, "eta": 0.0009, "gamma": 0.04},
                       [100, 0], t)
    assert np.all(np.diff(y[:, 0]) < 0)
    peak = int(np.argmax(y[:, 1]))
    assert 0 < peak < len(t) - 1
    assert y[-1, 1] < y[peak, 1]


def test_ode_rejects_bad_input():
    with pytest.raises(ValueError):
        ode_trajectory("sir", {"alpha": 1, "beta": 1}, [-1, 2, 0], [0, 1])
    with pytest.raises(ValueError):
        ode_trajectory("sir", {"alpha": 1, "beta": 1}, [1, 2, 0], [0, 2, 1])
    with pytest.raises(ValueError):
        ode_trajectory("nope", {}, [1], [0, 1])
