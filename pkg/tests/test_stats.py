import numpy as np
import pytest
from scipy.stats import norm

from pointsplit.measure import DensityIntensity, DiscreteIntensity, DiscreteSpace, Window, delta
from pointsplit.processes import DoubledPoisson, MixedPoisson, Poisson, PolyaDifference, RngStream
from pointsplit.stats import (
    TestFunctionBank,
    base_functions,
    bootstrap_means,
    default_bank,
    default_multi_bank,
    factorization_test,
    marginal_consistency_test,
    multi_factorization_test,
)

N = 20_000


@pytest.fixture(scope="module")
def window():
    return Window.unit(2)


@pytest.fixture(scope="module")
def rho(window):
    return DensityIntensity.constant(window, 2.0)


def test_bootstrap_means_match_explicit_resampling():
    values = np.random.default_rng(0).normal(size=(50, 2))
    out = bootstrap_means(values, 7, np.random.default_rng(1), chunk=3)
    gen = np.random.default_rng(1)
    expected = []
    for start in range(0, 7, 3):
        idx = gen.integers(0, 50, size=(min(3, 7 - start), 50))
        expected += [values[row].mean(axis=0) for row in idx]
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_default_banks(window):
    bank = default_bank(window)
    assert len(bank) == 10 and bank.arity == 2
    assert default_multi_bank(window, 3).arity == 3
    assert len(base_functions(DiscreteSpace(3))) == 12


def test_bank_rejects_mixed_arity(window):
    f = base_functions(window)[0]
    with pytest.raises(ValueError):
        TestFunctionBank([(f, f), (f, f, f)])


def test_too_few_samples(rho, window):
    with pytest.raises(ValueError):
        factorization_test(Poisson(rho), 0.5, default_bank(window), 500, RngStream(0))


def test_poisson_passes(rho, window):
    res = factorization_test(Poisson(rho), 0.5, default_bank(window), N, RngStream(1))
    assert not res.family_reject
    assert res.max_abs_z <= 4
    assert "cannot certify" in res.note


def test_mixed_rejects(rho, window):
    model = MixedPoisson(rho, ((0.5, 0.5), (1.5, 0.5)))
    res = factorization_test(model, 0.5, default_bank(window), N, RngStream(2))
    assert res.family_reject and res.max_abs_z > 6


def test_stderr_methods_agree(rho, window):
    bank = default_bank(window)
    boot = factorization_test(Poisson(rho), 0.4, bank, N, RngStream(3))
    dm = factorization_test(Poisson(rho), 0.4, bank, N, RngStream(3), stderr_method="delta")
    np.testing.assert_array_equal([r.statistic for r in boot], [r.statistic for r in dm])
    ratio = np.array([r.stderr for r in boot]) / np.array([r.stderr for r in dm])
    assert np.all((ratio > 0.5) & (ratio < 2.0))


def test_family_decision_is_bonferroni(rho, window):
    res = factorization_test(Poisson(rho), 0.5, default_bank(window), N, RngStream(4))
    m = len(res)
    for r in res:
        assert r.p_value == pytest.approx(2 * norm.sf(abs(r.z_score)))
        assert r.p_adjusted == pytest.approx(min(1.0, m * r.p_value))
    assert res.family_alpha == pytest.approx(2 * norm.sf(4.0))
    assert res.family_reject == any(r.p_adjusted < res.family_alpha for r in res)


def test_bank_permutation_relabels_exactly(rho, window):
    bank = default_bank(window)
    perm = [3, 1, 4, 0, 9, 2, 6, 5, 8, 7]
    a = factorization_test(Poisson(rho), 0.5, bank, N, RngStream(5), stderr_method="delta")
    b = factorization_test(Poisson(rho), 0.5, TestFunctionBank(bank[i] for i in perm), N,
                           RngStream(5), stderr_method="delta")
    for j, i in enumerate(perm):
        assert b[j].statistic == a[i].statistic and b[j].name == a[i].name


def test_symmetry_in_law(rho, window):
    # (f, g, q) and (g, f, 1 - q) test the same hypothesis; statistics agree in law
    model = MixedPoisson(rho, ((0.5, 0.5), (1.5, 0.5)))
    bank = default_bank(window)
    a = factorization_test(model, 0.3, bank, N, RngStream(6), stderr_method="delta")
    b = factorization_test(model, 0.7, TestFunctionBank((g, f) for f, g in bank), N,
                           RngStream(7), stderr_method="delta")
    for x, y in zip(a, b):
        assert abs(x.statistic - y.statistic) <= 4 * np.hypot(x.stderr, y.stderr)


def test_reproducible(rho, window):
    a = factorization_test(Poisson(rho), 0.5, default_bank(window), 2000, RngStream(8, 2))
    b = factorization_test(Poisson(rho), 0.5, default_bank(window), 2000, RngStream(8, 2))
    assert [r.record() for r in a] == [r.record() for r in b]
    assert a[0].seed == 8 and a[0].stream_id == 2


def test_multi_way(rho, window):
    q = (0.2, 0.3, 0.5)
    bank = default_multi_bank(window, 3)
    ok = multi_factorization_test(Poisson(rho), q, bank, N, RngStream(9))
    assert not ok.family_reject
    bad = multi_factorization_test(DoubledPoisson(rho), q, bank, N, RngStream(10))
    assert bad.family_reject


def test_multi_way_arity_mismatch(rho, window):
    with pytest.raises(ValueError):
        multi_factorization_test(Poisson(rho), (0.2, 0.3, 0.5), default_bank(window), N,
                                 RngStream(0))


@pytest.mark.parametrize("part", ["retained", "deleted"])
@pytest.mark.parametrize("model", [
    Poisson(DiscreteIntensity([0.5, 1.0])),
    MixedPoisson(DiscreteIntensity([0.5, 1.0]), ((0.5, 0.5), (1.5, 0.5))),
    DoubledPoisson(DiscreteIntensity([0.5, 1.0])),
    PolyaDifference(1.0, delta(0, 2) + delta(1), DiscreteSpace(2)),
], ids=["poisson", "mixed", "doubled", "polya"])
def test_marginal_consistency(model, part):
    f = base_functions(DiscreteSpace(2))[5]
    rep = marginal_consistency_test(model, 0.3, f, N, RngStream(11), part=part)
    assert not rep.reject
