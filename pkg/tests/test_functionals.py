import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointsplit import exact
from pointsplit.functionals import (
    CampbellTestFunction,
    EstimateWithError,
    campbell_estimate,
    factorization_laplace_identity_check,
    laplace_closed_form,
    laplace_estimate,
    mecke_residual,
    polya_papangelou_check,
    pool_estimates,
    poisson_laplace_closed_form,
    thinning_papangelou_check,
    v_function,
)
from pointsplit.measure import (
    DensityIntensity,
    DiscreteIntensity,
    DiscreteSpace,
    Window,
    atom_values,
    delta,
    indicator,
    tent,
)
from pointsplit.processes import DoubledPoisson, MixedPoisson, Poisson, PolyaDifference, RngStream
from pointsplit.suites import campbell_suite, lemma_basis

DISCRETE_MODELS = [
    Poisson(DiscreteIntensity([0.5, 1.0])),
    MixedPoisson(DiscreteIntensity([0.5, 1.0]), ((0.5, 0.5), (1.5, 0.5))),
    DoubledPoisson(DiscreteIntensity([0.5, 1.0])),
    PolyaDifference(1.0, delta(0, 2) + delta(1), DiscreteSpace(2)),
]
IDS = ["poisson", "mixed", "doubled", "polya"]


def test_estimate_basics():
    est = EstimateWithError.from_samples(np.array([1.0, 2.0, 3.0, 4.0]))
    assert est.value == 2.5
    assert est.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert est.within(2.5 + 3 * est.stderr, 4.0)
    assert EstimateWithError(0.0, 0.0, 10).z_score == 0.0


def test_pool_estimates_matches_concatenation():
    gen = np.random.default_rng(0)
    a, b = gen.normal(size=300), gen.normal(1.0, size=500)
    pooled = pool_estimates([EstimateWithError.from_samples(a), EstimateWithError.from_samples(b)])
    whole = EstimateWithError.from_samples(np.concatenate([a, b]))
    assert pooled.value == pytest.approx(whole.value, rel=1e-12)
    assert pooled.stderr == pytest.approx(whole.stderr, rel=1e-12)


def test_poisson_laplace_of_zero_function_is_one():
    f = atom_values([0.0, 0.0])
    assert poisson_laplace_closed_form(DiscreteIntensity([0.5, 1.0]), f) == 1.0


def test_poisson_laplace_closed_form_discrete():
    f = atom_values([math.log(2), 0.0])
    # e^{-rho(a)(1 - 1/2)}
    assert poisson_laplace_closed_form(DiscreteIntensity([1.0, 3.0]), f) == pytest.approx(
        math.exp(-0.5), abs=1e-15)


@pytest.mark.parametrize("model", DISCRETE_MODELS, ids=IDS)
def test_laplace_estimate_matches_closed_form(model):
    f = atom_values([0.7, 0.2])
    est = laplace_estimate(model, f, 40_000, RngStream(1))
    assert est.within(laplace_closed_form(model, f), 4.0)


@pytest.mark.parametrize("model", DISCRETE_MODELS[:3], ids=IDS[:3])
def test_laplace_closed_form_against_exact_table(model):
    f = atom_values([0.7, 0.2])
    table = exact.enumerate_model(model, cap=14)
    fv = np.array([0.7, 0.2])
    val = sum(p * math.exp(-np.dot(c, fv)) for c, p in table.items())
    assert abs(val - laplace_closed_form(model, f)) <= table.tail_mass + 1e-12


def test_window_laplace_estimate(rho2):
    f = tent([0.5, 0.5], 0.5, 1.0)
    est = laplace_estimate(Poisson(rho2), f, 40_000, RngStream(2))
    assert est.within(poisson_laplace_closed_form(rho2, f), 4.0)


@settings(max_examples=40)
@given(st.lists(st.floats(0, 3), min_size=3, max_size=3),
       st.lists(st.floats(0, 3), min_size=3, max_size=3),
       st.lists(st.floats(0, 2), min_size=3, max_size=3),
       st.floats(0.01, 0.99))
def test_laplace_identity_discrete(fv, gv, w, q):
    lhs, rhs = factorization_laplace_identity_check(
        DiscreteIntensity(w), atom_values(fv), atom_values(gv), q)
    assert abs(lhs - rhs) <= 1e-10


def test_laplace_identity_window(rho2, unit_square):
    f = indicator(Window([0, 0], [0.5, 1]), 1.0)
    g = tent([0.5, 0.5], 0.3, 2.0)
    lhs, rhs = factorization_laplace_identity_check(rho2, f, g, 0.3)
    assert abs(lhs - rhs) <= 1e-8


def test_v_function_endpoints():
    f, g = atom_values([1.0, 0.0]), atom_values([0.0, 2.0])
    v = v_function(f, g, 0.5)
    np.testing.assert_allclose(v(np.array([0, 1])),
                               -np.log(0.5 * np.exp(-np.array([0.0, 2.0])) + 0.5 * np.exp(-np.array([1.0, 0.0]))))


@pytest.mark.parametrize("model", DISCRETE_MODELS, ids=IDS)
def test_campbell_estimate_against_exact(model):
    h = CampbellTestFunction(lambda x, mu: float(mu.total >= 2), 1.0)
    table = exact.enumerate_model(model, cap=10)
    est = campbell_estimate(model, h, 30_000, RngStream(3))
    assert est.within(exact.exact_campbell(table, h), 4.0)


def test_thinning_papangelou_battery():
    mu = delta(0, 2) + delta(1, 1) + delta(2, 3)
    for h in lemma_basis(3):
        for q in (0.1, 0.5, 0.9):
            lhs, rhs = thinning_papangelou_check(mu, q, h)
            assert abs(lhs - rhs) <= 1e-12


def test_polya_papangelou():
    mu = delta(0, 2)
    for h in lemma_basis(1):
        lhs, rhs = polya_papangelou_check(1.0, mu, h)
        assert abs(lhs - rhs) <= 1e-12


@pytest.mark.parametrize("h", campbell_suite(DiscreteSpace(2)), ids=lambda h: h.name)
def test_mecke_residual_zero_for_poisson_discrete(h):
    rho = DiscreteIntensity([0.5, 1.0])
    est = mecke_residual(Poisson(rho), rho, h, 20_000, RngStream(4))
    assert abs(est.z_score) <= 4.0


def test_mecke_residual_detects_polya():
    mu = delta(0, 2)
    model = PolyaDifference(1.0, mu, DiscreteSpace(1))
    h = CampbellTestFunction(lambda x, k: float(k[x] == 1), 1.0, "kappa({x})==1")
    est = mecke_residual(model, DiscreteIntensity([1.0]), h, 20_000, RngStream(5))
    assert est.value == pytest.approx(0.25, abs=5 * est.stderr)
    assert abs(est.z_score) > 6


def test_mecke_quadrature_and_mc_agree(rho2, unit_square):
    h = campbell_suite(unit_square)[1]
    mc = mecke_residual(Poisson(rho2), rho2, h, 5000, RngStream(6))
    quad = mecke_residual(Poisson(rho2), rho2, h, 2000, RngStream(7), integration="quadrature")
    assert abs(mc.z_score) <= 4 and abs(quad.z_score) <= 4


def test_mecke_zero_intensity_window(unit_square):
    rho = DensityIntensity.constant(unit_square, 0.0)
    h = CampbellTestFunction(lambda x, k: 1.0, 1.0)
    est = mecke_residual(Poisson(rho), rho, h, 100, RngStream(1))
    assert est.value == 0.0


def test_campbell_function_bound_check():
    h = CampbellTestFunction(lambda x, mu: 2.0, 1.0, "bad")
    with pytest.raises(ValueError):
        h(0, delta(0))
