"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python tests/test_acceptance.py``.
"""
import math
import time

import numpy as np
import pytest

from pointsplit import exact
from pointsplit.battery import lemma_battery
from pointsplit.cli import main as cli_main
from pointsplit.formats import format_record
from pointsplit.functionals import (
    CampbellTestFunction,
    factorization_laplace_identity_check,
    mecke_residual,
)
from pointsplit.measure import (
    DensityIntensity,
    DiscreteIntensity,
    DiscreteSpace,
    Window,
    atom_values,
    delta,
)
from pointsplit.processes import (
    DoubledPoisson,
    MixedPoisson,
    Poisson,
    PolyaDifference,
    RngStream,
    first_moment,
)
from pointsplit.stats import (
    base_functions,
    default_bank,
    factorization_test,
    marginal_consistency_test,
)
from pointsplit.suites import campbell_suite

Q_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
MIXED_SCALES = ((0.5, 0.5), (1.5, 0.5))
# frozen regression values: k = 1, unit weight, cap 12, q = 1/2
MIXED_TV_M12 = 0.04695096779106826
DOUBLED_TV_M12 = 0.439755008023133
N_MC = 100_000


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, started):
        line = (f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail} "
                f"({time.perf_counter() - started:.1f}s)")
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


def test_criterion_01_thinning_papangelou_battery(report):
    t0 = time.perf_counter()
    results = [lemma_battery(k, max_total=8) for k in (1, 2, 3)]
    worst = max(r.value for r in results)
    checks = sum(r.detail["checks"] for r in results)
    basis = min(r.detail["basis_size"] for r in results)
    ok = worst <= 1e-12 and basis >= 20
    report(1, ok, f"{checks} checks, basis {basis}, max |lhs-rhs| = {worst:.2e} (tol 1e-12)", t0)
    assert ok


def test_criterion_02_poisson_split_factorizes_exactly(report):
    t0 = time.perf_counter()
    weights = ([1.0], [0.9, 0.9], [0.5, 1.0], [1.0, 1.0], [0.3, 0.7])
    worst_excess, bounds, failures = -math.inf, [], []
    for w in weights:
        table = exact.enumerate_poisson(DiscreteIntensity(w), cap=8)
        for q in Q_GRID:
            joint = exact.exact_splitting(table, q)
            prod = exact.product_table([exact.exact_thin(table, q), exact.exact_thin(table, 1 - q)])
            tv = exact.tv_distance(joint, prod)
            slack = exact.truncation_slack(joint, prod)
            bounds.append(tv.bound)
            worst_excess = max(worst_excess, tv.lattice - slack)
            if tv.lattice > slack:
                failures.append((w, q))
    ok = not failures
    report(2, ok, f"{len(bounds)} (rho, q) cases, TV <= tail bound in all; "
                  f"max tail bound {max(bounds):.2e}, max TV - slack {worst_excess:.2e}", t0)
    assert ok, failures


def test_criterion_03_laplace_route(report):
    t0 = time.perf_counter()
    gen = np.random.default_rng(3)
    worst_d = 0.0
    n_discrete = 0
    for _ in range(60):
        k = int(gen.integers(1, 4))
        rho = DiscreteIntensity(gen.uniform(0, 2, k))
        f, g = atom_values(gen.uniform(0, 3, k)), atom_values(gen.uniform(0, 3, k))
        lhs, rhs = factorization_laplace_identity_check(rho, f, g, float(gen.uniform(0.01, 0.99)))
        worst_d = max(worst_d, abs(lhs - rhs))
        n_discrete += 1
    window = Window.unit(2)
    intensities = [DensityIntensity.constant(window, 2.0),
                   DensityIntensity.linear(window, 0.5, [1.0, 2.0])]
    base = base_functions(window)
    worst_c, n_cont = 0.0, 0
    for rho in intensities:
        for i, j in [(0, 5), (2, 3), (9, 11), (6, 7), (8, 10)]:
            for q in (0.2, 0.5, 0.8):
                lhs, rhs = factorization_laplace_identity_check(rho, base[i], base[j], q)
                worst_c = max(worst_c, abs(lhs - rhs))
                n_cont += 1
    ok = n_discrete >= 50 and worst_d <= 1e-10 and worst_c <= 1e-8
    report(3, ok, f"{n_discrete} discrete tuples max diff {worst_d:.1e} (tol 1e-10); "
                  f"{n_cont} window tuples max diff {worst_c:.1e} (tol 1e-8)", t0)
    assert ok


def test_criterion_04_detection_of_non_poisson(report):
    t0 = time.perf_counter()
    rho = DiscreteIntensity([1.0])
    mixed = exact.factorization_distance(
        exact.enumerate_model(MixedPoisson(rho, MIXED_SCALES), cap=12), 0.5).lattice
    doubled = exact.factorization_distance(
        exact.enumerate_model(DoubledPoisson(rho), cap=12), 0.5).lattice
    ok = (mixed > 0.01 and doubled > 0.01
          and abs(mixed - MIXED_TV_M12) <= 1e-9 and abs(doubled - DOUBLED_TV_M12) <= 1e-9)
    report(4, ok, f"MixedPoisson TV = {mixed:.12f}, DoubledPoisson TV = {doubled:.12f} "
                  f"(> 0.01, frozen within 1e-9)", t0)
    assert ok


def test_criterion_05_n_way_split(report):
    t0 = time.perf_counter()
    table = exact.enumerate_poisson(DiscreteIntensity([0.5, 1.0]), cap=6)
    vectors = [(1 / 3, 1 / 3, 1 / 3), (0.2, 0.3, 0.5), (0.25, 0.25, 0.25, 0.25),
               (0.1, 0.2, 0.3, 0.4)]
    tv_ok, worst_rec, worst_seq = True, 0.0, 0.0
    for q in vectors:
        multi = exact.exact_multi_splitting(table, q)
        seq = exact.exact_multi_splitting(table, q, method="sequential")
        prod = exact.product_table([exact.exact_thin(table, x) for x in q])
        tv = exact.tv_distance(multi, prod)
        tv_ok &= tv.lattice <= exact.truncation_slack(multi, prod)
        worst_seq = max(worst_seq, float(np.abs(multi.prob - seq.prob).max()))
        coarse_q = q[:-2] + (q[-2] + q[-1],)
        coarse = exact.exact_multi_splitting(table, coarse_q)
        worst_rec = max(worst_rec,
                        float(np.abs(exact.coalesce(multi, len(q) - 2).prob - coarse.prob).max()))
    ok = tv_ok and worst_rec <= 1e-12 and worst_seq <= 1e-12
    report(5, ok, f"n in {{3,4}}: TV <= tail bound {tv_ok}; recursion {worst_rec:.1e}, "
                  f"sequential vs multinomial {worst_seq:.1e} (tol 1e-12)", t0)
    assert ok


def test_criterion_06_karr_kernel(report):
    t0 = time.perf_counter()
    rho = DiscreteIntensity([0.5, 1.0])
    models = {
        "Poisson": Poisson(rho),
        "PolyaDifference": PolyaDifference(1.0, delta(0, 2) + delta(1, 1), DiscreteSpace(2)),
        "MixedPoisson": MixedPoisson(rho, MIXED_SCALES),
        "DoubledPoisson": DoubledPoisson(rho),
    }
    q = 0.4
    worst, pairs = 0.0, 0
    indep_excess = -math.inf
    for name, model in models.items():
        table = exact.enumerate_model(model, cap=6)
        joint = exact.exact_splitting(table, q)
        deleted = joint.marginal(1)
        for nu, _ in exact.exact_thin(table, q).items():
            karr = exact.karr_splitting_kernel(table, q, nu)
            worst = max(worst, exact.tv_distance(karr, joint.conditional(0, nu)).lattice)
            pairs += 1
            if name == "Poisson":
                tv = exact.tv_distance(karr, deleted).lattice
                indep_excess = max(indep_excess, tv - exact.truncation_slack(karr, deleted))
    ok = worst <= 1e-10 and indep_excess <= 0
    report(6, ok, f"{pairs} (model, nu) pairs, max TV(Karr, conditional) = {worst:.1e} "
                  f"(tol 1e-10); Poisson kernel max TV - tail bound = {indep_excess:.1e}", t0)
    assert ok


def test_criterion_07_mecke_residual(report):
    t0 = time.perf_counter()
    rho_d = DiscreteIntensity([0.5, 1.0])
    window = Window.unit(2)
    rho_w = DensityIntensity.constant(window, 2.0)
    root = RngStream(70)
    zs = []
    for i, h in enumerate(campbell_suite(DiscreteSpace(2))):
        zs.append(mecke_residual(Poisson(rho_d), rho_d, h, N_MC, root.spawn(i)).z_score)
    for i, h in enumerate(campbell_suite(window)):
        zs.append(mecke_residual(Poisson(rho_w), rho_w, h, N_MC, root.spawn(100 + i)).z_score)
    polya = PolyaDifference(1.0, delta(0, 2), DiscreteSpace(1))
    h = CampbellTestFunction(lambda x, k: float(k[x] == 1), 1.0, "1{kappa({x})=1}")
    est = mecke_residual(polya, first_moment(polya), h, N_MC, root.spawn(200))
    ok = max(abs(z) for z in zs) <= 4 and abs(est.z_score) > 6
    report(7, ok, f"Poisson max |z| = {max(abs(z) for z in zs):.2f} over {len(zs)} h "
                  f"(<= 4); Polya residual {est.value:.4f} at z = {est.z_score:.1f} (> 6)", t0)
    assert ok


def test_criterion_08_monte_carlo_factorization(report):
    t0 = time.perf_counter()
    window = Window.unit(2)
    rho = DensityIntensity.constant(window, 2.0)
    bank = default_bank(window)
    poisson = factorization_test(Poisson(rho), 0.5, bank, N_MC, RngStream(80))
    mixed = factorization_test(MixedPoisson(rho, MIXED_SCALES), 0.5, bank, N_MC, RngStream(81))
    rejections = sum(
        factorization_test(Poisson(rho), 0.5, bank, N_MC, RngStream(1000 + s),
                           stderr_method="delta").family_reject
        for s in range(100))
    ok = (not poisson.family_reject and poisson.max_abs_z <= 4
          and mixed.max_abs_z > 6 and rejections <= 5)
    report(8, ok, f"Poisson max |z| = {poisson.max_abs_z:.2f}, MixedPoisson max |z| = "
                  f"{mixed.max_abs_z:.1f}, null family rejections {rejections}/100 (<= 5)", t0)
    assert ok


def test_criterion_09_marginal_identities(report):
    t0 = time.perf_counter()
    rho = DiscreteIntensity([0.5, 1.0])
    window = Window.unit(2)
    rho_w = DensityIntensity.constant(window, 2.0)
    models = [
        (Poisson(rho), DiscreteSpace(2)),
        (PolyaDifference(1.0, delta(0, 2) + delta(1, 1), DiscreteSpace(2)), DiscreteSpace(2)),
        (MixedPoisson(rho, MIXED_SCALES), DiscreteSpace(2)),
        (DoubledPoisson(rho), DiscreteSpace(2)),
        (Poisson(rho_w), window),
        (MixedPoisson(rho_w, MIXED_SCALES), window),
        (DoubledPoisson(rho_w), window),
    ]
    root = RngStream(90)
    zs = []
    for i, (model, space) in enumerate(models):
        f = base_functions(space)[5]
        for j, part in enumerate(("retained", "deleted")):
            rep = marginal_consistency_test(model, 0.3, f, N_MC, root.spawn(10 * i + j), part=part)
            zs.append(rep.z_score)
    worst = max(abs(z) for z in zs)
    ok = worst <= 4
    report(9, ok, f"{len(zs)} (model, part) tests, max |z| = {worst:.2f} (<= 4)", t0)
    assert ok


def test_criterion_10_reproducibility(report, tmp_path):
    t0 = time.perf_counter()
    discrete = tmp_path / "d.yaml"
    discrete.write_text("space: {kind: discrete, atoms: 2}\nintensity: {weights: [0.5, 1.0]}\n"
                        "model: {kind: mixed_poisson, scales: [[0.5, 0.5], [1.5, 0.5]]}\n"
                        "q: 0.3\nretention: [0.2, 0.3, 0.5]\nn_samples: 5000\nseed: 10\n")
    cont = tmp_path / "w.yaml"
    cont.write_text("space: {kind: window, lower: [0, 0], upper: [1, 1]}\n"
                    "intensity: {density: {kind: constant, value: 2.0}}\n"
                    "model: {kind: poisson}\nn_samples: 5000\nseed: 10\nbootstrap: 100\n")
    runs = [(discrete, c) for c in ("sample", "thin", "split", "multi-split", "laplace",
                                    "campbell", "mecke", "exact-verify")]
    runs += [(cont, "factorization-test"), (cont, "mecke"), (cont, "laplace")]
    identical = 0
    for i, (cfg, command) in enumerate(runs):
        outs = []
        for rep in range(2):
            out = tmp_path / f"{i}-{rep}"
            cli_main([command, "--config", str(cfg), "--out", str(out), "--jobs", str(1 + 2 * rep)])
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        identical += outs[0] == outs[1]

    def criterion_records(seed):
        rho = DensityIntensity.constant(Window.unit(2), 2.0)
        res = factorization_test(Poisson(rho), 0.5, default_bank(Window.unit(2)), 2000,
                                 RngStream(seed))
        return "\n".join(format_record(r.record()) for r in res)

    same_api = criterion_records(5) == criterion_records(5)
    ok = identical == len(runs) and same_api
    report(10, ok, f"{identical}/{len(runs)} CLI runs byte-identical across reruns "
                   f"(jobs 1 vs 3); library records identical: {same_api}", t0)
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v", "-s"]))
