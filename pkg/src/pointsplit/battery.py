"""The exact identity battery run by ``pointsplit exact-verify``."""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from . import exact
from .exact import ConfigTable
from .measure import PointMeasure
from .processes import Poisson, ProcessModel
from .splitting import RetentionVector
from .suites import lemma_basis

LEMMA_Q_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def record(self) -> dict:
        return asdict(self)


def lemma_battery(k: int, max_total: int = 8, qs=LEMMA_Q_GRID, basis=None) -> CheckResult:
    """Papangelou identity of ``T^mu_q`` for every ``mu`` with at most ``max_total`` points."""
    basis = lemma_basis(k) if basis is None else basis
    worst, count = 0.0, 0
    for counts in itertools.product(range(max_total + 1), repeat=k):
        if sum(counts) > max_total:
            continue
        mu = PointMeasure.from_counts(counts)
        for q in qs:
            for h in basis:
                lhs, rhs = exact.thinning_campbell(mu, q, h)
                worst = max(worst, abs(lhs - rhs))
                count += 1
    return CheckResult("thinning_papangelou", worst, 1e-12, worst <= 1e-12,
                       {"checks": count, "basis_size": len(basis), "max_total": max_total})


def _tv_check(name, joint, other) -> CheckResult:
    tv = exact.tv_distance(joint, other)
    slack = exact.truncation_slack(joint, other)
    return CheckResult(name, tv.lattice, slack, tv.lattice <= slack,
                       {"tv_bound": tv.bound})


def exact_battery(table: ConfigTable, q: float, retention=None, model: ProcessModel | None = None,
                  exact_tol: float = 1e-12, kernel_tol: float = 1e-10,
                  lemma_max_total: int = 4, h_suite=None) -> list:
    """Run every exact identity applicable to ``table`` and return the results.

    Identities that characterize the Poisson process (factorization, kernel
    independence, the product step of the Campbell chain) fail on
    non-Poisson tables; the remaining checks hold for every law.
    """
    k = table.k
    results = [lemma_battery(k, min(lemma_max_total, table.cap), qs=(q,))]

    joint = exact.exact_splitting(table, q)
    thin_q, thin_r = exact.exact_thin(table, q), exact.exact_thin(table, 1.0 - q)
    gap = max(float(np.abs(joint.marginal(0).prob - thin_q.prob).max()),
              float(np.abs(joint.marginal(1).prob - thin_r.prob).max()))
    results.append(CheckResult("splitting_marginals", gap, exact_tol, gap <= exact_tol))
    results.append(_tv_check("factorization", joint,
                             exact.product_table([thin_q, thin_r])))

    h_suite = lemma_basis(k)[:6] if h_suite is None else h_suite
    worst, failing = 0.0, []
    for h in h_suite:
        chain = exact.campbell_chain(table, q, h)
        for step, gap_ in chain.gaps().items():
            allowed = exact_tol * max(1.0, abs(chain.steps["campbell"]))
            if step in chain.SLACK_STEPS:
                allowed += chain.slack
            excess = gap_ - allowed
            worst = max(worst, gap_)
            if excess > 0:
                failing.append(f"{h.name}:{step}")
    results.append(CheckResult("campbell_chain", worst, exact_tol, not failing,
                               {"failing_steps": failing}))

    worst_karr, worst_excess, worst_tv, indep_fail = 0.0, 0.0, 0.0, []
    for config, _ in thin_q.items():
        direct = joint.conditional(0, config)
        karr = exact.karr_splitting_kernel(table, q, config)
        worst_karr = max(worst_karr, exact.tv_distance(karr, direct).lattice)
        tv = exact.tv_distance(karr, thin_r).lattice
        excess = tv - exact.truncation_slack(karr, thin_r)
        worst_tv = max(worst_tv, tv)
        worst_excess = max(worst_excess, excess)
        if excess > 0:
            indep_fail.append(list(config))
    results.append(CheckResult("karr_equals_conditional", worst_karr, kernel_tol,
                               worst_karr <= kernel_tol))
    # value is the largest TV not explained by truncation; 0 means independent
    results.append(CheckResult("kernel_independence", max(worst_excess, 0.0), 0.0, not indep_fail,
                               {"max_lattice_tv": worst_tv, "violations": len(indep_fail),
                                "violating_configs": indep_fail[:10]}))

    if retention is not None:
        rv = RetentionVector(retention)
        multi = exact.exact_multi_splitting(table, rv)
        seq = exact.exact_multi_splitting(table, rv, method="sequential")
        diff = float(np.abs(multi.prob - seq.prob).max())
        results.append(CheckResult("multi_sequential_vs_multinomial", diff, exact_tol,
                                   diff <= exact_tol))
        coarse = rv.coalesce_last()
        if len(rv) > 2:
            reference = exact.exact_multi_splitting(table, coarse)
        else:
            reference = table
        merged = exact.coalesce(multi, len(rv) - 2)
        rec = float(np.abs(merged.prob - reference.prob).max())
        results.append(CheckResult("multi_recursion", rec, exact_tol, rec <= exact_tol))
        results.append(_tv_check("multi_factorization", multi,
                                 exact.product_table([exact.exact_thin(table, qm) for qm in rv])))

    if isinstance(model, Poisson):
        w = model.rho.weights
        thinned = exact.enumerate_poisson(q * w, table.cap)
        tv = exact.tv_distance(thin_q, thinned)
        slack = exact.truncation_slack(thin_q, thinned) + exact_tol
        results.append(CheckResult("poisson_thinning", tv.lattice, slack, tv.lattice <= slack))
        worst_sl = 0.0
        for config, _ in table.items():
            if sum(config) == 0:
                continue
            palm = exact.reduced_palm(table, config)
            upper = [table.cap - c for c in config]
            worst_sl = max(worst_sl, exact.tv_distance(palm, table.restrict(upper)).lattice)
        results.append(CheckResult("slivnyak_reduced_palm", worst_sl, exact_tol,
                                   worst_sl <= exact_tol))
    return results
