"""Monte Carlo tests of the splitting factorization on continuous windows.

For a bank of test-function pairs ``(f, g)`` the statistic

    D = mean[exp(-nu(f) - eta(g))] - mean[exp(-nu(f))] * mean[exp(-eta'(g))]

compares paired splits ``(nu, eta)`` with deleted parts ``eta'`` from an
independent replicate, so ``E[D] = 0`` exactly when the splitting law is
the product of its marginals. Standard errors come from a nonparametric
bootstrap (default) or the delta method.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .measure import DiscreteSpace, Window, atom_values, indicator, tent
from .processes import ProcessModel, RngStream, as_generator, sample_batch
from .splitting import (
    RetentionVector,
    check_probability,
    sample_multi_splitting_batch,
    sample_splitting_batch,
    split_batch,
    thin_batch,
)

CONVERSE_NOTE = (
    "a finite bank can reject factorization but cannot certify it for every "
    "test function; passing is evidence, not proof, of the Poisson property"
)


@dataclass
class TestReport:
    __test__ = False

    name: str
    statistic: float
    stderr: float
    z_score: float
    n_samples: int
    p_value: float
    p_adjusted: float
    reject: bool
    z_crit: float
    seed: int | None = None
    stream_id: int | None = None

    def record(self) -> dict:
        return asdict(self)


@dataclass
class FamilyResult:
    """Per-test reports plus the Bonferroni-adjusted family decision."""

    reports: list
    family_reject: bool
    family_alpha: float
    note: str = field(default=CONVERSE_NOTE)

    @property
    def max_abs_z(self) -> float:
        return max((abs(r.z_score) for r in self.reports), default=0.0)

    @property
    def any_reject(self) -> bool:
        return any(r.reject for r in self.reports)

    def __iter__(self):
        return iter(self.reports)

    def __len__(self):
        return len(self.reports)

    def __getitem__(self, i):
        return self.reports[i]


class TestFunctionBank(list):
    """List of test-function tuples (pairs for two-way, n-tuples for n-way)."""

    __test__ = False

    def __init__(self, members=()):
        members = [tuple(m) for m in members]
        if members and len({len(m) for m in members}) != 1:
            raise ValueError("bank members must all have the same arity")
        super().__init__(members)

    @property
    def arity(self) -> int:
        return len(self[0]) if self else 0


def base_functions(space) -> list:
    """Twelve bounded test functions on ``space`` used to build banks."""
    if isinstance(space, DiscreteSpace):
        return _discrete_functions(space)
    window = space
    lo = np.asarray(window.lower)
    span = np.asarray(window.upper) - lo
    d = window.d

    def box(a, b):
        a_vec = lo + span * np.asarray(a if np.ndim(a) else [a] * d, dtype=float)
        b_vec = lo + span * np.asarray(b if np.ndim(b) else [b] * d, dtype=float)
        return Window(a_vec, b_vec)

    def at(u):
        return lo + span * np.full(d, u)

    left = box([0.0] + [0.0] * (d - 1), [0.5] + [1.0] * (d - 1))
    right = box([0.5] + [0.0] * (d - 1), [1.0] + [1.0] * (d - 1))
    scale = float(span.min())
    return [
        indicator(window, 0.5, "half*1[W]"),            # 0
        indicator(window, 0.3, "0.3*1[W]"),             # 1
        indicator(left, 1.0, "1[left]"),                # 2
        indicator(right, 1.0, "1[right]"),              # 3
        indicator(box(0.0, 0.5), 1.0, "1[corner]"),     # 4
        tent(at(0.5), 0.5 * scale, 1.0, "tent(c,.5)"),  # 5
        tent(at(0.25), 0.25 * scale, 1.0, "tent(.25)"),  # 6
        tent(at(0.75), 0.25 * scale, 1.0, "tent(.75)"),  # 7
        indicator(box(0.25, 0.75), 1.0, "1[center]"),   # 8
        indicator(window, 2.0, "2*1[W]"),               # 9
        tent(at(0.5), 0.5 * scale, 2.0, "2*tent(c,.5)"),  # 10
        tent(at(0.5), 0.35 * scale, 0.5, "tent(c,.35)"),  # 11
    ]


def _discrete_functions(space: DiscreteSpace) -> list:
    k = space.k
    ramp = (np.arange(k) + 1.0) / k
    fall = (k - np.arange(k)) / k
    first = np.eye(k)[0]
    last = np.eye(k)[k - 1]
    return [
        indicator(space, 0.5, "half*1[all]"),
        indicator(space, 0.3, "0.3*1[all]"),
        atom_values(first, "1[first]"),
        atom_values(last, "1[last]"),
        atom_values(0.5 * first, "0.5*1[first]"),
        atom_values(ramp, "ramp"),
        atom_values(0.8 * first, "0.8*1[first]"),
        atom_values(fall, "fall"),
        atom_values(np.eye(k)[k // 2], "1[middle]"),
        indicator(space, 2.0, "2*1[all]"),
        atom_values(2.0 * ramp, "2*ramp"),
        atom_values(0.5 * ramp, "0.5*ramp"),
    ]


_PAIRS = [(0, 0), (9, 1), (2, 3), (4, 0), (5, 5), (6, 7), (8, 9), (10, 1), (2, 10), (9, 11)]


def default_bank(space) -> TestFunctionBank:
    """Ten pairs of scaled indicators and tents, disjoint and overlapping."""
    base = base_functions(space)
    return TestFunctionBank((base[i], base[j]) for i, j in _PAIRS)


def default_multi_bank(space, n_parts: int) -> TestFunctionBank:
    base = base_functions(space)
    order = [9, 0, 5, 2, 3, 10, 8, 4, 6, 7, 1, 11]
    return TestFunctionBank(
        tuple(base[order[(i + m) % len(order)]] for m in range(n_parts)) for i in range(10))


# ---------------------------------------------------------------------------
# Bootstrap machinery
# ---------------------------------------------------------------------------


def _children(rng, count: int) -> list:
    if isinstance(rng, RngStream):
        return [rng.spawn(i) for i in range(count)]
    return as_generator(rng).spawn(count)


def bootstrap_means(values: np.ndarray, resamples: int, gen, chunk: int = 50) -> np.ndarray:
    """Column means of ``resamples`` row-resamples of ``values`` ``(n, cols)``."""
    n = values.shape[0]
    out = np.empty((resamples, values.shape[1]))
    for start in range(0, resamples, chunk):
        b = min(chunk, resamples - start)
        idx = gen.integers(0, n, size=(b, n))
        W = np.stack([np.bincount(row, minlength=n) for row in idx]).astype(float)
        out[start:start + b] = W @ values / n
    return out


def _reports(names, stats_, stderrs, n, z_crit, rng, family_alpha) -> FamilyResult:
    m = len(stats_)
    seed = rng.seed if isinstance(rng, RngStream) else None
    stream = rng.stream_id if isinstance(rng, RngStream) else None
    reports = []
    for name, d, se in zip(names, stats_, stderrs):
        if se > 0:
            z = d / se
        else:
            z = 0.0 if d == 0 else math.copysign(math.inf, d)
        p = float(2 * norm.sf(abs(z)))
        reports.append(TestReport(name, float(d), float(se), float(z), int(n), p,
                                  min(1.0, m * p), bool(abs(z) > z_crit), z_crit, seed, stream))
    alpha = 2 * norm.sf(z_crit) if family_alpha is None else family_alpha
    return FamilyResult(reports, any(r.p_adjusted < alpha for r in reports), float(alpha))


def _check_n(n: int):
    if n < 1000:
        raise ValueError("statistical tests need at least 1000 samples")


def _product_statistic(joint, margs):
    """``mean(joint) - prod_m mean(marg_m)``, per column."""
    return joint.mean(axis=0) - np.prod([m.mean(axis=0) for m in margs], axis=0)


def _delta_stderr(joint: np.ndarray, margs: list) -> np.ndarray:
    """Delta-method standard error of ``mean(joint) - prod_m mean(marg_m)``.

    ``joint`` uses one sample set; each entry of ``margs`` its own
    independent set, so the variance is a sum of independent terms.
    """
    n = joint.shape[0]
    means = [m.mean(axis=0) for m in margs]
    var = joint.var(axis=0, ddof=1) / n
    for i, m in enumerate(margs):
        others = np.prod([mu for j, mu in enumerate(means) if j != i], axis=0)
        var = var + others**2 * m.var(axis=0, ddof=1) / m.shape[0]
    return np.sqrt(var)


def _two_way_delta(a, b, c) -> np.ndarray:
    n1, n2 = a.shape[0], c.shape[0]
    C = c.mean(axis=0)
    B = b.mean(axis=0)
    return np.sqrt((a - C * b).var(axis=0, ddof=1) / n1 + B**2 * c.var(axis=0, ddof=1) / n2)


# ---------------------------------------------------------------------------
# Tests
# ---------------------------------------------------------------------------


def factorization_test(model: ProcessModel, q: float, bank: TestFunctionBank, n: int, rng,
                       bootstrap: int = 500, stderr_method: str = "bootstrap",
                       z_crit: float = 4.0, family_alpha: float | None = None) -> FamilyResult:
    """Test ``S_q(P) = Gamma_q(P) x Gamma_{1-q}(P)`` on every pair of ``bank``.

    The family decision rejects when any Bonferroni-adjusted p-value falls
    below ``family_alpha`` (default: the two-sided ``z_crit`` level).
    """
    q = check_probability(q)
    _check_n(n)
    if bank.arity != 2:
        raise ValueError("two-way factorization needs a bank of pairs")
    r_main, r_rep, r_boot = _children(rng, 3)
    nu, eta = sample_splitting_batch(model, q, n, r_main)
    _, eta_rep = sample_splitting_batch(model, q, n, r_rep)

    nf = np.column_stack([nu.integrate(f) for f, _ in bank])
    eg = np.column_stack([eta.integrate(g) for _, g in bank])
    a = np.exp(-nf - eg)
    b = np.exp(-nf)
    c = np.exp(-np.column_stack([eta_rep.integrate(g) for _, g in bank]))
    stat = a.mean(axis=0) - b.mean(axis=0) * c.mean(axis=0)

    if stderr_method == "bootstrap":
        gen = as_generator(r_boot)
        ab = bootstrap_means(np.hstack([a, b]), bootstrap, gen)
        cb = bootstrap_means(c, bootstrap, gen)
        m = len(bank)
        boot = ab[:, :m] - ab[:, m:] * cb
        se = boot.std(axis=0, ddof=1)
    elif stderr_method == "delta":
        se = _two_way_delta(a, b, c)
    else:
        raise ValueError(f"unknown stderr method {stderr_method!r}")
    names = [f"({f.name}, {g.name})" for f, g in bank]
    return _reports(names, stat, se, n, z_crit, rng, family_alpha)


def multi_factorization_test(model: ProcessModel, q: Sequence[float], bank: TestFunctionBank,
                             n: int, rng, bootstrap: int = 500,
                             stderr_method: str = "bootstrap", z_crit: float = 4.0,
                             family_alpha: float | None = None) -> FamilyResult:
    """n-way analogue: joint products of ``exp(-kappa_m(f_m))`` against the
    product of marginals, each marginal taken from its own replicate split."""
    q = RetentionVector(q)
    _check_n(n)
    n_parts = len(q)
    if bank.arity != n_parts:
        raise ValueError(f"bank arity {bank.arity} does not match {n_parts} parts")
    streams = _children(rng, n_parts + 2)
    parts = sample_multi_splitting_batch(model, q, n, streams[0])
    exps = [np.exp(-np.column_stack([parts[m].integrate(fs[m]) for fs in bank]))
            for m in range(n_parts)]
    joint = np.prod(exps, axis=0)
    margs = []
    for m in range(n_parts):
        rep = sample_multi_splitting_batch(model, q, n, streams[m + 1])
        margs.append(np.exp(-np.column_stack([rep[m].integrate(fs[m]) for fs in bank])))
    stat = _product_statistic(joint, margs)

    if stderr_method == "bootstrap":
        gen = as_generator(streams[-1])
        boot = bootstrap_means(joint, bootstrap, gen)
        prod = np.ones_like(boot)
        for mg in margs:
            prod = prod * bootstrap_means(mg, bootstrap, gen)
        se = (boot - prod).std(axis=0, ddof=1)
    elif stderr_method == "delta":
        se = _delta_stderr(joint, margs)
    else:
        raise ValueError(f"unknown stderr method {stderr_method!r}")
    names = ["(" + ", ".join(f.name for f in fs) + ")" for fs in bank]
    return _reports(names, stat, se, n, z_crit, rng, family_alpha)


def marginal_consistency_test(model: ProcessModel, q: float, f, n: int, rng,
                              part: str = "retained", z_crit: float = 4.0) -> TestReport:
    """Paired comparison of a splitting-law marginal with a direct thinning.

    On each draw ``mu`` the retained (or deleted) part of an independent
    ``q``-split is compared with an independent ``q`` (or ``1 - q``)
    thinning of the same ``mu`` through ``exp(-(.)(f))``.
    """
    q = check_probability(q)
    _check_n(n)
    r_mu, r_split, r_thin = _children(rng, 3)
    batch = sample_batch(model, n, r_mu)
    nu, eta = split_batch(batch, q, r_split)
    if part == "retained":
        target, direct = nu, thin_batch(batch, q, r_thin)
    elif part == "deleted":
        target, direct = eta, thin_batch(batch, 1.0 - q, r_thin)
    else:
        raise ValueError("part must be 'retained' or 'deleted'")
    d = np.exp(-target.integrate(f)) - np.exp(-direct.integrate(f))
    se = float(d.std(ddof=1) / math.sqrt(n))
    result = _reports([f"{part}:{f.name}"], [float(d.mean())], [se], n, z_crit, rng, None)
    return result.reports[0]
