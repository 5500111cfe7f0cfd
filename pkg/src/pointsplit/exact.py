"""Exact laws of point processes on tiny discrete spaces.

A law on configurations of a ``k``-atom space is stored as a dense array of
shape ``(M + 1,) * k`` indexed by multiplicity vectors, where ``M`` is the
per-atom truncation cap. Joint laws of ``n`` configurations use ``k * n``
axes in part-major order (all atoms of part 1, then part 2, ...). Mass lost
to truncation is carried in ``tail_mass`` and never renormalized away.

Transforms are pushforwards through per-atom channels: a binomial channel
for thinning, a two-output channel for splitting and a multinomial channel
for multi-splitting.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .exceptions import BudgetExceeded, ShapeMismatch, TooLarge, ZeroMassAt
from .measure import DiscreteIntensity, DiscreteSpace, PointMeasure
from .processes import (
    DoubledPoisson,
    MixedPoisson,
    Poisson,
    PolyaDifference,
    ProcessModel,
)
from .splitting import RetentionVector, check_probability, retention_to_sequential

DEFAULT_BUDGET = 10**7
ENUMERATION_CAP = 20


def _check_budget(entries: int, budget: int):
    if entries > budget:
        raise BudgetExceeded(f"table of {entries} entries exceeds budget {budget}")


class ConfigTable:
    """Probability table over multiplicity vectors of a ``k``-atom space.

    ``conditioning_error`` bounds the total variation distance introduced
    when a truncated law is conditioned and renormalized; it is zero for
    tables that are plain restrictions of the untruncated law.
    """

    n_parts = 1

    def __init__(self, prob: np.ndarray, tail_mass: float = 0.0,
                 conditioning_error: float = 0.0, k: int | None = None):
        prob = np.asarray(prob, dtype=float)
        self.prob = prob
        self.k = prob.ndim if k is None else k
        self.cap = prob.shape[0] - 1
        self.tail_mass = float(tail_mass)
        self.conditioning_error = float(conditioning_error)
        if any(s != self.cap + 1 for s in prob.shape):
            raise ShapeMismatch(f"table axes must all have length cap+1, got {prob.shape}")
        if np.any(prob < 0):
            raise ValueError("negative probability in table")
        total = float(prob.sum()) + self.tail_mass
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities plus tail sum to {total!r}, not 1")

    @property
    def entries(self) -> int:
        return self.prob.size

    def __getitem__(self, config) -> float:
        config = tuple(int(c) for c in np.ravel(config))
        if any(c > self.cap for c in config):
            return 0.0
        return float(self.prob[config])

    def items(self):
        """``(configuration, probability)`` pairs with positive probability."""
        for idx in zip(*np.nonzero(self.prob)):
            yield tuple(int(i) for i in idx), float(self.prob[idx])

    def first_moment(self) -> np.ndarray:
        """Expected multiplicity per atom (restricted to the lattice)."""
        grid = np.arange(self.cap + 1)
        axes = tuple(range(self.k))
        return np.array([
            np.tensordot(self.prob.sum(axis=tuple(a for a in axes if a != x)), grid, axes=1)
            for x in range(self.k)
        ])

    def restrict(self, upper: Sequence[int]) -> "ConfigTable":
        """Law conditioned on ``config <= upper`` and renormalized."""
        upper = [int(u) for u in upper]
        sel = tuple(slice(0, u + 1) for u in upper)
        out = np.zeros_like(self.prob)
        out[sel] = self.prob[sel]
        total = out.sum()
        if total <= 0:
            raise ZeroMassAt(tuple(upper), "no mass below the restriction bound")
        return ConfigTable(out / total, 0.0, k=self.k)

    def dump(self) -> str:
        lines = [f"# configtable k={self.k} cap={self.cap} parts={self.n_parts} "
                 f"tail={self.tail_mass!r} conditioning_error={self.conditioning_error!r}"]
        for config, p in self.items():
            blocks = [" ".join(map(str, config[m * self.k:(m + 1) * self.k]))
                      for m in range(self.n_parts)]
            lines.append(" | ".join(blocks) + f" {p!r}")
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return (f"{type(self).__name__}(k={self.k}, cap={self.cap}, parts={self.n_parts}, "
                f"tail={self.tail_mass:.3g})")


class JointConfigTable(ConfigTable):
    """Joint law of ``n_parts`` configurations on the same ``k``-atom space."""

    def __init__(self, prob, k: int, n_parts: int, tail_mass: float = 0.0,
                 conditioning_error: float = 0.0):
        if np.ndim(prob) != k * n_parts:
            raise ShapeMismatch(f"expected {k * n_parts} axes, got {np.ndim(prob)}")
        self.n_parts = n_parts
        super().__init__(prob, tail_mass, conditioning_error, k=k)

    def part_axes(self, m: int) -> list:
        return list(range(m * self.k, (m + 1) * self.k))

    def marginal(self, m: int) -> ConfigTable:
        others = tuple(a for a in range(self.prob.ndim) if a not in self.part_axes(m))
        return ConfigTable(self.prob.sum(axis=others), self.tail_mass, self.conditioning_error)

    def conditional(self, m: int, config: Sequence[int]) -> ConfigTable:
        """Law of the remaining parts given part ``m`` equals ``config``.

        The row is renormalized; since truncation can only remove mass from
        the row, the distance to the untruncated conditional law is at most
        ``tail_mass / row_mass``.
        """
        config = [int(c) for c in config]
        index = [slice(None)] * self.prob.ndim
        for i, a in enumerate(self.part_axes(m)):
            index[a] = config[i]
        row = self.prob[tuple(index)]
        mass = float(row.sum())
        if mass <= 0:
            raise ZeroMassAt(tuple(config))
        err = min(1.0, self.tail_mass / mass) + self.conditioning_error
        if self.n_parts == 2:
            return ConfigTable(row / mass, 0.0, err)
        return JointConfigTable(row / mass, self.k, self.n_parts - 1, 0.0, err)


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


def binomial_channel(cap: int, q: float) -> np.ndarray:
    """``B[m, j] = C(m, j) q^j (1 - q)^(m - j)``."""
    m = np.arange(cap + 1)[:, None]
    j = np.arange(cap + 1)[None, :]
    return np.where(j <= m, stats.binom.pmf(j, m, q), 0.0)


def split_channel(cap: int, q: float) -> np.ndarray:
    """``S[m, a, b] = B[m, a]`` when ``a + b = m``, else 0."""
    B = binomial_channel(cap, q)
    S = np.zeros((cap + 1,) * 3)
    for m in range(cap + 1):
        for a in range(m + 1):
            S[m, a, m - a] = B[m, a]
    return S


def multinomial_channel(cap: int, q: Sequence[float]) -> np.ndarray:
    """``C[m, a_1..a_n] = m! / prod(a_i!) * prod(q_i^a_i)`` when ``sum(a) = m``."""
    n = len(q)
    C = np.zeros((cap + 1,) * (n + 1))
    logq = np.log(np.asarray(q, dtype=float))
    for a in itertools.product(range(cap + 1), repeat=n):
        m = sum(a)
        if m > cap:
            continue
        a_arr = np.asarray(a)
        C[(m,) + a] = math.exp(gammaln(m + 1) - gammaln(a_arr + 1).sum() + a_arr @ logq)
    return C


def _sum_channel(cap: int) -> np.ndarray:
    """``A[a, b, c] = 1`` when ``a + b = c <= cap``."""
    A = np.zeros((cap + 1,) * 3)
    for a in range(cap + 1):
        for b in range(cap + 1 - a):
            A[a, b, a + b] = 1.0
    return A


def _refine_part(arr: np.ndarray, k: int, n_parts: int, part: int,
                 channel: np.ndarray, n_new: int) -> np.ndarray:
    """Replace part ``part`` by ``n_new`` parts drawn through ``channel`` atom-wise."""
    src = [part * k + i for i in range(k)]
    arr = np.moveaxis(arr, src, list(range(k)))
    for _ in range(k):
        arr = np.tensordot(arr, channel, axes=([0], [0]))
    others = (n_parts - 1) * k
    order = []
    for p in range(part):
        order += [p * k + i for i in range(k)]
    for j in range(n_new):
        order += [others + i * n_new + j for i in range(k)]
    for p in range(part + 1, n_parts):
        order += [(p - 1) * k + i for i in range(k)]
    return np.transpose(arr, order)


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def _as_weights(rho) -> np.ndarray:
    if isinstance(rho, DiscreteIntensity):
        return rho.weights
    if hasattr(rho, "window"):
        raise TypeError("exact enumeration needs a discrete intensity")
    return np.asarray(rho, dtype=float)


def _product_of_pmfs(pmfs: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(())
    for p in pmfs:
        out = np.multiply.outer(out, p)
    return out


def enumerate_poisson(rho, cap: int = 8, budget: int = DEFAULT_BUDGET) -> ConfigTable:
    """Truncated Poisson law: independent Poisson(weight) counts per atom."""
    w = _as_weights(rho)
    k = len(w)
    _check_budget(k * (cap + 1) ** k, budget)
    j = np.arange(cap + 1)
    prob = _product_of_pmfs([stats.poisson.pmf(j, lam) if lam > 0 else (j == 0) * 1.0
                             for lam in w])
    return ConfigTable(prob, max(0.0, 1.0 - math.fsum(prob.ravel())))


def enumerate_model(model: ProcessModel, cap: int = 8,
                    budget: int = DEFAULT_BUDGET) -> ConfigTable:
    if isinstance(model, Poisson):
        return enumerate_poisson(model.rho, cap, budget)
    if isinstance(model, MixedPoisson):
        w = _as_weights(model.rho)
        prob = 0.0
        for s, p in model.scales:
            prob = prob + p * enumerate_poisson(s * w, cap, budget).prob
        return ConfigTable(prob, max(0.0, 1.0 - math.fsum(np.ravel(prob))))
    if isinstance(model, DoubledPoisson):
        base = enumerate_poisson(model.rho, cap // 2, budget)
        prob = np.zeros((cap + 1,) * base.k)
        prob[tuple(slice(0, 2 * (cap // 2) + 1, 2) for _ in range(base.k))] = base.prob
        return ConfigTable(prob, base.tail_mass)
    if isinstance(model, PolyaDifference):
        if not isinstance(model.space, DiscreteSpace):
            raise TypeError("exact enumeration needs a discrete space")
        counts = model.mu.counts(model.space.k)
        if counts.max(initial=0) > cap:
            raise BudgetExceeded(f"configuration multiplicity {counts.max()} exceeds cap {cap}")
        _check_budget(model.space.k * (cap + 1) ** model.space.k, budget)
        j = np.arange(cap + 1)
        prob = _product_of_pmfs([stats.binom.pmf(j, c, model.retention) for c in counts])
        return ConfigTable(prob / prob.sum() if prob.sum() > 0 else prob, 0.0)
    raise TypeError(f"unknown process model {model!r}")


def point_mass(config: Sequence[int], cap: int) -> ConfigTable:
    prob = np.zeros((cap + 1,) * len(config))
    prob[tuple(int(c) for c in config)] = 1.0
    return ConfigTable(prob)


# ---------------------------------------------------------------------------
# Thinning and splitting
# ---------------------------------------------------------------------------


def exact_thin(table: ConfigTable, q: float) -> ConfigTable:
    """Law of the independent ``q``-thinning of a realization of ``table``."""
    q = check_probability(q)
    out = _refine_part(table.prob, table.k, 1, 0, binomial_channel(table.cap, q), 1)
    return ConfigTable(np.clip(out, 0.0, None), table.tail_mass)


def exact_splitting(table: ConfigTable, q: float,
                    budget: int = DEFAULT_BUDGET) -> JointConfigTable:
    """Joint law of ``(retained, deleted)`` under independent ``q``-splitting."""
    q = check_probability(q)
    _check_budget((table.cap + 1) ** (2 * table.k), budget)
    out = _refine_part(table.prob, table.k, 1, 0, split_channel(table.cap, q), 2)
    return JointConfigTable(np.clip(out, 0.0, None), table.k, 2, table.tail_mass)


def exact_multi_splitting(table: ConfigTable, q: Sequence[float],
                          budget: int = DEFAULT_BUDGET,
                          method: str = "multinomial") -> JointConfigTable:
    """Joint law of the ``n`` parts of a multi-split.

    ``method="multinomial"`` pushes each atom through a single multinomial
    channel; ``method="sequential"`` thins the running remainder with the
    sequential probabilities ``s_m``. The two constructions agree.
    """
    q = RetentionVector(q)
    n = len(q)
    _check_budget((table.cap + 1) ** (n * table.k), budget)
    if method == "multinomial":
        out = _refine_part(table.prob, table.k, 1, 0, multinomial_channel(table.cap, q), n)
    elif method == "sequential":
        s = retention_to_sequential(q)
        out = table.prob
        for m, sm in enumerate(s[:-1]):
            out = _refine_part(out, table.k, m + 1, m, split_channel(table.cap, sm), 2)
    else:
        raise ValueError(f"unknown construction {method!r}")
    return JointConfigTable(np.clip(out, 0.0, None), table.k, n, table.tail_mass)


def refine_part(joint: ConfigTable, m: int, s: float) -> JointConfigTable:
    """Split part ``m`` of ``joint`` into ``(s``-retained, remainder``)``."""
    s = check_probability(s, "s")
    n = joint.n_parts
    out = _refine_part(joint.prob, joint.k, n, m, split_channel(joint.cap, s), 2)
    return JointConfigTable(np.clip(out, 0.0, None), joint.k, n + 1, joint.tail_mass,
                            joint.conditioning_error)


def coalesce(joint: JointConfigTable, m: int) -> ConfigTable:
    """Merge parts ``m`` and ``m + 1`` by adding their configurations.

    Mass whose merged multiplicity would exceed the cap is moved to the tail.
    """
    k, n, cap = joint.k, joint.n_parts, joint.cap
    if not 0 <= m < n - 1:
        raise ValueError(f"cannot coalesce parts {m} and {m + 1} of {n}")
    first = [m * k + i for i in range(k)]
    second = [(m + 1) * k + i for i in range(k)]
    rest = [a for a in range(joint.prob.ndim) if a not in first + second]
    arr = np.transpose(joint.prob, first + second + rest)
    A = _sum_channel(cap)
    for i in range(k):
        arr = np.tensordot(arr, A, axes=([0, k - i], [0, 1]))
    # axes now: rest (part-major without m, m+1), then merged atoms
    n_rest = len(rest)
    order = []
    for p in range(m):
        order += [p * k + i for i in range(k)]
    order += [n_rest + i for i in range(k)]
    for p in range(m + 2, n):
        order += [(p - 2) * k + i for i in range(k)]
    arr = np.transpose(arr, order)
    tail = joint.tail_mass + max(0.0, float(joint.prob.sum() - arr.sum()))
    if n == 2:
        return ConfigTable(arr, tail, joint.conditioning_error)
    return JointConfigTable(arr, k, n - 1, tail, joint.conditioning_error)


def product_table(tables: Sequence[ConfigTable]) -> JointConfigTable:
    """Independent product of single-part tables."""
    tables = list(tables)
    k = tables[0].k
    if any(t.k != k or t.cap != tables[0].cap for t in tables):
        raise ShapeMismatch("product factors must share k and cap")
    prob = _product_of_pmfs([t.prob for t in tables])
    kept = math.prod(1.0 - t.tail_mass for t in tables)
    return JointConfigTable(prob, k, len(tables), max(0.0, 1.0 - kept),
                            sum(t.conditioning_error for t in tables))


class TVDistance(NamedTuple):
    """Total variation on the lattice and a bound including tails."""

    lattice: float
    bound: float


def tv_distance(a: ConfigTable, b: ConfigTable) -> TVDistance:
    if a.prob.shape != b.prob.shape or a.n_parts != b.n_parts:
        raise ShapeMismatch(f"tables differ in shape: {a!r} vs {b!r}")
    lattice = 0.5 * float(np.abs(a.prob - b.prob).sum())
    return TVDistance(min(lattice, 1.0), min(lattice + truncation_slack(a, b), 1.0))


def truncation_slack(a: ConfigTable, b: ConfigTable) -> float:
    """Tail and conditioning mass of both tables: how much of the lattice
    distance between ``a`` and ``b`` truncation alone can explain."""
    return a.tail_mass + b.tail_mass + a.conditioning_error + b.conditioning_error


def factorization_distance(table: ConfigTable, q) -> TVDistance:
    """Distance between the splitting law and the product of its thinned marginals."""
    if np.ndim(q) == 0:
        joint = exact_splitting(table, q)
        prod = product_table([exact_thin(table, q), exact_thin(table, 1.0 - q)])
    else:
        q = RetentionVector(q)
        joint = exact_multi_splitting(table, q)
        prod = product_table([exact_thin(table, qm) for qm in q])
    return tv_distance(joint, prod)


# ---------------------------------------------------------------------------
# Campbell measures and Palm distributions
# ---------------------------------------------------------------------------


def _lattice(cap: int, k: int):
    return itertools.product(range(cap + 1), repeat=k)


def _h_arrays(h, cap: int, k: int):
    """``direct[c] = sum_x c_x h(x, c)`` and ``added[x][c] = h(x, c + e_x)`` on the lattice."""
    direct = np.zeros((cap + 1,) * k)
    added = np.zeros((k,) + (cap + 1,) * k)
    for c in _lattice(cap, k):
        mu = PointMeasure.from_counts(c)
        direct[c] = sum(c[x] * h(x, mu) for x in range(k) if c[x])
        for x in range(k):
            added[(x,) + c] = h(x, mu + PointMeasure._from_canonical({x: 1}))
    return direct, added


def exact_campbell(table: ConfigTable, h) -> float:
    """``C_P(h) = sum_mu P(mu) sum_x mu_x h(x, mu)``."""
    total = 0.0
    for config, p in table.items():
        mu = PointMeasure.from_counts(config)
        total += p * sum(config[x] * h(x, mu) for x in range(table.k) if config[x])
    return total


def sub_configurations(mu: PointMeasure, q: float):
    """Yield ``(kappa, T^mu_q(kappa))`` over all sub-configurations of ``mu``."""
    atoms = mu.atoms
    if mu.total > ENUMERATION_CAP:
        raise TooLarge(f"total multiplicity {mu.total} exceeds enumeration cap {ENUMERATION_CAP}")
    pmfs = [stats.binom.pmf(np.arange(m + 1), m, q) for _, m in atoms]
    for kept in itertools.product(*(range(m + 1) for _, m in atoms)):
        p = math.prod(pmfs[i][j] for i, j in enumerate(kept))
        kappa = PointMeasure._from_canonical(
            {loc: j for (loc, _), j in zip(atoms, kept) if j > 0})
        yield kappa, p


def thinning_campbell(mu: PointMeasure, q: float, h) -> tuple:
    """Both sides of the Papangelou identity for ``T^mu_q``, by enumeration.

    Returns ``(C_{T^mu_q}(h), E[sum_x q/(1-q) (mu - kappa)_x h(x, kappa + delta_x)])``.
    """
    q = check_probability(q)
    c = q / (1.0 - q)
    lhs = rhs = 0.0
    for kappa, p in sub_configurations(mu, q):
        lhs += p * sum(m * h(loc, kappa) for loc, m in kappa)
        rest = mu - kappa
        rhs += p * c * sum(m * h(loc, kappa + PointMeasure._from_canonical({loc: 1}))
                           for loc, m in rest)
    return lhs, rhs


@dataclass
class CampbellChain:
    """The values of each step of the Campbell-measure chain.

    ``steps`` maps a label to its value. ``slack`` is the truncation
    allowance for the two steps that involve the product of truncated
    marginals (``iii->iv`` and ``iv->v``).
    """

    SLACK_STEPS = ("iii->iv", "iv->v")

    steps: dict
    slack: float
    factorization_tv: float

    def gaps(self) -> dict:
        labels = list(self.steps)
        return {f"{a}->{b}": abs(self.steps[a] - self.steps[b])
                for a, b in zip(labels, labels[1:])}

    def holds(self, tol: float = 1e-12) -> dict:
        out = {}
        for name, gap in self.gaps().items():
            allowed = tol + (self.slack if name in self.SLACK_STEPS else 0.0)
            out[name] = gap <= allowed
        return out


def campbell_chain(table: ConfigTable, q, h) -> CampbellChain:
    """Evaluate each step of the Campbell chain for ``Gamma_{q_1}(P)``.

    ``q`` is a probability (two-way split) or a retention vector (n-way).
    Step labels: ``campbell`` is ``C_{Gamma(P)}(h)`` on the thinned table;
    ``i`` mixes the exact Campbell measures of ``T^mu_q``; ``ii`` applies the
    thinning Papangelou kernel; ``iii`` rewrites it over the (multi-)splitting
    law; ``iv`` replaces that law by the product of marginals; ``v`` and
    ``vi`` integrate out the deleted parts through first moments.
    """
    if np.ndim(q) == 0:
        qv = RetentionVector([float(q), 1.0 - float(q)])
    else:
        qv = RetentionVector(q)
    k, cap = table.k, table.cap
    q1 = qv[0]
    c = q1 / (1.0 - q1)
    direct, added = _h_arrays(h, cap, k)
    thinned = exact_thin(table, q1)
    steps = {"campbell": float(np.sum(thinned.prob * direct))}

    B = binomial_channel(cap, q1)
    grid = np.arange(cap + 1)
    step_i = step_ii = 0.0
    for config, p in table.items():
        T = _product_of_pmfs([B[m] for m in config])
        step_i += p * float(np.sum(T * direct))
        rest = sum(
            np.clip(config[x] - grid, 0, None).reshape([-1 if a == x else 1 for a in range(k)])
            * added[x] for x in range(k))
        step_ii += p * c * float(np.sum(T * rest))
    steps["i"], steps["ii"] = step_i, step_ii

    joint = exact_multi_splitting(table, qv) if len(qv) > 2 else exact_splitting(table, q1)
    marginals = [exact_thin(table, qm) for qm in qv]
    product = product_table(marginals)

    def deleted_form(arr):
        val = 0.0
        first = list(range(k))
        for m in range(1, len(qv)):
            for x in range(k):
                keep = first + [m * k + x]
                others = tuple(a for a in range(arr.ndim) if a not in keep)
                marg = arr.sum(axis=others)  # axes: kappa_1 atoms, then part m atom x
                val += float(np.sum(np.tensordot(marg, grid, axes=([k], [0])) * added[x]))
        return c * val

    steps["iii"] = deleted_form(joint.prob)
    steps["iv"] = deleted_form(product.prob)
    moment = sum(t.first_moment() for t in marginals[1:])
    steps["v"] = c * sum(float(np.sum(marginals[0].prob * moment[x] * added[x]))
                         for x in range(k))
    nu = table.first_moment()
    steps["vi"] = q1 * sum(float(np.sum(marginals[0].prob * nu[x] * added[x]))
                           for x in range(k))

    tv = tv_distance(joint, product).lattice
    explained = max(min(tv, truncation_slack(joint, product)),
                    sum(t.tail_mass for t in marginals))
    slack = 2.0 * explained * c * float(np.max(np.abs(added), initial=0.0)) * k * cap
    return CampbellChain(steps, slack, tv)


def _config_vector(nu, k: int) -> np.ndarray:
    if isinstance(nu, PointMeasure):
        return nu.counts(k)
    v = np.asarray(nu, dtype=np.int64).ravel()
    if len(v) != k:
        raise ShapeMismatch(f"configuration has {len(v)} entries, space has {k} atoms")
    return v


def _falling(cap: int, nu: np.ndarray) -> np.ndarray:
    """``prod_x (mu_x + nu_x)! / mu_x!`` over ``mu <= cap - nu``."""
    factors = [np.exp(gammaln(np.arange(cap - v + 1) + v + 1) - gammaln(np.arange(cap - v + 1) + 1))
               for v in nu]
    return _product_of_pmfs(factors)


def reduced_palm(table: ConfigTable, nu) -> ConfigTable:
    """Reduced Palm distribution at the configuration ``nu``.

    ``P^!_nu(mu)`` is proportional to ``P(mu + nu)`` times the number of
    ordered ways to pick the points of ``nu`` out of ``mu + nu``. The result
    is normalized over the lattice; when the source table is truncated the
    factorial weights make the lost normalizer mass unbounded, so
    ``conditioning_error`` is then infinite.
    """
    nu = _config_vector(nu, table.k)
    if not nu.any():
        return table
    if np.any(nu > table.cap):
        raise ZeroMassAt(tuple(nu.tolist()))
    sub = table.prob[tuple(slice(int(v), None) for v in nu)] * _falling(table.cap, nu)
    total = float(sub.sum())
    if total <= 0:
        raise ZeroMassAt(tuple(nu.tolist()))
    out = np.zeros_like(table.prob)
    out[tuple(slice(0, table.cap - int(v) + 1) for v in nu)] = sub / total
    return ConfigTable(out, 0.0, math.inf if table.tail_mass > 0 else 0.0)


def thinned_mass(table: ConfigTable, q: float, nu) -> float:
    """``Gamma_q(P)({nu})`` computed directly from the source table."""
    nu = _config_vector(nu, table.k)
    if np.any(nu > table.cap):
        return 0.0
    sub = table.prob[tuple(slice(int(v), None) for v in nu)]
    weights = _product_of_pmfs([
        stats.binom.pmf(v, np.arange(v, table.cap + 1), q) for v in nu])
    return float(np.sum(sub * weights))


def karr_splitting_kernel(table: ConfigTable, q: float, nu) -> ConfigTable:
    """Law of the deleted configuration given the retained one equals ``nu``.

    Computed as the ``(1 - q)^{|mu|}``-reweighted reduced Palm distribution
    at ``nu``. The returned ``conditioning_error`` bounds the distance to the
    untruncated kernel by ``tail_mass / Gamma_q(P)({nu})``.
    """
    q = check_probability(q)
    nu = _config_vector(nu, table.k)
    mass = thinned_mass(table, q, nu)
    if mass <= 0:
        raise ZeroMassAt(tuple(nu.tolist()))
    palm = reduced_palm(table, nu)
    sizes = sum(np.arange(table.cap + 1).reshape([-1 if a == x else 1 for a in range(table.k)])
                for x in range(table.k))
    weighted = palm.prob * (1.0 - q) ** sizes
    total = float(weighted.sum())
    if total <= 0:
        raise ZeroMassAt(tuple(nu.tolist()))
    err = min(1.0, table.tail_mass / mass)
    return ConfigTable(weighted / total, 0.0, err)


def splitting_kernel(table: ConfigTable, q: float, nu) -> ConfigTable:
    """Direct conditional of the exact splitting law given ``retained = nu``."""
    nu = _config_vector(nu, table.k)
    return exact_splitting(table, q).conditional(0, nu)
