"""Laplace transforms, Campbell measures and Mecke residuals.

Monte Carlo estimators return an :class:`EstimateWithError`; closed forms
and exact checks return plain floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exact import thinning_campbell
from .measure import (
    DensityIntensity,
    DiscreteIntensity,
    PatternBatch,
    PointMeasure,
    TestFunction,
    midpoint_grid,
    union,
)
from .processes import (
    DoubledPoisson,
    MixedPoisson,
    Poisson,
    PolyaDifference,
    ProcessModel,
    as_generator,
    sample_batch,
    sample_locations,
)
from .splitting import check_probability


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n_samples: int

    @classmethod
    def from_samples(cls, values: np.ndarray) -> "EstimateWithError":
        values = np.asarray(values, dtype=float)
        n = len(values)
        if n < 2:
            raise ValueError("need at least two samples for a standard error")
        return cls(float(values.mean()), float(values.std(ddof=1) / math.sqrt(n)), n)

    @property
    def z_score(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.value == 0 else math.copysign(math.inf, self.value)
        return self.value / self.stderr

    def within(self, target: float, sigmas: float = 4.0) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr


def pool_estimates(parts: Sequence[EstimateWithError]) -> EstimateWithError:
    """Merge estimates from disjoint sample blocks into one."""
    N = sum(p.n_samples for p in parts)
    mean = math.fsum(p.n_samples * p.value for p in parts) / N
    ss = math.fsum((p.n_samples - 1) * p.stderr**2 * p.n_samples
                   + p.n_samples * (p.value - mean) ** 2 for p in parts)
    return EstimateWithError(mean, math.sqrt(ss / (N - 1) / N), N)


@dataclass(frozen=True)
class CampbellTestFunction:
    """Nonnegative bounded ``h(x, mu)`` on location x configuration."""

    __test__ = False

    func: Callable[[object, PointMeasure], float]
    bound: float
    name: str = ""

    def __call__(self, x, mu: PointMeasure) -> float:
        val = float(self.func(x, mu))
        if val < 0 or val > self.bound * (1 + 1e-12):
            raise ValueError(f"h {self.name!r} returned {val!r} outside [0, {self.bound}]")
        return val


# ---------------------------------------------------------------------------
# Laplace transforms
# ---------------------------------------------------------------------------


def laplace_estimate(model: ProcessModel, f: TestFunction, n: int, rng) -> EstimateWithError:
    """Monte Carlo estimate of ``E exp(-mu(f))``."""
    batch = sample_batch(model, n, rng)
    return EstimateWithError.from_samples(np.exp(-batch.integrate(f)))


def poisson_laplace_closed_form(rho, f: TestFunction, tol: float | None = None) -> float:
    """``exp(-int (1 - e^{-f}) d rho)``.

    On a window the integral uses the midpoint rule; the resolution check
    runs only when ``tol`` is given, since test functions with kinks or
    jumps converge slowly under grid refinement.
    """
    integrand = lambda x: -np.expm1(-f(x))  # noqa: E731
    if isinstance(rho, DiscreteIntensity):
        return math.exp(-rho.integrate(integrand))
    return math.exp(-rho.integrate(integrand, tol=tol, check=tol is not None))


def laplace_closed_form(model: ProcessModel, f: TestFunction, tol: float | None = None) -> float:
    """Exact ``E exp(-mu(f))`` for any supported model."""
    if isinstance(model, Poisson):
        return poisson_laplace_closed_form(model.rho, f, tol)
    if isinstance(model, MixedPoisson):
        base = -math.log(poisson_laplace_closed_form(model.rho, f, tol))
        return math.fsum(p * math.exp(-s * base) for s, p in model.scales)
    if isinstance(model, DoubledPoisson):
        doubled = TestFunction(lambda x: 2.0 * f(x), 2.0 * f.bound, f.support, f"2*{f.name}")
        return poisson_laplace_closed_form(model.rho, doubled, tol)
    if isinstance(model, PolyaDifference):
        r = model.retention
        return math.prod(((1.0 - r) + r * math.exp(-f.at(x))) ** m for x, m in model.mu)
    raise TypeError(f"unknown process model {model!r}")


def v_function(f: TestFunction, g: TestFunction, q: float) -> TestFunction:
    """``v = -log((1 - q) e^{-g} + q e^{-f})``, the exponent that turns the
    joint Laplace functional of a Poisson split into a single Laplace value."""
    q = check_probability(q)

    def fn(x):
        return -np.log((1.0 - q) * np.exp(-g(x)) + q * np.exp(-f(x)))

    return TestFunction(fn, max(f.bound, g.bound), union(f.support, g.support),
                        f"v({f.name},{g.name},{q!r})")


def factorization_laplace_identity_check(rho, f: TestFunction, g: TestFunction,
                                         q: float, tol: float | None = None) -> tuple:
    """``(L_rho(v), L_{q rho}(f) * L_{(1-q) rho}(g))`` in closed form."""
    q = check_probability(q)
    lhs = poisson_laplace_closed_form(rho, v_function(f, g, q), tol)
    rhs = (poisson_laplace_closed_form(rho.scaled(q), f, tol)
           * poisson_laplace_closed_form(rho.scaled(1.0 - q), g, tol))
    return lhs, rhs


# ---------------------------------------------------------------------------
# Campbell measure and Mecke residual
# ---------------------------------------------------------------------------


def per_sample(batch: PatternBatch, fn: Callable[[PointMeasure], float]) -> np.ndarray:
    """Evaluate ``fn`` on every pattern of ``batch``.

    Discrete batches are deduplicated first: ``fn`` runs once per distinct
    configuration.
    """
    if batch.space.discrete:
        counts = batch.count_matrix()
        uniq, inverse = np.unique(counts, axis=0, return_inverse=True)
        vals = np.array([fn(PointMeasure.from_counts(row)) for row in uniq])
        return vals[np.ravel(inverse)]
    return np.array([fn(mu) for mu in batch.to_measures()])


def campbell_sum(mu: PointMeasure, h) -> float:
    return math.fsum(m * h(x, mu) for x, m in mu)


def campbell_estimate(model: ProcessModel, h: CampbellTestFunction, n: int,
                      rng) -> EstimateWithError:
    """Monte Carlo estimate of ``C_P(h) = E sum_x mu({x}) h(x, mu)``."""
    batch = sample_batch(model, n, rng)
    return EstimateWithError.from_samples(per_sample(batch, lambda mu: campbell_sum(mu, h)))


def _with_point(mu: PointMeasure, x) -> PointMeasure:
    return mu + PointMeasure._from_canonical({x: 1})


def mecke_residual(model: ProcessModel, rho, h: CampbellTestFunction, n: int, rng,
                   integration: str = "mc", grid: int = 8) -> EstimateWithError:
    """Paired estimate of ``C_P(h) - E int h(x, mu + delta_x) rho(dx)``.

    Both terms are evaluated on the same draw. On a discrete space the inner
    integral is an exact sum over atoms. On a window it is either a single
    uniform-from-``rho`` draw per sample (``integration="mc"``, unbiased) or a
    midpoint rule with ``grid`` cells per axis (``integration="quadrature"``).
    """
    gen = as_generator(rng)
    batch = sample_batch(model, n, gen)
    if isinstance(rho, DiscreteIntensity):
        atoms = [int(a) for a in np.flatnonzero(rho.weights)]

        def residual(mu):
            added = math.fsum(rho.weights[a] * h(a, _with_point(mu, a)) for a in atoms)
            return campbell_sum(mu, h) - added

        return EstimateWithError.from_samples(per_sample(batch, residual))

    if not isinstance(rho, DensityIntensity):
        raise TypeError(f"unsupported intensity {rho!r}")
    measures = batch.to_measures()
    if integration == "mc":
        xs = sample_locations(rho, n, gen) if rho.total_mass > 0 else np.zeros((n, rho.window.d))
        vals = [campbell_sum(mu, h) - rho.total_mass * h(tuple(x), _with_point(mu, tuple(x)))
                for mu, x in zip(measures, xs.tolist())]
    elif integration == "quadrature":
        pts, vol = midpoint_grid(rho.window, grid)
        w = rho.density(pts) * vol
        locs = [tuple(p) for p in pts.tolist()]
        vals = [campbell_sum(mu, h)
                - math.fsum(wi * h(x, _with_point(mu, x)) for wi, x in zip(w, locs))
                for mu in measures]
    else:
        raise ValueError(f"unknown integration method {integration!r}")
    return EstimateWithError.from_samples(np.array(vals))


def thinning_papangelou_check(mu: PointMeasure, q: float, h: CampbellTestFunction) -> tuple:
    """Exact ``(C_{T^mu_q}(h), int h(x, kappa + delta_x) q/(1-q) (mu - kappa)(dx) T^mu_q(dkappa))``.

    Raises :class:`~pointsplit.exceptions.TooLarge` above 20 points.
    """
    return thinning_campbell(mu, q, h)


def polya_papangelou_check(z: float, mu: PointMeasure, h: CampbellTestFunction) -> tuple:
    """Papangelou identity for the Polya difference process with kernel ``z (mu - kappa)``."""
    if not z > 0:
        raise ValueError("z must be positive")
    return thinning_campbell(mu, z / (1.0 + z), h)
