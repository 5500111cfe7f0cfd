"""Process models, reproducible random streams and samplers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .exceptions import RejectionBoundViolated
from .measure import (
    DensityIntensity,
    DiscreteIntensity,
    DiscreteSpace,
    IntensityMeasure,
    PatternBatch,
    PointMeasure,
)


class RngStream:
    """Deterministic random stream identified by ``(seed, stream_id)``.

    Child streams obtained with :meth:`spawn` are statistically independent
    of the parent and of each other, and are themselves reproducible.
    """

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(_path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self._path))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, child: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self._path + (int(child),))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self._path})"


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Poisson:
    rho: IntensityMeasure

    @property
    def space(self):
        return self.rho.space


@dataclass(frozen=True)
class PolyaDifference:
    """Polya difference process with parameter ``z`` around configuration ``mu``.

    Each copy of ``mu`` is retained independently with probability
    ``z / (1 + z)``, so this is the independent thinning of ``mu`` at that
    probability.
    """

    z: float
    mu: PointMeasure
    space: object

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError("Polya difference parameter z must be positive")

    @property
    def retention(self) -> float:
        return self.z / (1.0 + self.z)


@dataclass(frozen=True)
class MixedPoisson:
    """Poisson process with intensity ``s * rho``, ``s`` drawn from ``scales``."""

    rho: IntensityMeasure
    scales: tuple = field(default=((1.0, 1.0),))

    def __post_init__(self):
        scales = tuple((float(s), float(p)) for s, p in self.scales)
        object.__setattr__(self, "scales", scales)
        if not scales:
            raise ValueError("mixing law needs at least one scale")
        if any(s <= 0 or p < 0 for s, p in scales):
            raise ValueError("scales must be positive and probabilities nonnegative")
        if abs(sum(p for _, p in scales) - 1.0) > 1e-12:
            raise ValueError("mixing probabilities must sum to 1 within 1e-12")

    @property
    def space(self):
        return self.rho.space

    @property
    def mean_scale(self) -> float:
        return math.fsum(s * p for s, p in self.scales)


@dataclass(frozen=True)
class DoubledPoisson:
    """Poisson(rho) with every multiplicity doubled."""

    rho: IntensityMeasure

    @property
    def space(self):
        return self.rho.space


ProcessModel = Union[Poisson, PolyaDifference, MixedPoisson, DoubledPoisson]


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_locations(rho: DensityIntensity, count: int, gen: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. points from the normalized density by rejection."""
    window = rho.window
    lo = np.asarray(window.lower)
    span = np.asarray(window.upper) - lo
    out = np.empty((count, window.d))
    filled = 0
    while filled < count:
        need = count - filled
        batch = max(need, 64)
        prop = lo + gen.random((batch, window.d)) * span
        dens = rho.density(prop)
        if np.any(dens > rho.bound * (1 + 1e-12)):
            bad = prop[np.argmax(dens)]
            raise RejectionBoundViolated(
                f"density {float(dens.max())!r} at {bad.tolist()} exceeds bound {rho.bound!r}"
            )
        accepted = prop[gen.random(batch) * rho.bound < dens]
        take = min(len(accepted), need)
        out[filled:filled + take] = accepted[:take]
        filled += take
    return out


def _poisson_batch(rho: IntensityMeasure, scale: np.ndarray, gen) -> PatternBatch:
    n = len(scale)
    if rho.discrete:
        counts = gen.poisson(scale[:, None] * rho.weights[None, :])
        return PatternBatch.from_count_matrix(counts, rho.space)
    if rho.total_mass == 0:
        return PatternBatch(n, np.zeros(0, np.int64), np.zeros((0, rho.window.d)),
                            np.zeros(0, np.int64), rho.space)
    totals = gen.poisson(scale * rho.total_mass)
    pts = sample_locations(rho, int(totals.sum()), gen)
    sample = np.repeat(np.arange(n), totals)
    return PatternBatch(n, sample, pts, np.ones(len(pts), dtype=np.int64), rho.space)


def sample_batch(model: ProcessModel, n: int, rng) -> PatternBatch:
    """``n`` independent realizations of ``model`` as a :class:`PatternBatch`."""
    gen = as_generator(rng)
    if isinstance(model, Poisson):
        return _poisson_batch(model.rho, np.ones(n), gen)
    if isinstance(model, MixedPoisson):
        scales = np.array([s for s, _ in model.scales])
        probs = np.array([p for _, p in model.scales])
        drawn = scales[gen.choice(len(scales), size=n, p=probs / probs.sum())]
        return _poisson_batch(model.rho, drawn, gen)
    if isinstance(model, DoubledPoisson):
        base = _poisson_batch(model.rho, np.ones(n), gen)
        base.mult = 2 * base.mult
        return base
    if isinstance(model, PolyaDifference):
        locs = model.mu.locations()
        mults = model.mu.multiplicities()
        kept = gen.binomial(np.broadcast_to(mults, (n, len(mults))), model.retention)
        s, a = np.nonzero(kept)
        if model.space.discrete:
            loc = np.array(locs, dtype=np.int64)[a] if locs else np.zeros(0, np.int64)
        else:
            loc = np.array(locs, dtype=float).reshape(len(locs), -1)[a]
        return PatternBatch(n, s.astype(np.int64), loc, kept[s, a].astype(np.int64),
                            model.space)
    raise TypeError(f"unknown process model {model!r}")


def sample(model: ProcessModel, rng) -> PointMeasure:
    """One realization of ``model``."""
    return sample_batch(model, 1, rng).to_measures()[0]


def first_moment(model: ProcessModel) -> IntensityMeasure:
    """Closed-form first moment measure of ``model``."""
    if isinstance(model, Poisson):
        return model.rho
    if isinstance(model, MixedPoisson):
        return model.rho.scaled(model.mean_scale)
    if isinstance(model, DoubledPoisson):
        return model.rho.scaled(2.0)
    if isinstance(model, PolyaDifference):
        if not isinstance(model.space, DiscreteSpace):
            raise TypeError("atomic first moment is only representable on discrete spaces")
        return DiscreteIntensity(model.retention * model.mu.counts(model.space.k))
    raise TypeError(f"unknown process model {model!r}")


def describe(model: ProcessModel) -> str:
    name = type(model).__name__
    if isinstance(model, PolyaDifference):
        return f"{name}(z={model.z!r}, mu={list(model.mu.atoms)!r})"
    if isinstance(model, MixedPoisson):
        return f"{name}({model.rho!r}, scales={list(model.scales)!r})"
    return f"{name}({model.rho!r})"




