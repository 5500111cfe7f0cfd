"""Independent thinning, two-way splitting and n-way multi-splitting."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import InvalidProbability
from .measure import PatternBatch, PointMeasure, subtract
from .processes import ProcessModel, as_generator, sample, sample_batch


def check_probability(q: float, name: str = "q") -> float:
    q = float(q)
    if not 0.0 < q < 1.0:
        raise InvalidProbability(f"{name} must lie in the open interval (0, 1), got {q!r}")
    return q


@dataclass(frozen=True)
class SplitPair:
    retained: PointMeasure
    deleted: PointMeasure

    def source(self) -> PointMeasure:
        return self.retained + self.deleted


@dataclass(frozen=True)
class SplitVector:
    parts: tuple

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ValueError("a split vector has at least two parts")

    def source(self) -> PointMeasure:
        total = self.parts[0]
        for p in self.parts[1:]:
            total = total + p
        return total

    def __len__(self):
        return len(self.parts)

    def __getitem__(self, m):
        return self.parts[m]


class RetentionVector(tuple):
    """Probabilities ``(q_1, ..., q_n)`` in (0, 1) summing to one."""

    def __new__(cls, q: Sequence[float]):
        q = tuple(float(v) for v in q)
        if len(q) < 2:
            raise InvalidProbability("a retention vector needs at least two entries")
        for m, v in enumerate(q):
            check_probability(v, f"q[{m}]")
        total = math.fsum(q)
        if abs(total - 1.0) > 1e-12:
            raise InvalidProbability(f"retention probabilities sum to {total!r}, not 1")
        return super().__new__(cls, q)

    @classmethod
    def uniform(cls, n: int) -> "RetentionVector":
        return cls([1.0 / n] * n)

    def coalesce_last(self) -> "RetentionVector | float":
        """Merge the last two entries; a two-part vector collapses to its first entry."""
        if len(self) == 2:
            return self[0]
        return RetentionVector(self[:-2] + (self[-2] + self[-1],))


def retention_to_sequential(q: Sequence[float]) -> list:
    """Sequential thinning probabilities ``s_m = q_m / (q_m + ... + q_n)``.

    The last entry is exactly 1 so that the final part is the deterministic
    remainder.
    """
    q = RetentionVector(q)
    n = len(q)
    s = []
    for m in range(n - 1):
        rest = math.fsum(q[m:])
        val = q[m] / rest
        if val < -1e-12 or val > 1 + 1e-12:
            raise InvalidProbability(f"sequential probability s[{m}] = {val!r} out of range")
        s.append(min(max(val, 0.0), 1.0))
    s.append(1.0)
    return s


def landing_probabilities(s: Sequence[float]) -> list:
    """Probability ``(1 - s_1) ... (1 - s_{m-1}) s_m`` that a point lands in part m."""
    out, survive = [], 1.0
    for sm in s:
        out.append(survive * sm)
        survive *= 1.0 - sm
    return out


def _binomial(mults: np.ndarray, q: float, gen) -> np.ndarray:
    if len(mults) == 0:
        return np.zeros(0, dtype=np.int64)
    return gen.binomial(mults, q).astype(np.int64)


def _with_counts(mu: PointMeasure, kept: np.ndarray) -> PointMeasure:
    return PointMeasure._from_canonical(
        {loc: int(k) for (loc, _), k in zip(mu.atoms, kept) if k > 0}
    )


def thin(mu: PointMeasure, q: float, rng) -> PointMeasure:
    """Keep each copy of each point of ``mu`` independently with probability ``q``."""
    q = check_probability(q)
    kept = _binomial(mu.multiplicities(), q, as_generator(rng))
    return _with_counts(mu, kept)


def split(mu: PointMeasure, q: float, rng) -> SplitPair:
    retained = thin(mu, q, rng)
    return SplitPair(retained, subtract(mu, retained))


def multi_split(mu: PointMeasure, q: Sequence[float], rng) -> SplitVector:
    """Partition ``mu`` into ``n`` parts by sequential thinning of the remainder.

    Uses the same draws as :func:`split` for the first part, so a two-part
    vector ``(q, 1 - q)`` reproduces ``split(mu, q)`` bit for bit.
    """
    s = retention_to_sequential(q)
    gen = as_generator(rng)
    parts, rest = [], mu
    for sm in s[:-1]:
        kappa = _with_counts(rest, _binomial(rest.multiplicities(), sm, gen))
        parts.append(kappa)
        rest = subtract(rest, kappa)
    parts.append(rest)
    return SplitVector(tuple(parts))


def sample_splitting_law(model: ProcessModel, q: float, rng) -> SplitPair:
    gen = as_generator(rng)
    return split(sample(model, gen), q, gen)


def sample_multi_splitting_law(model: ProcessModel, q: Sequence[float], rng) -> SplitVector:
    gen = as_generator(rng)
    return multi_split(sample(model, gen), q, gen)


# ---------------------------------------------------------------------------
# Batched variants used by the Monte Carlo estimators
# ---------------------------------------------------------------------------


def thin_batch(batch: PatternBatch, q: float, rng) -> PatternBatch:
    q = check_probability(q)
    return batch.with_mult(_binomial(batch.mult, q, as_generator(rng)))


def split_batch(batch: PatternBatch, q: float, rng) -> tuple:
    """``(retained, deleted)`` batches of an independent ``q``-split."""
    q = check_probability(q)
    kept = _binomial(batch.mult, q, as_generator(rng))
    return batch.with_mult(kept), batch.with_mult(batch.mult - kept)


def multi_split_batch(batch: PatternBatch, q: Sequence[float], rng) -> list:
    s = retention_to_sequential(q)
    gen = as_generator(rng)
    rest = batch.mult
    parts = []
    for sm in s[:-1]:
        kept = _binomial(rest, sm, gen)
        parts.append(batch.with_mult(kept))
        rest = rest - kept
    parts.append(batch.with_mult(rest))
    return parts


def sample_splitting_batch(model: ProcessModel, q: float, n: int, rng) -> tuple:
    gen = as_generator(rng)
    return split_batch(sample_batch(model, n, gen), q, gen)


def sample_multi_splitting_batch(model: ProcessModel, q: Sequence[float], n: int, rng) -> list:
    gen = as_generator(rng)
    return multi_split_batch(sample_batch(model, n, gen), q, gen)
