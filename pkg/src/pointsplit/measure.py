"""Point measures, ground spaces, intensity measures and test functions.

Two families of ground space are supported: a finite discrete space of
``k`` atoms (locations are integer atom ids) and a bounded rectangular
window in R^d (locations are tuples of ``d`` floats). Every point measure
is therefore a finite multiset of located points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .exceptions import NotSubconfiguration, QuadratureFailure

Location = Union[int, tuple]


# ---------------------------------------------------------------------------
# Spaces and regions
# ---------------------------------------------------------------------------


class Region:
    """A bounded region: an atom subset or an axis-aligned box."""

    def contains(self, locs) -> np.ndarray:
        raise NotImplementedError

    def contains_one(self, loc) -> bool:
        if isinstance(loc, (int, np.integer)):
            return bool(self.contains(np.array([loc]))[0])
        return bool(self.contains(np.asarray(loc, dtype=float)[None, :])[0])


@dataclass(frozen=True)
class DiscreteSpace(Region):
    """The finite ground space ``{0, ..., k-1}``; also the region of all atoms."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("a discrete space needs at least one atom")

    discrete = True

    def contains(self, locs):
        locs = np.asarray(locs)
        return (locs >= 0) & (locs < self.k)

    def describe(self) -> str:
        return f"discrete {self.k}"


@dataclass(frozen=True)
class AtomSet(Region):
    atoms: frozenset

    def __init__(self, atoms: Iterable[int]):
        object.__setattr__(self, "atoms", frozenset(int(a) for a in atoms))

    discrete = True

    def contains(self, locs):
        locs = np.asarray(locs)
        if not self.atoms:
            return np.zeros(locs.shape, dtype=bool)
        return np.isin(locs, np.fromiter(self.atoms, dtype=int))


@dataclass(frozen=True)
class Window(Region):
    """Closed box ``[lower_1, upper_1] x ... x [lower_d, upper_d]``."""

    lower: tuple
    upper: tuple

    def __init__(self, lower: Sequence[float], upper: Sequence[float]):
        lower = tuple(float(v) for v in np.atleast_1d(lower))
        upper = tuple(float(v) for v in np.atleast_1d(upper))
        if len(lower) != len(upper):
            raise ValueError("lower and upper corners differ in dimension")
        if any(u < l for l, u in zip(lower, upper)):
            raise ValueError("window upper corner lies below the lower corner")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    discrete = False

    @classmethod
    def unit(cls, d: int = 2) -> "Window":
        return cls([0.0] * d, [1.0] * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, locs):
        pts = np.asarray(locs, dtype=float).reshape(-1, self.d)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def intersect(self, other: "Window") -> "Window | None":
        lo = np.maximum(self.lower, other.lower)
        hi = np.minimum(self.upper, other.upper)
        if np.any(hi < lo):
            return None
        return Window(lo, hi)

    def describe(self) -> str:
        bounds = " ".join(f"{l!r} {u!r}" for l, u in zip(self.lower, self.upper))
        return f"window {self.d} {bounds}"


@dataclass(frozen=True)
class RegionUnion(Region):
    parts: tuple

    def __init__(self, parts: Iterable[Region]):
        object.__setattr__(self, "parts", tuple(parts))

    @property
    def discrete(self):
        return all(p.discrete for p in self.parts)

    def contains(self, locs):
        out = None
        for part in self.parts:
            c = part.contains(locs)
            out = c if out is None else out | c
        if out is None:
            return np.zeros(np.asarray(locs).shape[:1], dtype=bool)
        return out


def union(*regions: Region) -> Region:
    flat = []
    for r in regions:
        flat.extend(r.parts if isinstance(r, RegionUnion) else [r])
    if len(flat) == 1:
        return flat[0]
    if all(isinstance(r, (AtomSet, DiscreteSpace)) for r in flat):
        ids = set()
        for r in flat:
            ids |= set(r.atoms) if isinstance(r, AtomSet) else set(range(r.k))
        return AtomSet(ids)
    return RegionUnion(flat)


Space = Union[DiscreteSpace, Window]


# ---------------------------------------------------------------------------
# Point measures
# ---------------------------------------------------------------------------


def _norm_loc(loc) -> Location:
    if isinstance(loc, (int, np.integer)):
        return int(loc)
    return tuple(float(c) for c in loc)


class PointMeasure:
    """Finite point measure with integer multiplicities.

    Atoms are merged on construction (exact equality of locations) and
    kept in canonical lexicographic order, so two measures built from
    permutations of the same atom list compare equal.

    >>> PointMeasure([(1, 1), (0, 2), (1, 1)])
    PointMeasure([(0, 2), (1, 2)])
    """

    __slots__ = ("_atoms", "_index", "_hash")

    def __init__(self, atoms: Iterable[tuple] = ()):
        merged: dict = {}
        for loc, mult in atoms:
            mult = int(mult)
            if mult < 0:
                raise ValueError("multiplicities must be nonnegative")
            if mult == 0:
                continue
            key = _norm_loc(loc)
            merged[key] = merged.get(key, 0) + mult
        self._set(merged)

    def _set(self, merged: dict):
        self._atoms = tuple(sorted(merged.items()))
        self._index = dict(self._atoms)
        self._hash = None

    @classmethod
    def _from_canonical(cls, index: dict) -> "PointMeasure":
        obj = cls.__new__(cls)
        obj._set(index)
        return obj

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "PointMeasure":
        """Discrete measure from a multiplicity vector indexed by atom id."""
        return cls._from_canonical({i: int(c) for i, c in enumerate(counts) if c > 0})

    @classmethod
    def from_points(cls, points: np.ndarray) -> "PointMeasure":
        """Continuous measure from an ``(m, d)`` array, one copy per row."""
        pts = np.asarray(points, dtype=float)
        return cls((tuple(row), 1) for row in pts.reshape(len(pts), -1))

    @property
    def atoms(self) -> tuple:
        return self._atoms

    @property
    def total(self) -> int:
        return sum(self._index.values())

    def locations(self) -> list:
        return [loc for loc, _ in self._atoms]

    def multiplicities(self) -> np.ndarray:
        return np.array([m for _, m in self._atoms], dtype=np.int64)

    def counts(self, k: int) -> np.ndarray:
        out = np.zeros(k, dtype=np.int64)
        for loc, m in self._atoms:
            out[loc] = m
        return out

    def is_zero(self) -> bool:
        return not self._atoms

    def __getitem__(self, loc) -> int:
        return self._index.get(_norm_loc(loc), 0)

    def __iter__(self):
        return iter(self._atoms)

    def __len__(self):
        return len(self._atoms)

    def __eq__(self, other):
        if not isinstance(other, PointMeasure):
            return NotImplemented
        return self._atoms == other._atoms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._atoms)
        return self._hash

    def __le__(self, other: "PointMeasure") -> bool:
        return all(other._index.get(loc, 0) >= m for loc, m in self._atoms)

    def __add__(self, other: "PointMeasure") -> "PointMeasure":
        return add(self, other)

    def __sub__(self, other: "PointMeasure") -> "PointMeasure":
        return subtract(self, other)

    def __repr__(self):
        return f"PointMeasure({list(self._atoms)!r})"


ZERO = PointMeasure()


def delta(loc, multiplicity: int = 1) -> PointMeasure:
    return PointMeasure([(loc, multiplicity)])


def add(a: PointMeasure, b: PointMeasure) -> PointMeasure:
    merged = dict(a._index)
    for loc, m in b._atoms:
        merged[loc] = merged.get(loc, 0) + m
    return PointMeasure._from_canonical(merged)


def subtract(a: PointMeasure, b: PointMeasure) -> PointMeasure:
    """Location-wise ``a - b``; raises if ``b`` is not a sub-configuration of ``a``."""
    merged = dict(a._index)
    for loc, m in b._atoms:
        left = merged.get(loc, 0) - m
        if left < 0:
            raise NotSubconfiguration(f"{b!r} is not a sub-configuration of {a!r}")
        if left == 0:
            del merged[loc]
        else:
            merged[loc] = left
    return PointMeasure._from_canonical(merged)


def _loc_array(locs: list, template=None) -> np.ndarray:
    if not locs:
        if template is not None and not template:
            return np.zeros((0, len(template)))
        return np.zeros(0, dtype=np.int64)
    if isinstance(locs[0], int):
        return np.array(locs, dtype=np.int64)
    return np.array(locs, dtype=float)


def integrate(mu: PointMeasure, f: "TestFunction") -> float:
    """``mu(f)``: multiplicity-weighted sum of ``f`` over the atoms of ``mu``."""
    if mu.is_zero():
        return 0.0
    return float(np.dot(mu.multiplicities(), f(_loc_array(mu.locations()))))


def count_in(mu: PointMeasure, region: Region) -> int:
    if mu.is_zero():
        return 0
    mask = region.contains(_loc_array(mu.locations()))
    return int(mu.multiplicities()[mask].sum())


# ---------------------------------------------------------------------------
# Intensity measures
# ---------------------------------------------------------------------------


def midpoint_grid(window: Window, cells: int):
    """Cell midpoints and cell volume of a uniform grid over ``window``."""
    axes = [
        lo + (np.arange(cells) + 0.5) * (hi - lo) / cells
        for lo, hi in zip(window.lower, window.upper)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts, window.volume / cells**window.d


class DiscreteIntensity:
    """Atom weights on a finite discrete space."""

    discrete = True

    def __init__(self, weights: Sequence[float]):
        w = np.asarray(weights, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("need at least one atom weight")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("atom weights must be finite and nonnegative")
        self.weights = w
        self.weights.setflags(write=False)
        self.space = DiscreteSpace(len(w))

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def mass(self, region: Region) -> float:
        return float(self.weights[region.contains(np.arange(self.space.k))].sum())

    def scaled(self, c: float) -> "DiscreteIntensity":
        return DiscreteIntensity(c * self.weights)

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """``int fn d(rho)`` for a vectorized ``fn`` over atom ids."""
        ids = np.arange(self.space.k)
        return float(np.dot(self.weights, fn(ids)))

    def __eq__(self, other):
        return isinstance(other, DiscreteIntensity) and np.array_equal(
            self.weights, other.weights
        )

    def __repr__(self):
        return f"DiscreteIntensity({self.weights.tolist()!r})"


class DensityIntensity:
    """Bounded density on a rectangular window.

    ``density`` must be vectorized: it maps an ``(m, d)`` array of points to
    ``m`` nonnegative values. ``bound`` is the declared supremum used by
    rejection sampling. Masses are computed by the midpoint rule on
    ``grid`` cells per axis; the rule is compared against the half-resolution
    grid and :class:`QuadratureFailure` is raised when the two differ by more
    than ``tol``.
    """

    discrete = False

    def __init__(self, window: Window, density, bound: float, total_mass=None,
                 grid: int = 256, tol: float = 1e-9, label: str = ""):
        if bound < 0:
            raise ValueError("density bound must be nonnegative")
        self.window = window
        self.space = window
        self.density = density
        self.bound = float(bound)
        self.grid = int(grid)
        self.tol = float(tol)
        self.label = label
        self.total_mass = (
            float(total_mass) if total_mass is not None else self.mass(window)
        )
        if self.total_mass < 0 or not math.isfinite(self.total_mass):
            raise ValueError("total mass must be finite and nonnegative")

    @classmethod
    def constant(cls, window: Window, value: float, **kw) -> "DensityIntensity":
        value = float(value)
        return cls(
            window,
            lambda x: np.full(len(x), value),
            bound=value,
            total_mass=value * window.volume,
            label=f"constant {value!r}",
            **kw,
        )

    @classmethod
    def linear(cls, window: Window, intercept: float, slope: Sequence[float], **kw):
        """Density ``intercept + slope . x``; must stay nonnegative on the window."""
        slope = np.asarray(slope, dtype=float)
        corners = np.array(np.meshgrid(*zip(window.lower, window.upper), indexing="ij"))
        corners = corners.reshape(window.d, -1).T
        vals = intercept + corners @ slope
        if np.any(vals < 0):
            raise ValueError("linear density is negative somewhere on the window")
        return cls(
            window,
            lambda x: intercept + np.asarray(x) @ slope,
            bound=float(vals.max()),
            label=f"linear {intercept!r} {slope.tolist()!r}",
            **kw,
        )

    def _quad(self, fn, window: Window, cells: int) -> float:
        pts, vol = midpoint_grid(window, cells)
        return float(np.sum(fn(pts)) * vol)

    def quadrature(self, fn, window: Window | None = None, tol: float | None = None,
                   check: bool = True) -> float:
        """Midpoint-rule integral of ``fn`` over ``window`` (default: whole window).

        With ``check`` the result is compared against the half-resolution
        grid at tolerance ``tol`` (default: the intensity's own ``tol``).
        """
        window = self.window if window is None else window
        if window.volume == 0:
            return 0.0
        fine = self._quad(fn, window, self.grid)
        tol = self.tol if tol is None else tol
        if check:
            coarse = self._quad(fn, window, max(self.grid // 2, 1))
            if abs(fine - coarse) > tol:
                raise QuadratureFailure(
                    f"midpoint rule changed by {abs(fine - coarse):.3g} between "
                    f"{self.grid // 2} and {self.grid} cells per axis (tol {tol:g})"
                )
        return fine

    def mass(self, region: Region) -> float:
        if isinstance(region, Window):
            sub = self.window.intersect(region)
            return 0.0 if sub is None else self.quadrature(self.density, sub)
        if isinstance(region, RegionUnion):
            # disjointness is not assumed; integrate the indicator on the window grid
            return self.quadrature(lambda x: self.density(x) * region.contains(x),
                                   check=False)
        raise TypeError(f"cannot measure region {region!r} on a window")

    def integrate(self, fn, tol: float | None = None, check: bool = True) -> float:
        """``int fn d(rho)`` over the window, ``fn`` vectorized over points."""
        return self.quadrature(lambda x: fn(x) * self.density(x), tol=tol, check=check)

    def scaled(self, c: float) -> "DensityIntensity":
        dens = self.density
        return DensityIntensity(
            self.window,
            lambda x: c * dens(x),
            bound=c * self.bound,
            total_mass=c * self.total_mass,
            grid=self.grid,
            tol=self.tol,
            label=f"{c!r} * ({self.label})",
        )

    def __repr__(self):
        return f"DensityIntensity({self.window!r}, {self.label or 'custom'})"


IntensityMeasure = Union[DiscreteIntensity, DensityIntensity]


def intensity_mass(rho: IntensityMeasure, region: Region) -> float:
    return rho.mass(region)


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Nonnegative bounded function with a declared bounded support.

    ``func`` is vectorized over locations (an int array of atom ids or an
    ``(m, d)`` array of points). Values are forced to zero outside
    ``support`` and checked against ``[0, bound]`` on every evaluation.
    """

    __test__ = False

    func: Callable[[np.ndarray], np.ndarray]
    bound: float
    support: Region
    name: str = ""

    def __call__(self, locs) -> np.ndarray:
        locs = np.asarray(locs)
        if locs.size == 0:
            return np.zeros(locs.shape[:1])
        vals = np.asarray(self.func(locs), dtype=float)
        vals = np.where(self.support.contains(locs), vals, 0.0)
        if np.any(vals < 0) or np.any(vals > self.bound * (1 + 1e-12) + 1e-300):
            raise ValueError(f"test function {self.name or self.func} left [0, {self.bound}]")
        return vals

    def at(self, loc) -> float:
        if isinstance(loc, (int, np.integer)):
            return float(self(np.array([loc]))[0])
        return float(self(np.asarray(loc, dtype=float)[None, :])[0])


def zero_function(space: Space) -> TestFunction:
    return TestFunction(lambda x: np.zeros(len(x)), 0.0, space, "zero")


def indicator(region: Region, value: float = 1.0, name: str = "") -> TestFunction:
    value = float(value)
    return TestFunction(lambda x: np.full(len(x), value), value, region,
                        name or f"{value!r}*1[{region}]")


def atom_values(values: Sequence[float], name: str = "") -> TestFunction:
    """Discrete test function given by its value at each atom id."""
    vals = np.asarray(values, dtype=float)
    if np.any(vals < 0):
        raise ValueError("test function values must be nonnegative")
    support = AtomSet(np.flatnonzero(vals > 0))
    return TestFunction(lambda x: vals[np.asarray(x)], float(vals.max(initial=0.0)),
                        support, name or f"atoms{vals.tolist()}")


def tent(center: Sequence[float], radius: float, height: float = 1.0,
         name: str = "") -> TestFunction:
    """Pyramid ``height * max(0, 1 - |x - c|_inf / radius)`` on the box around ``c``."""
    c = np.asarray(center, dtype=float)
    r = float(radius)

    def fn(x):
        dist = np.max(np.abs(np.asarray(x, dtype=float) - c), axis=1)
        return height * np.clip(1.0 - dist / r, 0.0, None)

    return TestFunction(fn, float(height), Window(c - r, c + r),
                        name or f"tent({c.tolist()},{r!r},{height!r})")


@dataclass(frozen=True)
class ConfigFunctional:
    """Nonnegative functional of a point measure, optionally with a declared bound."""

    func: Callable[[PointMeasure], float]
    bound: float | None = None
    name: str = ""

    def __call__(self, mu: PointMeasure) -> float:
        val = float(self.func(mu))
        if val < 0 or (self.bound is not None and val > self.bound * (1 + 1e-12)):
            raise ValueError(f"config functional {self.name} out of range: {val}")
        return val


# ---------------------------------------------------------------------------
# Batched patterns
# ---------------------------------------------------------------------------


@dataclass
class PatternBatch:
    """``n`` point measures stored as flat arrays for vectorized Monte Carlo.

    Row ``i`` of ``loc``/``mult`` is an atom of pattern ``sample[i]``.
    ``loc`` holds atom ids (discrete) or an ``(m, d)`` array of points.
    """

    n: int
    sample: np.ndarray
    loc: np.ndarray
    mult: np.ndarray
    space: Space = field(repr=False)

    def integrate(self, f: TestFunction) -> np.ndarray:
        """``mu_i(f)`` for every pattern, as a length-``n`` array."""
        if len(self.mult) == 0:
            return np.zeros(self.n)
        return np.bincount(self.sample, weights=self.mult * f(self.loc), minlength=self.n)

    def count_in(self, region: Region) -> np.ndarray:
        w = self.mult * region.contains(self.loc)
        return np.bincount(self.sample, weights=w, minlength=self.n).astype(np.int64)

    def totals(self) -> np.ndarray:
        return np.bincount(self.sample, weights=self.mult, minlength=self.n).astype(np.int64)

    def with_mult(self, mult: np.ndarray) -> "PatternBatch":
        """Same atoms carrying new multiplicities; zero rows are dropped."""
        keep = mult > 0
        return PatternBatch(self.n, self.sample[keep], self.loc[keep], mult[keep], self.space)

    def to_measures(self) -> list:
        out = [dict() for _ in range(self.n)]
        if self.space.discrete:
            for s, l, m in zip(self.sample.tolist(), self.loc.tolist(), self.mult.tolist()):
                out[s][l] = out[s].get(l, 0) + m
        else:
            for s, l, m in zip(self.sample.tolist(), map(tuple, self.loc.tolist()),
                               self.mult.tolist()):
                out[s][l] = out[s].get(l, 0) + m
        return [PointMeasure._from_canonical(d) for d in out]

    def count_matrix(self) -> np.ndarray:
        """``(n, k)`` multiplicity matrix; discrete spaces only."""
        mat = np.zeros((self.n, self.space.k), dtype=np.int64)
        np.add.at(mat, (self.sample, self.loc), self.mult)
        return mat

    @classmethod
    def from_count_matrix(cls, counts: np.ndarray, space: DiscreteSpace) -> "PatternBatch":
        s, l = np.nonzero(counts)
        return cls(counts.shape[0], s.astype(np.int64), l.astype(np.int64),
                   counts[s, l].astype(np.int64), space)

    @classmethod
    def from_measures(cls, measures: Sequence[PointMeasure], space: Space) -> "PatternBatch":
        sample, loc, mult = [], [], []
        for i, mu in enumerate(measures):
            for l, m in mu:
                sample.append(i)
                loc.append(l)
                mult.append(m)
        if space.discrete:
            loc_arr = np.array(loc, dtype=np.int64)
        else:
            loc_arr = np.array(loc, dtype=float).reshape(-1, space.d)
        return cls(len(measures), np.array(sample, dtype=np.int64), loc_arr,
                   np.array(mult, dtype=np.int64), space)
