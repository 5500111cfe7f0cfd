"""YAML experiment configuration with field and line diagnostics."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .exceptions import ConfigError
from .measure import DensityIntensity, DiscreteIntensity, DiscreteSpace, PointMeasure, Window
from .processes import DoubledPoisson, MixedPoisson, Poisson, PolyaDifference, RngStream
from .splitting import RetentionVector

MODEL_KINDS = ("poisson", "polya_difference", "mixed_poisson", "doubled_poisson")
PROFILES = ("exact", "quadrature", "mc")

DEFAULT_TOLERANCES = {"exact": 1e-12, "quadrature": 1e-8, "mc": 4.0, "kernel": 1e-10}


def template_text() -> str:
    """The shipped configuration template, with every default documented."""
    return resources.files("pointsplit").joinpath("data/template.yaml").read_text("utf-8")


def _locate(node, path):
    """Line number (1-based) of ``path`` inside a composed YAML node tree."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if k.value == key:
                    node = v
                    break
            else:
                return line
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            return line
        line = node.start_mark.line + 1
    return line


class _Reader:
    """Typed access to a parsed mapping that reports errors with locations."""

    def __init__(self, data: dict, root_node):
        self.data = data
        self.root = root_node

    def fail(self, path, message):
        name = ".".join(str(p) for p in path)
        raise ConfigError(name, message, _locate(self.root, path))

    def get(self, path, default=None):
        cur = self.data
        for key in path:
            if isinstance(cur, dict) and key in cur:
                cur = cur[key]
            elif isinstance(cur, list) and isinstance(key, int) and key < len(cur):
                cur = cur[key]
            else:
                return default
        return cur

    def number(self, path, default=None, lo=None, hi=None, integer=False, open_lo=False,
               open_hi=False):
        val = self.get(path, default)
        if val is None:
            self.fail(path, "is required")
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(path, f"must be a number, got {val!r}")
        if integer:
            if isinstance(val, float) and not val.is_integer():
                self.fail(path, f"must be an integer, got {val!r}")
            val = int(val)
        else:
            val = float(val)
            if not math.isfinite(val):
                self.fail(path, "must be finite")
        if lo is not None and (val < lo or (open_lo and val == lo)):
            self.fail(path, f"must be {'>' if open_lo else '>='} {lo}, got {val!r}")
        if hi is not None and (val > hi or (open_hi and val == hi)):
            self.fail(path, f"must be {'<' if open_hi else '<='} {hi}, got {val!r}")
        return val

    def numbers(self, path, default=None, **kw):
        val = self.get(path, default)
        if not isinstance(val, list) or not val:
            self.fail(path, f"must be a non-empty list, got {val!r}")
        return [self.number(list(path) + [i], **kw) for i in range(len(val))]


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    Every field is a plain YAML-representable value so that
    ``load_config(dump_config(cfg)) == cfg``.
    """

    space: dict
    intensity: dict
    model: dict
    q: float = 0.5
    retention: tuple | None = None
    n_samples: int = 10000
    seed: int = 0
    stream_id: int = 0
    cap: int = 8
    bootstrap: int = 500
    stderr: str = "bootstrap"
    input: str | None = None
    output: dict = field(default_factory=lambda: {"dir": "out", "summary": True})
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    # -- builders ---------------------------------------------------------

    def build_space(self):
        if self.space["kind"] == "discrete":
            return DiscreteSpace(self.space["atoms"])
        return Window(self.space["lower"], self.space["upper"])

    def build_intensity(self):
        if self.space["kind"] == "discrete":
            return DiscreteIntensity(self.intensity["weights"])
        window = self.build_space()
        dens = self.intensity["density"]
        grid = self.intensity.get("grid", 256)
        if dens["kind"] == "constant":
            return DensityIntensity.constant(window, dens["value"], grid=grid)
        return DensityIntensity.linear(window, dens["intercept"], dens["slope"], grid=grid)

    def build_model(self):
        kind = self.model["kind"]
        if kind == "polya_difference":
            space = self.build_space()
            atoms = [(int(a[0]) if space.discrete else tuple(a[:-1]), int(a[-1]))
                     for a in self.model["mu"]]
            return PolyaDifference(self.model["z"], PointMeasure(atoms), space)
        rho = self.build_intensity()
        if kind == "poisson":
            return Poisson(rho)
        if kind == "mixed_poisson":
            return MixedPoisson(rho, tuple(tuple(s) for s in self.model["scales"]))
        return DoubledPoisson(rho)

    def rng(self) -> RngStream:
        return RngStream(self.seed, self.stream_id)

    def to_dict(self) -> dict:
        out = {
            "space": copy.deepcopy(self.space),
            "intensity": copy.deepcopy(self.intensity),
            "model": copy.deepcopy(self.model),
            "q": self.q,
            "retention": list(self.retention) if self.retention is not None else None,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "cap": self.cap,
            "bootstrap": self.bootstrap,
            "stderr": self.stderr,
            "input": self.input,
            "output": copy.deepcopy(self.output),
            "tolerances": copy.deepcopy(self.tolerances),
        }
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        data = self.to_dict()
        data.update(changes)
        return parse_config(data)


def _parse_space(r: _Reader) -> dict:
    kind = r.get(["space", "kind"])
    if kind == "discrete":
        return {"kind": "discrete", "atoms": r.number(["space", "atoms"], integer=True, lo=1)}
    if kind == "window":
        lower = r.numbers(["space", "lower"])
        upper = r.numbers(["space", "upper"])
        if len(lower) != len(upper):
            r.fail(["space", "upper"], "must have the same length as space.lower")
        if any(hi <= lo for lo, hi in zip(lower, upper)):
            r.fail(["space", "upper"], "must exceed space.lower in every coordinate")
        return {"kind": "window", "lower": lower, "upper": upper}
    r.fail(["space", "kind"], f"must be 'discrete' or 'window', got {kind!r}")


def _parse_intensity(r: _Reader, space: dict, needed: bool) -> dict:
    if not r.get(["intensity"]) and not needed:
        return {}
    if space["kind"] == "discrete":
        w = r.numbers(["intensity", "weights"], lo=0.0)
        if len(w) != space["atoms"]:
            r.fail(["intensity", "weights"], f"needs {space['atoms']} entries, got {len(w)}")
        return {"weights": w}
    grid = r.number(["intensity", "grid"], default=256, integer=True, lo=2)
    kind = r.get(["intensity", "density", "kind"])
    if kind == "constant":
        dens = {"kind": "constant",
                "value": r.number(["intensity", "density", "value"], lo=0.0)}
    elif kind == "linear":
        slope = r.numbers(["intensity", "density", "slope"])
        if len(slope) != len(space["lower"]):
            r.fail(["intensity", "density", "slope"], "length must equal the window dimension")
        dens = {"kind": "linear",
                "intercept": r.number(["intensity", "density", "intercept"]),
                "slope": slope}
    else:
        r.fail(["intensity", "density", "kind"], f"must be 'constant' or 'linear', got {kind!r}")
    return {"density": dens, "grid": grid}


def _parse_model(r: _Reader, space: dict) -> dict:
    kind = r.get(["model", "kind"], "poisson")
    if kind not in MODEL_KINDS:
        r.fail(["model", "kind"], f"must be one of {', '.join(MODEL_KINDS)}, got {kind!r}")
    out = {"kind": kind}
    if kind == "mixed_poisson":
        scales = r.get(["model", "scales"])
        if not isinstance(scales, list) or not scales:
            r.fail(["model", "scales"], "must be a list of [scale, probability] pairs")
        pairs = []
        for i, pair in enumerate(scales):
            if not isinstance(pair, list) or len(pair) != 2:
                r.fail(["model", "scales", i], "must be a [scale, probability] pair")
            pairs.append([r.number(["model", "scales", i, 0], lo=0.0, open_lo=True),
                          r.number(["model", "scales", i, 1], lo=0.0, hi=1.0)])
        if abs(math.fsum(p for _, p in pairs) - 1.0) > 1e-12:
            r.fail(["model", "scales"], "mixing probabilities must sum to 1 within 1e-12")
        out["scales"] = pairs
    elif kind == "polya_difference":
        out["z"] = r.number(["model", "z"], lo=0.0, open_lo=True)
        mu = r.get(["model", "mu"])
        width = 2 if space["kind"] == "discrete" else len(space["lower"]) + 1
        if not isinstance(mu, list):
            r.fail(["model", "mu"], "must be a list of atoms [location..., multiplicity]")
        atoms = []
        for i, atom in enumerate(mu):
            if not isinstance(atom, list) or len(atom) != width:
                r.fail(["model", "mu", i], f"must have {width} entries")
            if space["kind"] == "discrete":
                loc = [r.number(["model", "mu", i, 0], integer=True, lo=0, hi=space["atoms"] - 1)]
            else:
                loc = [r.number(["model", "mu", i, j], lo=space["lower"][j], hi=space["upper"][j])
                       for j in range(width - 1)]
            atoms.append(loc + [r.number(["model", "mu", i, width - 1], integer=True, lo=1)])
        out["mu"] = atoms
    return out


def _parse_retention(r: _Reader, key: str) -> tuple:
    vals = r.numbers([key], lo=0.0, hi=1.0, open_lo=True, open_hi=True)
    if len(vals) < 2:
        r.fail([key], "needs at least two parts")
    total = math.fsum(vals)
    if abs(total - 1.0) > 1e-12:
        r.fail([key], f"entries must sum to 1 within 1e-12, got {total!r}")
    return tuple(RetentionVector(vals))


def parse_config(data, root_node=None) -> ExperimentConfig:
    """Validate a mapping (as loaded from YAML) into an :class:`ExperimentConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a mapping", 1)
    r = _Reader(data, root_node)
    known = {"space", "intensity", "model", "q", "retention", "n_samples", "seed", "stream_id",
             "cap", "bootstrap", "stderr", "input", "output", "tolerances"}
    for key in data:
        if key not in known:
            r.fail([key], "unknown field")
    space = _parse_space(r)
    model = _parse_model(r, space)
    intensity = _parse_intensity(r, space, needed=model["kind"] != "polya_difference")

    retention = None
    if isinstance(r.get(["q"]), list):
        # a list-valued q is shorthand for an n-way retention vector
        if r.get(["retention"]) is not None:
            r.fail(["retention"], "give either a list-valued q or retention, not both")
        retention = _parse_retention(r, "q")
        q = retention[0]
    else:
        q = r.number(["q"], default=0.5, lo=0.0, hi=1.0, open_lo=True, open_hi=True)
        if r.get(["retention"]) is not None:
            retention = _parse_retention(r, "retention")

    n = r.number(["n_samples"], default=10000, integer=True, lo=1)
    seed = r.number(["seed"], default=0, integer=True, lo=0, hi=2**64 - 1)
    stream_id = r.number(["stream_id"], default=0, integer=True, lo=0)
    cap = r.number(["cap"], default=8, integer=True, lo=1, hi=64)
    bootstrap = r.number(["bootstrap"], default=500, integer=True, lo=10)
    stderr = r.get(["stderr"], "bootstrap")
    if stderr not in ("bootstrap", "delta"):
        r.fail(["stderr"], f"must be 'bootstrap' or 'delta', got {stderr!r}")

    inp = r.get(["input"])
    if inp is not None:
        if not isinstance(inp, str):
            r.fail(["input"], "must be a path")
        if not Path(inp).exists():
            r.fail(["input"], f"file {inp!r} does not exist")

    out_dir = r.get(["output", "dir"], "out")
    if not isinstance(out_dir, str):
        r.fail(["output", "dir"], "must be a path")
    summary = r.get(["output", "summary"], True)
    if not isinstance(summary, bool):
        r.fail(["output", "summary"], "must be true or false")

    tolerances = dict(DEFAULT_TOLERANCES)
    given = r.get(["tolerances"], {}) or {}
    if not isinstance(given, dict):
        r.fail(["tolerances"], "must be a mapping")
    for key in given:
        if key not in DEFAULT_TOLERANCES:
            r.fail(["tolerances", key], "unknown tolerance")
        tolerances[key] = r.number(["tolerances", key], lo=0.0, open_lo=True)

    cfg = ExperimentConfig(space, intensity, model, q, retention, n, seed, stream_id, cap,
                           bootstrap, stderr, inp, {"dir": out_dir, "summary": summary},
                           tolerances)
    try:
        cfg.build_model()
    except (ValueError, TypeError) as exc:
        r.fail(["model"], str(exc))
    return cfg


def loads_config(text: str) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<yaml>", str(exc).splitlines()[0],
                          mark.line + 1 if mark else None) from None
    return parse_config(data, node)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("--config", f"file {str(path)!r} does not exist")
    return loads_config(path.read_text(encoding="utf-8"))


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)
