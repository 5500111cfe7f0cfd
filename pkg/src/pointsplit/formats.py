"""Text formats for point patterns, estimate records and summaries.

A pattern file holds one or more patterns. Each starts with a header::

    #pattern discrete 3 label=retained
    #pattern window 2 0.0 1.0 0.0 1.0

followed by one atom per line, ``atom_id multiplicity`` on a discrete space
or ``x1 ... xd multiplicity`` on a window. Coordinates are written with
``repr`` so that files round-trip exactly.
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .measure import DiscreteSpace, PointMeasure, Window

RECORD_FIELDS = ("name", "value", "stderr", "n", "seed", "stream_id", "tolerance", "passed")


def describe_space(space) -> str:
    if isinstance(space, DiscreteSpace):
        return f"discrete {space.k}"
    if isinstance(space, Window):
        bounds = " ".join(f"{lo!r} {hi!r}" for lo, hi in zip(space.lower, space.upper))
        return f"window {space.d} {bounds}"
    raise TypeError(f"cannot describe space {space!r}")


def parse_space(tokens: Sequence[str]):
    """Inverse of :func:`describe_space` on a whitespace-split descriptor."""
    kind = tokens[0]
    if kind == "discrete":
        return DiscreteSpace(int(tokens[1])), tokens[2:]
    if kind == "window":
        d = int(tokens[1])
        vals = [float(t) for t in tokens[2:2 + 2 * d]]
        return Window(vals[0::2], vals[1::2]), tokens[2 + 2 * d:]
    raise ValueError(f"unknown space kind {kind!r}")


def format_pattern(mu: PointMeasure, space, label: str | None = None) -> str:
    header = "#pattern " + describe_space(space)
    if label:
        header += f" label={label}"
    lines = [header]
    for loc, m in mu:
        if isinstance(space, DiscreteSpace):
            lines.append(f"{loc} {m}")
        else:
            lines.append(" ".join(repr(float(c)) for c in loc) + f" {m}")
    return "\n".join(lines) + "\n"


def write_patterns(path, patterns: Iterable, space, labels: Iterable[str] | None = None) -> None:
    """Write ``patterns`` (point measures) to ``path`` in order."""
    labels = list(labels) if labels is not None else None
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, mu in enumerate(patterns):
            fh.write(format_pattern(mu, space, labels[i] if labels else None))


def read_patterns(source) -> list:
    """Parse every pattern in ``source`` (a path or a string of file content).

    Returns a list of ``(label, space, PointMeasure)`` triples.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and Path(source).exists()):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    out, current = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#pattern"):
            if current is not None:
                out.append(_finish(current))
            space, rest = parse_space(line.split()[1:])
            label = None
            for tok in rest:
                if tok.startswith("label="):
                    label = tok[len("label="):]
            current = (label, space, [])
            continue
        if line.startswith("#"):
            continue
        if current is None:
            raise ValueError(f"line {lineno}: atom before any #pattern header")
        parts = line.split()
        label, space, atoms = current
        if isinstance(space, DiscreteSpace):
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'atom_id multiplicity'")
            atoms.append((int(parts[0]), int(parts[1])))
        else:
            if len(parts) != space.d + 1:
                raise ValueError(f"line {lineno}: expected {space.d} coordinates and a multiplicity")
            atoms.append((tuple(float(t) for t in parts[:-1]), int(parts[-1])))
    if current is not None:
        out.append(_finish(current))
    return out


def _finish(current):
    label, space, atoms = current
    return label, space, PointMeasure(atoms)


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


def _clean(value):
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return repr(value)
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def format_record(record: dict) -> str:
    """One JSON object per line, keys sorted, for diffable output."""
    return json.dumps(_clean(record), sort_keys=True, allow_nan=False)


def write_records(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(format_record(rec) + "\n")


def read_records(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_summary(path, records: Sequence[dict]) -> None:
    """Comma-separated summary of the common record fields."""
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RECORD_FIELDS, extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: _clean(rec.get(k, "")) for k in RECORD_FIELDS})
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
