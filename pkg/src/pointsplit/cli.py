"""Command-line experiment runner.

Each subcommand reads an experiment config, writes its outputs to the
output directory and exits 0 when every check in scope passes, 1 when an
identity fails and 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import exact
from .battery import exact_battery
from .config import PROFILES, ExperimentConfig, load_config, template_text
from .exceptions import ConfigError, PointSplitError
from .formats import read_patterns, write_patterns, write_records, write_summary
from .functionals import (
    EstimateWithError,
    campbell_estimate,
    laplace_closed_form,
    laplace_estimate,
    mecke_residual,
)
from .measure import PatternBatch
from .processes import describe, first_moment, sample_batch
from .splitting import RetentionVector, multi_split_batch, split_batch, thin_batch
from .stats import (
    default_bank,
    default_multi_bank,
    factorization_test,
    multi_factorization_test,
)
from .suites import campbell_suite, laplace_suite

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

DEFAULT_PROFILE = {
    "sample": "mc", "thin": "mc", "split": "mc", "multi-split": "mc",
    "laplace": "mc", "campbell": "mc", "mecke": "mc",
    "exact-verify": "exact", "factorization-test": "mc",
}


class Run:
    """Resolved settings for one invocation."""

    def __init__(self, cfg: ExperimentConfig, command: str, out: Path, jobs: int, profile: str):
        self.cfg = cfg
        self.command = command
        self.out = out
        self.jobs = max(1, jobs)
        self.profile = profile
        self.tolerance = cfg.tolerances[profile]
        self.model = cfg.build_model()
        self.space = cfg.build_space()
        self.rng = cfg.rng()
        self.out.mkdir(parents=True, exist_ok=True)

    def provenance(self, **extra) -> dict:
        rec = {"seed": self.cfg.seed, "stream_id": self.cfg.stream_id,
               "n": self.cfg.n_samples, "tolerance": self.tolerance,
               "profile": self.profile, "command": self.command}
        rec.update(extra)
        return rec

    def map(self, fn, items):
        """Apply ``fn(i, item)`` in parallel; results keep input order."""
        items = list(items)
        if self.jobs == 1 or len(items) < 2:
            return [fn(i, it) for i, it in enumerate(items)]
        with ThreadPoolExecutor(self.jobs) as pool:
            return list(pool.map(fn, range(len(items)), items))

    def compare(self, est: EstimateWithError, reference: float) -> bool:
        """Pass rule under the active profile."""
        if self.profile == "mc":
            return abs(est.value - reference) <= self.tolerance * est.stderr
        return abs(est.value - reference) <= self.tolerance

    def finish(self, records: list) -> int:
        write_records(self.out / "records.jsonl", records)
        if self.cfg.output.get("summary", True):
            write_summary(self.out / "summary.csv", records)
        checks = [r["passed"] for r in records if r.get("passed") is not None]
        status = EXIT_PASS if all(checks) else EXIT_FAIL
        for rec in records:
            flag = {True: "PASS", False: "FAIL", None: "----"}[rec.get("passed")]
            print(f"{flag} {rec['name']}: {_fmt(rec.get('value'))}")
        print(f"{self.command}: {sum(checks)}/{len(checks)} checks passed; output in {self.out}")
        return status


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _estimate_record(run: Run, name, est: EstimateWithError, reference=None, **extra):
    rec = run.provenance(name=name, value=est.value, stderr=est.stderr)
    rec["n"] = est.n_samples
    if reference is not None:
        rec["reference"] = reference
        rec["z_score"] = (est.value - reference) / est.stderr if est.stderr > 0 else (
            0.0 if est.value == reference else math.inf)
        rec["passed"] = run.compare(est, reference)
    else:
        rec["passed"] = None
    rec.update(extra)
    return rec


# ---------------------------------------------------------------------------
# Pattern subcommands
# ---------------------------------------------------------------------------


def _source_patterns(run: Run):
    if run.cfg.input:
        entries = read_patterns(Path(run.cfg.input))
        if not entries:
            raise ConfigError("input", "pattern file contains no patterns")
        space = entries[0][1]
        measures = [mu for _, _, mu in entries]
        return PatternBatch.from_measures(measures, space), space
    return sample_batch(run.model, run.cfg.n_samples, run.rng.spawn(0)), run.space


def _count_record(run: Run, name, batch):
    totals = batch.totals().astype(float)
    est = EstimateWithError.from_samples(totals) if len(totals) > 1 else \
        EstimateWithError(float(totals.mean()), 0.0, len(totals))
    return _estimate_record(run, name, est)


def cmd_sample(run: Run) -> int:
    batch = sample_batch(run.model, run.cfg.n_samples, run.rng.spawn(0))
    write_patterns(run.out / "patterns.txt", batch.to_measures(), run.space)
    return run.finish([_count_record(run, "sample.total", batch)])


def cmd_thin(run: Run) -> int:
    batch, space = _source_patterns(run)
    kept = thin_batch(batch, run.cfg.q, run.rng.spawn(1))
    write_patterns(run.out / "thinned.txt", kept.to_measures(), space)
    return run.finish([_count_record(run, "source.total", batch),
                       _count_record(run, "thinned.total", kept)])


def cmd_split(run: Run) -> int:
    batch, space = _source_patterns(run)
    retained, deleted = split_batch(batch, run.cfg.q, run.rng.spawn(1))
    pats, labels = [], []
    for i, (a, b) in enumerate(zip(retained.to_measures(), deleted.to_measures())):
        pats += [a, b]
        labels += [f"{i}:retained", f"{i}:deleted"]
    write_patterns(run.out / "split.txt", pats, space, labels)
    return run.finish([_count_record(run, "source.total", batch),
                       _count_record(run, "retained.total", retained),
                       _count_record(run, "deleted.total", deleted)])


def cmd_multi_split(run: Run) -> int:
    q = RetentionVector(run.cfg.retention or (run.cfg.q, 1.0 - run.cfg.q))
    batch, space = _source_patterns(run)
    parts = multi_split_batch(batch, q, run.rng.spawn(1))
    per_part = [p.to_measures() for p in parts]
    pats, labels = [], []
    for i in range(batch.n):
        for m, ms in enumerate(per_part):
            pats.append(ms[i])
            labels.append(f"{i}:part{m + 1}")
    write_patterns(run.out / "multi_split.txt", pats, space, labels)
    records = [_count_record(run, "source.total", batch)]
    records += [_count_record(run, f"part{m + 1}.total", p) for m, p in enumerate(parts)]
    return run.finish(records)


# ---------------------------------------------------------------------------
# Estimator subcommands
# ---------------------------------------------------------------------------


def cmd_laplace(run: Run) -> int:
    suite = laplace_suite(run.space)

    def one(i, f):
        est = laplace_estimate(run.model, f, run.cfg.n_samples, run.rng.spawn(i))
        ref = laplace_closed_form(run.model, f)
        return _estimate_record(run, f"laplace[{f.name}]", est, ref, substream=i)

    return run.finish(run.map(one, suite))


def cmd_campbell(run: Run) -> int:
    suite = campbell_suite(run.space)
    table = None
    if run.space.discrete:
        table = exact.enumerate_model(run.model, run.cfg.cap)
    moment = first_moment(run.model) if table is None else None

    def one(i, h):
        est = campbell_estimate(run.model, h, run.cfg.n_samples, run.rng.spawn(i))
        ref = None
        if table is not None:
            ref = exact.exact_campbell(table, h)
        elif h.name == "one":
            ref = moment.total_mass
        return _estimate_record(run, f"campbell[{h.name}]", est, ref, substream=i)

    return run.finish(run.map(one, suite))


def cmd_mecke(run: Run) -> int:
    try:
        rho = first_moment(run.model)
    except TypeError as exc:
        raise ConfigError("model", str(exc)) from None
    suite = campbell_suite(run.space)

    def one(i, h):
        est = mecke_residual(run.model, rho, h, run.cfg.n_samples, run.rng.spawn(i))
        return _estimate_record(run, f"mecke[{h.name}]", est, 0.0, substream=i)

    return run.finish(run.map(one, suite))


def cmd_factorization_test(run: Run) -> int:
    if run.profile != "mc":
        raise ConfigError("--tolerance-profile", "factorization-test needs the mc profile")
    cfg = run.cfg
    if cfg.retention and len(cfg.retention) > 2:
        bank = default_multi_bank(run.space, len(cfg.retention))
        fam = multi_factorization_test(run.model, cfg.retention, bank, cfg.n_samples, run.rng,
                                       bootstrap=cfg.bootstrap, stderr_method=cfg.stderr,
                                       z_crit=run.tolerance)
    else:
        bank = default_bank(run.space)
        fam = factorization_test(run.model, cfg.q, bank, cfg.n_samples, run.rng,
                                 bootstrap=cfg.bootstrap, stderr_method=cfg.stderr,
                                 z_crit=run.tolerance)
    records = []
    for rep in fam:
        rec = run.provenance(name=f"factorization[{rep.name}]", value=rep.statistic,
                             stderr=rep.stderr, z_score=rep.z_score, p_value=rep.p_value,
                             p_adjusted=rep.p_adjusted, passed=not rep.reject)
        records.append(rec)
    records.append(run.provenance(name="factorization.family", value=fam.max_abs_z,
                                  stderr=None, family_alpha=fam.family_alpha,
                                  passed=not fam.family_reject, note=fam.note))
    return run.finish(records)


# ---------------------------------------------------------------------------
# Exact battery
# ---------------------------------------------------------------------------


def cmd_exact_verify(run: Run) -> int:
    if not run.space.discrete:
        raise ConfigError("space.kind", "exact-verify needs a discrete space")
    if run.profile == "mc":
        raise ConfigError("--tolerance-profile", "exact-verify needs the exact or quadrature profile")
    table = exact.enumerate_model(run.model, run.cfg.cap)
    (run.out / "table.txt").write_text(table.dump(), encoding="utf-8")
    results = exact_battery(table, run.cfg.q, retention=run.cfg.retention, model=run.model,
                            exact_tol=run.tolerance, kernel_tol=run.cfg.tolerances["kernel"])
    records = []
    for res in results:
        rec = run.provenance(name=res.name, value=res.value, stderr=0.0, passed=res.passed,
                             check_tolerance=res.tolerance, model=describe(run.model),
                             cap=table.cap, tail_mass=table.tail_mass)
        rec["n"] = 0
        rec.update(res.detail)
        records.append(rec)
    return run.finish(records)


COMMANDS = {
    "sample": cmd_sample,
    "thin": cmd_thin,
    "split": cmd_split,
    "multi-split": cmd_multi_split,
    "laplace": cmd_laplace,
    "campbell": cmd_campbell,
    "mecke": cmd_mecke,
    "exact-verify": cmd_exact_verify,
    "factorization-test": cmd_factorization_test,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointsplit",
        description="Simulate thinning and splitting of point processes and verify "
                    "the Poisson factorization identities.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment YAML file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
        p.add_argument("--tolerance-profile", choices=PROFILES,
                       help="tolerance set applied to every check")
    sub.add_parser("template", help="print the documented configuration template")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "template":
        sys.stdout.write(template_text())
        return EXIT_PASS
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed", "must be an unsigned 64-bit integer")
            cfg = cfg.replace(seed=args.seed)
        out = Path(args.out if args.out else cfg.output["dir"])
        profile = args.tolerance_profile or DEFAULT_PROFILE[args.command]
        run = Run(cfg, args.command, out, args.jobs, profile)
        return COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PointSplitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
