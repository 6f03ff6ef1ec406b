"""Command-line front end.

Exit codes: 0 success, 1 configuration / input error, 2 some model fits failed
(partial results are still written).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import run_benchmark
from .config import ConfigError, load_config
from .data import DataError, SeedTree, dataset_from_table, derive_stream, read_table, standardize_covariates
from .metrics import compare_cate_estimates
from .propensity import estimate_propensity, overlap_diagnostics

JOBS_ENV = "HTE_LAB_JOBS"


def _err(msg: str) -> int:
    print(f"hte-lab: error: {msg}", file=sys.stderr)
    return 1


def _jobs(flag, configured: int) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return max(1, configured)


def cmd_bench(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.b is not None:
            cfg.replications = args.b
        if args.seed is not None:
            cfg.seed = args.seed
        jobs = _jobs(args.jobs, cfg.jobs)
        if cfg.dgp is None:
            raise ConfigError(f"{args.config}: missing [dgp] section")
        if not cfg.models:
            raise ConfigError(f"{args.config}: no [model ...] sections")
        if cfg.replications < 2:
            raise ConfigError("replications must be >= 2")
    except ConfigError as exc:
        return _err(str(exc))
    out = Path(args.output or cfg.output)
    try:
        report = run_benchmark(cfg.dgp, cfg.models, cfg.replications, SeedTree(cfg.seed), jobs=jobs,
                               config_digest=cfg.digest)
    except (DataError, OSError) as exc:
        return _err(str(exc))
    report.write(out)
    print(report.markdown(), end="")
    failed = sum(report.failures(m) for m in report.model_names)
    if failed:
        print(f"hte-lab: {failed} model fit(s) failed; see {out / 'report.md'}", file=sys.stderr)
        return 2
    return 0


def fit_models(data, models, tree: SeedTree) -> tuple[dict[str, np.ndarray], list[str]]:
    """In-sample CATE estimates per model, plus messages for models that failed.

    One cross-fitted propensity estimate (stream ``propensity``) is shared;
    model ``j`` fits with stream ``("model", j)``.
    """
    propensity, pi_hat = estimate_propensity(data, rng=derive_stream(tree, "propensity"))
    estimates, failures = {}, []
    for j, m in enumerate(models):
        try:
            fitted = m.fit(data, rng=derive_stream(tree, "model", j), propensity=propensity, pi_hat=pi_hat)
            estimates[m.name] = fitted.predict_cate(data.covariates)
        except Exception as exc:  # noqa: BLE001 - reported, other models still written
            failures.append(f"{m.name}: {type(exc).__name__}: {exc}")
    return estimates, failures


def load_fit_data(path, spec: dict):
    """Dataset from CSV per the ``[data]`` section, continuous columns standardised."""
    table = read_table(path)
    treatment, outcome = spec.get("treatment"), spec.get("outcome")
    if not treatment or not outcome:
        raise ConfigError("[data] needs 'treatment' and 'outcome'")
    if "covariates" in spec:
        covariates = [c.strip() for c in spec["covariates"].split(",") if c.strip()]
    else:
        covariates = [c for c in table.names if c not in (treatment, outcome)]
    expected = set(covariates) | {treatment, outcome}
    missing = sorted(expected - set(table.names))
    extra = sorted(set(table.names) - expected)
    if missing or extra:
        raise DataError(f"{path}: schema mismatch; missing columns {missing}, extra columns {extra}")
    data = dataset_from_table(table, treatment, outcome, covariates)
    return standardize_covariates(data)[0]


def _header(fh, digest: str, seed: int):
    fh.write(f"# config_digest={digest} seed={seed}\n")


def cmd_fit(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if not cfg.models:
            raise ConfigError(f"{args.config}: no [model ...] sections")
        data = load_fit_data(args.data, cfg.data)
    except (ConfigError, DataError, OSError) as exc:
        return _err(str(exc))
    estimates, failures = fit_models(data, cfg.models, SeedTree(cfg.seed))
    out = Path(args.output or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    names = list(estimates)
    with open(out / "cate_estimates.csv", "w", newline="", encoding="utf-8") as fh:
        _header(fh, cfg.digest, cfg.seed)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", *names])
        for i in range(data.n):
            w.writerow([i, *(repr(float(estimates[n][i])) for n in names)])
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        _header(fh, cfg.digest, cfg.seed)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model_a", "model_b", "pearson", "spearman", "sd_a", "sd_b", "mean_a", "mean_b"])
        for a, b in itertools.combinations(names, 2):
            try:
                c = compare_cate_estimates(estimates[a], estimates[b])
                vals = [c.pearson, c.spearman, c.sd_a, c.sd_b, c.mean_a, c.mean_b]
            except ValueError:  # constant estimates: correlations undefined
                ta, tb = estimates[a], estimates[b]
                vals = [np.nan, np.nan, ta.std(ddof=1), tb.std(ddof=1), ta.mean(), tb.mean()]
            w.writerow([a, b, *(repr(float(v)) for v in vals)])
    for line in failures:
        print(f"hte-lab: fit failed: {line}", file=sys.stderr)
    return 2 if failures else 0


def cmd_diagnose(args) -> int:
    try:
        table = read_table(args.data)
        if args.treatment not in table.columns:
            raise DataError(f"{args.data}: schema mismatch; missing treatment column {args.treatment!r}")
        if args.outcome and args.outcome not in table.columns:
            raise DataError(f"{args.data}: schema mismatch; missing outcome column {args.outcome!r}")
        data = standardize_covariates(dataset_from_table(table, args.treatment, args.outcome))[0]
    except (DataError, OSError) as exc:
        return _err(str(exc))
    digest = hashlib.sha256(Path(args.data).read_bytes()).hexdigest()[:16]
    _, pi_hat = estimate_propensity(data, folds=args.folds, rng=derive_stream(SeedTree(args.seed), "propensity"))
    report = overlap_diagnostics(pi_hat, data.treatment, bins=args.bins)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    header = [f"data_digest={digest} seed={args.seed}", f"overlap_coefficient={report.overlap_coefficient!r}",
              f"flagged={report.n_flagged} of {data.n}"]
    report.write_histogram_csv(out / "overlap_histogram.csv", header)
    with open(out / "flagged_units.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# data_digest={digest} seed={args.seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "treatment", "pi_hat"])
        for i in report.flagged:
            w.writerow([int(i), int(data.treatment[i]), repr(float(pi_hat[i]))])
    print(f"overlap coefficient: {report.overlap_coefficient:.4f}")
    print(f"units outside [0.05, 0.95]: {report.n_flagged} of {data.n}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hte-lab", description="Heterogeneous treatment effect estimation and "
                                                             "semi-synthetic benchmarks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a Monte-Carlo benchmark")
    b.add_argument("--config", required=True)
    b.add_argument("--b", type=int, help="number of replications (overrides [run] replications)")
    b.add_argument("--seed", type=int)
    b.add_argument("--jobs", type=int, help=f"worker processes (fallback: ${JOBS_ENV}, then [run] jobs)")
    b.add_argument("--output", help="output directory (overrides [run] output)")
    b.set_defaults(func=cmd_bench)

    f = sub.add_parser("fit", help="fit configured models to one dataset and compare their estimates")
    f.add_argument("--config", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--seed", type=int)
    f.add_argument("--output")
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("diagnose", help="propensity overlap report")
    d.add_argument("--data", required=True)
    d.add_argument("--treatment", required=True)
    d.add_argument("--outcome", help="outcome column, excluded from the propensity covariates")
    d.add_argument("--output", default="diagnostics")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--folds", type=int, default=5)
    d.add_argument("--bins", type=int, default=10)
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
