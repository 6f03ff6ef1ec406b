"""Monte-Carlo benchmark: repeated outcome draws, 70/30 splits, sqrt-PEHE per model."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .data import SeedTree, derive_stream, split_train_test
from .dgp import DgpSpec, PreparedDgp, prepare, simulate
from .metrics import sqrt_pehe
from .propensity import estimate_propensity

TRAIN_FRACTION = 0.7
SPLITS = ("train", "test")
Z_95 = 1.96


@dataclass(frozen=True)
class ReplicationResult:
    rep: int
    seed_path: str
    scores: dict[str, tuple[float, float]]  # model -> (train, test)
    errors: dict[str, str] = field(default_factory=dict)


def run_replication(prepared: PreparedDgp, models, rep_index: int, tree: SeedTree) -> ReplicationResult:
    """One outcome draw, one split, every model fitted on the same train set.

    The propensity model is estimated once per replication and shared.
    A failing model is recorded in ``errors``; the others still run.
    """
    rep_tree = tree.child("rep", rep_index)
    rng = derive_stream(tree, "rep", rep_index)
    truth = simulate(prepared, rng)
    split = split_train_test(prepared.data.n, TRAIN_FRACTION, rng)
    observed = prepared.data.with_outcome(truth.observed(prepared.z))
    train = observed.subset(split.train)
    propensity, pi_hat = estimate_propensity(train, rng=rng)
    scores, errors = {}, {}
    for j, model in enumerate(models):
        try:
            fitted = model.fit(train, rng=rep_tree.child("model", j).stream(), propensity=propensity,
                               pi_hat=pi_hat)
            scores[model.name] = tuple(
                sqrt_pehe(fitted.predict_cate(observed.covariates[idx]), truth.tau[idx])
                for idx in (split.train, split.test)
            )
        except Exception as exc:  # noqa: BLE001 - recorded per model, never fatal
            errors[model.name] = f"{type(exc).__name__}: {exc}"
    path = "/".join(f"{p}:{i}" for p, i in rep_tree.path)
    return ReplicationResult(rep_index, f"{tree.master_seed}/{path}", scores, errors)


@dataclass(frozen=True)
class Summary:
    model: str
    split: str
    mean: float
    ci_halfwidth: float
    B: int
    failures: int


@dataclass
class BenchmarkReport:
    dgp: str
    model_names: list[str]
    replications: list[ReplicationResult]
    master_seed: int
    config_digest: str = ""

    @property
    def B(self) -> int:
        return len(self.replications)

    def values(self, model: str, split: str) -> np.ndarray:
        k = SPLITS.index(split)
        return np.array([r.scores[model][k] for r in self.replications if model in r.scores])

    def failures(self, model: str) -> int:
        return sum(model in r.errors for r in self.replications)

    def summary(self) -> list[Summary]:
        rows = []
        for model in self.model_names:
            for split in SPLITS:
                v = self.values(model, split)
                mean = float(v.mean()) if len(v) else math.nan
                half = Z_95 * float(v.std(ddof=1)) / math.sqrt(len(v)) if len(v) > 1 else math.nan
                rows.append(Summary(model, split, mean, half, len(v), self.failures(model)))
        return rows

    def header(self) -> str:
        return f"# config_digest={self.config_digest} seed={self.master_seed}\n"

    def write(self, outdir) -> list[Path]:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        rows = self.summary()
        summary = self.header() + "model,split,mean,ci_halfwidth,B\n" + "".join(
            f"{r.model},{r.split},{_fmt(r.mean)},{_fmt(r.ci_halfwidth)},{r.B}\n" for r in rows)
        reps = [self.header(), "model,rep,split,sqrt_pehe\n"]
        for model in self.model_names:
            for r in self.replications:
                if model in r.scores:
                    reps += [f"{model},{r.rep},{s},{_fmt(v)}\n" for s, v in zip(SPLITS, r.scores[model])]
        paths = [out / "summary.csv", out / "replications.csv", out / "report.md"]
        paths[0].write_text(summary, encoding="utf-8")
        paths[1].write_text("".join(reps), encoding="utf-8")
        paths[2].write_text(self.markdown(rows), encoding="utf-8")
        return paths

    def markdown(self, rows=None) -> str:
        rows = rows or self.summary()
        by = {(r.model, r.split): r for r in rows}
        lines = [
            f"<!-- config_digest={self.config_digest} seed={self.master_seed} -->",
            f"# sqrt(PEHE) on {self.dgp}, B = {self.B}",
            "",
            "Mean over replications +/- 95% CI half-width (1.96 sd / sqrt(B)).",
            "",
            "| Model | Train | Test | Failed fits |",
            "|---|---|---|---|",
        ]
        for m in self.model_names:
            tr, te = by[(m, "train")], by[(m, "test")]
            lines.append(f"| {m} | {_pm(tr)} | {_pm(te)} | {tr.failures} |")
        errors = [(r.rep, m, e) for r in self.replications for m, e in sorted(r.errors.items())]
        if errors:
            lines += ["", "## Fit failures", ""]
            lines += [f"- rep {rep}, {m}: {e}" for rep, m, e in errors]
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def _pm(s: Summary) -> str:
    if math.isnan(s.mean):
        return "n/a"
    half = "n/a" if math.isnan(s.ci_halfwidth) else f"{s.ci_halfwidth:.3f}"
    return f"{s.mean:.3f} +/- {half}"


def run_benchmark(spec: DgpSpec, models, B: int, tree: SeedTree, jobs: int = 1, config_digest: str = "",
                  prepared: PreparedDgp | None = None) -> BenchmarkReport:
    """``B`` replications; the result does not depend on ``jobs``."""
    if B < 2:
        raise ValueError("B must be >= 2")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ValueError(f"model names must be unique: {names}")
    prepared = prepared or prepare(spec, tree)
    task = partial(run_replication, prepared, list(models), tree=tree)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(task, range(B), chunksize=max(1, B // (4 * jobs))))
    else:
        results = [task(b) for b in range(B)]
    results.sort(key=lambda r: r.rep)
    return BenchmarkReport(spec.name, names, results, tree.master_seed, config_digest)
