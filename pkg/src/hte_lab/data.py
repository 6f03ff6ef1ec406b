"""Core tabular containers, seeding and preprocessing shared by every module."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"


class DataError(ValueError):
    """Raised when a dataset violates its structural invariants."""


class DegenerateColumnError(DataError):
    def __init__(self, column: str):
        super().__init__(f"continuous column {column!r} has zero variance")
        self.column = column


def _is_binary(col: np.ndarray) -> bool:
    return bool(np.all((col == 0) | (col == 1)))


@dataclass(frozen=True)
class CausalDataset:
    """Covariates ``X`` (n x d), binary treatment ``z`` and observed outcome ``y``.

    ``column_kinds`` tags each covariate as ``"continuous"`` or ``"binary"``.
    Arrays are copied and made read-only on construction.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    column_names: tuple[str, ...] = ()
    column_kinds: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        z = np.array(self.treatment, dtype=float).ravel()
        y = np.array(self.outcome, dtype=float).ravel()
        n, d = X.shape
        if len(z) != n or len(y) != n:
            raise DataError(f"length mismatch: X has {n} rows, z {len(z)}, y {len(y)}")
        if not _is_binary(z):
            raise DataError("treatment must contain only 0/1")
        if z.sum() < 1 or z.sum() > n - 1:
            raise DataError("need at least one treated and one control unit")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise DataError("covariates and outcome must be finite")
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(d))
        kinds = tuple(self.column_kinds) or tuple(
            BINARY if _is_binary(X[:, j]) else CONTINUOUS for j in range(d)
        )
        if len(names) != d or len(kinds) != d:
            raise DataError("column_names/column_kinds must have one entry per column")
        if len(set(names)) != d:
            raise DataError("duplicate column names")
        for j, kind in enumerate(kinds):
            if kind not in (CONTINUOUS, BINARY):
                raise DataError(f"unknown column kind {kind!r}")
            if kind == BINARY and not _is_binary(X[:, j]):
                raise DataError(f"binary column {names[j]!r} has values outside {{0,1}}")
        for arr in (X, z, y):
            arr.setflags(write=False)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "treatment", z)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "column_kinds", kinds)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    @property
    def X(self) -> np.ndarray:
        return self.covariates

    @property
    def z(self) -> np.ndarray:
        return self.treatment

    @property
    def y(self) -> np.ndarray:
        return self.outcome

    def subset(self, idx) -> "CausalDataset":
        idx = np.asarray(idx)
        return CausalDataset(
            self.covariates[idx], self.treatment[idx], self.outcome[idx],
            self.column_names, self.column_kinds,
        )

    def with_outcome(self, y) -> "CausalDataset":
        return CausalDataset(self.covariates, self.treatment, y, self.column_names, self.column_kinds)

    def append_column(self, values, name: str, kind: str = CONTINUOUS) -> "CausalDataset":
        if name in self.column_names:
            raise DataError(f"column {name!r} already exists")
        values = np.asarray(values, dtype=float).ravel()
        if len(values) != self.n:
            raise DataError(f"appended column has length {len(values)}, expected {self.n}")
        return CausalDataset(
            np.column_stack([self.covariates, values]), self.treatment, self.outcome,
            self.column_names + (name,), self.column_kinds + (kind,),
        )

    def drop_columns(self, names: Sequence[str]) -> "CausalDataset":
        missing = [c for c in names if c not in self.column_names]
        if missing:
            raise DataError(f"unknown columns: {missing}")
        keep = [j for j, c in enumerate(self.column_names) if c not in set(names)]
        return CausalDataset(
            self.covariates[:, keep], self.treatment, self.outcome,
            tuple(self.column_names[j] for j in keep),
            tuple(self.column_kinds[j] for j in keep),
        )

    def column(self, name: str) -> np.ndarray:
        try:
            return self.covariates[:, self.column_names.index(name)]
        except ValueError:
            raise DataError(f"unknown column {name!r}") from None


@dataclass(frozen=True)
class SimTruth:
    """Ground truth of a simulated outcome surface.

    ``tau`` is always ``mu1 - mu0``; the observed outcome of the paired dataset
    is ``z * y1 + (1 - z) * y0``.
    """

    mu0: np.ndarray
    mu1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return self.mu1 - self.mu0

    def observed(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z * self.y1 + (1.0 - z) * self.y0


# --- seeding ---------------------------------------------------------------------


@dataclass(frozen=True)
class SeedTree:
    """A node in a labelled tree of random streams.

    Every node maps to a Philox key obtained by hashing the master seed and the
    path, so sibling streams never overlap and results do not depend on the
    order in which streams are requested.
    """

    master_seed: int
    path: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def child(self, purpose: str, index: int = 0) -> "SeedTree":
        return SeedTree(self.master_seed, self.path + ((str(purpose), int(index)),))

    def key(self) -> int:
        text = "|".join([str(int(self.master_seed))] + [f"{p}:{i}" for p, i in self.path])
        return int.from_bytes(hashlib.sha256(text.encode()).digest()[:16], "little")

    def stream(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))


def derive_stream(tree: SeedTree, purpose: str, index: int = 0) -> np.random.Generator:
    return tree.child(purpose, index).stream()


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, SeedTree, int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeedTree):
        return rng.stream()
    return np.random.default_rng(rng)


# --- preprocessing ---------------------------------------------------------------


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray


def split_train_test(n: int, fraction: float, rng) -> SplitIndices:
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    if n < 4:
        raise ValueError("need n >= 4 to split")
    k = int(math.floor(fraction * n + 0.5))
    perm = as_generator(rng).permutation(n)
    return SplitIndices(np.sort(perm[:k]), np.sort(perm[k:]))


@dataclass(frozen=True)
class Standardization:
    """Per-column (mean, sd) record; binary columns carry (0, 1)."""

    means: np.ndarray
    sds: np.ndarray

    def apply(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.sds

    def invert(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) * self.sds + self.means


def standardize_covariates(data: CausalDataset) -> tuple[CausalDataset, Standardization]:
    X = data.covariates
    means = np.zeros(data.d)
    sds = np.ones(data.d)
    for j, kind in enumerate(data.column_kinds):
        if kind != CONTINUOUS:
            continue
        sd = X[:, j].std(ddof=1) if data.n > 1 else 0.0
        if not sd > 0:
            raise DegenerateColumnError(data.column_names[j])
        means[j] = X[:, j].mean()
        sds[j] = sd
    record = Standardization(means, sds)
    out = CausalDataset(record.apply(X), data.treatment, data.outcome,
                        data.column_names, data.column_kinds)
    return out, record


# --- CSV ingestion ---------------------------------------------------------------


@dataclass
class Table:
    """A raw numeric CSV table keyed by column name."""

    columns: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0


def read_table(path) -> Table:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{i}: expected {len(header)} fields, got {len(row)}")
        values[i - 2] = [_parse_cell(v, path, i) for v in row]
    return Table({h: values[:, j] for j, h in enumerate(header)})


MISSING = {"", "NA", "NaN", "nan", "."}


def _parse_cell(v: str, path, line: int) -> float:
    v = v.strip()
    if v in MISSING:
        return np.nan
    try:
        return float(v)
    except ValueError:
        raise DataError(f"{path}:{line}: non-numeric value {v!r}") from None


def dataset_from_table(
    table: Table,
    treatment: str,
    outcome: str | None = None,
    covariates: Sequence[str] | None = None,
) -> CausalDataset:
    """Build a dataset; without ``outcome`` the outcome is filled with zeros."""
    for col in [treatment] + ([outcome] if outcome else []):
        if col not in table.columns:
            raise DataError(f"missing column {col!r}")
    if covariates is None:
        covariates = [c for c in table.names if c not in (treatment, outcome)]
    missing = [c for c in covariates if c not in table.columns]
    if missing:
        raise DataError(f"missing columns: {missing}")
    incomplete = [c for c in [treatment, *covariates] + ([outcome] if outcome else [])
                  if np.isnan(table.columns[c]).any()]
    if incomplete:
        raise DataError(f"missing values in columns: {incomplete}")
    X = np.column_stack([table.columns[c] for c in covariates]) if covariates else np.empty((len(table), 0))
    y = table.columns[outcome] if outcome else np.zeros(len(table))
    return CausalDataset(X, table.columns[treatment], y, tuple(covariates))


def read_dataset(path, treatment: str, outcome: str | None = None) -> CausalDataset:
    return dataset_from_table(read_table(path), treatment, outcome)
