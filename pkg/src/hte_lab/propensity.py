"""Propensity-score estimation, clipping and overlap diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import CausalDataset, as_generator
from .learners.logistic import ClassifierModel, fit_classifier

DEFAULT_CLIP = (0.01, 0.99)
DEFAULT_FOLDS = 5
DEFAULT_L2 = 1.0
FLAG_BOUNDS = (0.05, 0.95)


class StratificationError(ValueError):
    pass


@dataclass(frozen=True)
class PropensityModel:
    """Classifier fit on all units plus the clipping band applied to every output.

    When ``cross_fitted`` is set, ``fold_assignments`` records which fold each
    training unit was held out in.
    """

    classifier: ClassifierModel
    clip_bounds: tuple[float, float] = DEFAULT_CLIP
    cross_fitted: bool = False
    fold_assignments: np.ndarray | None = None

    def __post_init__(self):
        lo, hi = self.clip_bounds
        if not 0 < lo < hi < 1:
            raise ValueError(f"clip bounds must satisfy 0 < low < high < 1, got {self.clip_bounds}")

    def predict(self, X) -> np.ndarray:
        return np.clip(self.classifier.predict_proba(X), *self.clip_bounds)


def _folds(z: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    n = len(z)
    ids = np.empty(n, dtype=int)
    ids[rng.permutation(n)] = np.arange(n) % folds
    if all(np.unique(z[ids != f]).size == 2 for f in range(folds)):
        return ids
    # refold within each arm so every training complement sees both classes
    if min(z.sum(), n - z.sum()) < 2:
        raise StratificationError("cannot stratify: an arm has fewer than 2 units")
    ids = np.empty(n, dtype=int)
    offset = 0
    for arm in (0.0, 1.0):
        members = rng.permutation(np.flatnonzero(z == arm))
        ids[members] = (np.arange(len(members)) + offset) % folds
        offset += len(members)
    return ids


def estimate_propensity(data: CausalDataset, folds: int = DEFAULT_FOLDS, l2: float = DEFAULT_L2,
                        clip: tuple[float, float] = DEFAULT_CLIP, rng=None
                        ) -> tuple[PropensityModel, np.ndarray]:
    """Logistic propensity model and per-unit estimates.

    With ``folds > 1`` each unit's estimate comes from a classifier that never
    saw its fold (``folds == n`` is leave-one-out).
    """
    X, z = data.covariates, data.treatment
    n = len(z)
    if not (folds == 1 or 2 <= folds <= n):
        raise ValueError(f"folds must be 1 or in [2, {n}], got {folds}")
    full = fit_classifier(X, z, l2)
    if folds == 1:
        model = PropensityModel(full, tuple(clip))
        return model, model.predict(X)
    ids = _folds(z, folds, as_generator(rng))
    pi = np.empty(n)
    for f in range(folds):
        held = ids == f
        if not held.any():
            continue
        clf = fit_classifier(X[~held], z[~held], l2)
        pi[held] = clf.predict_proba(X[held])
    model = PropensityModel(full, tuple(clip), True, ids)
    return model, np.clip(pi, *clip)


@dataclass(frozen=True)
class OverlapReport:
    bin_edges: np.ndarray
    counts_treated: np.ndarray
    counts_control: np.ndarray
    flagged: np.ndarray  # indices of units outside FLAG_BOUNDS
    overlap_coefficient: float

    @property
    def n_flagged(self) -> int:
        return len(self.flagged)

    def write_histogram_csv(self, path, header_lines=()):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_low", "bin_high", "count_treated", "count_control"])
            for lo, hi, ct, cc in zip(self.bin_edges[:-1], self.bin_edges[1:],
                                      self.counts_treated, self.counts_control):
                w.writerow([repr(float(lo)), repr(float(hi)), int(ct), int(cc)])


def overlap_diagnostics(pi_hat, z, bins: int = 10) -> OverlapReport:
    """Per-arm histograms of the propensity on [0, 1] and their overlap.

    The overlap coefficient is the sum over bins of the smaller of the two
    arms' bin proportions: 1 for identical histograms, 0 for disjoint ones.
    """
    pi = np.asarray(pi_hat, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if len(pi) != len(z):
        raise ValueError("pi_hat and z lengths differ")
    edges = np.linspace(0.0, 1.0, bins + 1)
    ct, _ = np.histogram(pi[z == 1], bins=edges)
    cc, _ = np.histogram(pi[z == 0], bins=edges)
    if ct.sum() and cc.sum():
        ovl = float(np.minimum(ct / ct.sum(), cc / cc.sum()).sum())
    else:
        ovl = 0.0
    lo, hi = FLAG_BOUNDS
    flagged = np.flatnonzero((pi < lo) | (pi > hi))
    return OverlapReport(edges, ct, cc, flagged, min(max(ovl, 0.0), 1.0))
