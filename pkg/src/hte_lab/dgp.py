"""Semi-synthetic outcome generators and the covariate/treatment sources they run on.

Covariates and treatment are fixed once per benchmark (``prepare``); each
replication only redraws outcomes (``simulate``).  All generators expect
covariates whose continuous columns are already standardised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import (
    BINARY, CONTINUOUS, CausalDataset, DataError, SeedTree, SimTruth, as_generator, dataset_from_table,
    derive_stream, read_table, standardize_covariates,
)

IHDP_CONTINUOUS = ("bw", "b.head", "preterm", "birth.o", "nnhealth", "momage")
IHDP_BINARY = ("sex", "twin", "b.marr", "mom.lths", "mom.hs", "mom.scoll", "cig", "first", "booze", "drugs",
               "work.dur", "prenatal", "ark", "ein", "har", "mia", "pen", "tex", "was")
IHDP_RACE = ("momwhite", "momblack", "momhisp")
ACTG_COLUMNS = ("age", "wtkg", "hemo", "homo", "drugs", "oprior", "z30", "preanti", "race", "gender", "str2",
                "karnof_hi")
ACTG_CONTINUOUS = ("age", "wtkg", "preanti")

IHDP_B_LEVELS = (0.0, 0.1, 0.2, 0.3, 0.4)
IHDP_B_PROBS = (0.6, 0.1, 0.1, 0.1, 0.1)
IHDP_ATT = 4.0
IHDP_OFFSET = 0.5


@dataclass(frozen=True)
class Schema:
    columns: tuple[str, ...]
    kinds: tuple[str, ...]
    bernoulli_p: dict[str, float] = field(default_factory=dict)

    @property
    def n_continuous(self) -> int:
        return self.kinds.count(CONTINUOUS)

    @property
    def n_binary(self) -> int:
        return self.kinds.count(BINARY)

    def check(self, data: CausalDataset):
        missing = [c for c in self.columns if c not in data.column_names]
        extra = [c for c in data.column_names if c not in self.columns]
        if missing or extra:
            raise DataError(f"schema mismatch: missing {missing}, extra {extra}")


def _schema(columns, continuous, p=None):
    kinds = tuple(CONTINUOUS if c in continuous else BINARY for c in columns)
    return Schema(tuple(columns), kinds, dict(p or {}))


IHDP_SCHEMA = _schema(IHDP_CONTINUOUS + IHDP_BINARY, IHDP_CONTINUOUS)
# binary marginals roughly matching the trial population
ACTG_SCHEMA = _schema(ACTG_COLUMNS, ACTG_CONTINUOUS, {
    "hemo": 0.08, "homo": 0.66, "drugs": 0.13, "oprior": 0.02, "z30": 0.55, "race": 0.29, "gender": 0.83,
    "str2": 0.59, "karnof_hi": 0.65,
})
SYNTHETIC_SCHEMA = _schema([f"c{j}" for j in range(1, 6)] + [f"b{j}" for j in range(1, 6)],
                           [f"c{j}" for j in range(1, 6)])


@dataclass(frozen=True)
class Rule:
    """Drop treated units whose ``column`` equals ``value``."""

    column: str
    value: float

    def matches(self, data: CausalDataset) -> np.ndarray:
        return data.column(self.column) == self.value


IHDP_RULE = Rule("momwhite", 0.0)
ACTG_RULE = Rule("symptom", 0.0)


def make_observational(data: CausalDataset, rule: Rule) -> CausalDataset:
    drop = rule.matches(data) & (data.treatment == 1)
    if drop.sum() == data.treatment.sum():
        raise DataError(f"rule {rule} removes every treated unit")
    return data.subset(np.flatnonzero(~drop))


# --- covariates & treatment ------------------------------------------------------


def synth_covariates(schema: Schema, n: int, rng, bernoulli_p: dict[str, float] | None = None) -> np.ndarray:
    """Standard-normal continuous columns, Bernoulli binary columns (p defaults to 0.5)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(rng)
    p = {**schema.bernoulli_p, **(bernoulli_p or {})}
    X = np.empty((n, len(schema.columns)))
    for j, (name, kind) in enumerate(zip(schema.columns, schema.kinds)):
        if kind == CONTINUOUS:
            X[:, j] = rng.standard_normal(n)
        else:
            X[:, j] = (rng.random(n) < p.get(name, 0.5)).astype(float)
    return X


def gen_treatment(X, mu, mode: tuple, rng) -> np.ndarray:
    """``("randomized", p)`` or ``("targeted", a, b)`` with pi = logistic(a * std(mu) + b)."""
    rng = as_generator(rng)
    n = len(X)
    kind = mode[0]
    if kind == "randomized":
        p = float(mode[1])
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        pi = np.full(n, p)
    elif kind == "targeted":
        pi = treatment_probability(mu, float(mode[1]), float(mode[2]))
    else:
        raise ValueError(f"unknown treatment mode {kind!r}")
    return (rng.random(n) < pi).astype(float)


def treatment_probability(mu, a: float, b: float) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    sd = mu.std()
    return expit(a * ((mu - mu.mean()) / sd if sd > 0 else 0.0 * mu) + b)


# --- outcome surfaces ------------------------------------------------------------


def _columns(X, columns, needed):
    X = np.asarray(X, dtype=float)
    columns = list(columns)
    missing = [c for c in needed if c not in columns]
    if missing:
        raise DataError(f"missing schema columns: {missing}")
    if X.ndim != 2 or X.shape[1] != len(columns):
        raise DataError(f"expected {len(columns)} columns, got shape {X.shape}")
    return {c: X[:, columns.index(c)] for c in needed}


def actg_setup1_surfaces(X, columns=ACTG_COLUMNS):
    c = _columns(X, columns, ("age", "wtkg", "hemo", "gender", "karnof_hi", "z30", "race"))
    mu = (8 - 0.07 * c["hemo"] - 0.002 * np.abs(c["wtkg"] - 1) + 0.06 * c["gender"] - 0.1 / (c["age"] + 2)
          + 0.007 * c["karnof_hi"] - 0.1 * c["z30"] - 0.05 * c["race"])
    tau = 0.1 + 0.1 * c["age"] * (c["karnof_hi"] + 2)
    return mu, tau


def actg_setup2_surfaces(X, columns=ACTG_COLUMNS):
    c = _columns(X, columns, ("age", "wtkg", "hemo", "gender", "karnof_hi", "z30", "race"))
    mu = (6 + 0.3 * c["wtkg"] ** 2 - np.sin(c["age"]) * (c["gender"] + 1) + 0.6 * c["hemo"] * c["race"]
          - 0.2 * c["z30"])
    tau = 1 + 1.5 * np.sin(c["wtkg"]) * (c["karnof_hi"] + 1) + 0.4 * c["age"] ** 2
    return mu, tau


def _shared_noise(mu, tau, divisor, rng) -> SimTruth:
    sigma = (mu.max() - mu.min()) / divisor
    eps = as_generator(rng).normal(0.0, sigma, len(mu))
    return SimTruth(mu, mu + tau, mu + eps, mu + tau + eps)


def gen_actg_setup1(X, rng, columns=ACTG_COLUMNS) -> SimTruth:
    mu, tau = actg_setup1_surfaces(X, columns)
    return _shared_noise(mu, tau, 2.0, rng)


def gen_actg_setup2(X, rng, columns=ACTG_COLUMNS) -> SimTruth:
    mu, tau = actg_setup2_surfaces(X, columns)
    return _shared_noise(mu, tau, 10.0, rng)


def ihdp_b_means(X, z, beta):
    """Noiseless (mu0, mu1) for a given coefficient vector; the offset pins the treated-mean effect."""
    lin = X @ beta
    mu0 = np.exp((X + IHDP_OFFSET) @ beta)
    t = np.asarray(z) == 1
    omega = np.mean(lin[t] - mu0[t]) - IHDP_ATT
    return mu0, lin - omega


def gen_ihdp_surface_b(X, z, rng) -> SimTruth:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(IHDP_SCHEMA.columns):
        raise DataError(f"expected {len(IHDP_SCHEMA.columns)} covariate columns, got shape {X.shape}")
    if not np.any(np.asarray(z) == 1):
        raise DataError("no treated units")
    rng = as_generator(rng)
    beta = rng.choice(IHDP_B_LEVELS, size=X.shape[1], p=IHDP_B_PROBS)
    mu0, mu1 = ihdp_b_means(X, z, beta)
    y0 = rng.normal(mu0, 1.0)
    y1 = rng.normal(mu1, 1.0)
    return SimTruth(mu0, mu1, y0, y1)


def synthetic_surfaces(X, effect: float):
    d = X.shape[1]
    beta = np.linspace(-1.0, 1.0, d)
    return X @ beta, np.full(len(X), float(effect))


def gen_synthetic(X, rng, effect: float = 1.0) -> SimTruth:
    """Linear outcome, constant effect, independent unit noise per arm."""
    rng = as_generator(rng)
    mu, tau = synthetic_surfaces(X, effect)
    return SimTruth(mu, mu + tau, rng.normal(mu, 1.0), rng.normal(mu + tau, 1.0))


# --- specs -----------------------------------------------------------------------

DGP_NAMES = ("ihdp_b", "actg_1", "actg_2", "synthetic")
SCHEMAS = {"ihdp_b": IHDP_SCHEMA, "actg_1": ACTG_SCHEMA, "actg_2": ACTG_SCHEMA, "synthetic": SYNTHETIC_SCHEMA}
DEFAULT_N = {"ihdp_b": 747, "actg_1": 813, "actg_2": 813, "synthetic": 1000}
# used when covariates are synthesised and no treatment source is configured
DEFAULT_TREATMENT = {
    "ihdp_b": ("randomized", 139 / 747),
    "actg_1": ("targeted", 1.0, 0.0),
    "actg_2": ("targeted", 1.0, 0.0),
    "synthetic": ("randomized", 0.5),
}
RULES = {"ihdp_b": (IHDP_RULE, IHDP_RACE), "actg_1": (ACTG_RULE, ("symptom",)), "actg_2": (ACTG_RULE, ("symptom",))}


@dataclass(frozen=True)
class DgpSpec:
    """Where covariates and treatment come from and which outcome surface to simulate.

    ``csv`` switches to real covariates (treatment column ``treatment_column``,
    observational rule applied when ``observational``); otherwise ``n``
    schema-matched synthetic rows are drawn.  ``treatment`` is
    ``("from_data",)``, ``("randomized", p)`` or ``("targeted", a, b)``.
    """

    name: str
    csv: str | None = None
    n: int | None = None
    treatment: tuple | None = None
    treatment_column: str = "treat"
    observational: bool = True
    effect: float = 1.0
    bernoulli_p: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.name not in DGP_NAMES:
            raise ValueError(f"unknown dgp {self.name!r}; expected one of {DGP_NAMES}")
        if self.treatment is not None and self.treatment[0] == "from_data" and self.csv is None:
            raise ValueError("treatment 'from_data' needs a covariate csv")

    @property
    def schema(self) -> Schema:
        return SCHEMAS[self.name]

    @property
    def noise_rule(self) -> str:
        return {"ihdp_b": "ihdp_unit", "actg_1": "range_fraction(2)", "actg_2": "range_fraction(10)",
                "synthetic": "unit"}[self.name]

    @property
    def treatment_mode(self) -> tuple:
        if self.treatment is not None:
            return tuple(self.treatment)
        return ("from_data",) if self.csv else DEFAULT_TREATMENT[self.name]


@dataclass(frozen=True)
class PreparedDgp:
    """Fixed standardised covariates and treatment for a benchmark."""

    spec: DgpSpec
    data: CausalDataset

    @property
    def X(self):
        return self.data.covariates

    @property
    def z(self):
        return self.data.treatment


def surfaces(spec: DgpSpec, X, columns):
    if spec.name == "actg_1":
        return actg_setup1_surfaces(X, columns)
    if spec.name == "actg_2":
        return actg_setup2_surfaces(X, columns)
    if spec.name == "synthetic":
        return synthetic_surfaces(X, spec.effect)
    raise ValueError("ihdp_b surfaces depend on a per-replication coefficient draw")


def load_source(spec: DgpSpec) -> CausalDataset:
    """Real covariates from CSV with the observational rule applied, in schema column order."""
    table = read_table(spec.csv)
    rule, drop = RULES.get(spec.name, (None, ()))
    wanted = list(spec.schema.columns)
    if spec.observational and rule is not None:
        wanted += [c for c in drop if c in table.columns and c not in wanted]
    missing = [c for c in wanted if c not in table.columns]
    if spec.observational and rule is not None and rule.column not in table.columns:
        missing.append(rule.column)
    if spec.treatment_column not in table.columns:
        missing.append(spec.treatment_column)
    if missing:
        raise DataError(f"{spec.csv}: schema mismatch, missing columns {missing}")
    data = dataset_from_table(table, spec.treatment_column, covariates=wanted)
    if spec.observational and rule is not None:
        data = make_observational(data, rule)
        data = data.drop_columns([c for c in data.column_names if c not in spec.schema.columns])
    return CausalDataset(data.covariates, data.treatment, data.outcome, spec.schema.columns, spec.schema.kinds)


def prepare(spec: DgpSpec, tree: SeedTree) -> PreparedDgp:
    """Fix covariates (standardised) and treatment for every replication."""
    schema = spec.schema
    if spec.csv:
        source = load_source(spec)
        X, z = source.covariates, source.treatment
    else:
        n = spec.n or DEFAULT_N[spec.name]
        X = synth_covariates(schema, n, derive_stream(tree, "covariates"), dict(spec.bernoulli_p))
        z = None
    placeholder = CausalDataset(X, np.r_[1.0, np.zeros(len(X) - 1)], np.zeros(len(X)), schema.columns,
                                schema.kinds)
    X = standardize_covariates(placeholder)[0].covariates
    mode = spec.treatment_mode
    if mode[0] != "from_data":
        mu = surfaces(spec, X, schema.columns)[0] if mode[0] == "targeted" else None
        z = gen_treatment(X, mu, mode, derive_stream(tree, "treatment"))
    return PreparedDgp(spec, CausalDataset(X, z, np.zeros(len(X)), schema.columns, schema.kinds))


def simulate(prepared: PreparedDgp, rng) -> SimTruth:
    spec, X, z = prepared.spec, prepared.X, prepared.z
    if spec.name == "ihdp_b":
        return gen_ihdp_surface_b(X, z, rng)
    if spec.name == "actg_1":
        return gen_actg_setup1(X, rng, spec.schema.columns)
    if spec.name == "actg_2":
        return gen_actg_setup2(X, rng, spec.schema.columns)
    return gen_synthetic(X, rng, spec.effect)
