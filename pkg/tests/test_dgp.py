import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hte_lab.data import CausalDataset, DataError, SeedTree, derive_stream
from hte_lab.dgp import (
    ACTG_COLUMNS, ACTG_SCHEMA, IHDP_B_LEVELS, IHDP_B_PROBS, IHDP_RULE, IHDP_SCHEMA, DgpSpec, Rule,
    actg_setup1_surfaces, actg_setup2_surfaces, gen_actg_setup1, gen_actg_setup2, gen_ihdp_surface_b, gen_treatment,
    ihdp_b_means, load_source, make_observational, prepare, simulate, synth_covariates, treatment_probability,
)

S1, S2 = math.sin(1), math.sin(3)


def actg_rows(rows):
    """Rows given as {column: value}; unspecified columns are zero."""
    X = np.zeros((len(rows), len(ACTG_COLUMNS)))
    for i, r in enumerate(rows):
        for k, v in r.items():
            X[i, ACTG_COLUMNS.index(k)] = v
    return X


FIVE = actg_rows([
    dict(age=0, wtkg=1, hemo=1, gender=1, karnof_hi=1, z30=1, race=1),
    dict(age=2, wtkg=3),
    dict(age=-1, wtkg=-1, karnof_hi=1, gender=1),
    dict(age=3, wtkg=1, hemo=1, race=1),
    dict(age=0.5, z30=1, karnof_hi=1),
])


def ihdp_x(n, seed):
    rng = np.random.default_rng(seed)
    X = synth_covariates(IHDP_SCHEMA, n, rng)
    X[:, :6] = (X[:, :6] - X[:, :6].mean(0)) / X[:, :6].std(0, ddof=1)
    return X, (rng.random(n) < 0.3).astype(float)


# --- observational transform -----------------------------------------------------


def fake_ihdp_csv(path, n_treated_white=139, n_treated_nonwhite=238, n_control=608, seed=0):
    rng = np.random.default_rng(seed)
    n = n_treated_white + n_treated_nonwhite + n_control
    X = synth_covariates(IHDP_SCHEMA, n, rng)
    z = np.r_[np.ones(n_treated_white + n_treated_nonwhite), np.zeros(n_control)]
    white = np.r_[np.ones(n_treated_white), np.zeros(n_treated_nonwhite), (rng.random(n_control) < 0.5)]
    cols = list(IHDP_SCHEMA.columns) + ["momwhite", "momblack", "momhisp", "treat"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(n):
            row = list(X[i]) + [white[i], 1 - white[i], 0.0, z[i]]
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def test_make_observational_counts_on_fixture(tmp_path):
    data = load_source(DgpSpec("ihdp_b", csv=str(fake_ihdp_csv(tmp_path / "ihdp.csv"))))
    assert (data.n, int(data.treatment.sum()), int((data.treatment == 0).sum())) == (747, 139, 608)
    assert data.column_names == IHDP_SCHEMA.columns


def test_make_observational_rules():
    X = np.array([[1.0], [0.0], [0.0], [1.0]])
    d = CausalDataset(X, [1, 1, 0, 0], np.zeros(4), column_names=("momwhite",))
    out = make_observational(d, IHDP_RULE)
    np.testing.assert_array_equal(out.covariates[:, 0], [1, 0, 1])
    np.testing.assert_array_equal(out.treatment, [1, 0, 0])
    same = make_observational(d, Rule("momwhite", 7.0))
    np.testing.assert_array_equal(same.covariates, d.covariates)
    with pytest.raises(DataError):
        make_observational(d, Rule("missing", 0.0))
    with pytest.raises(DataError):
        only_white_treated = CausalDataset(X, [1, 0, 0, 0], np.zeros(4), column_names=("momwhite",))
        make_observational(only_white_treated, Rule("momwhite", 1.0))


def test_load_source_reports_missing_columns(tmp_path):
    p = tmp_path / "actg.csv"
    p.write_text("age,wtkg,treat\n1,2,1\n2,3,0\n")
    with pytest.raises(DataError, match="missing"):
        load_source(DgpSpec("actg_1", csv=str(p)))


# --- IHDP surface B --------------------------------------------------------------


def test_ihdp_zero_coefficients():
    X, z = ihdp_x(40, 1)
    mu0, mu1 = ihdp_b_means(X, z, np.zeros(25))
    np.testing.assert_allclose(mu0, 1.0)
    np.testing.assert_allclose(mu1, 5.0)
    np.testing.assert_allclose(mu1 - mu0, 4.0)


@pytest.mark.invariant
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ihdp_att_pin(seed):
    X, z = ihdp_x(120, seed % 1000)
    if not z.any():
        return
    t = gen_ihdp_surface_b(X, z, seed)
    assert abs(t.tau[z == 1].mean() - 4) <= 1e-10


def hill_b_straight_line(X, z, rng):
    """Loop-by-loop surface B, written independently of the vectorised version."""
    levels, probs = [0.0, 0.1, 0.2, 0.3, 0.4], [0.6, 0.1, 0.1, 0.1, 0.1]
    beta = rng.choice(levels, size=25, p=probs)
    n = len(X)
    mu0, lin = [], []
    for i in range(n):
        s_off = sum((X[i][j] + 0.5) * beta[j] for j in range(25))
        s = sum(X[i][j] * beta[j] for j in range(25))
        mu0.append(math.exp(s_off))
        lin.append(s)
    treated = [i for i in range(n) if z[i] == 1]
    omega = sum(lin[i] - mu0[i] for i in treated) / len(treated) - 4
    mu1 = [lin[i] - omega for i in range(n)]
    e0 = rng.standard_normal(n)
    e1 = rng.standard_normal(n)
    return mu0, mu1, [mu0[i] + e0[i] for i in range(n)], [mu1[i] + e1[i] for i in range(n)]


@pytest.mark.oracle
def test_ihdp_second_implementation():
    X = np.random.default_rng(2).normal(size=(3, 25))
    z = np.array([1.0, 0.0, 1.0])
    got = gen_ihdp_surface_b(X, z, np.random.default_rng(9))
    want = hill_b_straight_line(X.tolist(), z.tolist(), np.random.default_rng(9))
    for a, b in zip((got.mu0, got.mu1, got.y0, got.y1), want):
        np.testing.assert_allclose(a, b, rtol=1e-12)


def test_ihdp_shape_guard():
    with pytest.raises(DataError):
        gen_ihdp_surface_b(np.zeros((3, 24)), [1, 0, 0], 0)


def test_ihdp_coefficient_levels():
    assert IHDP_B_LEVELS == (0.0, 0.1, 0.2, 0.3, 0.4) and IHDP_B_PROBS == (0.6, 0.1, 0.1, 0.1, 0.1)


@pytest.mark.invariant
def test_ihdp_noise_is_unit_and_independent():
    X, z = ihdp_x(5000, 3)
    X = X * 0.1  # keep exp() moderate so residual moments are well estimated
    t = gen_ihdp_surface_b(X, z, 4)
    e0, e1 = t.y0 - t.mu0, t.y1 - t.mu1
    assert 0.95 <= e0.std() <= 1.05 and 0.95 <= e1.std() <= 1.05
    assert abs(np.corrcoef(e0, e1)[0, 1]) < 0.05


# --- ACTG ------------------------------------------------------------------------


def test_actg_zero_row():
    mu, tau = actg_setup1_surfaces(np.zeros((1, 12)))
    assert mu[0] == pytest.approx(7.948) and tau[0] == pytest.approx(0.1)
    mu, tau = actg_setup2_surfaces(np.zeros((1, 12)))
    assert mu[0] == pytest.approx(6.0) and tau[0] == pytest.approx(1.0)


@pytest.mark.oracle
def test_actg_setup1_five_rows():
    mu, tau = actg_setup1_surfaces(FIVE)
    # 8 -.07 +.06 -.1/2 +.007 -.1 -.05 | 8 -.002*2 -.1/4 | 8 -.002*2 +.06 -.1/1 +.007 | 8 -.07 -.1/5 -.05 | ...
    np.testing.assert_allclose(mu, [7.797, 7.971, 7.963, 7.86, 7.865], atol=1e-12)
    np.testing.assert_allclose(tau, [0.1, 0.5, -0.2, 0.7, 0.25], atol=1e-12)


@pytest.mark.oracle
def test_actg_setup2_five_rows():
    mu, tau = actg_setup2_surfaces(FIVE)
    np.testing.assert_allclose(mu, [6.7, 8.7 - math.sin(2), 6.3 + 2 * S1, 6.9 - S2, 5.8 - math.sin(0.5)], atol=1e-12)
    np.testing.assert_allclose(tau, [1 + 3 * S1, 2.6 + 1.5 * S2, 1.4 - 3 * S1, 4.6 + 1.5 * S1, 1.1], atol=1e-12)


def test_actg_missing_column():
    with pytest.raises(DataError, match="hemo"):
        actg_setup1_surfaces(np.zeros((2, 11)), [c for c in ACTG_COLUMNS if c != "hemo"])


def actg_x(n, seed):
    X = synth_covariates(ACTG_SCHEMA, n, seed)
    X[:, [0, 1, 7]] = (X[:, [0, 1, 7]] - X[:, [0, 1, 7]].mean(0)) / X[:, [0, 1, 7]].std(0, ddof=1)
    return X


@pytest.mark.invariant
@pytest.mark.parametrize("gen", [gen_actg_setup1, gen_actg_setup2])
@pytest.mark.parametrize("seed", range(3))
def test_actg_shared_noise_identity(gen, seed):
    t = gen(actg_x(600, seed), seed)
    # exact up to floating-point rounding of (mu + tau + eps) - (mu + eps)
    scale = np.abs(t.y1).max()
    np.testing.assert_allclose(t.y1 - t.y0, t.tau, rtol=0, atol=1e-12 * scale)
    np.testing.assert_allclose(t.y1 - t.mu1, t.y0 - t.mu0, rtol=0, atol=1e-12 * scale)


@pytest.mark.invariant
@pytest.mark.parametrize("gen, divisor", [(gen_actg_setup1, 2.0), (gen_actg_setup2, 10.0)])
@pytest.mark.parametrize("seed", range(3))
def test_actg_noise_scale(gen, divisor, seed):
    X = actg_x(813, seed)
    t = gen(X, seed)
    sigma = (t.mu0.max() - t.mu0.min()) / divisor
    assert sigma * divisor == pytest.approx(np.ptp(t.mu0))
    assert 0.9 * sigma <= (t.y0 - t.mu0).std(ddof=1) <= 1.1 * sigma


# --- treatment and covariates ----------------------------------------------------


@pytest.mark.oracle
def test_randomized_treatment_fraction():
    z = gen_treatment(np.zeros((10_000, 1)), None, ("randomized", 0.5), 0)
    assert abs(z.mean() - 0.5) <= 0.02


def test_targeted_treatment():
    mu = np.random.default_rng(1).normal(size=300)
    pi = treatment_probability(mu, 5, 0)
    assert stats.spearmanr(mu, pi)[0] == pytest.approx(1.0)
    np.testing.assert_array_equal(treatment_probability(mu, 0, 0), 0.5)
    z = gen_treatment(np.zeros((300, 1)), mu, ("targeted", 5, 0), 2)
    assert mu[z == 1].mean() > mu[z == 0].mean()
    with pytest.raises(ValueError):
        gen_treatment(np.zeros((3, 1)), None, ("randomized", 1.0), 0)


def test_synth_covariates_schema():
    X = synth_covariates(IHDP_SCHEMA, 747, 0)
    assert X.shape == (747, 25)
    binary = [j for j in range(25) if set(np.unique(X[:, j])) <= {0.0, 1.0}]
    assert len(binary) == 19 and IHDP_SCHEMA.kinds.count("continuous") == 6
    ones = synth_covariates(IHDP_SCHEMA, 50, 1, {"sex": 1.0})
    np.testing.assert_array_equal(ones[:, IHDP_SCHEMA.columns.index("sex")], 1.0)
    np.testing.assert_array_equal(synth_covariates(IHDP_SCHEMA, 20, 5), synth_covariates(IHDP_SCHEMA, 20, 5))


@pytest.mark.oracle
def test_synth_continuous_moments():
    X = synth_covariates(ACTG_SCHEMA, 10_000, 7)
    col = X[:, 0]
    assert abs(col.mean()) <= 0.05 and abs(col.std(ddof=1) - 1) <= 0.05


# --- prepared benchmark inputs ---------------------------------------------------


def test_prepare_fixes_covariates_and_treatment():
    spec = DgpSpec("actg_1")
    a, b = prepare(spec, SeedTree(4)), prepare(spec, SeedTree(4))
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.z, b.z)
    assert a.X.shape == (813, 12)
    t1 = simulate(a, derive_stream(SeedTree(4), "rep", 0))
    t2 = simulate(a, derive_stream(SeedTree(4), "rep", 1))
    assert not np.array_equal(t1.y0, t2.y0)
    np.testing.assert_array_equal(t1.tau, t2.tau)


def test_dgp_spec_validation():
    with pytest.raises(ValueError):
        DgpSpec("acic")
    with pytest.raises(ValueError):
        DgpSpec("actg_1", treatment=("from_data",))
    assert DgpSpec("actg_2").noise_rule == "range_fraction(10)"
    assert DgpSpec("ihdp_b").treatment_mode[0] == "randomized"
    assert DgpSpec("ihdp_b", csv="x.csv").treatment_mode == ("from_data",)
