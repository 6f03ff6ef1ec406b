import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hte_lab.data import SeedTree, derive_stream, split_train_test
from hte_lab.dgp import DgpSpec, gen_ihdp_surface_b, prepare, simulate, synth_covariates, IHDP_SCHEMA
from hte_lab.learners import LearnerSpec
from hte_lab.meta import ModelConfig
from hte_lab.metrics import (
    att, compare_cate_estimates, ipw_pseudo_outcome, mu_risk, mu_risk_iptw, pehe, r_loss, sqrt_pehe,
    tau_risk_iptw, tau_risk_plugin,
)

vec = arrays(float, st.integers(1, 30), elements=st.floats(-1e3, 1e3))


class Fixed:
    def __init__(self, values):
        self.values = np.asarray(values, float)

    def predict_cate(self, X):
        return self.values[: len(X)]


def test_pehe_examples():
    assert pehe([1, 2, 3], [1, 2, 3]) == 0.0
    assert pehe(np.full(4, 3.0), np.ones(4)) == 4.0
    with pytest.raises(ValueError):
        pehe([1, 2], [1, 2, 3])


@pytest.mark.oracle
def test_pehe_hand_arithmetic():
    assert pehe([1, 2, 3], [0, 2, 5]) == pytest.approx(5 / 3)
    assert sqrt_pehe([1, 2, 3], [0, 2, 5]) == pytest.approx(np.sqrt(5 / 3))


@pytest.mark.invariant
@settings(max_examples=50, deadline=None)
@given(vec, st.floats(-1e3, 1e3))
def test_pehe_translation_invariant(tau_hat, c):
    tau = tau_hat[::-1].copy()
    assert pehe(tau_hat + c, tau + c) == pytest.approx(pehe(tau_hat, tau), rel=1e-9, abs=1e-6)


def test_mu_risk_examples():
    assert mu_risk([1, 2], [1, 2]) == 0.0
    assert mu_risk([3.0], [1.0]) == 4.0


@pytest.mark.oracle
def test_mu_risk_hand_arithmetic():
    assert mu_risk([2, 2], [1, 3]) == 1.0


def test_mu_risk_iptw_examples():
    assert mu_risk_iptw([1.0], [0.0], [1], [0.5]) == 2.0
    mu, y = np.array([1.0, 2.0, 4.0]), np.array([0.0, 3.0, 4.5])
    assert mu_risk_iptw(mu, y, [1, 0, 1], [1.0, 0.0, 1.0]) == mu_risk(mu, y)
    with pytest.raises(ValueError):
        mu_risk_iptw([1.0], [0.0], [1], [0.0])


@pytest.mark.oracle
def test_mu_risk_iptw_fixture():
    # arm propensities 0.5, 1 - 0.25, 0.8; squared errors 1, 0, 4
    v = mu_risk_iptw([1, 2, 3], [0, 2, 5], [1, 0, 1], [0.5, 0.25, 0.8])
    assert v == pytest.approx((1 / 0.5 + 0 + 4 / 0.8) / 3)


@pytest.mark.invariant
@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_mu_risk_iptw_dominates(seed, n):
    rng = np.random.default_rng(seed)
    mu, y = rng.normal(size=n), rng.normal(size=n)
    z, pi = (rng.random(n) < 0.5).astype(float), rng.uniform(0.01, 0.99, n)
    assert mu_risk_iptw(mu, y, z, pi) >= mu_risk(mu, y)


def test_tau_risk_plugin_examples():
    X = np.zeros((5, 2))
    assert tau_risk_plugin(np.ones(5), Fixed(np.zeros(5)), X) == 1.0
    assert tau_risk_plugin([0.3, 0.7], Fixed([0.3, 0.7]), X[:2]) == 0.0
    with pytest.raises(ValueError):
        tau_risk_plugin(np.ones(3), Fixed(np.zeros(5)), X[:2])


@pytest.mark.oracle
def test_tau_risk_plugin_fixture():
    assert tau_risk_plugin([1.0, 0.0, 2.0], Fixed([0.0, 0.0, 0.5]), np.zeros((3, 1))) == pytest.approx(3.25 / 3)


@pytest.mark.invariant
@settings(max_examples=50, deadline=None)
@given(vec, st.booleans())
def test_tau_risk_plugin_zero_iff_agreement(tau, perturb):
    other = tau.copy()
    if perturb:
        other[0] += 1e-3
    v = tau_risk_plugin(tau, Fixed(other), np.zeros((len(tau), 1)))
    assert (v == 0.0) == (not perturb)


def test_tau_risk_iptw_examples():
    assert ipw_pseudo_outcome([2.0], [1], [0.5])[0] == 4.0
    assert tau_risk_iptw([4.0], [2.0], [1], [0.5]) == 0.0
    # control arm propensity 0.75: pseudo = -3 / 0.75
    assert ipw_pseudo_outcome([3.0], [0], [0.25])[0] == -4.0
    assert tau_risk_iptw([0.0], [3.0], [0], [0.25]) == 16.0
    with pytest.raises(ValueError):
        tau_risk_iptw([0.0], [3.0], [0], [1.0])


@pytest.mark.oracle
def test_ipw_pseudo_outcome_is_unbiased_under_randomization():
    rng = np.random.default_rng(0)
    n, ate = 20_000, 1.3
    x = rng.normal(size=n)
    z = (rng.random(n) < 0.5).astype(float)
    y = 2 + x + ate * z + rng.normal(size=n)
    pseudo = ipw_pseudo_outcome(y, z, np.full(n, 0.5))
    assert abs(pseudo.mean() - ate) <= 3 * pseudo.std(ddof=1) / np.sqrt(n)


def test_r_loss_examples():
    rt = np.array([0.5, -0.5, 0.25])
    assert r_loss(np.full(3, 2.0), 2 * rt, [1, 0, 1], np.zeros(3), [0.5, 0.5, 0.75]) == 0.0
    y, m = np.array([1.0, 2.0, -1.0]), np.array([0.0, 0.5, 0.5])
    assert r_loss(np.zeros(3), y, [1, 0, 1], m, [0.5, 0.5, 0.5]) == pytest.approx(np.mean((y - m) ** 2))


@pytest.mark.oracle
def test_r_loss_fixture():
    # residuals (0.5, 1.0), treatment residuals (0.5, -0.5), tau 2: (0.5 - 1)^2 and (1 + 1)^2
    assert r_loss([2.0, 2.0], [1.0, 2.0], [1, 0], [0.5, 1.0], [0.5, 0.5]) == pytest.approx((0.25 + 4) / 2)


def test_compare_examples():
    a = np.array([0.3, 1.2, -0.4, 2.0, 0.9])
    c = compare_cate_estimates(a, a)
    assert c.pearson == pytest.approx(1.0) and c.spearman == pytest.approx(1.0)
    assert c.sd_a == pytest.approx(a.std(ddof=1)) and c.mean_b == pytest.approx(a.mean())
    rev = np.empty(5)
    rev[np.argsort(a)] = np.arange(5)[::-1]
    assert compare_cate_estimates(a, rev).spearman == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        compare_cate_estimates(a, np.ones(5))
    with pytest.raises(ValueError):
        compare_cate_estimates(a[:2], a[:2])


def test_att_examples():
    assert att(np.full(6, 2.5), [1, 0, 1, 0, 0, 1]) == 2.5
    with pytest.raises(ValueError):
        att([1.0, 2.0], [0, 0])


@pytest.mark.oracle
def test_att_fixture():
    assert att([1.0, 2.0, 3.0, 4.0], [1, 0, 1, 0]) == 2.0


def test_att_ihdp_truth_is_four():
    rng = np.random.default_rng(1)
    X = synth_covariates(IHDP_SCHEMA, 300, rng)
    X = (X - X.mean(0)) / X.std(0, ddof=1)
    z = (rng.random(300) < 0.3).astype(float)
    assert att(gen_ihdp_surface_b(X, z, rng).tau, z) == pytest.approx(4.0, abs=1e-12)


@pytest.mark.invariant
def test_outcome_risk_and_pehe_rank_models_differently_on_actg_setup1():
    tree = SeedTree(3)
    prepared = prepare(DgpSpec("actg_1"), tree)
    lin, forest = LearnerSpec("linear"), LearnerSpec("forest", {"trees": 30})
    models = [ModelConfig("s-lin", "S", lin), ModelConfig("t-lin", "T", lin), ModelConfig("s-rf", "S", forest),
              ModelConfig("t-rf", "T", forest), ModelConfig("x-rf", "X", forest)]
    discordant = False
    for rep in range(3):
        rng = derive_stream(tree, "rep", rep)
        truth = simulate(prepared, rng)
        split = split_train_test(prepared.data.n, 0.7, rng)
        observed = prepared.data.with_outcome(truth.observed(prepared.z))
        train, test = observed.subset(split.train), observed.subset(split.test)
        risk, err = {}, {}
        for j, m in enumerate(models):
            fitted = m.fit(train, rng=j)
            mu0, mu1 = fitted.predict_outcomes(test.covariates)
            risk[m.name] = mu_risk(np.where(test.treatment == 1, mu1, mu0), test.outcome)
            err[m.name] = pehe(fitted.predict_cate(test.covariates), truth.tau[split.test])
        discordant |= any((risk[a] - risk[b]) * (err[a] - err[b]) < 0 for a, b in itertools.combinations(risk, 2))
    assert discordant
