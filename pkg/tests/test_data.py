import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hte_lab.data import (
    CausalDataset, DataError, DegenerateColumnError, SeedTree, SimTruth, derive_stream, read_dataset,
    split_train_test, standardize_covariates,
)


def make(X, z=None, y=None, **kw):
    X = np.asarray(X, float)
    n = len(X)
    z = np.r_[1.0, np.zeros(n - 1)] if z is None else z
    y = np.zeros(n) if y is None else y
    return CausalDataset(X, z, y, **kw)


def test_dataset_rejects_bad_treatment_and_nonfinite():
    with pytest.raises(DataError):
        make([[1.0], [2.0]], z=[0, 2])
    with pytest.raises(DataError):
        make([[1.0], [2.0]], z=[1, 1])
    with pytest.raises(DataError):
        make([[np.nan], [2.0]])
    with pytest.raises(DataError):
        make([[0.5], [2.0]], column_kinds=("binary",))


def test_dataset_is_immutable():
    d = make([[1.0], [2.0]])
    with pytest.raises(ValueError):
        d.covariates[0, 0] = 5.0


def test_simtruth_consistency():
    t = SimTruth(np.array([1.0, 2.0]), np.array([3.0, 1.0]), np.array([1.5, 2.5]), np.array([3.5, 0.5]))
    np.testing.assert_array_equal(t.tau, [2.0, -1.0])
    np.testing.assert_array_equal(t.observed(np.array([1, 0])), [3.5, 2.5])


def test_standardize_symmetric_column():
    d, rec = standardize_covariates(make([[1.0, 0], [2.0, 1], [3.0, 1]]))
    np.testing.assert_allclose(d.covariates[:, 0], [-1, 0, 1])
    np.testing.assert_array_equal(d.covariates[:, 1], [0, 1, 1])
    assert rec.means[0] == 2.0 and rec.sds[0] == 1.0


def test_standardize_degenerate_column_named():
    with pytest.raises(DegenerateColumnError, match="age"):
        standardize_covariates(make([[4.0], [4.0], [4.0]], column_names=("age",)))


@pytest.mark.oracle
def test_standardized_moments():
    rng = np.random.default_rng(3)
    X = np.column_stack([rng.gamma(2, 3, 200), rng.normal(5, 9, 200), rng.integers(0, 2, 200)])
    d, _ = standardize_covariates(make(X))
    for j in (0, 1):
        col = d.covariates[:, j]
        assert abs(col.mean()) < 1e-12
        assert abs(col.std(ddof=1) - 1) < 1e-12


@pytest.mark.invariant
@settings(max_examples=50, deadline=None)
@given(arrays(float, (12, 3), elements=st.floats(-1e3, 1e3)))
def test_standardize_round_trip(X):
    X = X + np.arange(12)[:, None] * 1e-3  # no constant columns
    d, rec = standardize_covariates(make(X, column_kinds=("continuous",) * 3))
    np.testing.assert_allclose(rec.invert(d.covariates), X, atol=1e-10)


def test_split_sizes_and_determinism():
    s = split_train_test(10, 0.7, np.random.default_rng(1))
    assert len(s.train) == 7 and len(s.test) == 3
    s2 = split_train_test(10, 0.7, np.random.default_rng(1))
    np.testing.assert_array_equal(s.train, s2.train)
    with pytest.raises(ValueError):
        split_train_test(10, 1.0, 0)


@pytest.mark.oracle
def test_split_ihdp_size():
    s = split_train_test(747, 0.7, 0)
    assert (len(s.train), len(s.test)) == (523, 224)


@pytest.mark.invariant
@given(st.integers(4, 500), st.floats(0.05, 0.95), st.integers(0, 2**32))
def test_split_partition(n, frac, seed):
    s = split_train_test(n, frac, seed)
    assert len(np.intersect1d(s.train, s.test)) == 0
    np.testing.assert_array_equal(np.sort(np.r_[s.train, s.test]), np.arange(n))
    assert len(s.train) == int(np.floor(frac * n + 0.5))


@pytest.mark.invariant
def test_split_test_frequency_over_seeds():
    n = 10
    hits = np.zeros(n)
    for seed in range(1000):
        hits[split_train_test(n, 0.7, derive_stream(SeedTree(seed), "split")).test] += 1
    assert np.all(np.abs(hits / 1000 - 0.30) <= 0.03)


def test_derive_stream_distinct_and_repeatable():
    t = SeedTree(1)
    a = derive_stream(t, "rep", 0).random(4)
    b = derive_stream(t, "rep", 1).random(4)
    assert np.all(a != b)
    np.testing.assert_array_equal(a, derive_stream(t, "rep", 0).random(4))


@pytest.mark.oracle
def test_seed_tree_key_matches_hash_recipe():
    import hashlib
    expected = int.from_bytes(hashlib.sha256(b"1|rep:0").digest()[:16], "little")
    assert SeedTree(1).child("rep", 0).key() == expected
    # frozen draws: a platform or numpy change that alters the stream shows up here
    np.testing.assert_array_equal(derive_stream(SeedTree(1), "rep", 0).random(2),
                                  [0.3989499003903437, 0.9940561999679182])


@pytest.mark.oracle
def test_derive_stream_uniform_mean():
    u = derive_stream(SeedTree(1), "rep", 0).random(10_000)
    assert 0.49 <= u.mean() <= 0.51


def test_csv_ingestion(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("# comment\nage,flag,z,y\n1.5,0,1,2.0\n2.5,1,0,3.0\n3.0,1,0,NA\n")
    with pytest.raises(DataError, match="y"):
        read_dataset(p, "z", "y")
    p.write_text("age,flag,z,y,notes\n1.5,0,1,2.0,NA\n2.5,1,0,3.0,NA\n")
    with pytest.raises(DataError, match="notes"):
        read_dataset(p, "z", "y")
    p.write_text("age,flag,z,y\n1.5,0,1,2.0\n2.5,1,0,3.0\n")
    d = read_dataset(p, "z", "y")
    assert d.column_names == ("age", "flag")
    assert d.column_kinds == ("continuous", "binary")
