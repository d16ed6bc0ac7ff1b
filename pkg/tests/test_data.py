import numpy as np
import pytest

from htesim import (
    Dataset,
    ParseError,
    Sample,
    SchemaError,
    SplitPlan,
    load_csv,
    load_schema,
    make_folds,
    split_half,
    write_csv,
    write_schema,
)


def test_dataset_rejects_nan():
    with pytest.raises(ValueError, match="NaN"):
        Dataset(np.array([[1.0, np.nan]]), ("continuous", "continuous"), ("a", "b"))


def test_dataset_rejects_nonbinary_binary_column():
    with pytest.raises(SchemaError, match="binary"):
        Dataset(np.array([[0.0], [2.0]]), ("binary",), ("d",))


def test_sample_checks_lengths_and_treatment():
    data = Dataset(np.arange(6.0).reshape(3, 2), ("continuous",) * 2, ("a", "b"))
    with pytest.raises(ValueError):
        Sample(data, treatment=[0, 1], outcome=[1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        Sample(data, treatment=[0, 1, 2], outcome=[1.0, 2.0, 3.0])
    s = Sample(data, treatment=[0, 1, 0], outcome=[1.0, 2.0, 3.0])
    assert s.n == 3


def test_load_csv_roundtrip(tmp_path):
    # three-row CSV with one continuous and one binary column reads back directly
    path = tmp_path / "small.csv"
    path.write_text("x1,x2\n1.5,0\n-2.25,1\n3.125,0\n")
    ds = load_csv(path, {"x1": "continuous", "x2": "binary"})
    assert ds.n == 3 and ds.k == 2
    assert ds.covariates[1, 0] == -2.25


def test_load_csv_missing_cell_names_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,x2\n1.0,0\nNA,1\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(path, {"x1": "continuous", "x2": "binary"})


def test_load_csv_malformed_cell_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1\n1.0\nbogus\n")
    with pytest.raises(ParseError, match="line 3"):
        load_csv(path, {"x1": "continuous"})


def test_load_csv_binary_violation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("d\n0\n2\n")
    with pytest.raises(SchemaError):
        load_csv(path, {"d": "binary"})


def test_load_csv_header_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("wrong\n1.0\n")
    with pytest.raises(SchemaError, match="header"):
        load_csv(path, {"x1": "continuous"})


def test_write_read_roundtrip_is_bitwise_identity(tmp_path):
    rng = np.random.default_rng(42)
    X = rng.normal(size=(100, 10)) * np.logspace(-8, 8, 10)
    ds = Dataset(X, ("continuous",) * 10, tuple(f"x{j}" for j in range(10)))
    write_csv(tmp_path / "data.csv", ds)
    write_schema(tmp_path / "schema.csv", ds)
    back = load_csv(tmp_path / "data.csv", load_schema(tmp_path / "schema.csv"))
    assert back.column_names == ds.column_names
    assert np.array_equal(back.covariates, ds.covariates)


def test_make_folds_singletons():
    plan = make_folds(10, 10, seed=5)
    assert np.array_equal(np.sort(np.bincount(plan.fold_assignments)), np.ones(10))


def test_make_folds_two_equal_halves():
    plan = make_folds(10, 2, seed=5)
    assert sorted(np.bincount(plan.fold_assignments)) == [5, 5]


def test_make_folds_remainder_and_determinism():
    plan1 = make_folds(101, 10, seed=77)
    plan2 = make_folds(101, 10, seed=77)
    sizes = sorted(np.bincount(plan1.fold_assignments))
    assert sizes == [10] * 9 + [11]
    assert np.array_equal(plan1.fold_assignments, plan2.fold_assignments)
    assert not np.array_equal(plan1.fold_assignments, make_folds(101, 10, seed=78).fold_assignments)


def test_make_folds_argument_errors():
    with pytest.raises(ValueError):
        make_folds(5, 6, seed=0)
    with pytest.raises(ValueError):
        make_folds(5, 1, seed=0)


def test_folds_partition_exactly():
    for n, k, seed in ((17, 3, 0), (50, 7, 3), (8, 8, 9)):
        plan = make_folds(n, k, seed)
        union = np.concatenate([plan.fold(f) for f in range(k)])
        assert np.array_equal(np.sort(union), np.arange(n))


def test_split_half_sizes():
    assert sorted(np.bincount(split_half(4, 0).fold_assignments)) == [2, 2]
    plan5 = split_half(5, 0)
    assert np.bincount(plan5.fold_assignments)[0] == 3  # fold 0 takes the ceil
    with pytest.raises(ValueError):
        split_half(1, 0)


def test_split_half_stable_across_runs():
    a = split_half(1000, seed=123).fold_assignments
    b = split_half(1000, seed=123).fold_assignments
    assert np.array_equal(a, b)


def test_split_plan_validates_balance():
    with pytest.raises(ValueError):
        SplitPlan(np.array([0, 0, 0, 1]), seed=0, n_folds=2)


def test_split_plan_swapped():
    plan = split_half(7, 2)
    sw = plan.swapped()
    assert np.array_equal(sw.fold(0), plan.fold(1))
    assert np.array_equal(sw.fold(1), plan.fold(0))
