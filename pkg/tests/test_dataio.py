import io
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from s2gd import ObjectiveSpec, smoothness_constants
from s2gd.dataio import (
    LibsvmFormatError,
    SparseDataset,
    generate_least_squares,
    generate_logistic,
    parse_libsvm,
    trace_to_csv_string,
    write_libsvm,
    write_trace_csv,
)
from s2gd.trace import ConvergenceTrace, TracePoint

FIXTURE = os.path.join(os.path.dirname(__file__), "data", "ijcnn_sample.svm")


def test_parse_single_row_without_bias():
    ds = parse_libsvm(io.StringIO("+1 1:0.5 3:2.0\n"), add_bias=False)
    assert (ds.n, ds.d) == (1, 3)
    assert ds.rows == [[(0, 0.5), (2, 2.0)]]
    assert ds.labels.tolist() == [1.0]


def test_parse_appends_bias_column():
    ds = parse_libsvm(io.StringIO("-1 2:1.0\n+1 1:1.0\n"), add_bias=True)
    assert ds.d == 3
    assert ds.rows == [[(1, 1.0), (2, 1.0)], [(0, 1.0), (2, 1.0)]]


def test_ijcnn_layout_gives_22_features_plus_bias():
    ds = parse_libsvm(FIXTURE)
    assert ds.d == 23
    assert ds.n == 12
    assert set(np.unique(ds.labels)) <= {-1.0, 1.0}
    assert np.all(ds.to_dense()[:, 22] == 1.0)


def test_parse_reads_bytes_and_comments():
    ds = parse_libsvm(io.BytesIO(b"# header\n1 1:2 # trailing\n\n0 2:3\n"), add_bias=False)
    assert ds.n == 2
    assert ds.labels.tolist() == [1.0, -1.0]  # {0, 1} remapped
    assert np.allclose(ds.row_sq_norms, [4.0, 9.0])


def test_signed_labels_kept():
    ds = parse_libsvm(io.StringIO("1 1:1\n-1 1:2\n"), add_bias=False)
    assert ds.labels.tolist() == [1.0, -1.0]


def test_explicit_zeros_dropped():
    ds = parse_libsvm(io.StringIO("1 1:0 2:3\n"), add_bias=False)
    assert ds.rows == [[(1, 3.0)]]


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("1 1:1\n1 2:1 2:3\n", 2),
        ("1 3:1 2:1\n", 1),
        ("1 1:abc\n", 1),
        ("1 0:1\n", 1),
        ("1 1-2\n", 1),
        ("abc 1:1\n", 1),
        ("1 1:1\n\n1 x:1\n", 3),
    ],
)
def test_malformed_lines_report_line_number(text, lineno):
    with pytest.raises(LibsvmFormatError) as err:
        parse_libsvm(io.StringIO(text))
    assert err.value.lineno == lineno
    assert f"line {lineno}" in str(err.value)


def test_n_features_too_small():
    with pytest.raises(ValueError):
        parse_libsvm(io.StringIO("1 5:1\n"), n_features=3)


def test_dataset_invariants_enforced():
    with pytest.raises(ValueError):
        SparseDataset.from_arrays([0, 2], [1, 0], [1.0, 1.0], [1.0], d=2)
    with pytest.raises(ValueError):
        SparseDataset.from_arrays([0, 1], [3], [1.0], [1.0], d=2)
    with pytest.raises(ValueError):
        SparseDataset.from_arrays([0, 1], [0], [0.0], [1.0], d=2)


@st.composite
def datasets(draw):
    n = draw(st.integers(1, 8))
    d = draw(st.integers(1, 6))
    values = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False).filter(lambda v: v != 0)
    indptr, indices, vals = [0], [], []
    for _ in range(n):
        cols = sorted(draw(st.sets(st.integers(0, d - 1), max_size=d)))
        indices += cols
        vals += [draw(values) for _ in cols]
        indptr.append(len(indices))
    labels = draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=n, max_size=n))
    return SparseDataset.from_arrays(indptr, indices, vals, labels, d)


@given(datasets())
def test_write_parse_round_trip(ds):
    buf = io.StringIO()
    write_libsvm(ds, buf)
    back = parse_libsvm(io.StringIO(buf.getvalue()), add_bias=False, n_features=ds.d,
                        remap_binary=False)
    assert back.d == ds.d and back.n == ds.n
    assert np.array_equal(back.indptr, ds.indptr)
    assert np.array_equal(back.indices, ds.indices)
    assert np.array_equal(back.values, ds.values)
    assert np.array_equal(back.labels, ds.labels)


@given(datasets())
def test_row_norms_match_stored_values(ds):
    dense = ds.to_dense()
    assert np.allclose(ds.row_sq_norms, (dense**2).sum(axis=1), rtol=1e-12, atol=0)


def test_generator_scaling_rule():
    ds, lam = generate_least_squares(100, 10, kappa=100, density=1.0, seed=7)
    assert ds.row_sq_norms.max() == pytest.approx(1.0, rel=1e-14)
    assert lam == pytest.approx(1 / 99, rel=1e-15)


@given(
    kappa=st.floats(1.01, 1e8),
    density=st.floats(0.05, 1.0),
    seed=st.integers(0, 2**32),
)
def test_generator_condition_number_exact(kappa, density, seed):
    ds, lam = generate_least_squares(40, 8, kappa, density, seed)
    info = smoothness_constants(ObjectiveSpec(ds, "least_squares", lam=lam))
    assert info.L / info.mu == pytest.approx(kappa, rel=1e-9)


def test_generator_large_kappa_lambda():
    # lam does not depend on the data; a small instance suffices for the ratio
    ds, lam = generate_least_squares(200, 20, kappa=1e4, seed=1)
    assert lam == pytest.approx(1 / 9999)
    info = smoothness_constants(ObjectiveSpec(ds, "least_squares", lam=lam))
    assert info.L / info.mu == pytest.approx(1e4, rel=1e-9)


def test_generator_is_deterministic():
    a, _ = generate_least_squares(50, 10, 30.0, density=0.3, seed=5)
    b, _ = generate_least_squares(50, 10, 30.0, density=0.3, seed=5)
    sa, sb = io.StringIO(), io.StringIO()
    write_libsvm(a, sa)
    write_libsvm(b, sb)
    assert sa.getvalue() == sb.getvalue()


def test_generator_density_matches_binomial():
    n, d, p = 2000, 200, 0.05
    ds, _ = generate_least_squares(n, d, 10.0, density=p, seed=11)
    mean_nnz = ds.nnz_per_row.mean()
    sigma = np.sqrt(d * p * (1 - p) / n)
    assert abs(mean_nnz - d * p) <= 3 * sigma


@pytest.mark.parametrize("kwargs", [dict(kappa=1.0), dict(kappa=10, density=0.0),
                                    dict(kappa=10, density=1.5)])
def test_generator_rejects_bad_arguments(kwargs):
    with pytest.raises(ValueError):
        generate_least_squares(10, 5, **kwargs)


def test_logistic_generator_rows_and_labels():
    ds = generate_logistic(300, 12, density=0.5, seed=2)
    nonempty = ds.nnz_per_row > 0
    assert np.allclose(ds.row_sq_norms[nonempty], 1.0)
    assert set(np.unique(ds.labels)) == {-1.0, 1.0}


def test_trace_csv_two_points():
    tr = ConvergenceTrace([TracePoint(0, 0, 1.0), TracePoint(10, 1, 0.5)])
    text = trace_to_csv_string(tr)
    lines = text.splitlines()
    assert lines[0] == "work_units,epoch,objective,residual"
    assert len(lines) == 3
    assert lines[1] == "0,0,1.0,"


def test_trace_csv_formatting_of_a_point():
    n = 10**5
    tr = ConvergenceTrace([TracePoint(2 * n, 1, 0.5, 0.25)])
    assert trace_to_csv_string(tr).splitlines()[1] == "200000,1,0.5,0.25"


def test_trace_csv_empty_is_error():
    with pytest.raises(ValueError):
        write_trace_csv(ConvergenceTrace(), io.StringIO())
