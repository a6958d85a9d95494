import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gplvm_density.datasets import load_dataset, make_curve, make_paired, parse_svmlight, write_svmlight
from gplvm_density.exceptions import InvalidInputError, ParseError


def write(tmp_path, text, name="d.svm"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_label_dropped_and_gaps_zero(tmp_path):
    ds = parse_svmlight(write(tmp_path, "1 1:0.5 3:2.0\n"))
    np.testing.assert_array_equal(ds.features, [[0.5, 0.0, 2.0]])
    assert ds.source_format == "svmlight" and ds.name == "d"


def test_empty_file(tmp_path):
    ds = parse_svmlight(write(tmp_path, ""))
    assert ds.n_samples == 0


def test_width_is_max_index(tmp_path):
    ds = parse_svmlight(write(tmp_path, "0 2:1\n1 5:2 # comment\n\n-1 qid:3 1:4\n"))
    np.testing.assert_array_equal(ds.features, [[0, 1, 0, 0, 0], [0, 0, 0, 0, 2], [4, 0, 0, 0, 0]])


def test_unlabelled_lines(tmp_path):
    ds = parse_svmlight(write(tmp_path, "1:1.5 2:-2\n"))
    np.testing.assert_array_equal(ds.features, [[1.5, -2.0]])


@pytest.mark.parametrize("line,msg", [
    ("1 0:1.0", "must be >= 1"),
    ("1 -2:1.0", "must be >= 1"),
    ("1 a:1.0", "non-integer"),
    ("1 1:abc", "non-numeric"),
    ("1 1:nan", "non-finite"),
    ("1 1:1 junk", "not index:value"),
])
def test_malformed_lines_report_location(tmp_path, line, msg):
    p = write(tmp_path, "1 1:1\n" + line + "\n")
    with pytest.raises(ParseError, match=msg) as err:
        parse_svmlight(p)
    assert err.value.line == 2 and str(p) in str(err.value)


def test_unreadable(tmp_path):
    with pytest.raises(ParseError):
        parse_svmlight(tmp_path / "missing.svm")


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 5)),
              elements=st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=False)))
def test_round_trip_is_bitwise(tmp_path_factory, X):
    X = X.copy()
    X[:, -1] = np.where(X[:, -1] == 0, 1.0, X[:, -1])  # keep the width recoverable
    p = tmp_path_factory.mktemp("rt") / "x.svm"
    write_svmlight(p, X)
    np.testing.assert_array_equal(parse_svmlight(p).features, X)


def test_synthetic_generators():
    assert make_curve(10, seed=1).shape == (10, 2)
    np.testing.assert_array_equal(make_curve(10, seed=1), make_curve(10, seed=1))
    Z = make_paired(5, 2, offset=1e-6, seed=0)
    assert Z.shape == (10, 2)
    assert np.max(np.abs(Z[::2] - Z[1::2])) < 1e-5
    assert load_dataset("synthetic:gauss3").features.shape == (1000, 3)
    with pytest.raises(InvalidInputError):
        load_dataset("synthetic:nope")
