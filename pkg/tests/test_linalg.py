import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from auocs.linalg import (
    DimensionError,
    ParseError,
    as_mat,
    as_vec,
    format_array,
    mat_inf_norm,
    matvec,
    matvec_t,
    norm1,
    norm2,
    parse_array,
    read_array,
    spectral_norm_estimate,
    write_array,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("v, expected", [([3, -4], 7), ([0, 0, 0], 0), ([1] * 6, 6)])
def test_norm1(v, expected):
    assert norm1(v) == expected


@pytest.mark.parametrize("v, expected", [([3, -4], 5), ([0], 0), ([1, 1, 1, 1], 2)])
def test_norm2(v, expected):
    assert norm2(v) == expected


@pytest.mark.parametrize("fn", [norm1, norm2])
def test_norm_of_empty_vector(fn):
    with pytest.raises(DimensionError):
        fn([])


@pytest.mark.parametrize("m, expected", [
    ([[1, -2], [0, 3]], 3),
    (np.eye(3), 1),
    ([[0.7, 0.7], [0, 0]], 1.4),
])
def test_mat_inf_norm(m, expected):
    assert mat_inf_norm(m) == pytest.approx(expected, abs=1e-15)


def test_mat_inf_norm_empty():
    with pytest.raises(DimensionError):
        mat_inf_norm(np.zeros((0, 3)))


def test_matvec_examples():
    np.testing.assert_array_equal(matvec(np.eye(2), [5, 6]), [5, 6])
    np.testing.assert_array_equal(matvec([[1, 1]], [2, 3]), [5])
    np.testing.assert_array_equal(matvec(np.zeros((3, 2)), [4, -1]), np.zeros(3))
    np.testing.assert_array_equal(matvec_t([[1, 2], [3, 4]], [1, 1]), [4, 6])


def test_matvec_dimension_mismatch():
    with pytest.raises(DimensionError):
        matvec(np.eye(2), [1, 2, 3])
    with pytest.raises(DimensionError):
        matvec_t(np.eye(2), [1, 2, 3])


def test_constructors_reject_nonfinite():
    with pytest.raises(ValueError):
        as_vec([1.0, np.nan])
    with pytest.raises(ValueError):
        as_mat([[np.inf]])
    with pytest.raises(DimensionError):
        as_mat([1.0, 2.0])


@pytest.mark.parametrize("m, expected, tol", [
    (np.eye(4), 1.0, 1e-6),
    (np.diag([3.0, 1.0]), 3.0, 0.03),
    ([[0.0, 2.0], [0.0, 0.0]], 2.0, 0.02),
])
def test_spectral_norm_estimate(m, expected, tol):
    assert spectral_norm_estimate(m, iters=100, seed=1) == pytest.approx(expected, abs=tol)


def test_spectral_norm_matches_svd_and_is_deterministic():
    rng = np.random.default_rng(0)
    U, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    W, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    S = np.zeros((6, 5))
    S[np.arange(5), np.arange(5)] = [5.0, 2.0, 1.0, 0.5, 0.1]
    m = U @ S @ W.T
    est = spectral_norm_estimate(m, iters=100, seed=3)
    assert est == pytest.approx(5.0, rel=0.01)
    assert est == spectral_norm_estimate(m, iters=100, seed=3)
    with pytest.raises(ValueError):
        spectral_norm_estimate(m, iters=0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12).flatmap(lambda n: st.tuples(arrays(np.float64, n, elements=finite),
                                                       arrays(np.float64, n, elements=finite))))
def test_holder_chain(pair):
    v, theta = pair
    dot = abs(float(v @ theta))
    slack = 1e-9 * (1 + norm1(v) * norm1(theta))
    assert dot <= norm1(v) * norm1(theta) + slack
    assert dot <= np.max(np.abs(v)) * norm1(theta) + slack


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 20).flatmap(lambda n: arrays(np.float64, n, elements=finite)))
def test_norm2_le_norm1(v):
    assert norm2(v) <= norm1(v) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_mat_inf_norm_is_max_row_l1(rows, cols, seed):
    m = np.random.default_rng(seed).standard_normal((rows, cols))
    assert mat_inf_norm(m) == max(norm1(r) for r in m)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), finite, finite)
def test_matvec_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((4, 5))
    u, w = rng.standard_normal(5), rng.standard_normal(5)
    lhs = matvec(M, a * u + b * w)
    rhs = a * matvec(M, u) + b * matvec(M, w)
    scale = 1 + np.abs(a) * np.abs(M) @ np.abs(u) + np.abs(b) * np.abs(M) @ np.abs(w)
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * scale)


def test_text_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    m = rng.standard_normal((4, 3)) * 10.0 ** rng.integers(-300, 300, size=(4, 3))
    m[0, 0] = 0.1
    m[1, 1] = -0.0
    path = tmp_path / "m.txt"
    write_array(path, m)
    back = read_array(path)
    assert back.tobytes() == m.tobytes()
    v = rng.standard_normal(7)
    assert parse_array(format_array(v).splitlines()).tobytes() == v.tobytes()


def test_text_format_layout():
    text = format_array([[1.0, 2.5]])
    assert text.splitlines()[0] == "# 1 2"
    assert text.splitlines()[1] == "1 2.5"


@pytest.mark.parametrize("text, lineno", [
    ("", 1),
    ("# 2 2\n1 2\n", 3),
    ("# 1 2\n1 x\n", 2),
    ("# 1 2\n1 2 3\n", 2),
    ("2 2\n", 1),
])
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(ParseError) as info:
        parse_array(text.splitlines())
    assert info.value.lineno == lineno
