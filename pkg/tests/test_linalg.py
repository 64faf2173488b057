import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import jacobi_singular_values
from rnncap import linalg as L

# seeded N(0,1) draw rounded to 6 decimals; sigma_max from the Jacobi oracle
M5 = [
    [0.345584, 0.821618, 0.330437, -1.303157, 0.905356],
    [0.446375, -0.536953, 0.581118, 0.364572, 0.294132],
    [0.028422, 0.546713, -0.736454, -0.16291, -0.482119],
    [0.598846, 0.039722, -0.292457, -0.781908, -0.257192],
    [0.008142, -0.275603, 1.294064, 1.006724, -2.711162],
]
M5_SIGMA_MAX = 3.427581097486699

# another seeded draw whose two top singular values differ by 0.3%
NEAR_TIE = [
    [1.028857, 1.64192, 1.14672, -0.97318, -1.3928],
    [0.067196, 0.861351, 0.509187, 1.810286, 0.750843],
    [0.63976, -0.731323, -1.107717, 1.484406, 0.048912],
    [0.81152, -1.376423, -0.436371, -1.291092, -0.775679],
    [0.903063, -1.480581, -0.534093, 0.163789, -0.66847],
]
NEAR_TIE_SIGMA_MAX = 3.315696915945017

finite = st.one_of(st.just(0.0), st.floats(1e-100, 1e3), st.floats(-1e3, -1e-100))


def small_matrices(max_side=6):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


def test_frobenius_examples():
    assert L.frobenius_norm([[3, 0], [0, 4]]) == 5.0
    assert L.frobenius_norm(np.zeros((2, 2))) == 0.0
    assert L.frobenius_norm(np.eye(3)) == pytest.approx(math.sqrt(3), rel=1e-15)


def test_one_norm_examples():
    assert L.one_norm([[1, -2], [3, 4]]) == 6.0
    assert L.one_norm(np.eye(4)) == 1.0
    assert L.one_norm(np.zeros((2, 2))) == 0.0


def test_spectral_examples():
    assert L.spectral_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, abs=1e-10)
    assert L.spectral_norm(np.eye(4)) == pytest.approx(1.0, abs=1e-10)
    assert L.spectral_norm(np.zeros((3, 2))) == 0.0


def test_spectral_matches_jacobi_oracle():
    assert L.spectral_norm(M5) == pytest.approx(M5_SIGMA_MAX, abs=1e-8)
    assert jacobi_singular_values(M5)[0] == pytest.approx(M5_SIGMA_MAX, abs=1e-12)


def test_spectral_seeded_random_against_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = rng.standard_normal((5, 5))
        assert L.spectral_norm(m) == pytest.approx(jacobi_singular_values(m)[0], abs=1e-8)


def test_spectral_below_frobenius_many():
    for i in range(1000):
        rng = L.stream_rng(11, i)
        r, c = rng.integers(1, 17, size=2)
        m = rng.standard_normal((r, c))
        assert L.spectral_norm(m) <= L.frobenius_norm(m) + 1e-10


def test_spectral_transpose_invariant():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = rng.standard_normal(tuple(rng.integers(1, 9, size=2)))
        assert abs(L.spectral_norm(m) - L.spectral_norm(m.T)) < 1e-8


def test_spectral_nonconvergence_raises():
    # equal top singular values with max_iter=1 cannot converge
    m = np.diag([2.0, 1.999999])
    with pytest.raises(L.SpectralNormError) as info:
        L.spectral_norm(m, tol=1e-15, max_iter=2)
    assert info.value.iterations == 4
    assert info.value.estimate > 0


def test_spectral_bad_args():
    with pytest.raises(ValueError):
        L.spectral_norm(np.eye(2), tol=0)
    with pytest.raises(ValueError):
        L.spectral_norm(np.eye(2), max_iter=0)


def test_spectral_near_tie_reports_nonconvergence():
    with pytest.raises(L.SpectralNormError) as info:
        L.spectral_norm(NEAR_TIE)
    assert info.value.iterations == 2000
    assert info.value.estimate == pytest.approx(NEAR_TIE_SIGMA_MAX, rel=1e-7)
    assert L.spectral_norm(NEAR_TIE, max_iter=20000) == pytest.approx(NEAR_TIE_SIGMA_MAX, rel=1e-8)


def test_spectral_deterministic():
    m = np.asarray(M5)
    assert L.spectral_norm(m, seed=5) == L.spectral_norm(m, seed=5)


@settings(max_examples=200, deadline=None)
@given(small_matrices(), st.one_of(st.just(0.0), st.floats(1e-50, 100), st.floats(-100, -1e-50)))
def test_norms_absolutely_homogeneous(m, c):
    for f in (L.frobenius_norm, L.one_norm):
        assert f(c * m) == pytest.approx(abs(c) * f(m), rel=1e-12, abs=1e-250)


@settings(max_examples=200, deadline=None)
@given(small_matrices())
def test_frobenius_zero_iff_zero(m):
    assert (L.frobenius_norm(m) == 0.0) == (not np.any(m))


def test_matvec_and_friends():
    v = np.array([1.0, 1.0])
    assert np.array_equal(L.matvec(np.eye(2), v), v)
    assert np.array_equal(L.matvec(np.zeros((2, 2)), v), np.zeros(2))
    assert np.array_equal(L.matvec([[1, 2], [3, 4]], v), [3.0, 7.0])
    assert np.array_equal(L.matmul([[1, 2], [3, 4]], np.eye(2)), [[1, 2], [3, 4]])
    assert np.array_equal(L.add(np.eye(2), np.eye(2)), 2 * np.eye(2))
    assert np.array_equal(L.sub(np.eye(2), np.eye(2)), np.zeros((2, 2)))
    assert np.array_equal(L.scale(np.eye(2), 3.0), 3 * np.eye(2))


def test_shape_errors():
    with pytest.raises(L.ShapeError):
        L.matvec(np.eye(2), np.ones(3))
    with pytest.raises(L.ShapeError):
        L.matmul(np.eye(2), np.ones((3, 3)))
    with pytest.raises(L.ShapeError):
        L.add(np.eye(2), np.eye(3))
    with pytest.raises(L.ShapeError):
        L.frobenius_norm(np.ones(3))


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        L.frobenius_norm([[np.nan, 0.0]])
    with pytest.raises(ValueError):
        L.scale(np.eye(2), np.inf)


def test_stream_rng_independent_of_request_order():
    a = [L.stream_rng(9, k).random() for k in range(5)]
    b = [L.stream_rng(9, k).random() for k in reversed(range(5))][::-1]
    assert a == b
    assert len(set(a)) == 5
