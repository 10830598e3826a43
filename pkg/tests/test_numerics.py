import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from stiefel.errors import InvalidInput
from stiefel.numerics import (
    RandomSource, expm, orthonormal_completion, project_tangent, psd_sqrt, random_skew,
    random_stiefel, skew,
)
from stiefel.curves import ANTIPODAL_NORMAL, ANTIPODAL_SKEW

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 6).flatmap(lambda p: st.tuples(st.integers(p, p + 6), st.just(p)))


# -- expm --------------------------------------------------------------------

def test_expm_zero_is_identity(backend):
    assert np.array_equal(expm(np.zeros((2, 2))), np.eye(2))


def test_expm_half_turn(backend):
    out = expm(np.array([[0.0, math.pi], [-math.pi, 0.0]]))
    assert np.allclose(out, -np.eye(2), atol=1e-14)


def test_expm_antipodal_block_closed_form(backend):
    m = np.zeros((4, 4))
    m[:3, :3] = 2.0 * ANTIPODAL_SKEW
    m[:3, 3:] = -ANTIPODAL_NORMAL.T
    m[3:, :3] = ANTIPODAL_NORMAL
    expected = np.array([[1, -2, -2, 0], [-2, 1, -2, 0], [-2, -2, 1, 0], [0, 0, 0, -3]]) / 3.0
    assert np.abs(expm(m) - expected).max() <= 1e-12


def test_expm_negative_antipodal_skew_closed_form(backend):
    expected = np.array([[-1, 2, 2], [2, -1, 2], [2, 2, -1]]) / 3.0
    assert np.abs(expm(-ANTIPODAL_SKEW) - expected).max() <= 1e-12


@pytest.mark.parametrize("size", [1, 2, 3, 5, 8, 12])
def test_expm_matches_scipy_on_general_matrices(backend, rng, size):
    for scale in (1e-4, 0.1, 1.0, 3.0, 10.0):
        s = rng.standard_normal((size, size))
        s *= scale / np.linalg.norm(s)
        ref = scipy.linalg.expm(s)
        assert np.linalg.norm(expm(s) - ref) <= 1e-12 * np.linalg.norm(ref)


@pytest.mark.parametrize("bad", [np.array([[np.nan]]), np.array([[np.inf, 0], [0, 1.0]])])
def test_expm_rejects_non_finite(bad):
    with pytest.raises(InvalidInput):
        expm(bad)


def test_expm_rejects_non_square():
    with pytest.raises(InvalidInput):
        expm(np.zeros((2, 3)))


@given(seed=seeds, p=st.integers(1, 9), size=st.floats(0.0, 10.0))
def test_expm_inverse_and_orthogonal_for_skew(seed, p, size):
    s = random_skew(p, seed)
    if np.linalg.norm(s) > 0:
        s *= size / np.linalg.norm(s)
    e = expm(s)
    assert np.linalg.norm(e @ expm(-s) - np.eye(p)) <= 1e-10
    assert np.linalg.norm(e.T @ e - np.eye(p)) <= 1e-10
    assert abs(np.linalg.det(e) - 1.0) <= 1e-10


# -- orthonormal completion ---------------------------------------------------

def test_completion_of_first_axis_spans_the_rest():
    perp = orthonormal_completion(np.eye(3, 1))
    assert perp.shape == (3, 2)
    assert np.allclose(np.abs(perp[0]), 0.0, atol=1e-15)
    assert np.allclose(perp[1:].T @ perp[1:], np.eye(2), atol=1e-14)


def test_completion_of_square_frame_is_empty():
    assert orthonormal_completion(np.eye(4)).shape == (4, 0)


@given(seed=seeds, shape=dims)
def test_completion_is_orthogonal_to_frame(seed, shape):
    u = random_stiefel(*shape, rng=seed)
    perp = orthonormal_completion(u)
    n, p = shape
    assert perp.shape == (n, n - p)
    assert np.linalg.norm(perp.T @ u) <= 1e-12
    full = np.hstack([u, perp])
    assert np.linalg.norm(full.T @ full - np.eye(n)) <= 1e-12


# -- tangent projection -------------------------------------------------------

def test_projection_kills_the_base_point(rng):
    u = random_stiefel(5, 2, rng)
    assert np.linalg.norm(project_tangent(u, u)) <= 1e-14


def test_projection_rejects_shape_mismatch():
    with pytest.raises(InvalidInput):
        project_tangent(np.eye(3, 2), np.zeros((3, 1)))


@given(seed=seeds, shape=dims)
def test_projection_is_tangent_and_idempotent(seed, shape):
    g = np.random.default_rng(seed)
    u = random_stiefel(*shape, rng=g)
    z = g.standard_normal(shape)
    d = project_tangent(u, z)
    assert np.linalg.norm(u.T @ d + d.T @ u) <= 1e-12
    assert np.linalg.norm(project_tangent(u, d) - d) <= 1e-12
    # matches the defining formula
    ref = u @ skew(u.T @ z) + (np.eye(shape[0]) - u @ u.T) @ z
    assert np.linalg.norm(d - ref) <= 1e-12


# -- PSD square root ----------------------------------------------------------

def test_psd_sqrt_identity_and_diagonal():
    assert np.allclose(psd_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_psd_sqrt_clamps_rounding_noise():
    out = psd_sqrt(np.diag([1.0, -1e-13]))
    assert np.allclose(out, np.diag([1.0, 0.0]))


@pytest.mark.parametrize("bad", [np.array([[1.0, 0.5], [0.0, 1.0]]), np.diag([1.0, -1e-3])])
def test_psd_sqrt_rejects_asymmetric_or_indefinite(bad):
    with pytest.raises(InvalidInput):
        psd_sqrt(bad)


@given(seed=seeds, size=st.integers(1, 7), rank=st.integers(0, 7))
def test_psd_sqrt_squares_back(seed, size, rank):
    g = np.random.default_rng(seed).standard_normal((min(rank, size), size))
    p = g.T @ g
    out = psd_sqrt(p)
    assert np.allclose(out, out.T, atol=0)
    assert np.linalg.norm(out @ out - p) <= 1e-10 * max(1.0, np.linalg.norm(p))


# -- random frames ------------------------------------------------------------

def test_random_stiefel_is_deterministic():
    a = random_stiefel(4, 2, 0)
    b = random_stiefel(4, 2, 0)
    assert np.array_equal(a, b)


def test_random_source_streams_repeat_and_spawn_differs():
    a, b = RandomSource(11), RandomSource(11)
    assert np.array_equal(a.normal(5), b.normal(5))
    c1, c2 = RandomSource(11).spawn(2)
    assert not np.array_equal(c1.normal(5), c2.normal(5))
    assert np.array_equal(random_stiefel(4, 2, RandomSource(3)), random_stiefel(4, 2, RandomSource(3)))


def test_random_stiefel_rejects_wide_shape():
    with pytest.raises(InvalidInput):
        random_stiefel(2, 3)


@given(seed=seeds, shape=dims)
def test_random_stiefel_is_orthonormal(seed, shape):
    u = random_stiefel(*shape, rng=seed)
    assert np.linalg.norm(u.T @ u - np.eye(shape[1])) <= 1e-12


def test_random_stiefel_first_moments_match_haar():
    """Independent draws: first columns are uncorrelated and entries have
    variance 1/n."""
    g = np.random.default_rng(5)
    n, draws = 4, 10_000
    firsts = np.array([random_stiefel(n, 2, g)[:, 0] for _ in range(2 * draws)])
    dots = np.einsum("ij,ij->i", firsts[:draws], firsts[draws:])
    sigma = math.sqrt(1.0 / n)
    assert abs(dots.mean()) <= 3.0 * sigma / math.sqrt(draws)
    second = (firsts ** 2).mean()
    assert abs(second - 1.0 / n) <= 0.01
