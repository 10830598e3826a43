import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stiefel.bounds import lower_envelope, upper_envelope
from stiefel.curves import block_rotation, branch_pair, gamma_k, skew_generator
from stiefel.errors import InvalidInput
from stiefel.logmap import Certificate, LogOptions, StepControl, certify, log_shooting
from stiefel.manifold import decompose, exp, frobenius_distance, norm, tangent
from stiefel.numerics import random_stiefel

seeds = st.integers(0, 2**32 - 1)


def _roundtrip_pair(g, n, p, beta, size):
    u = random_stiefel(n, p, g)
    d = tangent(u, g.standard_normal((n, p)))
    d = d.scaled(size / norm(beta, d))
    return u, d, exp(beta, d).U


# -- identical points and closed-form targets ----------------------------------

def test_identical_points_give_zero_tangent(rng):
    u = random_stiefel(5, 2, rng)
    res = log_shooting(0.5, u, u)
    assert res.length == 0.0 and res.iterations == 0
    assert res.certificate is Certificate.CERTIFIED_MINIMAL
    assert np.array_equal(res.delta.delta, np.zeros((5, 2)))


def test_small_roundtrip_example(backend, rng):
    u, d, target = _roundtrip_pair(rng, 6, 3, 1.0, 0.3)
    res = log_shooting(1.0, u, target)
    assert res.converged and res.residual <= 1e-10
    assert abs(res.length - 0.3) <= 1e-8
    assert np.linalg.norm(res.delta.delta - d.delta) <= 1e-7


@pytest.mark.parametrize("beta", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("theta", [0.4, 1.5, 2.8, math.pi])
def test_planar_rotation_target_is_certified(beta, theta, rng):
    u = random_stiefel(7, 4, rng)
    q = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    target = u @ q @ block_rotation(4, theta) @ q.T
    res = log_shooting(beta, u, target)
    delta = frobenius_distance(u, target)
    # 2 sqrt(beta p) arcsin(delta / (2 sqrt p)) with delta = 2 sqrt(p) sin(theta / 2)
    expected = math.sqrt(beta * 4) * theta
    assert abs(res.length - expected) <= 1e-8
    if theta < 3.0:
        assert abs(expected - 2 * math.sqrt(beta * 4) * math.asin(delta / 4)) <= 1e-12
    assert res.certificate is Certificate.CERTIFIED_MINIMAL


def test_antipode_via_gamma_p_is_certified(rng):
    u = random_stiefel(6, 3, rng)
    res = log_shooting(1.0, u, -u)
    assert res.certificate is Certificate.CERTIFIED_MINIMAL
    assert abs(res.length - math.pi * math.sqrt(3)) <= 1e-8


# -- roundtrip -----------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_roundtrip_recovers_norm(backend, beta):
    g = np.random.default_rng(101)
    shapes = [(3, 1), (4, 2), (5, 2), (5, 3), (6, 3), (7, 4)]
    pairs = 200 if backend == "cython" else 36
    radius = 0.5 * min(1.0, math.sqrt(beta)) * math.pi
    worst = 0.0
    for i in range(pairs):
        n, p = shapes[i % len(shapes)]
        u, d, target = _roundtrip_pair(g, n, p, beta, radius * g.uniform(0.05, 1.0))
        res = log_shooting(beta, u, target)
        assert res.converged and res.residual <= 1e-10
        worst = max(worst, abs(res.length - norm(beta, d)))
    assert worst <= 1e-8


# -- certify -------------------------------------------------------------------

def test_certify_rejects_the_long_branch():
    g1, g2 = branch_pair(2.0)
    u = g1.start.U
    d1 = decompose(u, g1.velocity(0.0))
    d2 = decompose(u, g2.velocity(0.0))
    assert certify(2.0, u, -u, d1) is not Certificate.CERTIFIED_MINIMAL
    assert norm(2.0, d1) > norm(2.0, d2) + 1.1
    assert norm(2.0, d1) > lower_envelope(2.0, 2, 2 * math.sqrt(2))


def test_certify_gamma_p_at_antipode(rng):
    u = random_stiefel(8, 4, rng)
    d = decompose(u, gamma_k(u, 4).velocity(0.0))
    assert certify(1.0, u, -u, d) is Certificate.CERTIFIED_MINIMAL


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_certify_tiny_tangent(beta, rng):
    u = random_stiefel(5, 2, rng)
    d = tangent(u, rng.standard_normal((5, 2)))
    d = d.scaled(1e-5 / norm(beta, d))
    v = exp(beta, d)
    cert = certify(beta, u, v, d)
    assert cert in (Certificate.CERTIFIED_MINIMAL, Certificate.WITHIN_BOUNDS)
    delta = frobenius_distance(u, v)
    assert min(1.0, math.sqrt(beta)) * delta - 1e-12 <= norm(beta, d)
    assert norm(beta, d) <= max(1.0, math.sqrt(beta)) * delta + 1e-12


def test_certify_flags_lengths_above_the_upper_envelope(rng):
    u = random_stiefel(6, 2, rng)
    d = decompose(u, u @ skew_generator(2, 2 * math.pi + 0.5))
    v = exp(1.0, d)
    assert certify(1.0, u, v, d) is Certificate.EXCEEDS_UPPER_BOUND


def test_certify_endpoint_mismatch(rng):
    u = random_stiefel(5, 2, rng)
    d = tangent(u, rng.standard_normal((5, 2)))
    with pytest.raises(InvalidInput):
        certify(1.0, u, random_stiefel(5, 2, rng), d)
    with pytest.raises(InvalidInput):
        certify(1.0, u, random_stiefel(5, 3, rng), d)


# -- soundness and result invariants -------------------------------------------

@settings(max_examples=25)
@given(seed=seeds, beta=st.sampled_from([0.5, 1.0, 2.0]), shape=st.sampled_from([(4, 2), (5, 3)]))
def test_results_respect_the_envelopes(seed, beta, shape):
    g = np.random.default_rng(seed)
    u, v = random_stiefel(*shape, g), random_stiefel(*shape, g)
    res = log_shooting(beta, u, v)
    delta = frobenius_distance(u, v)
    lo = lower_envelope(beta, shape[1], delta)
    assert (res.lower, res.frob_dist) == (lo, delta)
    if not res.converged:
        return
    assert res.length >= lo - 1e-8
    assert np.linalg.norm(exp(beta, res.delta).U - v) <= 1e-8
    assert math.isclose(res.length, norm(beta, res.delta), rel_tol=1e-12)
    assert min(res.candidates) == pytest.approx(res.length, rel=1e-12)
    if res.certificate is Certificate.CERTIFIED_MINIMAL:
        assert abs(res.length - lo) <= 1e-6
        assert res.length <= upper_envelope(beta, shape[1], delta) + 1e-6
    if res.certificate is Certificate.EXCEEDS_UPPER_BOUND:
        assert res.length > res.upper + 1e-6


def test_upper_note_when_frame_is_wide(rng):
    u, _, v = _roundtrip_pair(rng, 5, 3, 1.0, 0.4)
    assert "advisory" in log_shooting(1.0, u, v).note
    u, _, v = _roundtrip_pair(rng, 6, 3, 1.0, 0.4)
    assert log_shooting(1.0, u, v).note == ""


# -- options -------------------------------------------------------------------

def test_single_iteration_reports_non_convergence(rng):
    u, v = random_stiefel(6, 3, rng), random_stiefel(6, 3, rng)
    res = log_shooting(1.0, u, v, LogOptions(max_iter=1))
    assert res.certificate is Certificate.NOT_CONVERGED and not res.converged
    assert res.residual > 1e-10
    assert res.residual == pytest.approx(np.linalg.norm(exp(1.0, res.delta).U - v), rel=1e-8)


@pytest.mark.parametrize("kwargs", [
    dict(max_iter=0), dict(residual_tol=0.0), dict(certify_tol=-1.0), dict(damping=0.0),
    dict(damping=1.5), dict(step_control="bogus"),
])
def test_invalid_options(kwargs):
    with pytest.raises((InvalidInput, ValueError)):
        LogOptions(**kwargs)


def test_fixed_damping_still_converges(rng):
    u, d, v = _roundtrip_pair(rng, 5, 2, 0.5, 0.8)
    res = log_shooting(0.5, u, v, LogOptions(step_control=StepControl.FIXED, damping=0.7,
                                              multistart=False))
    assert res.converged
    assert abs(res.length - 0.8) <= 1e-8


def test_init_steers_onto_the_long_branch():
    g1, _ = branch_pair(2.0)
    u = g1.start.U
    res = log_shooting(2.0, u, -u, init=g1.velocity(0.0))
    assert res.converged
    assert abs(res.length - 2 * math.pi) <= 1e-8
    assert res.certificate is not Certificate.CERTIFIED_MINIMAL
    free = log_shooting(2.0, u, -u)
    assert free.length < res.length - 1.1


def test_dimension_mismatch(rng):
    with pytest.raises(InvalidInput):
        log_shooting(1.0, random_stiefel(5, 2, rng), random_stiefel(5, 3, rng))
    with pytest.raises(InvalidInput):
        log_shooting(0.0, np.eye(3, 1), np.eye(3, 1))
