"""Steady-state solver tests: closed form against the Lindblad solve."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cascadefwm.three_level import (
    DegenerateParametersError,
    ThreeLevelParams,
    rho31_sq_analytic,
    rho33_analytic,
    steady_state_numeric,
)


def random_params(rng):
    """Log-uniform fields over six decades, detunings of either sign."""
    omega1, omega2, gamma1, gamma2 = 10.0 ** rng.uniform(-2, 3, size=4)
    big_delta = rng.choice([-1.0, 1.0]) * 10.0 ** rng.uniform(-2, 3)
    small_delta = rng.choice([-1.0, 1.0]) * 10.0 ** rng.uniform(-2, 3)
    return ThreeLevelParams(omega1, omega2, big_delta, small_delta, gamma1, gamma2)


def test_analytic_matches_numeric_randomized():
    rng = np.random.default_rng(20240811)
    for _ in range(200):
        p = random_params(rng)
        ss = steady_state_numeric(p)
        assert_allclose(rho33_analytic(p), ss.rho33, rtol=1e-8, atol=0)
        assert_allclose(rho31_sq_analytic(p), ss.rho31_sq, rtol=1e-8, atol=0)


def test_homogeneity_degree_zero():
    # Scaling every frequency by a common factor leaves both outputs fixed.
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = random_params(rng)
        s = 10.0 ** rng.uniform(-3, 3)
        q = ThreeLevelParams(
            s * p.omega1, s * p.omega2, s * p.big_delta,
            s * p.small_delta, s * p.gamma1, s * p.gamma2,
        )
        assert_allclose(rho33_analytic(q), rho33_analytic(p), rtol=1e-12, atol=0)
        assert_allclose(rho31_sq_analytic(q), rho31_sq_analytic(p), rtol=1e-12, atol=0)


def test_detuning_sign_flip_symmetry():
    # Flipping the sign of both detunings conjugates the steady state, so
    # populations and |rho31|^2 are unchanged.
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = random_params(rng)
        q = p.replace(big_delta=-p.big_delta, small_delta=-p.small_delta)
        assert rho33_analytic(q) == pytest.approx(rho33_analytic(p), rel=1e-12)
        assert rho31_sq_analytic(q) == pytest.approx(rho31_sq_analytic(p), rel=1e-12)


def test_numeric_state_is_physical():
    rng = np.random.default_rng(3)
    for _ in range(25):
        p = random_params(rng)
        ss = steady_state_numeric(p)
        rho = ss.full_matrix
        assert_allclose(np.trace(rho).real, 1.0, rtol=1e-10)
        assert_allclose(rho, rho.conj().T, atol=1e-12)
        evals = np.linalg.eigvalsh(rho)
        assert evals.min() > -1e-10
        assert 0.0 <= ss.rho33 <= 1.0
        assert ss.rho31_sq >= 0.0
        # Cauchy-Schwarz on the coherence: |rho31|^2 <= rho11 * rho33
        assert ss.rho31_sq <= rho[0, 0].real * rho[2, 2].real + 1e-12


def test_no_lower_drive_means_empty_cascade():
    p = ThreeLevelParams(0.0, 6.0, -60.0, 3.0, 5.75, 0.66)
    assert rho33_analytic(p) == 0.0
    assert rho31_sq_analytic(p) == 0.0
    ss = steady_state_numeric(p)
    assert abs(ss.rho33) < 1e-12
    assert ss.rho31_sq < 1e-12


def test_weak_drive_population_is_small():
    # Far below saturation the top level stays essentially unpopulated.
    p = ThreeLevelParams(0.01, 0.01, -60.0, 3.0, 5.75, 0.66)
    assert rho33_analytic(p) < 1e-4


def test_parameter_validation():
    with pytest.raises(ValueError):
        ThreeLevelParams(-1.0, 6.0)
    with pytest.raises(ValueError):
        ThreeLevelParams(12.0, 6.0, gamma1=0.0)
    with pytest.raises(ValueError):
        ThreeLevelParams(12.0, 6.0, gamma2=-0.5)
    with pytest.raises(ValueError):
        ThreeLevelParams(np.nan, 6.0)
    with pytest.raises(ValueError):
        ThreeLevelParams(12.0, np.inf)


def test_denominator_underflow_raises():
    # The common denominator has total degree eight, so shrinking every
    # frequency far enough drives it under the representable floor.
    s = 1e-40
    p = ThreeLevelParams(12 * s, 6 * s, -60 * s, 3 * s, 5.75 * s, 0.66 * s)
    with pytest.raises(DegenerateParametersError):
        rho33_analytic(p)
    with pytest.raises(DegenerateParametersError):
        rho31_sq_analytic(p)


def test_replace_and_tuple_round_trip():
    p = ThreeLevelParams(12.0, 6.0, -60.0, 3.0)
    q = p.replace(small_delta=-3.0)
    assert q.small_delta == -3.0 and q.omega1 == p.omega1
    assert p.as_tuple() == (12.0, 6.0, -60.0, 3.0, 5.75, 0.66)
