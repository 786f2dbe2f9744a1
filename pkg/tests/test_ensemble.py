"""Optical-depth fitting, atom number, and the scaling laws."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cascadefwm.ensemble import (
    DEFAULT_PROBE_GAMMA,
    DEFAULT_TAU0_NS,
    TransmissionScan,
    atom_number,
    eta_vs_od,
    fit_eta_vs_od,
    fit_od,
    fit_tau_vs_od,
    linear_rate_fit,
    tau_vs_od,
    transmission_model,
)


def make_scan(od, noise=0.0, rng=None, n=41):
    detunings = np.linspace(-40, 40, n)
    t = transmission_model(detunings, od, DEFAULT_PROBE_GAMMA)
    if noise:
        t = np.clip(t * (1.0 + rng.normal(0, noise, n)), 1e-9, 1.05)
    return TransmissionScan(detunings, t)


class TestTransmission:
    def test_on_resonance_closed_form(self):
        assert_allclose(transmission_model(0.0, 7.0, DEFAULT_PROBE_GAMMA), np.exp(-7.0))

    def test_far_detuned_transparent(self):
        assert transmission_model(1e6, 29.0, DEFAULT_PROBE_GAMMA) > 0.999999

    def test_noiseless_recovery(self):
        for od in (7.0, 29.0):
            fit = fit_od(make_scan(od))
            assert_allclose(fit.value, od, rtol=1e-6)

    def test_fit_matches_log_of_resonant_point(self):
        scan = make_scan(13.0)
        i0 = int(np.argmin(np.abs(scan.detunings)))
        fit = fit_od(scan)
        assert_allclose(fit.value, -np.log(scan.transmissions[i0]), rtol=1e-6)

    def test_point_order_is_irrelevant(self):
        rng = np.random.default_rng(0)
        scan = make_scan(17.0, noise=0.01, rng=rng)
        perm = np.random.default_rng(1).permutation(scan.detunings.size)
        shuffled = TransmissionScan(scan.detunings[perm], scan.transmissions[perm])
        assert_allclose(fit_od(shuffled).value, fit_od(scan).value, rtol=1e-9)

    def test_noisy_recovery_within_three_sigma(self):
        rng = np.random.default_rng(99)
        fit = fit_od(make_scan(29.0, noise=0.01, rng=rng))
        assert abs(fit.value - 29.0) < 3 * fit.sigma

    def test_scan_validation(self):
        with pytest.raises(ValueError):
            TransmissionScan(np.array([0.0, 1.0]), np.array([0.5, 0.5]))  # too few
        d = np.linspace(-5, 5, 6)
        with pytest.raises(ValueError):
            TransmissionScan(d, np.full(6, 1.2))  # transmission above physical cap
        with pytest.raises(ValueError):
            TransmissionScan(np.zeros(6), np.full(6, 0.5))  # repeated detunings


class TestAtomNumber:
    def test_anchor_point(self):
        assert_allclose(atom_number(7.0), 1.5e7)

    def test_linear_in_od(self):
        assert_allclose(atom_number(14.0), 2 * atom_number(7.0))
        assert atom_number(0.0) == 0.0

    def test_large_cloud_value(self):
        # linearity puts OD 29 a few percent below the quoted 6.3e7
        assert_allclose(atom_number(29.0), 6.3e7, rtol=0.03)

    def test_waist_scaling_and_overrides(self):
        assert_allclose(atom_number(7.0, beam_waist_um=900.0), 4 * 1.5e7)
        assert_allclose(atom_number(2.0, beam_waist_um=1.0, kappa=5.0), 10.0)
        with pytest.raises(ValueError):
            atom_number(-1.0)
        with pytest.raises(ValueError):
            atom_number(7.0, beam_waist_um=0.0)


class TestTauVsOd:
    def test_intercept_and_paper_point(self):
        assert_allclose(tau_vs_od(0.0, mu=0.0827), DEFAULT_TAU0_NS)
        assert_allclose(tau_vs_od(29.0, mu=0.0827), 7.9, atol=0.1)

    def test_strictly_decreasing(self):
        od = np.linspace(0, 30, 61)
        tau = tau_vs_od(od, mu=0.0827)
        assert np.all(np.diff(tau) < 0)

    def test_noiseless_mu_recovery(self):
        od = np.linspace(5, 30, 12)
        fit = fit_tau_vs_od(od, tau_vs_od(od, mu=0.0827))
        assert fit.converged
        assert_allclose(fit["mu"].value, 0.0827, rtol=1e-6)
        assert fit["tau0_ns"].value == DEFAULT_TAU0_NS

    def test_noisy_mu_recovery(self):
        rng = np.random.default_rng(12)
        od = np.linspace(5, 30, 12)
        tau = tau_vs_od(od, mu=0.0827) * (1 + rng.normal(0, 0.02, od.size))
        fit = fit_tau_vs_od(od, tau)
        assert abs(fit["mu"].value - 0.0827) < 3 * fit["mu"].sigma

    def test_custom_tau0(self):
        od = np.linspace(5, 30, 12)
        fit = fit_tau_vs_od(od, 20.0 / (1 + 0.05 * od), tau0_ns=20.0)
        assert_allclose(fit["mu"].value, 0.05, rtol=1e-6)


class TestEtaVsOd:
    def test_limits(self):
        assert eta_vs_od(0.0, 0.19, 9.7) == 0.0
        assert_allclose(eta_vs_od(1e6, 0.19, 9.7), 0.19)

    def test_paper_style_value(self):
        assert_allclose(eta_vs_od(29.0, 0.190, 9.7), 0.180, atol=1e-3)

    def test_increasing_and_bounded(self):
        od = np.linspace(0, 40, 81)
        eta = eta_vs_od(od, 0.19, 9.7)
        assert np.all(np.diff(eta) > 0)
        assert np.all(eta <= 0.19)

    def test_noiseless_recovery_both_channels(self):
        od = np.linspace(2, 30, 15)
        for eta0, od0 in ((0.190, 9.7), (0.150, 11.3)):
            fit = fit_eta_vs_od(od, eta_vs_od(od, eta0, od0))
            assert fit.converged
            assert_allclose(fit["eta0"].value, eta0, rtol=1e-6)
            assert_allclose(fit["od0"].value, od0, rtol=1e-6)

    def test_noisy_recovery_within_three_sigma(self):
        rng = np.random.default_rng(21)
        od = np.linspace(2, 30, 15)
        eta = eta_vs_od(od, 0.150, 11.3) * (1 + rng.normal(0, 0.02, od.size))
        fit = fit_eta_vs_od(od, eta)
        assert abs(fit["eta0"].value - 0.150) < 3 * fit["eta0"].sigma
        assert abs(fit["od0"].value - 11.3) < 3 * fit["od0"].sigma


class TestLinearRateFit:
    def test_exact_line(self):
        od = np.array([5.0, 10.0, 20.0])
        fit = linear_rate_fit(od, 350.0 * od)
        assert_allclose(fit.value, 350.0, rtol=1e-12)

    def test_single_point(self):
        fit = linear_rate_fit([10.0], [1000.0])
        assert_allclose(fit.value, 100.0)

    def test_noisy_slope_within_three_sigma(self):
        rng = np.random.default_rng(4)
        od = np.linspace(5, 30, 10)
        rate = 350.0 * od * (1 + rng.normal(0, 0.05, od.size))
        fit = linear_rate_fit(od, rate)
        assert abs(fit.value - 350.0) < 3 * fit.sigma

    def test_needs_data(self):
        with pytest.raises(ValueError):
            linear_rate_fit([], [])
