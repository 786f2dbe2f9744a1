"""Optical depth and how source figures scale with it.

The cold-cloud optical depth comes from a probe transmission scan fitted
to a Lorentzian-exponent absorption profile,

    T(Delta) = exp(-OD * gamma^2 / (Delta^2 + gamma^2)),

with the probe half-width gamma held fixed.  On top of the fitted OD sit
three empirical scaling laws: the correlation time shortens as
tau0 / (1 + mu*OD) (collective enhancement of the idler decay), the
heralding efficiency saturates as eta0 * (1 - exp(-OD/OD0)), and detected
rates grow linearly with pump power.  Atom number is proportional to OD
times the trap beam area, anchored so OD 7 in a 450 um waist corresponds
to 1.5e7 atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fitting import FitConvergenceError, Uncertain, lm_fit

__all__ = [
    "DEFAULT_PROBE_GAMMA",
    "DEFAULT_TAU0_NS",
    "TransmissionScan",
    "ScalingFit",
    "transmission_model",
    "fit_od",
    "atom_number",
    "tau_vs_od",
    "fit_tau_vs_od",
    "eta_vs_od",
    "fit_eta_vs_od",
    "linear_rate_fit",
]

DEFAULT_PROBE_GAMMA = 6.067
DEFAULT_TAU0_NS = 27.0

_REF_OD = 7.0
_REF_ATOMS = 1.5e7
_REF_WAIST_UM = 450.0


@dataclass(frozen=True)
class TransmissionScan:
    """Probe transmission versus detuning (MHz), with the probe half-width."""

    detunings: np.ndarray
    transmissions: np.ndarray
    gamma: float = DEFAULT_PROBE_GAMMA

    def __post_init__(self) -> None:
        det = np.asarray(self.detunings, dtype=float)
        tra = np.asarray(self.transmissions, dtype=float)
        if det.ndim != 1 or det.shape != tra.shape:
            raise ValueError("detunings and transmissions must be 1-d and equally long")
        if det.size < 5:
            raise ValueError("a transmission scan needs at least 5 points")
        if np.unique(det).size != det.size:
            raise ValueError("detunings must be distinct")
        if not np.all(np.isfinite(det)) or not np.all(np.isfinite(tra)):
            raise ValueError("scan values must be finite")
        if np.any(tra <= 0) or np.any(tra > 1.05):
            raise ValueError("transmissions must lie in (0, 1.05]")
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise ValueError("probe half-width gamma must be positive")
        object.__setattr__(self, "detunings", det)
        object.__setattr__(self, "transmissions", tra)


def transmission_model(detuning, od: float, gamma: float = DEFAULT_PROBE_GAMMA):
    """Resonant-absorption transmission profile."""
    d = np.asarray(detuning, dtype=float)
    out = np.exp(-od * gamma**2 / (d**2 + gamma**2))
    return float(out) if np.ndim(detuning) == 0 else out


def fit_od(scan: TransmissionScan) -> Uncertain:
    """Fit the optical depth to a transmission scan (gamma fixed).

    Returns the OD with its one-sigma uncertainty; raises
    FitConvergenceError when the fit does not converge.
    """
    clipped = np.clip(scan.transmissions, 1e-12, 1.05)
    i0 = int(np.argmin(np.abs(scan.detunings)))
    od0 = max(-np.log(clipped[i0]), 1e-3)

    def residual(theta: np.ndarray) -> np.ndarray:
        return transmission_model(scan.detunings, theta[0], scan.gamma) - clipped

    lm = lm_fit(residual, [od0], names=("od",))
    if not lm.converged:
        raise FitConvergenceError("optical-depth fit did not converge")
    od = lm["od"]
    if od.value <= 0:
        raise FitConvergenceError(f"optical-depth fit landed at a nonphysical value {od.value:g}")
    return od


def atom_number(od: float, beam_waist_um: float = _REF_WAIST_UM, kappa: float | None = None) -> float:
    """Trapped-atom number implied by an optical depth.

    N is proportional to OD times the beam cross-section.  The default
    proportionality is anchored at OD 7 -> 1.5e7 atoms for a 450 um waist;
    pass ``kappa`` (atoms per unit OD per um^2) to override.
    """
    if od < 0:
        raise ValueError("optical depth must be nonnegative")
    if beam_waist_um <= 0:
        raise ValueError("beam waist must be positive")
    if kappa is None:
        kappa = _REF_ATOMS / (_REF_OD * _REF_WAIST_UM**2)
    elif kappa <= 0:
        raise ValueError("kappa must be positive")
    return kappa * od * beam_waist_um**2


@dataclass(frozen=True)
class ScalingFit:
    """A fitted scaling law with per-parameter uncertainties."""

    law: str
    params: dict[str, Uncertain]
    residuals: np.ndarray
    converged: bool

    def __getitem__(self, name: str) -> Uncertain:
        return self.params[name]


def tau_vs_od(od, mu: float, tau0_ns: float = DEFAULT_TAU0_NS):
    """Correlation time in ns versus OD: tau0 / (1 + mu*OD)."""
    if tau0_ns <= 0:
        raise ValueError("tau0 must be positive")
    o = np.asarray(od, dtype=float)
    if np.any(o < 0):
        raise ValueError("optical depth must be nonnegative")
    out = tau0_ns / (1.0 + mu * o)
    return float(out) if np.ndim(od) == 0 else out


def fit_tau_vs_od(
    od: Sequence[float],
    tau_ns: Sequence[float],
    tau0_ns: float = DEFAULT_TAU0_NS,
) -> ScalingFit:
    """Fit the single slope parameter of the tau(OD) law, tau0 held fixed."""
    x = np.asarray(od, dtype=float)
    y = np.asarray(tau_ns, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 3:
        raise ValueError("need matching 1-d arrays with at least 3 points")
    if np.any(y <= 0):
        raise ValueError("correlation times must be positive")

    ref = x[np.argmax(x)]
    mu0 = (tau0_ns / y[np.argmax(x)] - 1.0) / ref if ref > 0 else 0.1
    mu0 = max(mu0, 1e-4)

    def residual(theta: np.ndarray) -> np.ndarray:
        return tau0_ns / (1.0 + theta[0] * x) - y

    lm = lm_fit(residual, [mu0], names=("mu",))
    if not lm.converged:
        raise FitConvergenceError("tau-versus-OD fit did not converge")
    mu = lm["mu"]
    if mu.value <= 0:
        raise FitConvergenceError(f"tau-versus-OD slope came out nonpositive ({mu.value:g})")
    return ScalingFit(law="tau_vs_od", params={"mu": mu, "tau0_ns": Uncertain(tau0_ns, 0.0)},
                      residuals=lm.residuals, converged=lm.converged)


def eta_vs_od(od, eta0: float, od0: float):
    """Saturating heralding efficiency versus OD: eta0 * (1 - exp(-OD/OD0))."""
    if od0 <= 0:
        raise ValueError("saturation scale od0 must be positive")
    o = np.asarray(od, dtype=float)
    if np.any(o < 0):
        raise ValueError("optical depth must be nonnegative")
    out = eta0 * (1.0 - np.exp(-o / od0))
    return float(out) if np.ndim(od) == 0 else out


def fit_eta_vs_od(od: Sequence[float], eta: Sequence[float]) -> ScalingFit:
    """Fit (eta0, od0) of the saturating efficiency law."""
    x = np.asarray(od, dtype=float)
    y = np.asarray(eta, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 4:
        raise ValueError("need matching 1-d arrays with at least 4 points")
    if np.any(y < 0):
        raise ValueError("efficiencies must be nonnegative")

    eta0_0 = 1.02 * float(y.max()) if y.max() > 0 else 0.1
    od0_0 = max(float(x.max()) / 3.0, 1e-3)

    def residual(theta: np.ndarray) -> np.ndarray:
        e0, o0 = theta
        if o0 <= 0:
            return np.full(x.size, 1e9 * (1.0 + abs(o0)))
        return e0 * (1.0 - np.exp(-x / o0)) - y

    lm = lm_fit(residual, [eta0_0, od0_0], names=("eta0", "od0"))
    if not lm.converged:
        raise FitConvergenceError("eta-versus-OD fit did not converge")
    eta0, od0 = lm["eta0"], lm["od0"]
    if eta0.value <= 0 or od0.value <= 0:
        raise FitConvergenceError("eta-versus-OD fit landed at nonphysical values")
    return ScalingFit(law="eta_vs_od", params={"eta0": eta0, "od0": od0},
                      residuals=lm.residuals, converged=lm.converged)


def linear_rate_fit(x: Sequence[float], y: Sequence[float]) -> Uncertain:
    """Zero-intercept linear fit, for detected rate versus pump power.

    Returns the slope with a one-sigma uncertainty from the residual
    scatter.  A single point pins the slope exactly (zero residual, so
    the reported sigma is zero).
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 1:
        raise ValueError("need matching nonempty 1-d arrays")
    sxx = float(np.sum(xs * xs))
    if sxx == 0:
        raise ValueError("all x values are zero; slope undefined")
    slope = float(np.sum(xs * ys) / sxx)
    resid = ys - slope * xs
    variance = float(np.sum(resid**2)) / max(xs.size - 1, 1)
    return Uncertain(slope, np.sqrt(variance / sxx))
