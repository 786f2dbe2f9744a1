"""Emission-rate lineshapes versus detuning and pump power.

The bare cascade model gives rates as functions of the two-photon detuning.
Real pumps carry residual frequency noise, so every measurable lineshape is
the bare curve convolved with a Gaussian kernel in the two-photon detuning.
This module provides that convolution (fixed-order Gauss-Legendre over a
truncated window), detected-rate models built on it, and least-squares
fitting of those models to scan data.

Rate models:

* single rate   ~ amp_single * <rho33>        (uncorrelated singles)
* pair rate     ~ amp_pairs  * <|rho31|^2>    (photon pairs)
* heralding     = pair model / singles model  (detected pair efficiency)

Pump powers in mW map to Rabi couplings in MHz through square-root
calibration constants; the defaults place the strong-pump regime near
omega1 = 12 MHz and omega2 = 6 MHz.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .fitting import Uncertain, lm_fit
from .three_level import ThreeLevelParams, _rho31_sq, _rho33

__all__ = [
    "PumpNoiseModel",
    "RateModelScale",
    "RateProfiles",
    "RateFitResult",
    "NonFiniteModelError",
    "SinglesUnderflowError",
    "convolve_in_delta",
    "model_single_rate",
    "model_pair_rate",
    "model_heralding",
    "heralding_asymptote",
    "rabi_from_power",
    "params_at_powers",
    "rate_profiles",
    "fit_rate_models",
]

DEFAULT_ORDER = 64
FWHM_TO_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))

_AXES = ("delta", "p776", "p780")
_WHICH = ("single", "pairs", "eta")


class NonFiniteModelError(ValueError):
    """The integrand returned a non-finite value inside the kernel window."""


class SinglesUnderflowError(ZeroDivisionError):
    """Singles model underflowed; the heralding ratio is undefined."""


@dataclass(frozen=True)
class PumpNoiseModel:
    """Gaussian pump-noise kernel in the two-photon detuning.

    ``fwhm`` is in MHz; zero disables the convolution.  ``truncation`` sets
    the integration half-window in units of the fwhm.
    """

    fwhm: float = 2.0
    truncation: float = 5.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.fwhm) or self.fwhm < 0:
            raise ValueError("fwhm must be finite and nonnegative")
        if not np.isfinite(self.truncation) or self.truncation < 3.0:
            raise ValueError("truncation must be at least 3 fwhm")

    @property
    def sigma(self) -> float:
        return self.fwhm / FWHM_TO_SIGMA


@dataclass(frozen=True)
class RateModelScale:
    """Amplitudes and pump-power calibrations of the detected-rate models.

    Amplitudes convert the dimensionless steady-state quantities into
    detected rates.  ``power_to_rabi_1``/``power_to_rabi_2`` are in
    MHz per sqrt(mW) for pump 1 (780 nm) and pump 2 (776 nm).
    """

    amp_single: float = 1.0
    amp_pairs: float = 1.0
    power_to_rabi_1: float = 17.9
    power_to_rabi_2: float = 1.55

    def __post_init__(self) -> None:
        for name in ("amp_single", "amp_pairs", "power_to_rabi_1", "power_to_rabi_2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative")

    def replace(self, **changes: float) -> "RateModelScale":
        return dataclasses.replace(self, **changes)


@lru_cache(maxsize=8)
def _gauss_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


@lru_cache(maxsize=32)
def _kernel_weights(fwhm: float, truncation: float, order: int) -> np.ndarray:
    """Quadrature weights times the Gaussian kernel on the node offsets."""
    nodes, weights = _gauss_nodes(order)
    half = truncation * fwhm
    sigma = fwhm / FWHM_TO_SIGMA
    kernel = np.exp(-0.5 * (half * nodes / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))
    return half * weights * kernel


def _node_offsets(noise: PumpNoiseModel, order: int) -> np.ndarray:
    nodes, _ = _gauss_nodes(order)
    return noise.truncation * noise.fwhm * nodes


def convolve_in_delta(
    f: Callable[[np.ndarray], np.ndarray],
    params: ThreeLevelParams,
    noise: PumpNoiseModel = PumpNoiseModel(),
    order: int = DEFAULT_ORDER,
) -> float:
    """Convolve f(small_delta) with the pump-noise kernel at the working point.

    ``f`` is evaluated on an array of detunings when possible, falling back
    to per-point calls for scalar-only callables.  With fwhm = 0 the value
    f(params.small_delta) is returned unchanged.
    """
    if noise.fwhm == 0.0:
        value = float(np.asarray(f(params.small_delta), dtype=float))
        if not np.isfinite(value):
            raise NonFiniteModelError(f"model returned {value!r} at the working point")
        return value

    x = params.small_delta + _node_offsets(noise, order)
    try:
        fx = np.asarray(f(x), dtype=float)
        if fx.shape != x.shape:
            raise TypeError("scalar-only callable")
    except TypeError:
        fx = np.array([float(f(xi)) for xi in x])
    if not np.all(np.isfinite(fx)):
        raise NonFiniteModelError("model returned non-finite values inside the kernel window")
    return float(fx @ _kernel_weights(noise.fwhm, noise.truncation, order))


def _bare(kind: str, o1, o2, big_d, deltas, g1: float, g2: float) -> np.ndarray:
    fn = _rho33 if kind == "single" else _rho31_sq
    return fn(o1, o2, big_d, deltas, g1, g2)


def _convolved(
    kind: str,
    o1,
    o2,
    big_d: float,
    deltas: np.ndarray,
    g1: float,
    g2: float,
    noise: PumpNoiseModel,
    order: int,
) -> np.ndarray:
    """Convolved bare rate on an array of detunings.

    ``o1``/``o2`` may be scalars or arrays matching ``deltas`` (power scans).
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    o1 = np.broadcast_to(np.asarray(o1, dtype=float), deltas.shape)
    o2 = np.broadcast_to(np.asarray(o2, dtype=float), deltas.shape)
    if noise.fwhm == 0.0:
        vals = _bare(kind, o1, o2, big_d, deltas, g1, g2)
    else:
        x = deltas[:, None] + _node_offsets(noise, order)[None, :]
        f = _bare(kind, o1[:, None], o2[:, None], big_d, x, g1, g2)
        vals = f @ _kernel_weights(noise.fwhm, noise.truncation, order)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteModelError("rate model produced non-finite values")
    return vals


def model_single_rate(
    params: ThreeLevelParams,
    noise: PumpNoiseModel = PumpNoiseModel(),
    scale: RateModelScale = RateModelScale(),
    order: int = DEFAULT_ORDER,
) -> float:
    """Detected singles-rate model: amplitude times the convolved rho33."""
    p = params.as_tuple()
    return scale.amp_single * float(
        _convolved("single", p[0], p[1], p[2], np.array([p[3]]), p[4], p[5], noise, order)[0]
    )


def model_pair_rate(
    params: ThreeLevelParams,
    noise: PumpNoiseModel = PumpNoiseModel(),
    scale: RateModelScale = RateModelScale(),
    order: int = DEFAULT_ORDER,
) -> float:
    """Detected pair-rate model: amplitude times the convolved |rho31|^2."""
    p = params.as_tuple()
    return scale.amp_pairs * float(
        _convolved("pairs", p[0], p[1], p[2], np.array([p[3]]), p[4], p[5], noise, order)[0]
    )


def model_heralding(
    params: ThreeLevelParams,
    noise: PumpNoiseModel = PumpNoiseModel(),
    scale: RateModelScale = RateModelScale(),
    order: int = DEFAULT_ORDER,
) -> float:
    """Heralding-efficiency model: pair model over singles model.

    Dips near two-photon resonance where uncorrelated scattering is
    strongest, and saturates toward ``heralding_asymptote`` far from it.
    """
    singles = model_single_rate(params, noise, scale, order)
    if singles < 1e-300:
        raise SinglesUnderflowError(
            "singles model underflowed; heralding ratio undefined at this point"
        )
    return model_pair_rate(params, noise, scale, order) / singles


def heralding_asymptote(params: ThreeLevelParams, scale: RateModelScale = RateModelScale()) -> float:
    """Far-detuned ceiling of the heralding model.

    In the limit |small_delta| -> infinity the bare ratio
    |rho31|^2 / rho33 tends to (big_delta^2 + gamma1^2) /
    (big_delta^2 + gamma1^2 + 2 omega1^2); the model ceiling is that times
    the amplitude ratio.
    """
    if scale.amp_single == 0:
        raise SinglesUnderflowError("amp_single is zero; heralding undefined")
    b2 = params.big_delta**2 + params.gamma1**2
    return (scale.amp_pairs / scale.amp_single) * b2 / (b2 + 2.0 * params.omega1**2)


def rabi_from_power(power_mw: float, coeff: float) -> float:
    """Square-root pump-power calibration, MHz from mW."""
    if power_mw < 0:
        raise ValueError("pump power must be nonnegative")
    return coeff * np.sqrt(power_mw)


def params_at_powers(
    base: ThreeLevelParams,
    scale: RateModelScale,
    p780_mw: float,
    p776_mw: float,
) -> ThreeLevelParams:
    """Model parameters with both Rabi couplings set from pump powers."""
    return base.replace(
        omega1=rabi_from_power(p780_mw, scale.power_to_rabi_1),
        omega2=rabi_from_power(p776_mw, scale.power_to_rabi_2),
    )


@dataclass(frozen=True)
class RateProfiles:
    """Model curves swept along one axis."""

    axis: str
    x: np.ndarray
    single: np.ndarray
    pairs: np.ndarray
    eta: np.ndarray


def _axis_inputs(
    axis: str,
    xs: np.ndarray,
    base: ThreeLevelParams,
    scale: RateModelScale,
    overrides: Mapping[str, float] | None = None,
):
    """Resolve (o1, o2, deltas) for a sweep or fit along one axis."""
    ov = dict(overrides or {})
    o1 = ov.get("omega1", base.omega1)
    o2 = ov.get("omega2", base.omega2)
    big_d = ov.get("big_delta", base.big_delta)
    if axis == "delta":
        deltas = xs - ov.get("delta_offset", 0.0)
    elif axis == "p776":
        if np.any(xs < 0):
            raise ValueError("pump powers must be nonnegative")
        o2 = ov.get("power_to_rabi_2", scale.power_to_rabi_2) * np.sqrt(xs)
        deltas = np.full_like(xs, base.small_delta)
    elif axis == "p780":
        if np.any(xs < 0):
            raise ValueError("pump powers must be nonnegative")
        o1 = ov.get("power_to_rabi_1", scale.power_to_rabi_1) * np.sqrt(xs)
        deltas = np.full_like(xs, base.small_delta)
    else:
        raise ValueError(f"axis must be one of {_AXES}, got {axis!r}")
    return o1, o2, big_d, deltas


def rate_profiles(
    base: ThreeLevelParams,
    xs: Sequence[float],
    axis: str = "delta",
    noise: PumpNoiseModel = PumpNoiseModel(),
    scale: RateModelScale = RateModelScale(),
    order: int = DEFAULT_ORDER,
) -> RateProfiles:
    """Sweep all three rate models along one axis.

    ``axis`` is "delta" (two-photon detuning, MHz), "p776" or "p780"
    (pump power, mW).
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("sweep grid must be a nonempty 1-d array")
    o1, o2, big_d, deltas = _axis_inputs(axis, xs, base, scale)
    g1, g2 = base.gamma1, base.gamma2
    single = scale.amp_single * _convolved("single", o1, o2, big_d, deltas, g1, g2, noise, order)
    pairs = scale.amp_pairs * _convolved("pairs", o1, o2, big_d, deltas, g1, g2, noise, order)
    if np.any(single < 1e-300):
        raise SinglesUnderflowError("singles model underflowed somewhere on the sweep grid")
    return RateProfiles(axis=axis, x=xs, single=single, pairs=pairs, eta=pairs / single)


_FREE_NAMES = (
    "amp",
    "delta_offset",
    "omega1",
    "omega2",
    "big_delta",
    "power_to_rabi_1",
    "power_to_rabi_2",
)


@dataclass
class RateFitResult:
    """Outcome of fitting one rate model to scan data."""

    which: str
    axis: str
    params: ThreeLevelParams
    scale: RateModelScale
    free: dict[str, Uncertain]
    residuals: np.ndarray
    cost: float
    converged: bool
    _predict: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)

    def predict(self, x: Sequence[float]) -> np.ndarray:
        """Evaluate the fitted model on new axis values."""
        return self._predict(np.asarray(x, dtype=float))


def fit_rate_models(
    x: Sequence[float],
    y: Sequence[float],
    which: str,
    base: ThreeLevelParams,
    noise: PumpNoiseModel = PumpNoiseModel(),
    scale: RateModelScale = RateModelScale(),
    axis: str = "delta",
    free: Sequence[str] = ("amp",),
    initial: Mapping[str, float] | None = None,
    sigma: Sequence[float] | None = None,
    order: int = DEFAULT_ORDER,
) -> RateFitResult:
    """Fit one of the rate models to (x, y) scan data.

    ``which`` selects the model ("single", "pairs" or "eta"); ``free`` names
    the floated quantities: "amp" (curve amplitude), "delta_offset" (axis
    calibration, delta scans only), any of the model parameters "omega1",
    "omega2", "big_delta", or a power calibration constant on the matching
    power axis.  Everything else is held at its value in ``base``/``scale``.
    Missing initial guesses are taken from the data (amplitude from the
    extremum, offset by aligning argmax positions).  The fit runs whether or
    not it converges; check ``converged`` on the result.

    For ``which="eta"`` the amplitude choice is the free list: include "amp"
    to refit the efficiency scale from the eta data itself, or omit it to
    reuse the amplitude ratio already in ``scale`` (for example from earlier
    single/pairs fits).
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if which not in _WHICH:
        raise ValueError(f"which must be one of {_WHICH}, got {which!r}")
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {_AXES}, got {axis!r}")
    free = tuple(free)
    if not free:
        raise ValueError("free must name at least one parameter")
    for name in free:
        if name not in _FREE_NAMES:
            raise ValueError(f"unknown free parameter {name!r}")
    if len(set(free)) != len(free):
        raise ValueError("duplicate names in free")
    if "delta_offset" in free and axis != "delta":
        raise ValueError("delta_offset is only meaningful on the delta axis")
    if "power_to_rabi_1" in free and axis != "p780":
        raise ValueError("power_to_rabi_1 is only free on the p780 axis")
    if "power_to_rabi_2" in free and axis != "p776":
        raise ValueError("power_to_rabi_2 is only free on the p776 axis")
    if xs.size < len(free) + 2:
        raise ValueError(
            f"need at least {len(free) + 2} points to fit {len(free)} parameters, got {xs.size}"
        )
    weights = None
    if sigma is not None:
        weights = 1.0 / np.asarray(sigma, dtype=float)
        if weights.shape != xs.shape or not np.all(np.isfinite(weights)):
            raise ValueError("sigma must be positive finite values matching x")

    g1, g2 = base.gamma1, base.gamma2
    default_amp = {
        "single": scale.amp_single,
        "pairs": scale.amp_pairs,
        "eta": (scale.amp_pairs / scale.amp_single) if scale.amp_single else 1.0,
    }[which]

    def curve(theta: np.ndarray, grid: np.ndarray) -> np.ndarray:
        ov = dict(zip(free, theta))
        amp = ov.pop("amp", default_amp)
        o1, o2, big_d, deltas = _axis_inputs(axis, grid, base, scale, ov)
        if which == "eta":
            s = _convolved("single", o1, o2, big_d, deltas, g1, g2, noise, order)
            p = _convolved("pairs", o1, o2, big_d, deltas, g1, g2, noise, order)
            return amp * p / np.maximum(s, 1e-300)
        return amp * _convolved(which, o1, o2, big_d, deltas, g1, g2, noise, order)

    theta0 = _initial_guess(free, initial, xs, ys, which, base, scale, curve, default_amp)

    def residual(theta: np.ndarray) -> np.ndarray:
        r = curve(theta, xs) - ys
        return r * weights if weights is not None else r

    lm = lm_fit(residual, theta0, names=free)

    fitted = dict(zip(free, lm.values))
    out_params = base.replace(
        **{k: fitted[k] for k in ("omega1", "omega2", "big_delta") if k in fitted}
    )
    scale_changes = {
        k: fitted[k] for k in ("power_to_rabi_1", "power_to_rabi_2") if k in fitted
    }
    if "amp" in fitted:
        if which == "single":
            scale_changes["amp_single"] = fitted["amp"]
        elif which == "pairs":
            scale_changes["amp_pairs"] = fitted["amp"]
        else:
            # eta amplitude is the pair/single ratio; store it in amp_pairs
            # with amp_single pinned to one.
            scale_changes["amp_pairs"] = fitted["amp"]
            scale_changes["amp_single"] = 1.0
    out_scale = scale.replace(**scale_changes)

    theta_best = lm.values.copy()
    return RateFitResult(
        which=which,
        axis=axis,
        params=out_params,
        scale=out_scale,
        free=lm.as_dict(),
        residuals=lm.residuals,
        cost=lm.cost,
        converged=lm.converged,
        _predict=lambda grid: curve(theta_best, grid),
    )


def _initial_guess(free, initial, xs, ys, which, base, scale, curve, default_amp):
    """Heuristic starting point: amplitude from the data extremum, axis
    offset by aligning extremum positions, model parameters from base."""
    initial = dict(initial or {})
    base_values = {
        "amp": default_amp,
        "delta_offset": 0.0,
        "omega1": base.omega1,
        "omega2": base.omega2,
        "big_delta": base.big_delta,
        "power_to_rabi_1": scale.power_to_rabi_1,
        "power_to_rabi_2": scale.power_to_rabi_2,
    }
    theta0 = np.array([initial.get(n, base_values[n]) for n in free], dtype=float)
    need_amp = "amp" in free and "amp" not in initial
    need_off = "delta_offset" in free and "delta_offset" not in initial
    if need_amp or need_off:
        probe = theta0.copy()
        if need_amp:
            probe[free.index("amp")] = 1.0
        unit = curve(probe, xs)
        peak = np.nanmax(np.abs(unit))
        if need_amp and peak > 0:
            theta0[free.index("amp")] = float(np.nanmax(np.abs(ys)) / peak)
        if need_off:
            pick = np.argmin if which == "eta" else np.argmax
            theta0[free.index("delta_offset")] = float(xs[pick(ys)] - xs[pick(unit)])
    return theta0
