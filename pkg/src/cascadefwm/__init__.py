"""Cascade four-wave-mixing photon-pair source toolkit.

Models the steady state of a two-pump cascade atom, turns it into
detected-rate lineshapes, analyzes two-channel time-tag streams into
correlation histograms and source metrics, fits optical-depth scaling
laws, and generates synthetic tag streams with known ground truth.
"""

from .correlation import (
    TICK_SECONDS,
    AnalysisResult,
    AnalysisSettings,
    Channel,
    CoincidenceHistogram,
    G2Fit,
    GatingPlan,
    PairRates,
    SourceMetrics,
    TimestampRecord,
    TimestampStream,
    analyze_stream,
    build_g2,
    car_measured,
    car_model,
    car_model_peak,
    fit_g2,
    pair_rate,
    singles_and_efficiencies,
    spectral_brightness,
)
from .ensemble import (
    ScalingFit,
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
from .fitting import FitConvergenceError, Uncertain
from .lineshape import (
    PumpNoiseModel,
    RateFitResult,
    RateModelScale,
    RateProfiles,
    convolve_in_delta,
    fit_rate_models,
    heralding_asymptote,
    model_heralding,
    model_pair_rate,
    model_single_rate,
    rate_profiles,
)
from .simulator import GroundTruth, SimConfig, gating_plan_for, generate
from .three_level import (
    SteadyState,
    ThreeLevelParams,
    rho31_sq_analytic,
    rho33_analytic,
    steady_state_numeric,
)

__version__ = "0.1.0"
