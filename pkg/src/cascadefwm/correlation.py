"""Time-tag correlation analysis: G2 histograms, fits, and source metrics.

Time tags are integer multiples of the 125 ps tagger tick, carried in two
channels (signal and idler).  The cross-correlation histogram is built
multi-stop: every signal event inside an active gating window starts a
row, and every idler whose delay falls in the histogram span contributes
to it, so accidental coincidences build a flat floor on top of which the
true-pair peak decays exponentially.

The fit model is a step-onset exponential over that floor,

    G2(dt) = g_acc + g0 * exp(-dt / tau) * [dt > 0],

with the floor pinned to the mean of a pure-accidental tail window before
the two remaining parameters are fitted.  Derived source metrics (pair
rate, singles rates, heralding efficiencies, coincidence-to-accidental
ratio, spectral brightness) follow from the histogram and fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .fitting import Uncertain, lm_fit

__all__ = [
    "TICK_SECONDS",
    "Channel",
    "TimestampRecord",
    "TimestampStream",
    "GatingPlan",
    "CoincidenceHistogram",
    "G2Fit",
    "PairRates",
    "SourceMetrics",
    "AnalysisSettings",
    "AnalysisResult",
    "UnsortedStreamError",
    "EmptyGatingError",
    "InsufficientSignalError",
    "NonpositiveSinglesError",
    "CarUndefinedError",
    "build_g2",
    "fit_g2",
    "pair_rate",
    "singles_and_efficiencies",
    "car_measured",
    "car_model",
    "car_model_peak",
    "spectral_brightness",
    "analyze_stream",
]

TICK_SECONDS = 125e-12

# Keep the per-chunk coincidence workspace bounded when pairing dense streams.
_CHUNK_PAIR_BUDGET = 5_000_000


class UnsortedStreamError(ValueError):
    """Time tags are not in non-decreasing tick order."""


class EmptyGatingError(ValueError):
    """A gating plan with zero active time was supplied."""


class InsufficientSignalError(RuntimeError):
    """The correlation peak is indistinguishable from the accidental floor."""


class NonpositiveSinglesError(ValueError):
    """Dark-corrected singles rate is not positive; efficiency undefined."""


class CarUndefinedError(ZeroDivisionError):
    """Accidental rate is zero; coincidence-to-accidental ratio undefined."""


class Channel(IntEnum):
    SIGNAL = 0
    IDLER = 1


class TimestampRecord(NamedTuple):
    tick: int
    channel: Channel


class TimestampStream:
    """Two-channel sequence of time tags in non-decreasing tick order."""

    __slots__ = ("ticks", "channels")

    def __init__(self, ticks, channels, validate: bool = True):
        ticks = np.asarray(ticks, dtype=np.int64)
        channels = np.asarray(channels, dtype=np.uint8)
        if validate:
            if ticks.ndim != 1 or ticks.shape != channels.shape:
                raise ValueError("ticks and channels must be 1-d arrays of equal length")
            if ticks.size and ticks[0] < 0:
                raise ValueError("ticks must be nonnegative")
            bad = np.nonzero(np.diff(ticks) < 0)[0]
            if bad.size:
                raise UnsortedStreamError(
                    f"tick order violated at record {int(bad[0]) + 1}"
                )
            if np.any(channels > 1):
                raise ValueError("channels must be 0 (signal) or 1 (idler)")
        self.ticks = ticks
        self.channels = channels

    @classmethod
    def from_records(cls, records: Iterable[tuple[int, int]]) -> "TimestampStream":
        recs = list(records)
        ticks = np.array([r[0] for r in recs], dtype=np.int64)
        channels = np.array([int(r[1]) for r in recs], dtype=np.uint8)
        return cls(ticks, channels)

    @classmethod
    def from_unsorted(cls, ticks, channels) -> "TimestampStream":
        """Sort by tick (channel breaks ties) and build a stream."""
        ticks = np.asarray(ticks, dtype=np.int64)
        channels = np.asarray(channels, dtype=np.uint8)
        order = np.lexsort((channels, ticks))
        return cls(ticks[order], channels[order])

    def select(self, channel: Channel) -> np.ndarray:
        """Ticks of one channel, preserving order."""
        return self.ticks[self.channels == int(channel)]

    def records(self) -> Iterable[TimestampRecord]:
        for t, c in zip(self.ticks, self.channels):
            yield TimestampRecord(int(t), Channel(int(c)))

    def __len__(self) -> int:
        return int(self.ticks.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimestampStream):
            return NotImplemented
        return np.array_equal(self.ticks, other.ticks) and np.array_equal(
            self.channels, other.channels
        )

    def __repr__(self) -> str:
        return f"TimestampStream({len(self)} records)"


@dataclass(frozen=True)
class GatingPlan:
    """Ordered, disjoint, half-open active windows in ticks."""

    windows: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if not self.windows:
            raise EmptyGatingError("gating plan has no active windows")
        prev_end = 0
        for i, (start, end) in enumerate(self.windows):
            if start < 0 or end <= start:
                raise ValueError(f"window {i} is not a valid half-open interval: {(start, end)}")
            if i > 0 and start < prev_end:
                raise ValueError(f"window {i} overlaps or disorders the previous one")
            prev_end = end
        object.__setattr__(
            self, "windows", tuple((int(s), int(e)) for s, e in self.windows)
        )

    @property
    def total_active_ticks(self) -> int:
        return sum(e - s for s, e in self.windows)

    @property
    def total_active_seconds(self) -> float:
        return self.total_active_ticks * TICK_SECONDS

    def contains(self, ticks) -> np.ndarray:
        """Boolean mask of ticks falling inside any active window."""
        edges = np.array([v for w in self.windows for v in w], dtype=np.int64)
        idx = np.searchsorted(edges, np.asarray(ticks, dtype=np.int64), side="right")
        return idx % 2 == 1

    @classmethod
    def covering(cls, stream: TimestampStream) -> "GatingPlan":
        """Single window spanning the whole stream (everything active)."""
        last = int(stream.ticks[-1]) if len(stream) else 0
        return cls(windows=((0, last + 1),))

    @classmethod
    def periodic(cls, active_ticks: int, period_ticks: int, duration_ticks: int) -> "GatingPlan":
        """Repeating duty cycle: [k*period, k*period + active) up to duration."""
        if not (0 < active_ticks <= period_ticks):
            raise ValueError("need 0 < active_ticks <= period_ticks")
        if duration_ticks <= 0:
            raise EmptyGatingError("duration must be positive")
        starts = np.arange(0, duration_ticks, period_ticks, dtype=np.int64)
        ends = np.minimum(starts + active_ticks, duration_ticks)
        return cls(windows=tuple((int(s), int(e)) for s, e in zip(starts, ends) if e > s))


def _to_ticks(value: float, what: str) -> int:
    ticks = round(value / TICK_SECONDS)
    if abs(value - ticks * TICK_SECONDS) > 1e-6 * TICK_SECONDS:
        raise ValueError(f"{what} ({value} s) is not a multiple of the 125 ps tick")
    return int(ticks)


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Counts of idler-minus-signal delays on a uniform grid.

    ``lo``/``hi``/``bin_width`` are in seconds and exact multiples of the
    tick; the corresponding tick values are kept alongside so bin edges are
    integers.  Bins are half-open: bin j covers
    [lo + j*bin_width, lo + (j+1)*bin_width).
    """

    bin_width: float
    lo: float
    hi: float
    counts: np.ndarray
    n_start_events: int
    bin_ticks: int = field(default=0)
    lo_tick: int = field(default=0)

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("counts must be a nonempty 1-d array")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise ValueError("counts must be finite and nonnegative")
        object.__setattr__(self, "counts", counts)
        if self.bin_width < TICK_SECONDS:
            raise ValueError("bin width must be at least one 125 ps tick")
        n_bins = round((self.hi - self.lo) / self.bin_width)
        if n_bins != counts.size or abs((self.hi - self.lo) - n_bins * self.bin_width) > 1e-9 * self.bin_width:
            raise ValueError("histogram span must equal counts.size bins")
        if self.bin_ticks == 0:
            object.__setattr__(self, "bin_ticks", _to_ticks(self.bin_width, "bin width"))
            object.__setattr__(self, "lo_tick", _to_ticks(self.lo, "histogram lower edge"))
        if self.n_start_events < 0:
            raise ValueError("n_start_events must be nonnegative")

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.bin_width * np.arange(self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.lo + self.bin_width * (np.arange(self.n_bins) + 0.5)

    def bin_index(self, t: float, what: str = "time") -> int:
        """Index of the bin whose left edge is t; t must be edge-aligned."""
        j = round((t - self.lo) / self.bin_width)
        if abs((t - self.lo) - j * self.bin_width) > 1e-6 * self.bin_width:
            raise ValueError(f"{what} ({t} s) is not aligned to a bin edge")
        if not 0 <= j <= self.n_bins:
            raise ValueError(f"{what} ({t} s) lies outside the histogram span")
        return int(j)


def build_g2(
    stream: TimestampStream,
    gating: GatingPlan | None = None,
    bin_width: float = 1e-9,
    window: tuple[float, float] = (-50e-9, 200e-9),
) -> CoincidenceHistogram:
    """Histogram idler-minus-signal delays, multi-stop, gated on starts.

    Every signal tag inside an active window is a start; all idler tags in
    the whole stream whose delay falls in ``window`` (half-open, seconds)
    contribute.  Delays are exact integer tick differences before binning.
    """
    if stream.ticks.size > 1 and np.any(np.diff(stream.ticks) < 0):
        raise UnsortedStreamError("stream ticks are not sorted")
    if gating is None:
        gating = GatingPlan.covering(stream)
    if gating.total_active_ticks <= 0:
        raise EmptyGatingError("gating plan has zero active time")

    bin_ticks = _to_ticks(bin_width, "bin width")
    if bin_ticks < 1:
        raise ValueError("bin width must be at least one 125 ps tick")
    lo_tick = _to_ticks(window[0], "window low edge")
    hi_tick = _to_ticks(window[1], "window high edge")
    span = hi_tick - lo_tick
    if span <= 0 or span % bin_ticks:
        raise ValueError("window span must be a positive whole number of bins")
    n_bins = span // bin_ticks

    signal = stream.select(Channel.SIGNAL)
    signal = signal[gating.contains(signal)]
    idler = stream.select(Channel.IDLER)

    counts = np.zeros(n_bins, dtype=np.int64)
    if signal.size and idler.size:
        left = np.searchsorted(idler, signal + lo_tick, side="left")
        right = np.searchsorted(idler, signal + hi_tick, side="left")
        lens = right - left
        # Accumulate in bounded chunks: one row per start, variable length.
        boundaries = np.concatenate(([0], np.cumsum(lens)))
        total = int(boundaries[-1])
        start = 0
        while start < signal.size:
            stop = int(
                np.searchsorted(boundaries, boundaries[start] + _CHUNK_PAIR_BUDGET, side="left")
            )
            stop = max(stop, start + 1)
            stop = min(stop, signal.size)
            ln = lens[start:stop]
            n_pairs = int(ln.sum())
            if n_pairs:
                rows = np.repeat(np.arange(start, stop), ln)
                offs = np.arange(n_pairs) - np.repeat(boundaries[start:stop] - boundaries[start], ln)
                delays = idler[left[rows] + offs] - signal[rows]
                counts += np.bincount((delays - lo_tick) // bin_ticks, minlength=n_bins)
            start = stop
        assert int(counts.sum()) == total

    return CoincidenceHistogram(
        bin_width=bin_ticks * TICK_SECONDS,
        lo=lo_tick * TICK_SECONDS,
        hi=hi_tick * TICK_SECONDS,
        counts=counts,
        n_start_events=int(signal.size),
        bin_ticks=bin_ticks,
        lo_tick=lo_tick,
    )


@dataclass(frozen=True)
class G2Fit:
    """Step-onset exponential fit of a coincidence histogram.

    ``g_acc`` (accidental floor, counts per bin) is pinned from the tail
    window mean, not fitted.  ``g0`` is the peak amplitude over the floor
    and ``tau_ns`` the decay constant in nanoseconds.
    """

    g_acc: float
    g_acc_sigma: float
    g0: float
    g0_sigma: float
    tau_ns: float
    tau_sigma_ns: float
    fit_window: tuple[float, float]
    tail_window: tuple[float, float]
    n_tail_bins: int
    converged: bool

    @property
    def tau_s(self) -> float:
        return self.tau_ns * 1e-9

    def model(self, t_seconds) -> np.ndarray:
        """Evaluate the fitted curve at delay values in seconds."""
        t = np.asarray(t_seconds, dtype=float)
        return self.g_acc + self.g0 * np.exp(
            np.clip(-t / self.tau_s, -700.0, 0.0)
        ) * (t > 0)


def fit_g2(
    hist: CoincidenceHistogram,
    tail_window: tuple[float, float] = (150e-9, 200e-9),
    fit_window: tuple[float, float] | None = None,
) -> G2Fit:
    """Fit the step-onset exponential, floor first, then (g0, tau).

    The accidental floor is the mean count of the bins inside
    ``tail_window`` (which must contain no true-pair signal).  The
    remaining two parameters are then fitted over ``fit_window`` (defaults
    to the whole histogram) against the bin centers.
    """
    i_tail0 = hist.bin_index(tail_window[0], "tail window start")
    i_tail1 = hist.bin_index(tail_window[1], "tail window end")
    if i_tail1 <= i_tail0:
        raise ValueError("tail window contains no complete bins")
    tail = hist.counts[i_tail0:i_tail1].astype(float)
    g_acc = float(tail.mean())
    g_acc_sigma = float(np.sqrt(max(g_acc, 0.0) / tail.size))

    if fit_window is None:
        fit_window = (hist.lo, hist.hi)
    j0 = hist.bin_index(fit_window[0], "fit window start")
    j1 = hist.bin_index(fit_window[1], "fit window end")
    if j1 - j0 < 4:
        raise ValueError("fit window must contain at least 4 bins")
    t = hist.centers[j0:j1]
    y = hist.counts[j0:j1].astype(float)

    peak = float(y.max())
    if peak - g_acc < 5.0 * np.sqrt(g_acc + 1.0):
        raise InsufficientSignalError(
            "histogram peak is not significantly above the accidental floor"
        )

    g0_0 = peak - g_acc
    pos = (t > 0) & (y > g_acc)
    if pos.any():
        excess = y[pos] - g_acc
        tau_0 = float(np.sum(excess * t[pos]) / np.sum(excess))
    else:
        tau_0 = 10e-9
    tau_0 = max(tau_0, hist.bin_width)

    def curve(theta: np.ndarray) -> np.ndarray:
        g0, tau = theta
        return g_acc + g0 * np.exp(np.clip(-t / tau, -700.0, 0.0)) * (t > 0)

    def make_residual(weight: np.ndarray):
        def residual(theta: np.ndarray) -> np.ndarray:
            if theta[1] <= 0:
                return np.full(t.size, 1e9 * (1.0 + abs(theta[1]) / hist.bin_width))
            return (curve(theta) - y) * weight

        return residual

    # Poisson weighting puts residuals in units of each bin's counting
    # error so the covariance is meaningful on steep histograms.  The
    # first pass weights by the data, the second by the fitted model,
    # which removes the bias data weighting gives downward fluctuations.
    lm = lm_fit(make_residual(1.0 / np.sqrt(np.maximum(y, 1.0))), [g0_0, tau_0], names=("g0", "tau"))
    if lm.converged and lm.values[1] > 0:
        weight = 1.0 / np.sqrt(np.maximum(curve(lm.values), 1.0))
        lm = lm_fit(make_residual(weight), lm.values, names=("g0", "tau"))
    g0, tau = (float(v) for v in lm.values)
    if tau <= 0 or g0 <= 0:
        raise InsufficientSignalError("exponential fit collapsed; no usable pair peak")

    return G2Fit(
        g_acc=g_acc,
        g_acc_sigma=g_acc_sigma,
        g0=g0,
        g0_sigma=float(lm.sigmas[0]),
        tau_ns=tau * 1e9,
        tau_sigma_ns=float(lm.sigmas[1]) * 1e9,
        fit_window=(float(fit_window[0]), float(fit_window[1])),
        tail_window=(float(tail_window[0]), float(tail_window[1])),
        n_tail_bins=int(tail.size),
        converged=lm.converged,
    )


@dataclass(frozen=True)
class PairRates:
    """Coincidence counting inside the pair window, with and without
    accidental subtraction.  Rates are per second of active time."""

    raw: Uncertain
    subtracted: Uncertain
    window: tuple[float, float]
    n_raw: int
    n_accidental: float
    active_time: float

    @property
    def r_p(self) -> Uncertain:
        """The default pair-rate estimate (accidental-subtracted)."""
        return self.subtracted


def pair_rate(
    hist: CoincidenceHistogram,
    fit: G2Fit,
    active_time: float,
    window_hi: float = 30e-9,
) -> PairRates:
    """Pair rate from coincidences in [0, window_hi) over active time.

    The accidental expectation (floor level times the number of window
    bins) is subtracted; its uncertainty comes from the tail statistics
    and is propagated alongside the Poisson counting error.
    """
    if active_time <= 0:
        raise ValueError("active time must be positive")
    i0 = hist.bin_index(0.0, "pair window start")
    i1 = hist.bin_index(window_hi, "pair window end")
    if i1 <= i0:
        raise ValueError("pair window contains no complete bins")
    n_bins = i1 - i0
    n_raw = int(hist.counts[i0:i1].sum())
    n_acc = fit.g_acc * n_bins
    acc_sigma = fit.g_acc_sigma * n_bins

    raw = Uncertain(n_raw / active_time, np.sqrt(n_raw) / active_time)
    sub = Uncertain(
        (n_raw - n_acc) / active_time,
        np.sqrt(n_raw + acc_sigma**2) / active_time,
    )
    return PairRates(
        raw=raw,
        subtracted=sub,
        window=(0.0, float(window_hi)),
        n_raw=n_raw,
        n_accidental=float(n_acc),
        active_time=float(active_time),
    )


@dataclass(frozen=True)
class SourceMetrics:
    """Singles rates, heralding efficiencies, and derived figures of merit."""

    r_signal: Uncertain
    r_idler: Uncertain
    r_pair: Uncertain
    eta_signal: Uncertain
    eta_idler: Uncertain
    active_time: float
    dark_signal: float = 0.0
    dark_idler: float = 0.0
    car: Uncertain | None = None
    brightness: Uncertain | None = None

    def to_dict(self) -> dict:
        out = {}
        for name in ("r_signal", "r_idler", "r_pair", "eta_signal", "eta_idler", "car", "brightness"):
            u = getattr(self, name)
            out[name] = None if u is None else {"value": u.value, "sigma": u.sigma}
        out["active_time_s"] = self.active_time
        out["dark_signal_hz"] = self.dark_signal
        out["dark_idler_hz"] = self.dark_idler
        return out


def singles_and_efficiencies(
    stream: TimestampStream,
    gating: GatingPlan,
    pair: PairRates,
    dark_signal: float = 0.0,
    dark_idler: float = 0.0,
) -> SourceMetrics:
    """Gated singles rates and the heralding efficiency of each channel.

    Efficiency is the pair rate over the dark-corrected singles rate of the
    *other* arm's herald, i.e. eta_signal = r_p / (r_signal - dark_signal).
    Raises NonpositiveSinglesError when a dark rate meets or exceeds the
    measured singles rate.
    """
    active = gating.total_active_seconds
    if active <= 0:
        raise EmptyGatingError("gating plan has zero active time")
    if dark_signal < 0 or dark_idler < 0:
        raise ValueError("dark rates must be nonnegative")

    n_s = int(np.count_nonzero(gating.contains(stream.select(Channel.SIGNAL))))
    n_i = int(np.count_nonzero(gating.contains(stream.select(Channel.IDLER))))
    r_s = Uncertain(n_s / active, np.sqrt(n_s) / active)
    r_i = Uncertain(n_i / active, np.sqrt(n_i) / active)

    r_p = pair.r_p
    etas = []
    for r, dark, label in ((r_s, dark_signal, "signal"), (r_i, dark_idler, "idler")):
        denom = r.value - dark
        if denom <= 0:
            raise NonpositiveSinglesError(
                f"dark-corrected {label} singles rate is not positive ({denom:g} Hz)"
            )
        value = r_p.value / denom
        sigma = abs(value) * np.hypot(
            r_p.sigma / r_p.value if r_p.value else 0.0, r.sigma / denom
        )
        if r_p.value == 0:
            sigma = r_p.sigma / denom
        etas.append(Uncertain(value, sigma))

    return SourceMetrics(
        r_signal=r_s,
        r_idler=r_i,
        r_pair=r_p,
        eta_signal=etas[0],
        eta_idler=etas[1],
        active_time=active,
        dark_signal=float(dark_signal),
        dark_idler=float(dark_idler),
    )


def car_measured(r_p: float, r_signal: float, r_idler: float, window: float = 30e-9) -> float:
    """Coincidence-to-accidental ratio from measured rates.

    (r_idler * r_signal * window + r_p) / (r_idler * r_signal * window);
    always >= 1 for nonnegative pair rates.
    """
    acc = r_signal * r_idler * window
    if acc <= 0:
        raise CarUndefinedError("accidental coincidence rate is zero")
    return (acc + r_p) / acc


def car_model(
    r_p,
    eta_signal: float,
    eta_idler: float,
    dark_signal: float,
    dark_idler: float,
    window: float = 30e-9,
):
    """Model coincidence-to-accidental ratio versus the pair rate.

    Each arm's singles rate is reconstructed as r_p/eta + dark, so the CAR
    first rises as pairs outgrow the dark floor and then falls once
    pair-driven accidentals dominate.  Accepts scalar or array ``r_p``.
    """
    if eta_signal <= 0 or eta_idler <= 0:
        raise ValueError("efficiencies must be positive")
    if dark_signal < 0 or dark_idler < 0 or window <= 0:
        raise ValueError("dark rates must be nonnegative and window positive")
    rp = np.asarray(r_p, dtype=float)
    if np.any(rp < 0):
        raise ValueError("pair rate must be nonnegative")
    acc = (rp / eta_signal + dark_signal) * (rp / eta_idler + dark_idler) * window
    if np.any(acc == 0):
        raise CarUndefinedError(
            "accidental rate vanishes (no darks and no pairs); CAR undefined"
        )
    out = (acc + rp) / acc
    return float(out) if np.ndim(r_p) == 0 else out


def car_model_peak(
    eta_signal: float,
    eta_idler: float,
    dark_signal: float,
    dark_idler: float,
    window: float = 30e-9,
    bounds: tuple[float, float] = (1e-6, 1e9),
) -> tuple[float, float]:
    """Numerically maximize the CAR model over the pair rate.

    Returns (r_p at the peak, peak CAR).  The search runs over log r_p
    inside ``bounds``.
    """
    def neg(u: float) -> float:
        return -car_model(np.exp(u), eta_signal, eta_idler, dark_signal, dark_idler, window)

    sol = minimize_scalar(
        neg,
        bounds=(np.log(bounds[0]), np.log(bounds[1])),
        method="bounded",
        options={"xatol": 1e-10},
    )
    r_star = float(np.exp(sol.x))
    return r_star, float(-sol.fun)


def spectral_brightness(tau_s: float, r_p: float) -> float:
    """Pairs per second per unit bandwidth: 2*pi*tau*r_p.

    The Lorentzian linewidth implied by an exponential coherence decay of
    constant tau is 1/(2*pi*tau), so this is pair rate over linewidth.
    """
    if not np.isfinite(tau_s) or tau_s <= 0:
        raise ValueError("tau must be positive and finite")
    return 2.0 * np.pi * tau_s * r_p


@dataclass(frozen=True)
class AnalysisSettings:
    """Defaults for the end-to-end stream analysis."""

    bin_width: float = 1e-9
    window: tuple[float, float] = (-50e-9, 200e-9)
    tail_window: tuple[float, float] = (150e-9, 200e-9)
    fit_window: tuple[float, float] | None = (2e-9, 200e-9)
    pair_window: float = 30e-9
    dark_signal: float = 0.0
    dark_idler: float = 0.0

    def replace(self, **changes) -> "AnalysisSettings":
        return replace(self, **changes)


@dataclass(frozen=True)
class AnalysisResult:
    histogram: CoincidenceHistogram
    fit: G2Fit
    pair: PairRates
    metrics: SourceMetrics

    def to_dict(self) -> dict:
        d = {
            "g2_fit": {
                "g_acc": self.fit.g_acc,
                "g_acc_sigma": self.fit.g_acc_sigma,
                "g0": self.fit.g0,
                "g0_sigma": self.fit.g0_sigma,
                "tau_ns": self.fit.tau_ns,
                "tau_sigma_ns": self.fit.tau_sigma_ns,
                "converged": self.fit.converged,
            },
            "pair_counts": {
                "raw": self.pair.n_raw,
                "accidental": self.pair.n_accidental,
                "window_s": self.pair.window,
            },
            "n_start_events": self.histogram.n_start_events,
        }
        d.update(self.metrics.to_dict())
        return d


def analyze_stream(
    stream: TimestampStream,
    gating: GatingPlan | None = None,
    settings: AnalysisSettings = AnalysisSettings(),
) -> AnalysisResult:
    """Histogram, fit, and derive all source metrics from one tag stream."""
    if gating is None:
        gating = GatingPlan.covering(stream)
    hist = build_g2(stream, gating, settings.bin_width, settings.window)
    fit = fit_g2(hist, settings.tail_window, settings.fit_window)
    pair = pair_rate(hist, fit, gating.total_active_seconds, settings.pair_window)
    metrics = singles_and_efficiencies(
        stream, gating, pair, settings.dark_signal, settings.dark_idler
    )

    r_p, r_s, r_i = metrics.r_pair, metrics.r_signal, metrics.r_idler
    car = car_measured(r_p.value, r_s.value, r_i.value, settings.pair_window)
    rel = [r.sigma / r.value for r in (r_s, r_i) if r.value]
    if r_p.value:
        car_sigma = abs(car - 1.0) * np.sqrt(
            (r_p.sigma / r_p.value) ** 2 + sum(v**2 for v in rel)
        )
    else:
        car_sigma = r_p.sigma / (r_s.value * r_i.value * settings.pair_window)

    bright = spectral_brightness(fit.tau_s, r_p.value)
    tau_rel = fit.tau_sigma_ns / fit.tau_ns if fit.tau_ns else 0.0
    rp_rel = r_p.sigma / r_p.value if r_p.value else 0.0
    bright_sigma = abs(bright) * np.hypot(tau_rel, rp_rel)
    if r_p.value == 0:
        bright_sigma = 2.0 * np.pi * fit.tau_s * r_p.sigma

    metrics = replace(
        metrics,
        car=Uncertain(car, float(car_sigma)),
        brightness=Uncertain(bright, float(bright_sigma)),
    )
    return AnalysisResult(histogram=hist, fit=fit, pair=pair, metrics=metrics)
