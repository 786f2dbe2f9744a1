"""Synthetic time-tag streams with known ground truth.

Pairs are generated as a homogeneous Poisson process inside the active
part of a repeating duty cycle (the trap is off while the source runs, by
default 1 ms out of every 17 ms).  Each pair puts a signal photon at the
creation time and an idler delayed by an exponential draw; each photon
then survives an independent detection Bernoulli trial.  Dark counts are
uniform Poisson events over the whole run on each channel.  Every
accepted event receives its own Gaussian timing jitter, is quantized to
the 125 ps tick, clamped at zero, and merged into one sorted stream.

Randomness is PCG64 via numpy Generators.  The run seed spawns one child
sequence per duty-cycle window plus one per dark channel, so streams are
bit-for-bit reproducible for a given config and the per-window draws are
independent of how many windows precede them.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .correlation import TICK_SECONDS, GatingPlan, TimestampStream

__all__ = [
    "SimConfig",
    "GroundTruth",
    "generate",
    "gating_plan_for",
    "write_ground_truth",
    "read_ground_truth",
]


@dataclass(frozen=True)
class SimConfig:
    """Ground-truth parameters of a synthetic run.

    Rates are per second; ``pair_generation_rate`` applies inside active
    windows only, dark rates apply always.  ``tau_ns`` is the mean
    signal-to-idler delay.  Times are seconds.
    """

    pair_generation_rate: float
    tau_ns: float
    duration_s: float
    det_eff_signal: float = 1.0
    det_eff_idler: float = 1.0
    dark_rate_signal: float = 0.0
    dark_rate_idler: float = 0.0
    jitter_sigma_ps: float = 340.0
    active_s: float = 1e-3
    period_s: float = 17e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if not np.isfinite(self.pair_generation_rate) or self.pair_generation_rate < 0:
            raise ValueError("pair_generation_rate must be finite and nonnegative")
        if not np.isfinite(self.tau_ns) or self.tau_ns <= 0:
            raise ValueError("tau_ns must be positive")
        if not np.isfinite(self.duration_s) or self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        for name in ("det_eff_signal", "det_eff_idler"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("dark_rate_signal", "dark_rate_idler", "jitter_sigma_ps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0 < self.active_s <= self.period_s:
            raise ValueError("need 0 < active_s <= period_s")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    """Realized counts of one synthetic run, for validating analysis code."""

    config: SimConfig
    generated_pairs: int
    detected_pairs: int
    signal_from_pairs: int
    idler_from_pairs: int
    signal_darks: int
    idler_darks: int
    active_time_s: float
    rng_algorithm: str = "PCG64"

    @property
    def signal_events(self) -> int:
        return self.signal_from_pairs + self.signal_darks

    @property
    def idler_events(self) -> int:
        return self.idler_from_pairs + self.idler_darks

    @property
    def detected_pair_rate(self) -> float:
        """Detected pairs per second of active time."""
        return self.detected_pairs / self.active_time_s

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "generated_pairs": self.generated_pairs,
            "detected_pairs": self.detected_pairs,
            "signal_from_pairs": self.signal_from_pairs,
            "idler_from_pairs": self.idler_from_pairs,
            "signal_darks": self.signal_darks,
            "idler_darks": self.idler_darks,
            "signal_events": self.signal_events,
            "idler_events": self.idler_events,
            "active_time_s": self.active_time_s,
            "detected_pair_rate": self.detected_pair_rate,
            "rng_algorithm": self.rng_algorithm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            config=SimConfig.from_dict(d["config"]),
            generated_pairs=d["generated_pairs"],
            detected_pairs=d["detected_pairs"],
            signal_from_pairs=d["signal_from_pairs"],
            idler_from_pairs=d["idler_from_pairs"],
            signal_darks=d["signal_darks"],
            idler_darks=d["idler_darks"],
            active_time_s=d["active_time_s"],
            rng_algorithm=d.get("rng_algorithm", "PCG64"),
        )


def _windows(config: SimConfig) -> list[tuple[float, float]]:
    out = []
    start = 0.0
    while start < config.duration_s:
        end = min(start + config.active_s, config.duration_s)
        if end > start:
            out.append((start, end))
        start += config.period_s
    return out


def gating_plan_for(config: SimConfig) -> GatingPlan:
    """The duty-cycle gating plan of a run, in ticks, for analysis."""
    return GatingPlan.periodic(
        active_ticks=round(config.active_s / TICK_SECONDS),
        period_ticks=round(config.period_s / TICK_SECONDS),
        duration_ticks=round(config.duration_s / TICK_SECONDS),
    )


def generate(config: SimConfig) -> tuple[TimestampStream, GroundTruth]:
    """Draw one synthetic run; returns the tag stream and its ground truth."""
    windows = _windows(config)
    children = np.random.SeedSequence(config.seed).spawn(len(windows) + 2)
    tau_s = config.tau_ns * 1e-9
    jitter_s = config.jitter_sigma_ps * 1e-12

    signal_times: list[np.ndarray] = []
    idler_times: list[np.ndarray] = []
    generated = detected_both = det_sig = det_idl = 0

    for child, (w0, w1) in zip(children, windows):
        rng = np.random.default_rng(child)
        span = w1 - w0
        n = int(rng.poisson(config.pair_generation_rate * span))
        generated += n
        if n == 0:
            continue
        born = w0 + span * rng.random(n)
        delay = rng.exponential(tau_s, n)
        keep_s = rng.random(n) < config.det_eff_signal
        keep_i = rng.random(n) < config.det_eff_idler
        detected_both += int(np.count_nonzero(keep_s & keep_i))
        det_sig += int(np.count_nonzero(keep_s))
        det_idl += int(np.count_nonzero(keep_i))
        sig = born[keep_s]
        idl = born[keep_i] + delay[keep_i]
        if jitter_s > 0:
            sig = sig + rng.normal(0.0, jitter_s, sig.size)
            idl = idl + rng.normal(0.0, jitter_s, idl.size)
        signal_times.append(sig)
        idler_times.append(idl)

    dark_counts = []
    dark_dest = (signal_times, idler_times)
    dark_rates = (config.dark_rate_signal, config.dark_rate_idler)
    for child, rate, dest in zip(children[len(windows):], dark_rates, dark_dest):
        rng = np.random.default_rng(child)
        n = int(rng.poisson(rate * config.duration_s))
        dark_counts.append(n)
        t = config.duration_s * rng.random(n)
        if jitter_s > 0:
            t = t + rng.normal(0.0, jitter_s, n)
        dest.append(t)

    def to_ticks(chunks: list[np.ndarray]) -> np.ndarray:
        if not chunks:
            return np.empty(0, dtype=np.int64)
        t = np.concatenate(chunks)
        return np.maximum(np.rint(t / TICK_SECONDS).astype(np.int64), 0)

    sig_ticks = to_ticks(signal_times)
    idl_ticks = to_ticks(idler_times)
    ticks = np.concatenate([sig_ticks, idl_ticks])
    chans = np.concatenate(
        [np.zeros(sig_ticks.size, dtype=np.uint8), np.ones(idl_ticks.size, dtype=np.uint8)]
    )
    stream = TimestampStream.from_unsorted(ticks, chans)

    truth = GroundTruth(
        config=config,
        generated_pairs=generated,
        detected_pairs=detected_both,
        signal_from_pairs=det_sig,
        idler_from_pairs=det_idl,
        signal_darks=dark_counts[0],
        idler_darks=dark_counts[1],
        active_time_s=sum(w1 - w0 for w0, w1 in windows),
    )
    return stream, truth


def write_ground_truth(
    path: os.PathLike | str, truth: GroundTruth, extra: dict | None = None
) -> None:
    payload = truth.to_dict()
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_ground_truth(path: os.PathLike | str) -> GroundTruth:
    with open(path, "r", encoding="ascii") as fh:
        return GroundTruth.from_dict(json.load(fh))
