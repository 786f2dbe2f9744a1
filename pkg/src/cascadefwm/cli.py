"""Command-line interface.

Subcommands cover the full workflow: sweep the rate models, analyze a
time-tag file, generate synthetic runs, fit optical depth and scaling
laws, and search a parameter grid for an operating point.  Outputs are
deterministic files (CSV/JSON) under --out plus a short stdout summary.

Exit codes: 0 success, 2 configuration or usage error, 3 file I/O or
format error, 4 numerical failure (fit did not converge, degenerate
model point, insufficient signal).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .correlation import (
    AnalysisSettings,
    CarUndefinedError,
    EmptyGatingError,
    GatingPlan,
    InsufficientSignalError,
    NonpositiveSinglesError,
    analyze_stream,
)
from .ensemble import (
    DEFAULT_PROBE_GAMMA,
    DEFAULT_TAU0_NS,
    TransmissionScan,
    atom_number,
    fit_eta_vs_od,
    fit_od,
    fit_tau_vs_od,
    linear_rate_fit,
    tau_vs_od,
)
from .fitting import FitConvergenceError
from .lineshape import (
    NonFiniteModelError,
    PumpNoiseModel,
    RateModelScale,
    SinglesUnderflowError,
    rabi_from_power,
    rate_profiles,
)
from .simulator import SimConfig, gating_plan_for, generate, write_ground_truth
from .tagio import (
    TagFileFormatError,
    read_gating,
    read_tags,
    read_xy_csv,
    write_gating,
    write_tags,
)
from .three_level import (
    DegenerateParametersError,
    SteadyStateSolveError,
    ThreeLevelParams,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

_NUMERICAL_ERRORS = (
    FitConvergenceError,
    InsufficientSignalError,
    DegenerateParametersError,
    SteadyStateSolveError,
    SinglesUnderflowError,
    NonpositiveSinglesError,
    CarUndefinedError,
    NonFiniteModelError,
)

_MODEL_KEYS = frozenset(
    {
        "omega1", "omega2", "big_delta", "small_delta", "gamma1", "gamma2",
        "p780_mw", "p776_mw", "noise_fwhm", "noise_truncation", "quad_order",
        "amp_single", "amp_pairs", "power_to_rabi_1", "power_to_rabi_2",
    }
)


def parse_grid(text: str) -> np.ndarray:
    """Parse 'start:stop:n' (inclusive linspace) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 0:
                raise ValueError
            return np.linspace(start, stop, n)
        return np.array([float(p) for p in text.split(",") if p.strip()])
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; use start:stop:n or v1,v2,...") from None


def _model_inputs(cfg: RunConfig):
    """Base model parameters, noise kernel, and scale from config keys."""
    scale = RateModelScale(
        amp_single=cfg.get_float("amp_single", 1.0),
        amp_pairs=cfg.get_float("amp_pairs", 1.0),
        power_to_rabi_1=cfg.get_float("power_to_rabi_1", 17.9),
        power_to_rabi_2=cfg.get_float("power_to_rabi_2", 1.55),
    )
    if "omega1" in cfg:
        omega1 = cfg.get_float("omega1")
    else:
        omega1 = rabi_from_power(cfg.get_float("p780_mw", 0.45), scale.power_to_rabi_1)
    if "omega2" in cfg:
        omega2 = cfg.get_float("omega2")
    else:
        omega2 = rabi_from_power(cfg.get_float("p776_mw", 15.0), scale.power_to_rabi_2)
    params = ThreeLevelParams(
        omega1=omega1,
        omega2=omega2,
        big_delta=cfg.get_float("big_delta", -60.0),
        small_delta=cfg.get_float("small_delta", 3.0),
        gamma1=cfg.get_float("gamma1", 5.75),
        gamma2=cfg.get_float("gamma2", 0.66),
    )
    noise = PumpNoiseModel(
        fwhm=cfg.get_float("noise_fwhm", 2.0),
        truncation=cfg.get_float("noise_truncation", 5.0),
    )
    order = cfg.get_int("quad_order", 64)
    return params, noise, scale, order


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_model_sweep(args) -> int:
    cfg = RunConfig.load(args.config)
    cfg.ensure_known(_MODEL_KEYS)
    params, noise, scale, order = _model_inputs(cfg)
    grid = parse_grid(args.grid)
    out = _outdir(args)
    path = out / "model_sweep.csv"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{args.axis},single,pairs,eta\n")
        if grid.size:
            prof = rate_profiles(params, grid, axis=args.axis, noise=noise, scale=scale, order=order)
            for row in zip(prof.x, prof.single, prof.pairs, prof.eta):
                fh.write(",".join(f"{v:.10g}" for v in row) + "\n")
    print(f"wrote {path} ({grid.size} points)")
    if grid.size:
        i = int(np.argmax(prof.pairs))
        print(f"pair-rate peak at {args.axis}={prof.x[i]:.4g} (value {prof.pairs[i]:.6g})")
    return EXIT_OK


_ANALYZE_KEYS = frozenset(
    {
        "bin_width_ns", "window_lo_ns", "window_hi_ns", "tail_lo_ns", "tail_hi_ns",
        "fit_lo_ns", "fit_hi_ns", "pair_window_ns", "dark_signal_hz", "dark_idler_hz",
    }
)


def _analysis_settings(cfg: RunConfig) -> AnalysisSettings:
    base = AnalysisSettings()
    ns = 1e-9
    return AnalysisSettings(
        bin_width=cfg.get_float("bin_width_ns", base.bin_width / ns) * ns,
        window=(
            cfg.get_float("window_lo_ns", base.window[0] / ns) * ns,
            cfg.get_float("window_hi_ns", base.window[1] / ns) * ns,
        ),
        tail_window=(
            cfg.get_float("tail_lo_ns", base.tail_window[0] / ns) * ns,
            cfg.get_float("tail_hi_ns", base.tail_window[1] / ns) * ns,
        ),
        fit_window=(
            cfg.get_float("fit_lo_ns", base.fit_window[0] / ns) * ns,
            cfg.get_float("fit_hi_ns", base.fit_window[1] / ns) * ns,
        ),
        pair_window=cfg.get_float("pair_window_ns", base.pair_window / ns) * ns,
        dark_signal=cfg.get_float("dark_signal_hz", 0.0),
        dark_idler=cfg.get_float("dark_idler_hz", 0.0),
    )


def cmd_analyze(args) -> int:
    cfg = RunConfig.load(args.config)
    cfg.ensure_known(_ANALYZE_KEYS)
    settings = _analysis_settings(cfg)
    stream = read_tags(args.tagfile)
    gating = read_gating(args.gating) if args.gating else None
    result = analyze_stream(stream, gating, settings)

    out = _outdir(args)
    metrics_path = out / "metrics.json"
    payload = {"schema_version": 1}
    payload.update(result.to_dict())
    with open(metrics_path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    hist_path = out / "histogram.csv"
    hist = result.histogram
    with open(hist_path, "w", encoding="ascii") as fh:
        fh.write("center_ns,counts\n")
        for c, n in zip(hist.centers, hist.counts):
            fh.write(f"{c * 1e9:.6f},{int(n)}\n")

    if args.plot:
        _plot_histogram(out / "g2_fit.png", result)
        print(f"wrote {out / 'g2_fit.png'}")

    fit = result.fit
    m = result.metrics
    print(f"wrote {metrics_path} and {hist_path}")
    print(
        f"tau = {fit.tau_ns:.3f} +/- {fit.tau_sigma_ns:.3f} ns, "
        f"r_p = {m.r_pair.value:.4g} Hz, CAR = {m.car.value:.4g}, "
        f"brightness = {m.brightness.value:.4g} pairs/linewidth"
    )
    return EXIT_OK


def _plot_histogram(path: Path, result) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    hist = result.histogram
    t_ns = hist.centers * 1e9
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.step(t_ns, hist.counts, where="mid", lw=0.8, label="data")
    ax.plot(t_ns, result.fit.model(hist.centers), "r-", lw=1.2, label="fit")
    ax.set_xlabel("idler - signal delay (ns)")
    ax.set_ylabel("coincidences per bin")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


_SIMULATE_KEYS = frozenset(
    {
        "pair_rate_hz", "tau_ns", "duration_s", "det_eff_signal", "det_eff_idler",
        "dark_signal_hz", "dark_idler_hz", "jitter_ps", "active_s", "period_s",
        "seed", "format",
    }
)


def cmd_simulate(args) -> int:
    cfg = RunConfig.load(args.config, {"seed": args.seed})
    cfg.ensure_known(_SIMULATE_KEYS)
    sim = SimConfig(
        pair_generation_rate=cfg.get_float("pair_rate_hz"),
        tau_ns=cfg.get_float("tau_ns"),
        duration_s=cfg.get_float("duration_s"),
        det_eff_signal=cfg.get_float("det_eff_signal", 1.0),
        det_eff_idler=cfg.get_float("det_eff_idler", 1.0),
        dark_rate_signal=cfg.get_float("dark_signal_hz", 0.0),
        dark_rate_idler=cfg.get_float("dark_idler_hz", 0.0),
        jitter_sigma_ps=cfg.get_float("jitter_ps", 340.0),
        active_s=cfg.get_float("active_s", 1e-3),
        period_s=cfg.get_float("period_s", 17e-3),
        seed=cfg.get_int("seed", 0),
    )
    fmt = cfg.get_str("format", "binary")
    if fmt not in ("binary", "csv"):
        raise ConfigError(f"format must be binary or csv, got {fmt!r}")
    stream, truth = generate(sim)
    canonical = json.dumps(sim.to_dict(), sort_keys=True).encode("ascii")
    config_hash = hashlib.sha256(canonical).hexdigest()

    out = _outdir(args)
    tag_path = out / ("tags.csv" if fmt == "csv" else "tags.bin")
    write_tags(tag_path, stream)
    write_gating(out / "gating.txt", gating_plan_for(sim))
    write_ground_truth(out / "ground_truth.json", truth, extra={"config_sha256": config_hash})
    print(f"wrote {tag_path}, {out / 'gating.txt'}, {out / 'ground_truth.json'}")
    print(
        f"{truth.generated_pairs} pairs generated, {truth.detected_pairs} detected on both arms, "
        f"{len(stream)} tags over {truth.active_time_s:.4g} s active"
    )
    return EXIT_OK


_ODFIT_KEYS = frozenset({"probe_gamma", "beam_waist_um"})


def cmd_od_fit(args) -> int:
    cfg = RunConfig.load(args.config, {"probe_gamma": args.gamma})
    cfg.ensure_known(_ODFIT_KEYS)
    x, y, _ = read_xy_csv(args.scanfile)
    scan = TransmissionScan(x, y, gamma=cfg.get_float("probe_gamma", DEFAULT_PROBE_GAMMA))
    od = fit_od(scan)
    waist = cfg.get_float("beam_waist_um", 450.0)
    atoms = atom_number(od.value, waist)

    out = _outdir(args)
    path = out / "od_fit.json"
    with open(path, "w", encoding="ascii") as fh:
        json.dump(
            {
                "od": od.value,
                "od_sigma": od.sigma,
                "probe_gamma": scan.gamma,
                "beam_waist_um": waist,
                "atom_number": atoms,
                "n_points": int(x.size),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"wrote {path}")
    print(f"OD = {od.value:.3f} +/- {od.sigma:.3f}, about {atoms:.3g} atoms")
    return EXIT_OK


_SCALING_KEYS = frozenset({"tau0_ns"})


def cmd_scaling_fit(args) -> int:
    cfg = RunConfig.load(args.config)
    cfg.ensure_known(_SCALING_KEYS)
    x, y, _ = read_xy_csv(args.datafile)

    payload: dict
    if args.law == "tau-od":
        fit = fit_tau_vs_od(x, y, tau0_ns=cfg.get_float("tau0_ns", DEFAULT_TAU0_NS))
        payload = {
            "law": fit.law,
            "mu": fit["mu"].value,
            "mu_sigma": fit["mu"].sigma,
            "tau0_ns": fit["tau0_ns"].value,
        }
        summary = f"mu = {fit['mu'].value:.4f} +/- {fit['mu'].sigma:.4f} (tau0 = {fit['tau0_ns'].value} ns)"
    elif args.law == "eta-od":
        fit = fit_eta_vs_od(x, y)
        payload = {
            "law": fit.law,
            "eta0": fit["eta0"].value,
            "eta0_sigma": fit["eta0"].sigma,
            "od0": fit["od0"].value,
            "od0_sigma": fit["od0"].sigma,
        }
        summary = (
            f"eta0 = {fit['eta0'].value:.4f} +/- {fit['eta0'].sigma:.4f}, "
            f"od0 = {fit['od0'].value:.3f} +/- {fit['od0'].sigma:.3f}"
        )
    else:
        slope = linear_rate_fit(x, y)
        payload = {"law": "linear_rate", "slope": slope.value, "slope_sigma": slope.sigma}
        summary = f"slope = {slope.value:.6g} +/- {slope.sigma:.3g}"

    payload["n_points"] = int(x.size)
    out = _outdir(args)
    path = out / "scaling_fit.json"
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    print(summary)
    return EXIT_OK


_OPTIMIZE_KEYS = _MODEL_KEYS | frozenset(
    {
        "delta_grid", "p780_grid", "p776_grid", "od_grid",
        "tau0_ns", "mu", "od0", "od_ref",
        "min_eta", "min_pair_rate",
    }
)


def cmd_optimize(args) -> int:
    cfg = RunConfig.load(args.config)
    cfg.ensure_known(_OPTIMIZE_KEYS)
    params, noise, scale, order = _model_inputs(cfg)

    def grid_key(key: str):
        # single-value grids parse as numbers, so stringify before splitting
        return parse_grid(str(cfg.values[key])) if key in cfg else None

    deltas = grid_key("delta_grid")
    if deltas is None:
        deltas = np.array([params.small_delta])
    p780s = grid_key("p780_grid")
    p776s = grid_key("p776_grid")
    ods = grid_key("od_grid")
    if ods is None:
        ods = np.array([np.nan])

    tau0 = cfg.get_float("tau0_ns", DEFAULT_TAU0_NS)
    mu = cfg.get_float("mu", 0.0827)
    od0 = cfg.get_float("od0", 9.7)
    od_ref = cfg.get_float("od_ref", 29.0)
    min_eta = cfg.get_float("min_eta", 0.0)
    min_pair = cfg.get_float("min_pair_rate", 0.0)

    o1_list = (
        [(None, params.omega1)]
        if p780s is None
        else [(p, rabi_from_power(p, scale.power_to_rabi_1)) for p in p780s]
    )
    o2_list = (
        [(None, params.omega2)]
        if p776s is None
        else [(p, rabi_from_power(p, scale.power_to_rabi_2)) for p in p776s]
    )

    sat_ref = 1.0 - np.exp(-od_ref / od0)
    rows = []
    for p780, o1 in o1_list:
        for p776, o2 in o2_list:
            base = params.replace(omega1=o1, omega2=o2)
            prof = rate_profiles(base, deltas, axis="delta", noise=noise, scale=scale, order=order)
            for j, delta in enumerate(deltas):
                for od in ods:
                    if np.isnan(od):
                        pair_gain = eta_gain = 1.0
                        tau_ns = tau0
                    else:
                        sat = 1.0 - np.exp(-od / od0)
                        pair_gain = (od * sat) / (od_ref * sat_ref)
                        eta_gain = sat / sat_ref
                        tau_ns = tau_vs_od(od, mu, tau0)
                    pair = prof.pairs[j] * pair_gain
                    eta = prof.eta[j] * eta_gain
                    single = prof.single[j]
                    if eta < min_eta or pair < min_pair:
                        continue
                    if args.objective == "brightness":
                        objective = 2.0 * np.pi * tau_ns * 1e-9 * pair
                    elif args.objective == "eta":
                        objective = eta
                    else:
                        objective = pair
                    rows.append((objective, od, delta, p780, p776, single, pair, eta, tau_ns))

    if not rows:
        raise ConfigError("no grid point satisfies the constraints")

    def sort_key(r):
        objective, od, delta, p780, p776, *_ = r
        return (
            -objective,
            p780 if p780 is not None else 0.0,
            abs(delta),
            p776 if p776 is not None else 0.0,
            od if not np.isnan(od) else 0.0,
        )

    rows.sort(key=sort_key)
    out = _outdir(args)
    path = out / "optimize.csv"
    with open(path, "w", encoding="ascii") as fh:
        fh.write("objective,od,delta,p780_mw,p776_mw,single,pairs,eta,tau_ns\n")
        for r in rows:
            fh.write(
                ",".join("" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.8g}" for v in r)
                + "\n"
            )
    best = rows[0]
    where = [f"delta={best[2]:.4g}"]
    if not np.isnan(best[1]):
        where.insert(0, f"od={best[1]:.4g}")
    if best[3] is not None:
        where.append(f"p780={best[3]:.4g}")
    if best[4] is not None:
        where.append(f"p776={best[4]:.4g}")
    print(f"wrote {path} ({len(rows)} feasible points, objective={args.objective})")
    print(f"best: objective={best[0]:.6g} at " + ", ".join(where))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascadefwm",
        description="Cascade four-wave-mixing pair source: models, analysis, simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model-sweep", help="sweep the rate models along one axis")
    p.add_argument("--axis", choices=("delta", "p776", "p780"), default="delta")
    p.add_argument("--grid", required=True, help="start:stop:n or comma list")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_model_sweep)

    p = sub.add_parser("analyze", help="analyze a time-tag file")
    p.add_argument("tagfile")
    p.add_argument("--gating", default=None, help="gating sidecar (start/end ticks)")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=".")
    p.add_argument("--plot", action="store_true", help="also write g2_fit.png")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="generate a synthetic run")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("od-fit", help="fit optical depth to a transmission scan")
    p.add_argument("scanfile", help="CSV of detuning_mhz,transmission")
    p.add_argument("--gamma", type=float, default=None, help="probe half-width (MHz)")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_od_fit)

    p = sub.add_parser("scaling-fit", help="fit a scaling law to x,y data")
    p.add_argument("datafile", help="CSV of x,y")
    p.add_argument("--law", choices=("tau-od", "eta-od", "rate-power"), required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_scaling_fit)

    p = sub.add_parser("optimize", help="grid-search an operating point")
    p.add_argument(
        "--objective", choices=("brightness", "eta", "pair_rate"), default="brightness"
    )
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_optimize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TagFileFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, EmptyGatingError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
