"""
Command-line front end.

    python -m src.cli <group> <action> [--config FILE] [--seed N] [--out DIR] [--plot] [flags]

Groups: bell (scan, optimize), loophole (map, critical, santos, visibility),
slit (pattern, scan, fit), alpha (simulate, expected, rate-scan),
counts (accidentals). Angles are given in degrees. Each run writes a CSV
table and a JSON summary into <out>/<run_id>/.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

import argparse
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..config import (
    CH_CONTOUR_LEVELS,
    N_JOBS,
    OUTPUT_DIR,
    RUNS_TEST_LEVEL,
    SAME_SEMIPLANE_X1_M,
    SAME_SEMIPLANE_X2_M,
    TOOLKIT_VERSION,
    setup_logging,
)
from ..counting.photon_stats import (
    SourceModel,
    alpha_vs_rate_scan,
    bootstrap_alpha_sigma,
    click_probabilities,
    expected_alpha,
    simulate_gates,
)
from ..counting.statistics import (
    RateConfig,
    accidental_rate,
    chi2_fit,
    pattern_basis,
    polynomial_basis,
    runs_test,
    simulate_accidental_rate,
)
from ..optics.bell import ch_sum, optimize_settings
from ..optics.double_slit import (
    SlitGeometry,
    coincidence_pattern,
    count_fringe_period,
    fringe_period,
    pattern_scan,
    synthetic_counts,
)
from ..optics.loophole import (
    SantosParams,
    critical_efficiency_curve,
    critical_efficiency_from_ratio,
    loophole_map,
    santos_check,
    visibility_inequality,
)
from ..optics.polarization import Transmissions, fringe_scan, make_state, visibility
from ..utils import ConvergenceError, InvalidInputError, ToolkitError, deg2rad_normalized, run_id
from . import io
from .schemas import RunConfig

logger = setup_logging(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2

PRESET_FOR_KIND = {"coherent": "laser", "thermal": "lamp", "heralded_pdc": "heralded"}


class ToolkitArgumentParser(argparse.ArgumentParser):
    """Argument errors become InvalidInputError so they map to exit code 1."""

    def error(self, message: str):
        raise InvalidInputError(message)


class RunContext:
    """Resolved configuration plus the run directory all artifacts go to."""

    def __init__(self, command: str, cfg: RunConfig, base_dir: Path, plot: bool):
        self.command = command
        self.cfg = cfg
        self.plot = plot
        self.run_id = run_id({"command": command, "config": cfg.model_dump(mode="json"),
                              "version": TOOLKIT_VERSION})
        self.run_dir = base_dir / self.run_id
        self.files: List[str] = []

    def csv(self, df: pd.DataFrame, name: str) -> None:
        self.files.append(io.write_csv(df, self.run_dir / f"{name}.csv").name)

    def svg(self, writer: Callable[[Path], Path], name: str) -> None:
        if self.plot:
            self.files.append(writer(self.run_dir / f"{name}.svg").name)

    def summary(self, outputs: Dict[str, Any]) -> Path:
        self.files.append("summary.json")
        payload = {
            "command": self.command,
            "config": self.cfg.model_dump(mode="json"),
            "files": sorted(self.files),
            "outputs": outputs,
            "run_id": self.run_id,
            "seed": self.cfg.seed,
            "version": TOOLKIT_VERSION,
        }
        return io.write_summary(payload, self.run_dir / "summary.json")


# ----------------------------------------------------------------------
# parameter builders
# ----------------------------------------------------------------------

def _transmissions(cfg: RunConfig) -> Transmissions:
    t = cfg.transmissions
    return Transmissions(eps1_par=t.eps1_par, eps1_perp=t.eps1_perp,
                         eps2_par=t.eps2_par, eps2_perp=t.eps2_perp)


def _geometry(cfg: RunConfig) -> SlitGeometry:
    s = cfg.slit
    return SlitGeometry(
        separation_s=s.separation_m, width_w=s.width_m, wavelength=s.wavelength_m,
        incidence_A=math.radians(s.incidence_a_deg), incidence_B=math.radians(s.incidence_b_deg),
        det1_distance=s.det1_distance_m, det2_distance=s.det2_distance_m,
        aperture1=s.aperture1_m, aperture2=s.aperture2_m,
    )


def _source(cfg: RunConfig) -> SourceModel:
    a = cfg.alpha
    preset = SourceModel.preset(PRESET_FOR_KIND.get(a.source, a.source))
    overrides = {
        "mean_per_gate": a.mean_per_gate,
        "mode_count_M": a.mode_count,
        "split_ratio": a.split_ratio,
        "eta1": a.eta1,
        "eta2": a.eta2,
        "dark_per_gate_1": a.dark_per_gate_1,
        "dark_per_gate_2": a.dark_per_gate_2,
        "trigger_rate": a.trigger_rate_hz,
        "gate_width": a.gate_width_s,
        "accidental_flux_ratio": a.accidental_flux_ratio,
    }
    fields = preset.model_dump()
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return SourceModel(**fields)


def _santos(cfg: RunConfig) -> SantosParams:
    s = cfg.santos
    return SantosParams(eta=s.eta, focal_F=s.focal_m, active_radius_Rc=s.active_radius_m,
                        distance_d=s.distance_m, coherence_tau=s.coherence_s,
                        wavelength=s.wavelength_m, depth_L=s.depth_m, absorb_T=s.absorb_s,
                        singles_rate_RS=s.singles_rate_hz)


# ----------------------------------------------------------------------
# command handlers
# ----------------------------------------------------------------------

def bell_scan(ctx: RunContext) -> Dict[str, Any]:
    cfg = ctx.cfg
    state = make_state(cfg.state.f, math.radians(cfg.state.f_phase_deg))
    eps = _transmissions(cfg)
    fixed = eps.analyzer(2, deg2rad_normalized(cfg.bell.fixed_theta2_deg))
    scan = fringe_scan(state, fixed, eps, cfg.state.alignment, cfg.bell.scan_points)
    ctx.csv(scan, "fringe_scan")
    ctx.svg(lambda p: io.plot_curve(scan, "theta1_deg", "coincidence_prob", p,
                                    title="Coincidence fringe"), "fringe_scan")
    return {"visibility": visibility(state, fixed, eps, cfg.state.alignment)}


def _settings_row(label: str, f_mag: float, f_phase_deg: float, result) -> Dict[str, Any]:
    t1, t2, t1p, t2p = result.settings.degrees()
    return {"label": label, "f_mag": f_mag, "f_phase_deg": f_phase_deg,
            "theta1_deg": t1, "theta2_deg": t2, "theta1p_deg": t1p, "theta2p_deg": t2p,
            "ch_per_pair": result.ch_per_pair, "ratio_r": result.ratio_r}


def bell_optimize(ctx: RunContext) -> Dict[str, Any]:
    cfg = ctx.cfg
    eps = _transmissions(cfg)
    state = make_state(cfg.state.f, math.radians(cfg.state.f_phase_deg))
    best = optimize_settings(state, eps, cfg.bell.objective, cfg.state.alignment)
    rows = [_settings_row("optimum", cfg.state.f, cfg.state.f_phase_deg, best)]
    outputs: Dict[str, Any] = {
        "ratio_r": best.ratio_r,
        "ch_per_pair": best.ch_per_pair,
        "angles_deg": list(best.settings.degrees()),
    }
    if cfg.bell.compare_f is not None:
        other = optimize_settings(make_state(cfg.bell.compare_f), eps, cfg.bell.objective,
                                  cfg.state.alignment)
        crossed = ch_sum(state, other.settings, eps, cfg.state.alignment)
        rows.append(_settings_row(f"settings_of_f={cfg.bell.compare_f:g}", cfg.state.f,
                                  cfg.state.f_phase_deg, crossed))
        outputs["compare"] = {"f": cfg.bell.compare_f, "ratio_r": crossed.ratio_r,
                              "ch_per_pair": crossed.ch_per_pair}
    ctx.csv(pd.DataFrame(rows), "bell_optimum")
    return outputs


def loophole_map_cmd(ctx: RunContext) -> Dict[str, Any]:
    lc = ctx.cfg.loophole
    f_grid = np.linspace(lc.f_min, lc.f_max, lc.f_steps)
    eta_grid = np.linspace(lc.eta_min, lc.eta_max, lc.eta_steps)
    result = loophole_map(f_grid, eta_grid, _transmissions(ctx.cfg), lc.background, N_JOBS)
    ctx.csv(result.to_frame(), "loophole_map")
    ctx.csv(result.to_matrix_frame(), "loophole_map_matrix")
    ctx.svg(lambda p: io.plot_contour(result.f_grid, result.eta_grid, result.matrix,
                                      CH_CONTOUR_LEVELS, p, title="CH per pair"), "loophole_map")
    return {"max_ch_per_pair": float(result.matrix.max()), "levels": CH_CONTOUR_LEVELS}


def loophole_critical(ctx: RunContext) -> Dict[str, Any]:
    lc = ctx.cfg.loophole
    eps = _transmissions(ctx.cfg)
    curve = critical_efficiency_curve(lc.critical_f, eps, lc.background)
    if lc.background == 0:
        from_ratio = (critical_efficiency_from_ratio(f, eps) for f in curve["f"])
        curve["critical_eta_from_ratio"] = [math.nan if v is None else v for v in from_ratio]
    ctx.csv(curve, "critical_efficiency")
    ctx.svg(lambda p: io.plot_curve(curve, "f", "critical_eta", p,
                                    title="Critical efficiency"), "critical_efficiency")
    return {"critical_eta": dict(zip((f"{f:g}" for f in curve["f"]), curve["critical_eta"]))}


def loophole_santos(ctx: RunContext) -> Dict[str, Any]:
    record = santos_check(_santos(ctx.cfg))
    ctx.csv(pd.DataFrame([record]), "santos")
    return record


def loophole_visibility(ctx: RunContext) -> Dict[str, Any]:
    v = ctx.cfg.visibility
    test = visibility_inequality(v.n0, v.n90, v.n22p5, v.n67p5, v.eta)
    ctx.csv(pd.DataFrame([test.model_dump()]), "visibility_inequality")
    return test.model_dump()


def _x1_grid(ctx: RunContext) -> np.ndarray:
    s = ctx.cfg.slit
    if s.x1_max_m <= s.x1_min_m:
        raise InvalidInputError("x1_max_m must exceed x1_min_m", key="slit.x1_max_m")
    return np.linspace(s.x1_min_m, s.x1_max_m, s.points)


def slit_pattern(ctx: RunContext) -> Dict[str, Any]:
    geom = _geometry(ctx.cfg)
    x1 = _x1_grid(ctx)
    x2 = x1 * geom.det2_distance / geom.det1_distance
    x1_mesh, x2_mesh = np.meshgrid(x1, x2, indexing="ij")
    values = coincidence_pattern(geom, x1_mesh, x2_mesh)
    table = pd.DataFrame({"x1_m": x1_mesh.ravel(), "x2_m": x2_mesh.ravel(),
                          "coincidence": np.asarray(values).ravel()})
    ctx.csv(table, "slit_pattern")
    same_side = coincidence_pattern(geom, SAME_SEMIPLANE_X1_M, SAME_SEMIPLANE_X2_M)
    return {"same_semiplane_coincidence": same_side,
            "same_semiplane_x_m": [SAME_SEMIPLANE_X1_M, SAME_SEMIPLANE_X2_M]}


def slit_scan(ctx: RunContext) -> Dict[str, Any]:
    geom = _geometry(ctx.cfg)
    scan = pattern_scan(geom, ctx.cfg.slit.fixed_x2_m, _x1_grid(ctx))
    ctx.csv(scan, "slit_scan")
    ctx.svg(lambda p: io.plot_curve(scan, "x1_m", "coincidence_norm", p,
                                    title="Coincidence scan"), "slit_scan")
    measured = count_fringe_period(scan)
    return {"fringe_period_m": fringe_period(geom), "measured_period_m": measured}


def slit_fit(ctx: RunContext) -> Dict[str, Any]:
    s = ctx.cfg.slit
    geom = _geometry(ctx.cfg)
    data = synthetic_counts(geom, s.fixed_x2_m, _x1_grid(ctx), s.peak_counts,
                            s.background_counts, ctx.cfg.seed)
    fit_data = data.rename(columns={"x_m": "x"})
    pattern_model = pattern_basis(geom, s.fixed_x2_m, offset=True)
    linear_model = polynomial_basis(1)
    pattern_fit = chi2_fit(fit_data, pattern_model)
    linear_fit = chi2_fit(fit_data, linear_model)

    x = fit_data["x"].to_numpy()
    data["fit_pattern"] = sum(p * f(x) for p, f in zip(pattern_fit.params, pattern_model))
    data["fit_linear"] = sum(p * f(x) for p, f in zip(linear_fit.params, linear_model))
    ctx.csv(data, "slit_fit")
    ctx.svg(lambda p: io.plot_curve(data, "x_m", "count", p, yerr="sigma",
                                    overlays=("fit_pattern", "fit_linear"),
                                    title="Pattern vs linear fit"), "slit_fit")

    def report(fit) -> Dict[str, Any]:
        return fit.model_dump(exclude={"residuals"})

    z, p_runs = runs_test(pattern_fit.residuals)
    return {"pattern_fit": report(pattern_fit), "linear_fit": report(linear_fit),
            "pattern_runs_z": z, "pattern_runs_p": p_runs,
            "pattern_residuals_random": p_runs is None or p_runs >= RUNS_TEST_LEVEL}


def alpha_simulate(ctx: RunContext) -> Dict[str, Any]:
    a = ctx.cfg.alpha
    src = _source(ctx.cfg)
    tally = simulate_gates(src, a.gates, ctx.cfg.seed)
    row = {"source": src.kind, **tally.model_dump(),
           "expected_alpha": expected_alpha(src, a.rare_detection_limit)}
    if a.bootstrap_resamples > 0 and tally.defined:
        row["bootstrap_sigma"] = bootstrap_alpha_sigma(tally, a.bootstrap_resamples, ctx.cfg.seed)
    ctx.csv(pd.DataFrame([row]), "alpha")
    return row


def alpha_expected(ctx: RunContext) -> Dict[str, Any]:
    src = _source(ctx.cfg)
    prob1, prob2, prob12 = click_probabilities(src)
    row = {"source": src.kind, "expected_alpha": expected_alpha(src),
           "rare_limit_alpha": expected_alpha(src, rare_detection_limit=True),
           "p1": prob1, "p2": prob2, "p12": prob12}
    ctx.csv(pd.DataFrame([row]), "alpha_expected")
    return row


def alpha_rate_scan(ctx: RunContext) -> Dict[str, Any]:
    a = ctx.cfg.alpha
    curve = alpha_vs_rate_scan(_source(ctx.cfg), a.rates_hz, ctx.cfg.seed, a.gates)
    ctx.csv(curve, "alpha_rate_scan")
    ctx.svg(lambda p: io.plot_curve(curve, "trigger_rate_hz", "alpha", p, yerr="alpha_sigma",
                                    title="alpha vs trigger rate"), "alpha_rate_scan")
    return {"alpha": curve["alpha"].tolist(), "alpha_sigma": curve["alpha_sigma"].tolist()}


def counts_accidentals(ctx: RunContext) -> Dict[str, Any]:
    c = ctx.cfg.counts
    rc = RateConfig(rate1=c.rate1_hz, rate2=c.rate2_hz, window=c.window_s, duration=c.duration_s)
    row = {"rate1_hz": rc.rate1, "rate2_hz": rc.rate2, "window_s": rc.window,
           "duration_s": rc.duration, "accidental_rate_hz": accidental_rate(rc)}
    if c.simulate:
        row["simulated_rate_hz"] = simulate_accidental_rate(rc, ctx.cfg.seed)
    ctx.csv(pd.DataFrame([row]), "accidentals")
    return row


COMMANDS: Dict[str, Dict[str, Callable[[RunContext], Dict[str, Any]]]] = {
    "bell": {"scan": bell_scan, "optimize": bell_optimize},
    "loophole": {"map": loophole_map_cmd, "critical": loophole_critical,
                 "santos": loophole_santos, "visibility": loophole_visibility},
    "slit": {"pattern": slit_pattern, "scan": slit_scan, "fit": slit_fit},
    "alpha": {"simulate": alpha_simulate, "expected": alpha_expected, "rate-scan": alpha_rate_scan},
    "counts": {"accidentals": counts_accidentals},
}


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def _add(parser: argparse.ArgumentParser, flag: str, key: str, **kwargs) -> None:
    parser.add_argument(flag, dest=key, default=None, **kwargs)


def _state_flags(p):
    _add(p, "--f", "state.f", type=float, help="|f| of |HH> + f|VV>")
    _add(p, "--f-phase-deg", "state.f_phase_deg", type=float)
    _add(p, "--alignment", "state.alignment", type=float)


def _eps_flags(p):
    for arm in (1, 2):
        _add(p, f"--eps{arm}-par", f"transmissions.eps{arm}_par", type=float)
        _add(p, f"--eps{arm}-perp", f"transmissions.eps{arm}_perp", type=float)


def _slit_flags(p):
    for name in ("separation_m", "width_m", "wavelength_m", "incidence_a_deg", "incidence_b_deg",
                 "det1_distance_m", "det2_distance_m", "aperture1_m", "aperture2_m",
                 "fixed_x2_m", "x1_min_m", "x1_max_m", "peak_counts", "background_counts"):
        _add(p, "--" + name.replace("_", "-"), f"slit.{name}", type=float)
    _add(p, "--points", "slit.points", type=int)


def _source_flags(p):
    _add(p, "--source", "alpha.source")
    for name in ("mean_per_gate", "split_ratio", "eta1", "eta2", "dark_per_gate_1",
                 "dark_per_gate_2", "trigger_rate_hz", "gate_width_s", "accidental_flux_ratio"):
        _add(p, "--" + name.replace("_", "-"), f"alpha.{name}", type=float)
    _add(p, "--mode-count", "alpha.mode_count", type=int)
    _add(p, "--gates", "alpha.gates", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = ToolkitArgumentParser(prog="pdc", description="PDC entanglement toolkit")
    groups = parser.add_subparsers(dest="group", required=True)

    def action(group_parser, name: str) -> argparse.ArgumentParser:
        p = group_parser.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="RunConfig JSON or prior summary.json")
        _add(p, "--seed", "seed", type=int)
        p.add_argument("--out", type=Path, default=None, help="base output directory")
        p.add_argument("--plot", action="store_true", help="also write SVG plots")
        return p

    bell = groups.add_parser("bell").add_subparsers(dest="action", required=True)
    p = action(bell, "scan")
    _state_flags(p)
    _eps_flags(p)
    _add(p, "--fixed-theta2-deg", "bell.fixed_theta2_deg", type=float)
    _add(p, "--scan-points", "bell.scan_points", type=int)
    p = action(bell, "optimize")
    _state_flags(p)
    _eps_flags(p)
    _add(p, "--objective", "bell.objective")
    _add(p, "--grid-step-deg", "bell.grid_step_deg", type=float)
    _add(p, "--compare-f", "bell.compare_f", type=float)

    loophole = groups.add_parser("loophole").add_subparsers(dest="action", required=True)
    p = action(loophole, "map")
    _eps_flags(p)
    for name in ("f_min", "f_max", "eta_min", "eta_max", "background"):
        _add(p, "--" + name.replace("_", "-"), f"loophole.{name}", type=float)
    _add(p, "--f-steps", "loophole.f_steps", type=int)
    _add(p, "--eta-steps", "loophole.eta_steps", type=int)
    p = action(loophole, "critical")
    _eps_flags(p)
    _add(p, "--f-values", "loophole.critical_f", type=float, nargs="+")
    _add(p, "--background", "loophole.background", type=float)
    p = action(loophole, "santos")
    for name in ("eta", "focal_m", "active_radius_m", "distance_m", "coherence_s",
                 "wavelength_m", "depth_m", "absorb_s", "singles_rate_hz"):
        _add(p, "--" + name.replace("_", "-"), f"santos.{name}", type=float)
    p = action(loophole, "visibility")
    for name in ("n0", "n90", "n22p5", "n67p5", "eta"):
        _add(p, "--" + name.replace("_", "-"), f"visibility.{name}", type=float)

    slit = groups.add_parser("slit").add_subparsers(dest="action", required=True)
    for name in ("pattern", "scan", "fit"):
        _slit_flags(action(slit, name))

    alpha = groups.add_parser("alpha").add_subparsers(dest="action", required=True)
    p = action(alpha, "simulate")
    _source_flags(p)
    _add(p, "--bootstrap-resamples", "alpha.bootstrap_resamples", type=int)
    p.add_argument("--rare-detection-limit", dest="alpha.rare_detection_limit",
                   action="store_const", const=True, default=None)
    _source_flags(action(alpha, "expected"))
    p = action(alpha, "rate-scan")
    _source_flags(p)
    _add(p, "--rates-hz", "alpha.rates_hz", type=float, nargs="+")

    counts = groups.add_parser("counts").add_subparsers(dest="action", required=True)
    p = action(counts, "accidentals")
    for name in ("rate1_hz", "rate2_hz", "window_s", "duration_s"):
        _add(p, "--" + name.replace("_", "-"), f"counts.{name}", type=float)
    p.add_argument("--simulate", dest="counts.simulate", action="store_const", const=True, default=None)

    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file (or defaults) with command-line overrides applied, then validated."""
    document: Dict[str, Any] = io.load_config_document(args.config) if args.config else {}
    for key, value in vars(args).items():
        if value is None or ("." not in key and key != "seed"):
            continue
        target = document
        *sections, leaf = key.split(".")
        for section in sections:
            target = target.setdefault(section, {})
        target[leaf] = value
    return RunConfig.model_validate(document)


def _validation_message(err: ValidationError) -> str:
    parts = []
    for item in err.errors():
        key = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{key}: {item['msg']}")
    return "invalid configuration: " + "; ".join(parts)


def run_command(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one command and write its artifacts; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        command = f"{args.group} {args.action}"
        ctx = RunContext(command, cfg, args.out or OUTPUT_DIR, args.plot)
        logger.info(f"Running '{command}' (run {ctx.run_id})")
        outputs = COMMANDS[args.group][args.action](ctx)
        path = ctx.summary(outputs)
        print(path)
        return EXIT_OK
    except ValidationError as e:
        logger.error(_validation_message(e))
        print(_validation_message(e), file=sys.stderr)
        return EXIT_INVALID
    except InvalidInputError as e:
        message = f"invalid input ({e.key}): {e}" if e.key else f"invalid input: {e}"
        logger.error(message)
        print(message, file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as e:
        logger.error(f"numerical failure: {e}")
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ToolkitError, OSError, ValueError) as e:
        logger.error(f"run failed: {e}")
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
