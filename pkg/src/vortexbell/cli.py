"""``vortexbell`` command line: calibrate | simulate | reconstruct | bell.

Every command resolves a :class:`~vortexbell.config.RunConfig` (defaults,
then ``--preset``, then ``--config`` file, then ``--set``/flags), writes the
resolved configuration to ``<out>/config.txt`` and its outputs beside it.

Exit codes: 0 success, 1 data or I/O failure, 2 invalid configuration or
violated precondition.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import plotting
from .bell_analysis import (TABLE1, BellResult, bell_two_param_surface, bell_vs_order, maximize_bell)
from .config import build_config
from .errors import CalibrationError, ConfigurationError, DataIntegrityError, DomainError, RangeError
from .lg_fields import BeamSpec, default_grid, lg_field
from .ssi_sim import (SIDECAR, GlassBlock, NoiseModel, ShearSetting, calibration_curve,
                      extract_tpcf, fit_calibration, load_interferograms, read_sidecar, save_interferograms,
                      synthesize_interferograms)
from .wdf_reconstruct import simulate_slice, tpcf_to_wdf_slice, write_slice_csv

UM_PER_CM = 1e4
SURFACE_STEP = 0.05


def _beam(cfg, n=None) -> BeamSpec:
    return BeamSpec(cfg.waist_um, cfg.wavelength_nm * 1e-3, cfg.beam_n if n is None else n, cfg.beam_m)


def _noise(cfg, repetition: int = 0) -> NoiseModel:
    return NoiseModel(cfg.noise_sigma, cfg.noise_seed + repetition, cfg.noise_pedestal)


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        out.writerows(rows)
    return path


def _f(x) -> str:
    return f"{x:.10g}"


# --- calibrate --------------------------------------------------------------

def cmd_calibrate(cfg, out: Path) -> int:
    """Tilt-scale reading ``t`` (cm) against dimensionless shear, plus a line fit."""
    cfg.require("block.mu", "block.thickness_cm", "block.arm_cm")
    block = GlassBlock(cfg.block_mu, cfg.block_thickness_cm * UM_PER_CM, cfg.block_arm_cm)
    t_max = math.tan(math.radians(cfg.block_max_tilt_deg)) * cfg.block_arm_cm
    t_values = np.linspace(-t_max, t_max, cfg.block_points)
    curve = calibration_curve(block, t_values, cfg.waist_um, cfg.block_max_tilt_deg)
    slope, intercept, residual = fit_calibration(curve)
    paraxial = (math.sqrt(2) / cfg.waist_um) * (block.thickness_s / block.mount_arm_l) * (1 - 1 / block.refractive_index_mu)
    _write_csv(out / "calibration_curve.csv", ["t_cm", "X_shear"], [[_f(t), _f(x)] for t, x in curve])
    _write_csv(out / "calibration_fit.csv", ["quantity", "value"], [
        ["slope_per_cm", _f(slope)], ["intercept", _f(intercept)], ["max_residual_fraction", _f(residual)],
        ["paraxial_slope_per_cm", _f(paraxial)], ["mu", _f(block.refractive_index_mu)],
        ["thickness_cm", _f(cfg.block_thickness_cm)], ["arm_cm", _f(cfg.block_arm_cm)],
        ["waist_um", _f(cfg.waist_um)]])
    plotting.plot_calibration(curve, slope, intercept, out / "calibration_curve.png")
    print(f"calibration: {len(curve)} points, slope {slope:.6g} per cm, residual {residual:.3%}")
    return 0


# --- simulate ---------------------------------------------------------------

def _simulate_one(task):
    cfg, rep, k, shear, directory = task
    beam = _beam(cfg)
    field = lg_field(beam, default_grid(beam, cfg.grid_n, cfg.extent_waists))
    base = _noise(cfg, rep)
    seed = int(np.random.SeedSequence([base.seed, k]).generate_state(1)[0])
    noise = NoiseModel(base.gaussian_sigma, seed, base.pedestal)
    frames = synthesize_interferograms(field, ShearSetting(*shear), noise, waist_w=beam.waist_w)
    save_interferograms(frames, directory, seed=seed, extra={
        "order_n": beam.order_n, "order_m": beam.order_m, "waist_um": repr(beam.waist_w),
        "repetition": rep})
    return str(directory)


def cmd_simulate(cfg, out: Path, jobs: int = 1) -> int:
    """Four PGM frames and a sidecar per shear and repetition under ``<out>/frames``."""
    shears = cfg.shear_list()
    tasks = [(cfg, r, k, s, out / "frames" / f"rep{r:03d}" / f"shear{k:02d}")
             for r in range(cfg.repetitions) for k, s in enumerate(shears)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            dirs = list(pool.map(_simulate_one, tasks))
    else:
        dirs = [_simulate_one(t) for t in tasks]
    _write_csv(out / "frames_index.csv", ["repetition", "shear_index", "X_shear", "Y_shear", "directory"],
               [[r, k, _f(s[0]), _f(s[1]), Path(d).relative_to(out).as_posix()]
                for (_, r, k, s, _), d in zip(tasks, dirs)])
    print(f"simulate: wrote {len(dirs)} frame sets under {out / 'frames'}")
    return 0


# --- reconstruct ------------------------------------------------------------

def _frame_dirs(root: Path):
    return sorted(p.parent for p in root.rglob(SIDECAR))


def cmd_reconstruct(cfg, out: Path, frames_dir: Path) -> int:
    """Wigner slice CSV and heatmap per frame set, plus ``reconstruct_summary.csv``."""
    if not frames_dir.is_dir():
        raise ConfigurationError(f"frames directory {frames_dir} does not exist")
    dirs = _frame_dirs(frames_dir)
    if not dirs:
        raise ConfigurationError(f"no frame sets ({SIDECAR}) found under {frames_dir}")
    rows, ok = [], 0
    for d in dirs:
        rel = d.relative_to(frames_dir).as_posix() or "."
        try:
            meta = read_sidecar(d)
            beam = BeamSpec(float(meta.get("waist_um", cfg.waist_um)), cfg.wavelength_nm * 1e-3,
                            int(meta.get("order_n", cfg.beam_n)), int(meta.get("order_m", cfg.beam_m)))
            tpcf = extract_tpcf(load_interferograms(d))
            sl = tpcf_to_wdf_slice(tpcf, beam)
        except (DataIntegrityError, ConfigurationError, DomainError, ValueError, OSError) as exc:
            print(f"warning: skipping {d}: {exc}", file=sys.stderr)
            rows.append([rel, "", "", "", "", "", "", "failed"])
            continue
        stem = out / "slices" / rel.replace("/", "_")
        write_slice_csv(sl, stem.with_suffix(".csv"))
        plotting.plot_wigner_slice(sl, stem.with_suffix(".png"))
        plotting.plot_tpcf(tpcf, stem.with_name(stem.name + "_tpcf.png"), beam.waist_w)
        i0 = np.argmin(np.abs(sl.p_axis))
        rows.append([rel, beam.order_n, _f(sl.X_fixed), _f(sl.Y_fixed), _f(sl.values[i0, i0]),
                     _f(np.max(np.abs(sl.values))), _f(sl.residual_imag), "ok"])
        ok += 1
    _write_csv(out / "reconstruct_summary.csv",
               ["frames", "order_n", "X_shear", "Y_shear", "W_origin", "W_abs_max", "residual_imag", "status"],
               rows)
    print(f"reconstruct: {ok} of {len(dirs)} frame sets reconstructed")
    if ok == 0:
        print("error: every frame set failed", file=sys.stderr)
        return 1
    return 0


# --- bell -------------------------------------------------------------------

SETTING_COLUMNS = ["X1", "P_X1", "X2", "P_X2", "Y1", "P_Y1", "Y2", "P_Y2"]


def _table1_shears(cfg):
    if cfg.shears == "table1":
        return None
    s = cfg.shear_list()
    if len(s) != 4 or s[0][0] != s[1][0] or s[2][0] != s[3][0] or s[0][1] != s[2][1] or s[1][1] != s[3][1]:
        raise ConfigurationError(
            "shears: eight-variable simulated mode needs the pattern (X1,Y1); (X1,Y2); (X2,Y1); (X2,Y2)")
    return (s[0][0], s[2][0], s[0][1], s[1][1])


def _surface(cfg, n: int):
    grid = np.round(np.arange(-1.0, 1.0 + 1e-9, SURFACE_STEP), 10)
    if cfg.bell_mode == "analytic":
        return grid, bell_two_param_surface(n, grid, grid, "analytic", m=cfg.beam_m)
    beam = _beam(cfg, n)
    field = lg_field(beam, default_grid(beam, cfg.grid_n, cfg.extent_waists))
    cache = {}

    def slice_at(shear):
        key = (round(shear.X_shear, 12), round(shear.Y_shear, 12))
        if key not in cache:
            cache[key] = simulate_slice(beam, shear, field=field)
        return cache[key]

    return grid, bell_two_param_surface(n, grid, grid, "reconstructed", slice_at)


def cmd_bell(cfg, out: Path, jobs: int = 1) -> int:
    """Per-order ``|B_max|`` table, repetition list, ``|B|`` surface and order plot."""
    orders = list(cfg.bell_orders)
    sim_kwargs = {"n_pixels": cfg.grid_n, "extent_waists": cfg.extent_waists, "waist": cfg.waist_um}
    if cfg.bell_mode == "analytic":
        results = [maximize_bell(n, cfg.bell_dimensionality, "analytic", m=cfg.beam_m) for n in orders]
    elif cfg.bell_dimensionality == "two":
        results = []
        for n in orders:
            reps = [maximize_bell(n, "two", "reconstructed", noise=_noise(cfg, r) if cfg.noise_sigma else None,
                                  **sim_kwargs) for r in range(cfg.repetitions)]
            values = [r.b_max for r in reps]
            results.append(BellResult(reps[0].b_value, reps[0].settings, reps[0].b_max, reps[0].argmax,
                                      repetitions=values, mean=float(np.mean(values)),
                                      std_dev=float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
                                      order_n=n))
    else:
        results = bell_vs_order(orders, cfg.repetitions, _noise(cfg), jobs=jobs,
                                shears=_table1_shears(cfg), **sim_kwargs)

    rows = []
    for r in results:
        rows.append([r.order_n, _f(r.b_value), _f(r.b_max), _f(r.mean), _f(r.std_dev), len(r.repetitions),
                     int(r.converged), *(_f(v) for v in r.argmax.as_vector())])
    _write_csv(out / "bell_results.csv",
               ["order_n", "B", "abs_B_max", "mean", "std_dev", "repetitions", "converged", *SETTING_COLUMNS],
               rows)
    _write_csv(out / "bell_repetitions.csv", ["order_n", "repetition", "abs_B_max"],
               [[r.order_n, k, _f(v)] for r in results for k, v in enumerate(r.repetitions)])

    surface_n = cfg.beam_n if cfg.beam_n in TABLE1 else 1
    grid, surf = _surface(cfg, surface_n)
    _write_csv(out / "bell_surface.csv", ["X", "P_Y", "abs_B"],
               [[_f(x), _f(p), _f(surf[i, j])] for i, x in enumerate(grid) for j, p in enumerate(grid)])
    plotting.plot_bell_surface(grid, grid, surf, out / "bell_surface.png", title=f"|B|, n = {surface_n}")
    plotting.plot_bell_vs_order(results, out / "bell_vs_order.png", reference=TABLE1)
    for r in results:
        print(f"bell: n = {r.order_n}  |B_max| = {r.mean:.4f} +/- {r.std_dev:.4f}  ({len(r.repetitions)} runs)")
    return 0


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--preset", help="table1, fig3, fig4 or fig5")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--seed", type=int, help="noise seed (overrides noise.seed)")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    parser = argparse.ArgumentParser(prog="vortexbell", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="glass-block tilt to shear calibration")
    sub.add_parser("simulate", parents=[common], help="synthesise interferogram frames")
    rec = sub.add_parser("reconstruct", parents=[common], help="Wigner slices from frame sets")
    rec.add_argument("--frames", type=Path, help="frame root (default <out>/frames)")
    sub.add_parser("bell", parents=[common], help="Bell parameter maxima and plots")
    return parser


def _resolve(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["noise.seed"] = str(args.seed)
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.jobs < 1:
        raise ConfigurationError(f"--jobs must be >= 1, got {args.jobs}")
    return build_config(args.config, args.preset, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(cfg.to_text())
        if args.command == "calibrate":
            return cmd_calibrate(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.jobs)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, out, args.frames or out / "frames")
        return cmd_bell(cfg, out, args.jobs)
    except (ConfigurationError, DomainError, RangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataIntegrityError, CalibrationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
