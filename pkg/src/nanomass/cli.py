"""Command-line front end: ``nanomass <command> --config run.ini --out result.csv``.

Each command writes one CSV (and, where useful, a JSON sidecar next to it
with the same stem). Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 not bistable, 5 unstable branch.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .bifurcation import bistability_possible, critical_point, trace_boundary
from .dynamics import (
    basin_map,
    burn_in_time,
    default_langevin_dt,
    GridSpec,
    default_window,
    estimate_spectrum_mc,
    polyline_distance,
    quadrature_variance,
    simulate_ensemble,
)
from .errors import ConfigError, NanomassError, NotBistable, UnstableBranch
from .io import RunConfig, load_config, write_csv, write_json
from .model import Drive, ResonatorParams, UnitSystem, to_dimensionless
from .response import (
    integrated_spectrum,
    ring_down_time,
    spectral_density,
    spectral_density_zero,
    spectrum_extrema,
)
from .sensitivity import PHASE_POLICIES, sensitivity_sweep
from .steady_state import linearize, select_branch, solve_energy

log = logging.getLogger("nanomass")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_BISTABLE, EXIT_UNSTABLE = 0, 2, 3, 4, 5


@dataclass(frozen=True)
class Context:
    """Resolved parameters plus the factor that maps config frequencies to output units."""

    cfg: RunConfig
    params: ResonatorParams
    freq_scale: float
    seed: int | None
    threads: int

    def freq(self, value: float) -> float:
        return value / self.freq_scale

    def drive(self) -> Drive:
        cfg = self.cfg
        omega_p = self.freq(cfg.require("drive", "omega_p"))
        try:
            return Drive(omega_p, self.drive_p(), cfg.get("drive", "phi_p", 0.0))
        except ValueError as exc:
            raise ConfigError(f"invalid drive: {exc}") from None

    def drive_p(self) -> float:
        p = self.cfg.get("drive", "p")
        ratio = self.cfg.get("drive", "p_over_pc")
        if (p is None) == (ratio is None):
            raise ConfigError("give exactly one of [drive] p and [drive] p_over_pc")
        if ratio is not None:
            return ratio * critical_point(self.params).p_c
        return p / self.freq_scale**2

    def meta(self, command: str) -> dict:
        p = self.params
        out = {
            "command": command,
            "version": __version__,
            "units": p.units.value,
            "seed": "none" if self.seed is None else self.seed,
            "omega0": p.omega0,
            "gamma": p.gamma,
            "gamma3": p.gamma3,
            "kerr": p.kerr,
            "mass": p.mass,
            "temperature": p.temperature,
        }
        if "drive" in self.cfg.sections:
            d = self.cfg.sections["drive"]
            if "omega_p" in d:
                out["omega_p"] = self.freq(d["omega_p"])
            if "p" in d or "p_over_pc" in d:
                out["p"] = self.drive_p()
        return out


def _resolve(cfg: RunConfig, units: str | None, seed: int | None, threads: int | None) -> Context:
    params = cfg.resonator()
    scale = 1.0
    if units is not None:
        wanted = UnitSystem(units)
        if wanted is UnitSystem.SI and params.units is UnitSystem.DIMENSIONLESS:
            raise ConfigError("cannot express a dimensionless parameter set in SI units")
        if wanted is UnitSystem.DIMENSIONLESS and params.units is UnitSystem.SI:
            scale = params.omega0
            params = to_dimensionless(params)[0]
    return Context(cfg, params, scale, seed, threads or os.cpu_count() or 1)


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    """Order-preserving map, optionally over a thread pool."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _sidecar(out: Path, suffix: str = "", ext: str = ".json") -> Path:
    return out.with_name(out.stem + suffix + ext)


def _sweep_grid(ctx: Context, section: str) -> np.ndarray:
    num = ctx.cfg.get(section, "num", 0)
    if num < 0:
        raise ConfigError(f"[{section}] num must be non-negative")
    if num == 0:
        return np.empty(0)
    start = ctx.freq(ctx.cfg.require(section, "omega_p_start"))
    stop = ctx.freq(ctx.cfg.require(section, "omega_p_stop"))
    return np.linspace(start, stop, num)


def _require_seed(ctx: Context) -> int:
    if ctx.seed is None:
        raise ConfigError("this command is randomized and needs an explicit --seed")
    return ctx.seed


def cmd_steady(ctx: Context, out: Path) -> int:
    grid = _sweep_grid(ctx, "steady")
    p = ctx.drive_p() if grid.size else math.nan

    def rows_at(item):
        k, wp = item
        try:
            drive = Drive(float(wp), p)
            rows = []
            for b in solve_energy(ctx.params, drive):
                lin = linearize(b, ctx.params, drive)
                rows.append((float(wp), p, b.index, b.energy, b.phi_m, b.stability.value, lin.zeta))
            return rows
        except NanomassError:
            log.error("steady sweep failed at row %d (omega_p=%r, p=%r)", k, float(wp), p)
            raise

    blocks = _pmap(rows_at, list(enumerate(grid)), ctx.threads)
    columns = ["omega_p", "p", "branch_index", "E", "phi_m", "stability", "zeta"]
    write_csv(out, columns, [r for block in blocks for r in block], ctx.meta("steady"))
    return EXIT_OK


def cmd_bifurcation(ctx: Context, out: Path) -> int:
    params = ctx.params
    check = {
        "abs_kerr": abs(params.kerr),
        "sqrt3_gamma3": math.sqrt(3.0) * params.gamma3,
        "bistability_possible": bistability_possible(params),
    }
    cp = critical_point(params)
    ratio = ctx.cfg.get("bifurcation", "p_max_over_pc", 3.0)
    resolution = ctx.cfg.get("bifurcation", "resolution", 100)
    if ratio <= 1.0 or resolution < 1:
        raise ConfigError("[bifurcation] needs p_max_over_pc > 1 and resolution >= 1")
    boundary = trace_boundary(params, ratio * cp.p_c, resolution)
    rows = [
        (float(p), float(lo), float(hi), params.omega0 + float(lo), params.omega0 + float(hi))
        for p, lo, hi in zip(boundary.p, boundary.lower, boundary.upper)
    ]
    columns = ["p", "detuning_lower", "detuning_upper", "omega_p_lower", "omega_p_upper"]
    write_csv(out, columns, rows, ctx.meta("bifurcation"))
    write_json(
        _sidecar(out),
        {
            "detuning_c": cp.detuning_c,
            "omega_p_c": cp.omega_p(params),
            "p_c": cp.p_c,
            "e_c": cp.e_c,
            "check": check,
        },
    )
    return EXIT_OK


def cmd_basins(ctx: Context, out: Path) -> int:
    drive = ctx.drive()
    margin = ctx.cfg.get("basins", "margin", 0.6)
    base = default_window(ctx.params, drive, margin)
    grid = GridSpec(
        base.re_min,
        base.re_max,
        base.im_min,
        base.im_max,
        ctx.cfg.get("basins", "n_re", 200),
        ctx.cfg.get("basins", "n_im", 200),
    )
    bm = basin_map(ctx.params, drive, grid)
    rows = [
        (float(bm.re[i]), float(bm.im[j]), int(bm.labels[j, i]))
        for j in range(grid.n_im)
        for i in range(grid.n_re)
    ]
    meta = ctx.meta("basins")
    write_csv(out, ["re", "im", "label"], rows, meta)
    write_csv(
        _sidecar(out, "_separatrix", ".csv"),
        ["re", "im"],
        [(float(z.real), float(z.imag)) for z in bm.separatrix],
        meta,
    )
    boundary = bm.boundary_cells()
    cell = max(grid.cell)
    worst = float(polyline_distance(boundary, bm.separatrix).max() / cell) if boundary.size else 0.0
    labels, counts = np.unique(bm.labels, return_counts=True)
    write_json(
        _sidecar(out),
        {
            "saddle": bm.saddle,
            "attractors": {f"C{k}": v for k, v in bm.attractors.items()},
            "grid": {
                "re_min": grid.re_min,
                "re_max": grid.re_max,
                "im_min": grid.im_min,
                "im_max": grid.im_max,
                "n_re": grid.n_re,
                "n_im": grid.n_im,
            },
            "label_counts": {int(k): int(v) for k, v in zip(labels, counts)},
            "boundary_max_distance_cells": worst,
        },
    )
    return EXIT_OK


def _stable_operating_point(ctx: Context, section: str):
    drive = ctx.drive()
    branches = solve_energy(ctx.params, drive)
    which = ctx.cfg.get(section, "branch", "low")
    try:
        branch = select_branch(branches, which)
    except (ValueError, IndexError) as exc:
        raise UnstableBranch(f"cannot select branch {which!r}: {exc}") from None
    lin = linearize(branch, ctx.params, drive)
    if not branch.stability.is_stable or lin.zeta >= 1.0:
        raise UnstableBranch(f"branch {branch.label} is {branch.stability.value}")
    return drive, branch, lin


def cmd_spectrum(ctx: Context, out: Path) -> int:
    cfg, params = ctx.cfg, ctx.params
    drive, branch, lin = _stable_operating_point(ctx, "spectrum")
    if cfg.get("spectrum", "phi_lo") is not None:
        phi_lo = cfg.get("spectrum", "phi_lo")
    else:
        phi_lo = lin.phi0 + cfg.get("spectrum", "phi_lo_from_phi0", 0.0)
    n_traj = cfg.get("spectrum", "trajectories", 0)
    summary = {
        "phi_lo": phi_lo,
        "phi0": lin.phi0,
        "zeta": lin.zeta,
        "branch": branch.label,
        "t_rd": ring_down_time(lin),
        "zero_freq": spectral_density_zero(phi_lo, lin, params),
        "integral": integrated_spectrum(phi_lo, lin, params),
        "p0_scan": [
            [k * math.pi / 8, spectral_density_zero(lin.phi0 + k * math.pi / 8, lin, params)]
            for k in range(17)
        ],
    }
    p_max, p_min, phi_max, phi_min = spectrum_extrema(lin, params)
    summary["extrema"] = {"p_max": p_max, "p_min": p_min, "phi_max": phi_max, "phi_min": phi_min}
    if n_traj > 0:
        seed = _require_seed(ctx)
        dt = default_langevin_dt(lin) * cfg.get("spectrum", "dt_scale", 0.25)
        t_max = burn_in_time(lin) + cfg.get("spectrum", "run_rd", 400.0) * ring_down_time(lin)
        ens = _ensemble(ctx, n_traj, branch.c_m, drive, dt, t_max, seed, "linearized", branch,
                        cfg.get("spectrum", "record_every", 20))
        mc = estimate_spectrum_mc(ens, phi_lo, cfg.get("spectrum", "nperseg", 1024))
        omega = mc.omega
        analytic = spectral_density(omega, phi_lo, lin, params)
        rows = zip(omega, analytic, mc.values, mc.stderr)
        columns = ["omega", "P_analytic", "P_mc", "P_mc_stderr"]
        summary["mc"] = {"trajectories": n_traj, "integral": mc.integral, "zero_freq": mc.zero_freq}
    else:
        num = cfg.get("spectrum", "num", 401)
        omega_max = cfg.get("spectrum", "omega_max")
        omega_max = 10.0 * abs(lin.w) if omega_max is None else ctx.freq(omega_max)
        omega = np.linspace(-omega_max, omega_max, num)
        rows = zip(omega, spectral_density(omega, phi_lo, lin, params))
        columns = ["omega", "P_analytic"]
    rows = [tuple(float(v) for v in r) for r in rows]
    write_csv(out, columns, rows, ctx.meta("spectrum"))
    write_json(_sidecar(out), summary)
    return EXIT_OK


def cmd_sensitivity(ctx: Context, out: Path) -> int:
    cfg = ctx.cfg
    grid = _sweep_grid(ctx, "sensitivity")
    policy = cfg.get("sensitivity", "policy", "optimal-g")
    if policy not in PHASE_POLICIES:
        raise ConfigError(f"[sensitivity] policy must be one of {PHASE_POLICIES}")
    tau = cfg.require("sensitivity", "tau") * ctx.freq_scale if grid.size else 1.0
    p = ctx.drive_p() if grid.size else math.nan
    phi_lo = cfg.get("sensitivity", "phi_lo", 0.0)
    branch = cfg.get("sensitivity", "branch", "low")

    def one(wp):
        return sensitivity_sweep(ctx.params, [Drive(float(wp), p)], tau, policy, phi_lo, branch)[0]

    reports = _pmap(one, list(grid), ctx.threads)
    columns = [
        "omega_p", "p", "branch", "zeta", "phi_lo", "x0_mean", "responsivity", "g_value",
        "g_min", "phi_at_min", "q_eff", "u0", "delta_m_over_m", "t_rd", "error",
    ]
    rows = [tuple(getattr(r, c) for c in columns) for r in reports]
    write_csv(out, columns, rows, ctx.meta("sensitivity"))
    for k, r in enumerate(reports):
        if not r.ok:
            log.warning("row %d (omega_p=%r): %s", k, r.omega_p, r.error)
    if reports and not any(r.ok for r in reports):
        log.error("no point of the sensitivity path succeeded")
        return EXIT_NUMERIC
    return EXIT_OK


def _ensemble(ctx, n, c_init, drive, dt, t_max, seed, mode, branch, record_every):
    """Split an ensemble across threads; trajectory streams depend only on (seed, index)."""
    chunks = max(1, min(ctx.threads, n))
    bounds = np.linspace(0, n, chunks + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def run(span):
        a, b = span
        return simulate_ensemble(
            b - a, c_init, ctx.params, drive, dt, t_max, seed, mode, branch, record_every, a
        )

    parts = _pmap(run, spans, ctx.threads)
    first = parts[0]
    values = np.concatenate([p.c_values for p in parts]) if len(parts) > 1 else first.c_values
    return type(first)(first.times, values, seed, first.dt, mode, first.c_m, first.lin)


def _parse_phases(text: str) -> list[float]:
    try:
        return [float(x) * math.pi for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"[simulate] phases must be comma-separated multiples of pi, got {text!r}") from None


def cmd_simulate(ctx: Context, out: Path) -> int:
    cfg, params = ctx.cfg, ctx.params
    seed = _require_seed(ctx)
    mode = cfg.get("simulate", "mode", "linearized")
    if mode not in ("linearized", "full"):
        raise ConfigError("[simulate] mode must be 'linearized' or 'full'")
    drive, branch, lin = _stable_operating_point(ctx, "simulate")
    n_traj = cfg.get("simulate", "trajectories", 64)
    record_every = cfg.get("simulate", "record_every", 20)
    t_max = burn_in_time(lin) + cfg.get("simulate", "run_rd", 20.0) * ring_down_time(lin)
    ens = _ensemble(ctx, n_traj, branch.c_m, drive, None, t_max, seed, mode, branch, record_every)
    n_dump = min(cfg.get("simulate", "dump_trajectories", 4), n_traj)
    rows = [
        (k, float(t), float(c.real), float(c.imag))
        for k in range(n_dump)
        for t, c in zip(ens.times, ens.c_values[k])
    ]
    write_csv(out, ["trajectory", "t", "re", "im"], rows, ctx.meta("simulate"))
    phases = _parse_phases(cfg.get("simulate", "phases", "0,0.5,1"))
    quads = []
    for offset in phases:
        phi = lin.phi0 + offset
        var, err = quadrature_variance(ens, phi)
        closed = integrated_spectrum(phi, lin, params)
        quads.append(
            {
                "phi_lo_minus_phi0": offset,
                "variance": var,
                "stderr": err,
                "integrated_spectrum": closed,
                "relative_difference": var / closed - 1.0,
            }
        )
    write_json(
        _sidecar(out),
        {
            "branch": branch.label,
            "zeta": lin.zeta,
            "phi0": lin.phi0,
            "t_rd": ring_down_time(lin),
            "dt": ens.dt,
            "t_max": t_max,
            "trajectories": n_traj,
            "mode": mode,
            "quadratures": quads,
        },
    )
    return EXIT_OK


COMMANDS = {
    "steady": cmd_steady,
    "bifurcation": cmd_bifurcation,
    "basins": cmd_basins,
    "spectrum": cmd_spectrum,
    "sensitivity": cmd_sensitivity,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nanomass", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", "") + " command")
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--out", required=True, help="output CSV path (JSON sidecars share its stem)")
        p.add_argument("--seed", type=int, help="master seed for randomized commands")
        p.add_argument("--threads", type=int, help="worker threads (default: logical cores)")
        p.add_argument("--units", choices=[u.value for u in UnitSystem], help="output unit system")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a config value; may be repeated",
        )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="nanomass: %(levelname)s: %(message)s")
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        cfg = load_config(args.config, args.set)
        ctx = _resolve(cfg, args.units, args.seed, args.threads)
        out = Path(args.out)
        if not out.parent.exists():
            raise ConfigError(f"output directory {out.parent} does not exist")
        return COMMANDS[args.command](ctx, out)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NotBistable as exc:
        log.error("not bistable: %s", exc)
        return EXIT_NOT_BISTABLE
    except UnstableBranch as exc:
        log.error("unstable branch: %s", exc)
        return EXIT_UNSTABLE
    except NanomassError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
