"""Command-line front end.

Usage: ``critomech <command> [--preset NAME] [--config FILE] [--set key=value ...]
[--out DIR] [--format csv|json] [--threads N] [command options]``.

Exit status is 0 on success, 2 for a bad configuration and 3 for a
numerical failure.
"""
from __future__ import annotations

import argparse
import contextlib
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bifurcation import (hopf_curves, hysteresis_sweep, saddle_node_curves, scan_plane,
                          sweep_branch)
from .dynamics import detect_limit_cycle, integrate, perturbed_start
from .errors import CritomechError, InvalidParams, NoOscillation
from .export import (Provenance, Table, boundary_table, branch_table, hysteresis_table,
                     phase_portrait_table, psd_table, region_table, spectrum_table,
                     trajectory_table, write_json, write_table)
from .noise import force_noise_psd, optimize_coupling, physical_sensitivity
from .params import (HBAR, K_B, PARAM_FIELDS, SystemParams, load_physical, load_preset,
                     load_window, params_from_mapping, preset_names, read_config_file)
from .response import dispersion_spectrum, transmission_full
from .stability import classified_steady_states
from .steady import steady_state_roots

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    """Tag numerical failures with the stage that raised them."""
    try:
        yield
    except (CritomechError, ArithmeticError, np.linalg.LinAlgError) as exc:
        if isinstance(exc, InvalidParams):
            raise ConfigError(str(exc)) from exc
        raise StageError(name, exc) from exc


@dataclass
class RunConfig:
    preset: str | None
    overrides: dict = field(default_factory=dict)
    output_dir: str = "."
    format: str = "csv"
    threads: int = 1
    config_file: str | None = None

    def params(self) -> SystemParams:
        base = None
        if self.preset is not None:
            try:
                base = load_preset(self.preset)
            except KeyError as exc:
                raise ConfigError(str(exc.args[0])) from exc
        values = {}
        if self.config_file is not None:
            try:
                values.update(read_config_file(self.config_file))
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from exc
        values.update(self.overrides)
        try:
            return params_from_mapping(values, base)
        except (InvalidParams, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def window(self) -> dict:
        return load_window(self.preset) if self.preset else {}

    def physical(self):
        try:
            return load_physical(self.preset) if self.preset else None
        except KeyError:
            return None


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        if k not in PARAM_FIELDS:
            raise ConfigError(f"unknown parameter {k!r}")
        try:
            out[k] = float(v)
        except ValueError as exc:
            raise ConfigError(f"--set {k}: not a number: {v!r}") from exc
    return out


def _range(args_value, window, key, fallback):
    if args_value is not None:
        return tuple(args_value)
    if key in window:
        return window[key]
    return fallback


def _prov(cfg: RunConfig, command, argv, params, **extra):
    return Provenance(command, tuple(argv), params.to_dict(), extra or None)


# ---------------------------------------------------------------------------
# commands


def cmd_steady(cfg: RunConfig, args, argv) -> int:
    params = cfg.params()
    with stage("steady-state solve"):
        states = classified_steady_states(params, force=args.force)
    rows = []
    for k, ss in enumerate(states):
        T = transmission_full(params, ss) if params.I_in > 0 else float("nan")
        lead = ss.stability.leading_eigenvalue
        rows.append((k, ss.x_s, ss.a_s.real, ss.a_s.imag, ss.b_s.real, ss.b_s.imag,
                     ss.delta_eff, str(ss.stability.kind), lead.real, lead.imag, T))
        print(f"root {k}: x_s = {ss.x_s:.10g}  delta_eff = {ss.delta_eff:.6g}  "
              f"{ss.stability.kind}  (lead {lead.real:.4g}{lead.imag:+.4g}i)")
    table = Table("steady", ("root", "x_s", "re_a", "im_a", "re_b", "im_b", "delta_eff",
                             "stability", "lead_re", "lead_im", "T"), rows)
    write_table(table, cfg.output_dir, cfg.format, _prov(cfg, "steady", argv, params,
                                                         force=args.force))
    return EXIT_OK


def cmd_map(cfg: RunConfig, args, argv) -> int:
    params = cfg.params()
    win = cfg.window()
    d_range = _range(args.delta_range, win, "delta_range", (params.Delta - 20, params.Delta + 20))
    i_range = _range(args.iin_range, win, "iin_range", (0.0, 2 * max(params.I_in, 1.0)))
    with stage("plane scan"):
        rmap = scan_plane(params, d_range, i_range, args.resolution, n_jobs=cfg.threads)
    with stage("saddle-node tracing"):
        sn = saddle_node_curves(rmap)
    with stage("Hopf tracing"):
        hp = hopf_curves(rmap)
    prov = _prov(cfg, "map", argv, params, delta_range=d_range, iin_range=i_range,
                 resolution=args.resolution)
    write_table(region_table(rmap), cfg.output_dir, cfg.format, prov)
    write_table(boundary_table(sn, "saddle_node"), cfg.output_dir, cfg.format, prov)
    write_table(boundary_table(hp, "hopf"), cfg.output_dir, cfg.format, prov)
    counts = {r: int(np.sum(rmap.region == code)) for r, code in (("I", 1), ("II", 2), ("III", 3))}
    print("cells per region: " + ", ".join(f"{k}={v}" for k, v in counts.items())
          + f"; flagged={int(rmap.flagged.sum())}")
    print(f"saddle-node curves: {len(sn)}; Hopf curves: {len(hp)}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args, argv) -> int:
    params = cfg.params()
    win = cfg.window()
    iin = params.I_in if args.iin is None else args.iin
    d_range = _range(args.delta_range, win, "delta_range", (params.Delta - 20, params.Delta + 20))
    with stage("branch continuation"):
        branches = sweep_branch(params, iin, d_range, step=args.step)
    prov = _prov(cfg, "sweep", argv, params, I_in=iin, delta_range=d_range, step=args.step,
                 sweep_step=args.sweep_step)
    write_table(branch_table(branches), cfg.output_dir, cfg.format, prov)
    for k, b in enumerate(branches):
        print(f"branch {k}: {b.label}{' (closed)' if b.closed else ''}, {len(b)} points, "
              f"Delta in [{b.delta.min():.6g}, {b.delta.max():.6g}]")
    if not args.no_hysteresis:
        step = args.sweep_step or (d_range[1] - d_range[0]) / 2000
        with stage("hysteresis sweep"):
            traces = [hysteresis_sweep(params, iin, d_range, d, step) for d in ("up", "down")]
        write_table(hysteresis_table(traces), cfg.output_dir, cfg.format, prov)
        for tr in traces:
            where = ", ".join(f"{j.Delta_after:.6g}" for j in tr.jumps) or "none"
            print(f"{tr.direction}-sweep jumps at Delta = {where}")
    return EXIT_OK


def cmd_dynamics(cfg: RunConfig, args, argv) -> int:
    params = cfg.params()
    with stage("steady-state solve"):
        states = classified_steady_states(params)
    if args.root is not None:
        if not 0 <= args.root < len(states):
            raise ConfigError(f"--root must be in [0, {len(states) - 1}]")
        start = states[args.root]
    else:
        start = next((s for s in states if not s.stability.stable), states[0])
    with stage("time integration"):
        traj = integrate(params, perturbed_start(start, args.dx), args.t_end,
                         sample_dt=args.sample_dt)
    try:
        with stage("limit-cycle detection"):
            lc = detect_limit_cycle(traj, args.transient)
        report = {"oscillating": True, "period": lc.period, "amplitude_x": lc.amplitude_x,
                  "converged": lc.converged, "n_cycles": lc.n_cycles,
                  "amplitude_drift": lc.amplitude_drift, "period_jitter": lc.period_jitter}
        print(f"limit cycle: period = {lc.period:.6g}, amplitude_x = {lc.amplitude_x:.6g}, "
              f"converged={'true' if lc.converged else 'false'}")
    except StageError as exc:
        if not isinstance(exc.__cause__, NoOscillation):
            raise
        report = {"oscillating": False, "converged": False, "final_x": float(traj.x[-1])}
        print(f"no limit cycle; final x = {traj.x[-1]:.10g}")
    prov = _prov(cfg, "dynamics", argv, params, t_end=args.t_end, dx=args.dx,
                 sample_dt=args.sample_dt, start_x=start.x_s)
    write_table(trajectory_table(traj), cfg.output_dir, cfg.format, prov)
    write_table(phase_portrait_table(traj), cfg.output_dir, cfg.format, prov)
    env = prov.envelope()
    env["limit_cycle"] = report
    write_json(f"{cfg.output_dir}/limit_cycle.json", env)
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, args, argv) -> int:
    params = cfg.params()
    if params.I_in <= 0:
        raise ConfigError("spectrum needs I_in > 0")
    d_range = tuple(args.delta_range) if args.delta_range else (-0.05, 0.05)
    with stage("spectrum"):
        points = dispersion_spectrum(params, d_range, f=args.force, n=args.n, method=args.method)
        if args.method == "full":
            for i, pt in enumerate(points):
                p = params.replace(Delta=pt.Delta)
                ss = [s for s in classified_steady_states(p, force=args.force)]
                points[i] = type(pt)(pt.Delta, pt.T, pt.phase, pt.x_s, pt.branch_id,
                                     str(ss[pt.branch_id].stability.kind))
    prov = _prov(cfg, "spectrum", argv, params, delta_range=d_range, n=args.n, force=args.force,
                 method=args.method)
    write_table(spectrum_table(points), cfg.output_dir, cfg.format, prov)
    print(f"{len(points)} spectrum points over Delta in [{d_range[0]:g}, {d_range[1]:g}]")
    return EXIT_OK


def cmd_sense(cfg: RunConfig, args, argv) -> int:
    params = cfg.params()
    if params.Delta != 0 or params.delta != 0:
        raise ConfigError("sense needs Delta = delta = 0 (resonant transfer coefficients)")
    phys = cfg.physical()
    if args.kT is not None:
        kT = args.kT
    elif phys is not None:
        kT = K_B * phys.temperature / (HBAR * phys.omega_m_si)
    else:
        kT = 0.0
    omega = np.linspace(0.0, args.omega_max, args.n)
    with stage("steady-state solve"):
        ss = steady_state_roots(params)[0]
    with stage("noise spectrum"):
        rep = force_noise_psd(params, ss, omega, kT)
    prov = _prov(cfg, "sense", argv, params, kT=kT, omega_max=args.omega_max, n=args.n)
    write_table(psd_table(rep, phys.psd_unit if phys else None), cfg.output_dir, cfg.format, prov)
    print(f"DC shot PSD = {rep.S_shot[0]:.6g}, thermal PSD = {rep.S_th:.6g} "
          f"[{rep.units}]")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, args, argv) -> int:
    params = cfg.params()
    ss = None
    with stage("steady-state solve"):
        if params.Delta == 0 and params.delta == 0 and params.I_in > 0 and params.g1 > 0:
            ss = steady_state_roots(params)[0]
    with stage("coupling optimization"):
        opt = optimize_coupling(params, ss if ss is not None and ss.x_s > 0 else None)
    result = {"u_star": opt.u_star, "u_analytic": opt.u_analytic,
              "S_min": opt.S_min, "S_min_units": "hbar*m*omega_m^2", "g2_star": opt.g2_star}
    print(f"u_star = {opt.u_star:.6f} (analytic {opt.u_analytic:.6f})")
    print(f"S_min = {opt.S_min:.6f} hbar m omega_m^2")
    if opt.g2_star is not None:
        print(f"g2_star = {opt.g2_star:.6g} omega_m")
    phys = cfg.physical()
    if phys is not None:
        sens = physical_sensitivity(phys, opt.S_min)
        result["physical"] = {"sensitivity": sens.sensitivity, "thermal_floor": sens.thermal_floor,
                              "S_min": sens.S_shot, "S_th": sens.S_th, "sql": sens.sql,
                              "units": "N/sqrt(Hz) and N^2/Hz",
                              "g2_star": None if opt.g2_star is None
                              else opt.g2_star * phys.omega_m_si}
        print(f"shot-noise-limited sensitivity = {sens.sensitivity * 1e18:.2f} aN/sqrt(Hz)")
        print(f"thermal floor = {sens.thermal_floor * 1e18:.2f} aN/sqrt(Hz)")
    env = _prov(cfg, "optimize", argv, params).envelope()
    env["optimum"] = result
    write_json(f"{cfg.output_dir}/optimum.json", env)
    return EXIT_OK


COMMANDS = {"steady": cmd_steady, "map": cmd_map, "sweep": cmd_sweep, "dynamics": cmd_dynamics,
            "spectrum": cmd_spectrum, "sense": cmd_sense, "optimize": cmd_optimize}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=preset_names(), help="named parameter set")
    common.add_argument("--config", help="flat key = value parameter file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="parameter override (repeatable)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=1, help="worker thread limit")

    parser = argparse.ArgumentParser(prog="critomech", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", parents=[common], help="all steady states and their stability")
    p.add_argument("--force", type=float, default=0.0, help="static force on the mechanics")

    p = sub.add_parser("map", parents=[common], help="region map and boundary curves")
    p.add_argument("--delta-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--iin-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--resolution", type=int, default=400)

    p = sub.add_parser("sweep", parents=[common], help="branches, isolas and hysteresis in Delta")
    p.add_argument("--iin", type=float, help="drive intensity (default: from parameters)")
    p.add_argument("--delta-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--step", type=float, default=0.01, help="initial continuation step")
    p.add_argument("--sweep-step", type=float, help="Delta step of the hysteresis sweeps")
    p.add_argument("--no-hysteresis", action="store_true")

    p = sub.add_parser("dynamics", parents=[common], help="time integration and limit cycles")
    p.add_argument("--t-end", type=float, default=3000.0)
    p.add_argument("--dx", type=float, default=1e-3, help="initial displacement from the fixed point")
    p.add_argument("--root", type=int, help="index of the starting steady state")
    p.add_argument("--sample-dt", type=float, default=0.05)
    p.add_argument("--transient", type=float, default=0.5, help="discarded fraction")

    p = sub.add_parser("spectrum", parents=[common], help="transmission and dispersion spectra")
    p.add_argument("--delta-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--n", type=int, default=401)
    p.add_argument("--force", type=float, default=0.0)
    p.add_argument("--method", choices=("full", "shifted"), default="full")

    p = sub.add_parser("sense", parents=[common], help="effective force-noise spectra")
    p.add_argument("--omega-max", type=float, default=2.0)
    p.add_argument("--n", type=int, default=201)
    p.add_argument("--kT", type=float, help="bath energy in units of hbar omega_m")

    sub.add_parser("optimize", parents=[common], help="optimal coupling and sensitivity")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.preset is None and args.config is None:
            raise ConfigError("give --preset or --config")
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = RunConfig(args.preset, _parse_set(args.set), args.out, args.format,
                        args.threads, args.config)
        return COMMANDS[args.command](cfg, args, ["critomech"] + argv)
    except ConfigError as exc:
        print(f"critomech: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"critomech: numerical failure in {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
