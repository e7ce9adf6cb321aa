"""CSV and JSON writers with a reproducibility header.

Every file starts with the tool version, the command line and the effective
parameters.  CSV files carry these as ``#`` comment lines; JSON files wrap
the table in an envelope.  Floats are written with 17 significant digits so
that identical runs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
import shlex
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bifurcation import BoundaryCurve, BranchCurve, HysteresisTrace, RegionMap
from .dynamics import Trajectory
from .noise import PsdReport
from .response import SpectrumPoint

FORMATS = ("csv", "json")


@dataclass(frozen=True)
class Provenance:
    command: str
    argv: tuple
    params: dict
    extra: dict | None = None

    def header_lines(self) -> list[str]:
        lines = [f"critomech {__version__}", f"command: {self.command}",
                 f"argv: {shlex.join(self.argv)}",
                 "params: " + json.dumps(self.params, sort_keys=True)]
        if self.extra:
            lines.append("settings: " + json.dumps(_jsonable(self.extra), sort_keys=True))
        return lines

    def envelope(self) -> dict:
        env = {"tool": "critomech", "version": __version__, "command": self.command,
               "argv": list(self.argv), "params": self.params}
        if self.extra:
            env["settings"] = _jsonable(self.extra)
        return env


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple
    rows: list


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else format(v, ".17g")
    return str(v)


def _jsonable(v):
    if v is None or isinstance(v, str):
        return v
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, complex):
        return [v.real, v.imag]
    return str(v)


def write_table(table: Table, out_dir, fmt: str, prov: Provenance) -> Path:
    """Write ``table`` as ``<out_dir>/<name>.<fmt>`` and return the path."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{table.name}.{fmt}"
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            for line in prov.header_lines():
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([_fmt(v) for v in row])
    else:
        env = prov.envelope()
        env["columns"] = list(table.columns)
        env["rows"] = _jsonable(table.rows)
        write_json(path, env)
    return path


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path


def read_csv(path) -> tuple[list[str], list[str], list[list[str]]]:
    """``(header_lines, columns, rows)`` of a file written by :func:`write_table`."""
    header, body = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# ") and not body:
                header.append(line[2:].rstrip("\n"))
            else:
                body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    return header, columns, [r for r in reader]


# ---------------------------------------------------------------------------
# table builders


def region_table(rmap: RegionMap) -> Table:
    rows = [(D, I, n, str(r), f) for D, I, n, r, f in rmap.cells()]
    return Table("regions", ("Delta", "I_in", "root_count", "region", "flagged"), rows)


def boundary_table(curves: list[BoundaryCurve], name: str) -> Table:
    rows = []
    for cid, c in enumerate(curves):
        for D, I in c.points:
            rows.append((cid, c.kind, D, I, c.closed, c.exits_window))
    return Table(name, ("curve_id", "kind", "Delta", "I_in", "closed", "exits_window"), rows)


def branch_table(branches: list[BranchCurve]) -> Table:
    rows = []
    for bid, b in enumerate(branches):
        for pt in b.points:
            rows.append((bid, str(b.label), b.closed, pt.Delta, pt.x_s, pt.T,
                         str(pt.stability.kind), pt.stability.margin))
    return Table("branches", ("branch_id", "label", "closed", "Delta", "x_s", "T", "stability",
                              "margin"), rows)


def hysteresis_table(traces: list[HysteresisTrace]) -> Table:
    rows = []
    for tr in traces:
        jump_at = {j.Delta_after for j in tr.jumps}
        for D, x, s in zip(tr.delta, tr.x, tr.stable):
            rows.append((tr.direction, D, x, bool(s), float(D) in jump_at))
    return Table("hysteresis", ("direction", "Delta", "x_s", "stable", "jump"), rows)


def trajectory_table(traj: Trajectory) -> Table:
    rows = [(t, *s) for t, s in zip(traj.times, traj.states)]
    return Table("trajectory", ("t", "x", "p", "X_a", "Y_a", "X_b", "Y_b"), rows)


def phase_portrait_table(traj: Trajectory) -> Table:
    return Table("phase_portrait", ("x", "p"), list(zip(traj.x, traj.p)))


def spectrum_table(points: list[SpectrumPoint]) -> Table:
    rows = [(p.Delta, p.branch_id, p.x_s, p.T, p.phase,
             "" if p.stability is None else str(p.stability)) for p in points]
    return Table("spectrum", ("Delta", "branch_id", "x_s", "T", "phase", "stability"), rows)


def psd_table(rep: PsdReport, si_factor: float | None = None) -> Table:
    cols = ["omega", "S_shot", "S_th", "S_total", "sensitivity"]
    rows = [(w, a, rep.S_th, t, s) for w, a, t, s in
            zip(rep.omega, rep.S_shot, rep.S_total, rep.sensitivity)]
    if si_factor is not None:
        cols += ["S_total_si", "sensitivity_si"]
        rows = [r + (r[3] * si_factor, math.sqrt(r[3] * si_factor)) for r in rows]
    return Table("psd", tuple(cols), rows)
