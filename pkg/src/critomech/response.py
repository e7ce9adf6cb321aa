"""Transmission and dispersion of the output field."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .params import SystemParams
from .steady import SteadyState, mode_amplitudes, force_shifted_position, steady_state_roots


@dataclass(frozen=True)
class SpectrumPoint:
    Delta: float
    T: float
    phase: float
    x_s: float
    branch_id: int = 0
    stability: Optional[str] = None


def output_field(params: SystemParams, a_s) -> complex:
    """Normalized output amplitude ``a_out / sqrt(I_in) = 1 - sqrt(kappa_ex / I_in) a_s``."""
    return 1 - np.sqrt(params.kappa_ex / params.I_in) * a_s


def transmission_full(params: SystemParams, ss: SteadyState) -> float:
    """``T = |1 - sqrt(kappa_ex / I_in) a_s|^2``."""
    if params.I_in <= 0:
        raise ValueError("transmission needs I_in > 0")
    return float(abs(output_field(params, ss.a_s)) ** 2)


def transmission_at(params: SystemParams, x, Delta=None):
    """Transmission at given positions, with ``Delta`` optionally overriding params."""
    if Delta is not None:
        Delta = np.asarray(Delta, dtype=float)
        out = np.empty(np.broadcast(Delta, x).shape)
        for idx, (d, xi) in enumerate(np.broadcast(Delta, x)):
            a, _ = mode_amplitudes(params.replace(Delta=float(d)), xi)
            out.flat[idx] = abs(output_field(params, a)) ** 2
        return out
    a, _ = mode_amplitudes(params, x)
    return np.abs(output_field(params, a)) ** 2


def transmission_crit_approx(params: SystemParams, x_s, Delta=None):
    """Coupled-resonator transparency approximation.

    ``T = [1 + kappa^2 / (Delta - g2^2 / (Delta - g1 x_s))^2]^-1``, valid for
    ``delta = 0``, negligible ``kappa_b``, weak drive and ``kappa_a = kappa_ex``.
    At ``Delta = g1 x_s`` the limit ``T = 1`` is returned.
    """
    D = np.asarray(params.Delta if Delta is None else Delta, dtype=float)
    shift = params.g1 * np.asarray(x_s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        eff = D - params.g2**2 / (D - shift)
        T = 1.0 / (1.0 + params.kappa**2 / eff**2)
    T = np.where(D == shift, 1.0, T)
    T = np.where(np.isfinite(eff), T, 1.0)
    return float(T) if T.ndim == 0 else T


def unwrap_phase(phase) -> np.ndarray:
    return np.unwrap(np.asarray(phase, dtype=float), discont=math.pi)


def dispersion_spectrum(params: SystemParams, delta_range, f: float = 0.0, n: int = 401,
                        method: str = "shifted") -> list[SpectrumPoint]:
    """Phase ``arg(a_out / sqrt(I_in))`` across ``Delta`` for a static force ``f``.

    ``method="shifted"`` places the mechanics at the weak-drive force-shifted
    position for every detuning.  ``method="full"`` solves the complete
    steady-state cubic with the force term and reports every root, the
    ``branch_id`` being its rank in ascending ``x_s``; use
    :func:`critomech.bifurcation.sweep_branch` for continuation-ordered branches.
    Phases are unwrapped along ``Delta`` per branch.
    """
    deltas = np.linspace(delta_range[0], delta_range[1], n)
    points: list[SpectrumPoint] = []
    if method == "shifted":
        x = force_shifted_position(params, f)
        out = []
        for d in deltas:
            a, _ = mode_amplitudes(params.replace(Delta=float(d)), x)
            out.append(output_field(params, a))
        out = np.array(out)
        phase = unwrap_phase(np.angle(out))
        for d, o, ph in zip(deltas, out, phase):
            points.append(SpectrumPoint(float(d), float(abs(o) ** 2), float(ph), x, 0))
        return points
    if method != "full":
        raise ValueError(f"unknown method {method!r}")
    by_branch: dict[int, list] = {}
    for d in deltas:
        p = params.replace(Delta=float(d))
        for i, ss in enumerate(steady_state_roots(p, force=f)):
            o = output_field(p, ss.a_s)
            by_branch.setdefault(i, []).append((float(d), o, ss.x_s))
    for bid, rows in sorted(by_branch.items()):
        phase = unwrap_phase(np.angle([r[1] for r in rows]))
        for (d, o, x), ph in zip(rows, phase):
            points.append(SpectrumPoint(d, float(abs(o) ** 2), float(ph), x, bid))
    return points


def transparency_center(params: SystemParams, delta_range, n: int = 4001) -> float:
    """Detuning of maximum transmission on the lowest steady-state branch.

    The maximum on the sample grid is refined by a parabola through its
    neighbours.
    """
    deltas = np.linspace(delta_range[0], delta_range[1], n)
    T = np.array([transmission_full(params.replace(Delta=float(d)),
                                    steady_state_roots(params.replace(Delta=float(d)))[0])
                  for d in deltas])
    i = int(np.argmax(T))
    if 0 < i < n - 1:
        y0, y1, y2 = T[i - 1], T[i], T[i + 1]
        den = y0 - 2 * y1 + y2
        if den != 0:
            return float(deltas[i] + 0.5 * (y0 - y2) / den * (deltas[1] - deltas[0]))
    return float(deltas[i])
