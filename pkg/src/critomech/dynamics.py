"""Time integration of the deterministic mean-field equations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NoOscillation, StepUnderflow
from .params import SystemParams
from .steady import SteadyState

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n, 6): x, p, X_a, Y_a, X_b, Y_b
    params: SystemParams

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def p(self) -> np.ndarray:
        return self.states[:, 1]

    def optical_energy(self) -> np.ndarray:
        """``|a|^2 + |b|^2`` along the trajectory."""
        return 0.5 * np.sum(self.states[:, 2:] ** 2, axis=1)


@dataclass(frozen=True)
class LimitCycle:
    period: float
    amplitude_x: float
    converged: bool
    n_cycles: int
    amplitude_drift: float
    period_jitter: float


def make_rhs(params: SystemParams, force: float = 0.0):
    """Right-hand side ``f(t, y)`` of the six real mean-field equations."""
    wm, gm = params.omega_m, params.gamma_m
    k, kb2, D, d = params.kappa, params.kappa_b / 2, params.Delta, params.delta
    g1, g2 = params.g1, params.g2
    drive = SQRT2 * math.sqrt(params.kappa_ex * params.I_in)  # in X_a units

    def rhs(t, y):
        x, p, Xa, Ya, Xb, Yb = y
        De = D + d - g1 * x
        return [
            wm * p,
            -gm * p - wm * x + 0.5 * g1 * (Xb * Xb + Yb * Yb) + force,
            -k * Xa + D * Ya + g2 * Yb + drive,
            -D * Xa - k * Ya - g2 * Xb,
            -kb2 * Xb + De * Yb + g2 * Ya,
            -De * Xb - kb2 * Yb - g2 * Xa,
        ]

    return rhs


def integrate(params: SystemParams, initial_state, t_end: float, rtol: float = 1e-8,
              atol: float = 1e-10, sample_dt: float | None = 0.05,
              force: float = 0.0) -> Trajectory:
    """Integrate from ``initial_state`` (a 6-vector or a SteadyState) to ``t_end``.

    Uses the Dormand--Prince 5(4) pair with embedded error control.  The
    trajectory is sampled every ``sample_dt`` from the dense output; pass
    ``sample_dt=None`` to get the accepted steps instead.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if isinstance(initial_state, SteadyState):
        initial_state = initial_state.state_vector()
    y0 = np.asarray(initial_state, dtype=float)
    if y0.shape != (6,):
        raise ValueError("initial state must have 6 components")
    t_eval = None
    if sample_dt is not None:
        n = int(math.floor(t_end / sample_dt + 1e-9))
        t_eval = np.arange(n + 1) * sample_dt
        if t_eval[-1] < t_end:
            t_eval = np.append(t_eval, t_end)
    sol = solve_ivp(make_rhs(params, force), (0.0, t_end), y0, method="RK45",
                    rtol=rtol, atol=atol, t_eval=t_eval)
    if sol.status < 0:
        raise StepUnderflow(sol.message)
    return Trajectory(sol.t, sol.y.T.copy(), params)


def perturbed_start(ss: SteadyState, dx: float = 1e-3) -> np.ndarray:
    """Steady state with a small displacement in ``x``."""
    y = ss.state_vector()
    y[0] += dx
    return y


def _refine_max(t, x, i):
    """Vertex of the parabola through samples ``i-1, i, i+1``."""
    y0, y1, y2 = x[i - 1], x[i], x[i + 1]
    den = y0 - 2 * y1 + y2
    if den == 0:
        return t[i], y1
    off = 0.5 * (y0 - y2) / den
    h = t[i + 1] - t[i]
    return t[i] + off * h, y1 - 0.25 * (y0 - y2) * off


def detect_limit_cycle(traj: Trajectory, transient_fraction: float = 0.5,
                       rtol: float = 1e-3, min_amplitude: float = 1e-8) -> LimitCycle:
    """Estimate period and peak-to-peak amplitude of a self-sustained oscillation.

    The leading ``transient_fraction`` of the time span is discarded.  The
    cycle counts as converged when successive cycle amplitudes and periods
    differ by less than ``rtol`` (relative).

    Raises
    ------
    NoOscillation
        If fewer than three maxima survive, or the remaining excursion is
        below ``min_amplitude * (1 + |mean x|)``.
    """
    t, x = traj.times, traj.x
    keep = t >= t[0] + transient_fraction * (t[-1] - t[0])
    t, x = t[keep], x[keep]
    if x.size < 5 or np.ptp(x) <= min_amplitude * (1 + abs(np.mean(x))):
        raise NoOscillation("no oscillation after the transient")
    inner = np.flatnonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:])) + 1
    if inner.size < 3:
        raise NoOscillation(f"only {inner.size} maxima after the transient")
    peaks = np.array([_refine_max(t, x, i) for i in inner])
    t_max = peaks[:, 0]
    periods = np.diff(t_max)
    amps = []
    for n in range(inner.size - 1):
        i0, i1 = inner[n], inner[n + 1]
        j = i0 + int(np.argmin(x[i0:i1 + 1]))
        lo = -_refine_max(t, -x, j)[1]
        amps.append(max(peaks[n, 1], peaks[n + 1, 1]) - lo)
    amps = np.array(amps)
    period = float(np.mean(periods))
    amp = float(np.mean(amps))
    drift = float(np.max(np.abs(np.diff(amps)) / amps[:-1])) if amps.size > 1 else math.inf
    jitter = float(np.max(np.abs(np.diff(periods))) / period) if periods.size > 1 else math.inf
    converged = drift < rtol and jitter < rtol
    return LimitCycle(period, amp, converged, int(periods.size), drift, jitter)
