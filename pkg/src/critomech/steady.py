"""Semiclassical steady states of the ring--toroid system.

Setting the time derivatives of the mean-field equations to zero gives

    x = g1 |b|^2 / omega_m + f / omega_m
    a = sqrt(kappa_ex I) / (i Delta + kappa + g2^2 / (i D + kappa_b / 2))
    b = -i g2 a / (i D + kappa_b / 2),        D = Delta + delta - g1 x

Writing ``(i Delta + kappa)(i D + kappa_b/2) + g2^2 = P(x) + i Q(x)`` with
``P`` and ``Q`` linear in ``x`` turns the position equation into the cubic

    (omega_m x - f) (P^2 + Q^2) - g1 g2^2 kappa_ex I = 0,

which is solved through its companion matrix and then Newton-polished on the
scalar fixed-point map.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import NonConvergence, RegimeWarning
from .params import SystemParams

RESIDUAL_TOL = 1e-10
REAL_TOL = 1e-8


@dataclass(frozen=True)
class SteadyState:
    """One self-consistent fixed point.  The momentum ``p_s`` is always zero."""

    x_s: float
    a_s: complex
    b_s: complex
    delta_eff: float
    stability: Optional[object] = None
    force: float = 0.0
    singular: bool = False

    p_s = 0.0

    def with_stability(self, stability) -> "SteadyState":
        return replace(self, stability=stability)

    def state_vector(self) -> np.ndarray:
        """Real state ``[x, p, X_a, Y_a, X_b, Y_b]`` (quadratures carry a sqrt(2))."""
        r2 = math.sqrt(2.0)
        return np.array([self.x_s, 0.0, r2 * self.a_s.real, r2 * self.a_s.imag,
                         r2 * self.b_s.real, r2 * self.b_s.imag])


def _pq_coefficients(params: SystemParams):
    """``P = p0 + p1 x``, ``Q = q0 + q1 x``."""
    D, d, k, kb, g1 = params.Delta, params.delta, params.kappa, params.kappa_b, params.g1
    p0 = k * kb / 2 + params.g2**2 - D * (D + d)
    p1 = D * g1
    q0 = D * kb / 2 + k * (D + d)
    q1 = -k * g1
    return p0, p1, q0, q1


def drive_constant(params: SystemParams) -> float:
    """``g1 g2^2 kappa_ex I_in``, the constant term of the cubic."""
    return params.g1 * params.g2**2 * params.kappa_ex * params.I_in


def cubic_coefficients(params: SystemParams, force: float = 0.0) -> np.ndarray:
    """Coefficients (highest power first) of the steady-state cubic in ``x``."""
    p0, p1, q0, q1 = _pq_coefficients(params)
    s2 = p1 * p1 + q1 * q1
    s1 = 2 * (p0 * p1 + q0 * q1)
    s0 = p0 * p0 + q0 * q0
    w = params.omega_m
    return np.array([w * s2, w * s1 - force * s2, w * s0 - force * s1,
                     -force * s0 - drive_constant(params)])


def cubic_discriminant(coeffs) -> float:
    """Discriminant of ``c3 x^3 + c2 x^2 + c1 x + c0`` (> 0: three real roots)."""
    a, b, c, d = coeffs
    return 18 * a * b * c * d - 4 * b**3 * d + b * b * c * c - 4 * a * c**3 - 27 * a * a * d * d


def normalized_discriminant(coeffs) -> float:
    """Discriminant of the cubic after scaling to a monic polynomial in ``x / s``.

    ``s`` is the geometric root scale ``|c0 / c3|^(1/3)`` so that the scaled
    polynomial has coefficients of order one near a fold.
    """
    a, b, c, d = (float(v) for v in coeffs)
    if a == 0:
        return cubic_discriminant(coeffs)
    s = abs(d / a) ** (1 / 3) or 1.0
    scaled = np.array([1.0, b / (a * s), c / (a * s * s), d / (a * s**3)])
    return cubic_discriminant(scaled)


def mode_amplitudes(params: SystemParams, x):
    """Steady optical amplitudes ``(a_s, b_s)`` at mechanical position ``x``.

    Uses the cleared-denominator form, which stays finite where
    ``i D + kappa_b / 2`` vanishes.
    """
    x = np.asarray(x, dtype=float)
    lor = 1j * (params.Delta + params.delta - params.g1 * x) + params.kappa_b / 2
    den = (1j * params.Delta + params.kappa) * lor + params.g2**2
    drive = math.sqrt(params.kappa_ex * params.I_in)
    a = drive * lor / den
    b = -1j * params.g2 * drive / den
    if np.ndim(a) == 0:
        return complex(a), complex(b)
    return a, b


def fixed_point_map(params: SystemParams, x, force: float = 0.0):
    """``g1 |b_s(x)|^2 / omega_m + f / omega_m - x``; zero at a steady state."""
    p0, p1, q0, q1 = _pq_coefficients(params)
    x = np.asarray(x, dtype=float)
    s = (p0 + p1 * x) ** 2 + (q0 + q1 * x) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        pull = np.where(s > 0, drive_constant(params) / (params.omega_m * s), np.inf)
    return pull + force / params.omega_m - x


def _map_and_slope(params: SystemParams, x: float, force: float):
    p0, p1, q0, q1 = _pq_coefficients(params)
    P, Q = p0 + p1 * x, q0 + q1 * x
    s = P * P + Q * Q
    ds = 2 * (P * p1 + Q * q1)
    c = drive_constant(params) / params.omega_m
    return c / s + force / params.omega_m - x, -c * ds / (s * s) - 1.0


def _polish(params: SystemParams, x: float, force: float, tol: float, max_iter: int):
    """Damped Newton on the fixed-point map.  Returns ``None`` on failure."""
    g, dg = _map_and_slope(params, x, force)
    for _ in range(max_iter):
        if abs(g) <= tol * (1 + abs(x)):
            return x
        if dg == 0 or not math.isfinite(dg):
            return None
        step = -g / dg
        lam = 1.0
        while lam > 1e-6:
            x_new = x + lam * step
            g_new, dg_new = _map_and_slope(params, x_new, force)
            if math.isfinite(g_new) and abs(g_new) < abs(g) * (1 - 1e-4 * lam) + 1e-300:
                break
            lam *= 0.5
        else:
            return x if abs(g) <= tol * (1 + abs(x)) else None
        x, g, dg = x_new, g_new, dg_new
    return x if abs(g) <= tol * (1 + abs(x)) else None


def make_steady_state(params: SystemParams, x: float, force: float = 0.0) -> SteadyState:
    a, b = mode_amplitudes(params, x)
    d_eff = params.Delta + params.delta - params.g1 * x
    singular = d_eff * d_eff + params.kappa_b**2 / 4 < 1e-300
    return SteadyState(x_s=float(x), a_s=a, b_s=b, delta_eff=d_eff, force=force,
                       singular=singular)


def steady_state_roots(params: SystemParams, force: float = 0.0, tol: float = RESIDUAL_TOL,
                       max_iter: int = 60) -> list[SteadyState]:
    """All steady states, sorted by ascending ``x_s``.

    Parameters
    ----------
    params : SystemParams
    force : float
        Constant external force added to the momentum equation.
    tol : float
        Residual tolerance of the polished fixed-point map, relative to
        ``1 + |x|``.

    Raises
    ------
    NonConvergence
        If a clearly real companion eigenvalue cannot be polished.
    """
    if params.g1 == 0 or drive_constant(params) == 0 and force == 0:
        return [make_steady_state(params, force / params.omega_m, force)]
    coeffs = cubic_coefficients(params, force)
    scale = np.max(np.abs(coeffs))
    coeffs = coeffs / scale
    eig = np.roots(coeffs)
    candidates = []
    for z in eig:
        near_real = abs(z.imag) < REAL_TOL * (1 + abs(z.real))
        if near_real:
            candidates.append((z.real, z.imag == 0 or abs(z.imag) < 1e-12 * (1 + abs(z.real))))
    roots = []
    for x0, clearly_real in candidates:
        x = _polish(params, float(x0), force, tol, max_iter)
        if x is None:
            if clearly_real:
                raise NonConvergence(f"steady-state polishing failed near x = {x0:.6g}")
            continue
        roots.append(x)
    roots.sort()
    merged: list[float] = []
    for x in roots:
        if merged and abs(x - merged[-1]) <= 1e-9 * (1 + abs(x)):
            continue
        merged.append(x)
    return [make_steady_state(params, x, force) for x in merged]


def residuals(params: SystemParams, ss: SteadyState) -> tuple[float, float, float]:
    """Relative residuals of the position, ``a`` and ``b`` steady-state equations.

    Each residual is divided by ``1 + |value|``.  Where the toroid Lorentzian
    vanishes the position residual uses ``x = g1 |b|^2 / omega_m``, and the
    ``a`` residual its limiting value ``a = 0``.
    """
    x, a, b = ss.x_s, ss.a_s, ss.b_s
    p = params
    lor = 1j * ss.delta_eff + p.kappa_b / 2
    lorentz = ss.delta_eff**2 + p.kappa_b**2 / 4
    drive = math.sqrt(p.kappa_ex * p.I_in)
    if lorentz > 0:
        pull = p.g1 * p.g2**2 * abs(a) ** 2 / (p.omega_m * lorentz)
        a_expected = drive / (1j * p.Delta + p.kappa + p.g2**2 / lor)
        b_expected = -1j * p.g2 * a / lor
    else:
        pull = p.g1 * abs(b) ** 2 / p.omega_m
        a_expected = 0.0
        b_expected = b
    r5 = abs(x - pull - ss.force / p.omega_m) / (1 + abs(x))
    r6 = abs(a - a_expected) / (1 + abs(a))
    r7 = abs(b - b_expected) / (1 + abs(b))
    return r5, r6, r7


def low_drive_position(params: SystemParams) -> float:
    """Weak-drive resonant position ``g1 kappa_ex I_in / (omega_m g2^2)``."""
    if params.g2 == 0:
        raise ZeroDivisionError("low-drive position needs g2 > 0")
    return params.g1 * params.kappa_ex * params.I_in / (params.omega_m * params.g2**2)


def force_shifted_position(params: SystemParams, f: float) -> float:
    """Weak-drive position under a static force: ``f / omega_m + x_s0``.

    Emits :class:`RegimeWarning` when ``kappa_ex g1 x_s > 0.1 g2^2``.
    """
    x = f / params.omega_m + low_drive_position(params)
    if params.kappa_ex * params.g1 * x > 0.1 * params.g2**2:
        warnings.warn("force-shifted position outside its weak-drive regime "
                      "(kappa_ex g1 x_s > 0.1 g2^2)", RegimeWarning, stacklevel=2)
    return x


# ---------------------------------------------------------------------------
# vectorized path for plane scans


def batch_cubic_coefficients(params: SystemParams, Delta, I_in) -> np.ndarray:
    """Cubic coefficients for arrays of ``(Delta, I_in)``; shape ``(..., 4)``."""
    Delta = np.asarray(Delta, dtype=float)
    I_in = np.asarray(I_in, dtype=float)
    k, kb, d, g1, g2, w = (params.kappa, params.kappa_b, params.delta, params.g1,
                           params.g2, params.omega_m)
    p0 = k * kb / 2 + g2**2 - Delta * (Delta + d)
    p1 = Delta * g1
    q0 = Delta * kb / 2 + k * (Delta + d)
    q1 = -k * g1 * np.ones_like(Delta)
    c3 = w * (p1 * p1 + q1 * q1)
    c2 = w * 2 * (p0 * p1 + q0 * q1)
    c1 = w * (p0 * p0 + q0 * q0)
    c0 = -g1 * g2**2 * params.kappa_ex * I_in
    c3, c2, c1, c0 = np.broadcast_arrays(c3, c2, c1, c0)
    return np.stack([c3, c2, c1, c0], axis=-1)


def batch_real_roots(params: SystemParams, Delta, I_in, tol: float = RESIDUAL_TOL,
                     n_newton: int = 8) -> np.ndarray:
    """Real steady-state positions on a batch of ``(Delta, I_in)`` points.

    Returns an array of shape ``(N, 3)`` sorted ascending and padded with NaN.
    Points with ``g1 = 0`` or no drive give the single root ``x = 0``.
    """
    Delta = np.atleast_1d(np.asarray(Delta, dtype=float)).ravel()
    I_in = np.broadcast_to(np.asarray(I_in, dtype=float), Delta.shape).ravel()
    out = np.full((Delta.size, 3), np.nan)
    coeffs = batch_cubic_coefficients(params, Delta, I_in)
    trivial = (coeffs[:, 3] == 0) | (coeffs[:, 0] <= 1e-300)
    out[trivial, 0] = 0.0
    idx = np.flatnonzero(~trivial)
    if idx.size == 0:
        return out
    c = coeffs[idx]
    monic = c[:, 1:] / c[:, :1]
    comp = np.zeros((idx.size, 3, 3))
    comp[:, 0, :] = -monic
    comp[:, 1, 0] = 1.0
    comp[:, 2, 1] = 1.0
    eig = np.linalg.eigvals(comp)
    real = np.abs(eig.imag) < REAL_TOL * (1 + np.abs(eig.real))
    x = np.where(real, eig.real, np.nan)
    # Newton on the cubic itself, vectorized; NaN entries stay NaN
    for _ in range(n_newton):
        f = ((c[:, :1] * x + c[:, 1:2]) * x + c[:, 2:3]) * x + c[:, 3:4]
        df = (3 * c[:, :1] * x + 2 * c[:, 1:2]) * x + c[:, 2:3]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0, f / df, 0.0)
        x = x - np.where(np.isfinite(step), step, 0.0)
    x.sort(axis=1)
    # merge coincident roots (tangency) so that the count drops to two
    dup = np.zeros_like(x, dtype=bool)
    dup[:, 1:] = np.abs(np.diff(x, axis=1)) <= 1e-9 * (1 + np.abs(x[:, 1:]))
    x[dup] = np.nan
    x.sort(axis=1)
    out[idx] = x
    return out
