"""Frequency-domain linear response and force-noise spectra.

Everything here works in dimensionless units with ``hbar = 1`` and mass
``m = 1 / omega_m`` (see :attr:`SystemParams.mass`), so a force PSD is
measured in units of ``hbar m omega_m^2``.

The closed-form transfer coefficients hold on resonance (``Delta = 0`` and
``delta = 0``) in the frame where the toroid amplitude ``b_s`` is real.
Every input quadrature carries a white symmetrized PSD of 1/2; the Brownian
force carries ``2 m gamma_m k_B T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularTransfer
from .params import PhysicalParams, SystemParams, HBAR, K_B
from .stability import build_jacobian
from .steady import SteadyState, low_drive_position, steady_state_roots

SQRT2 = math.sqrt(2.0)
INPUT_NAMES = ("X_d", "Y_d", "X_ac", "Y_ac", "X_bc", "Y_bc")
U_STAR_EXACT = math.sqrt((1 + math.sqrt(28.0)) / 3)


@dataclass(frozen=True)
class TransferSet:
    omega: float
    chi_m: complex
    A: complex
    chi_b: complex
    chi_F: complex
    chi_Xd: complex
    chi_Yd: complex
    chi_Xac: complex
    chi_Yac: complex
    chi_Xbc: complex
    chi_Ybc: complex
    prefactor: complex

    def coefficient(self, name: str) -> complex:
        return getattr(self, "chi_" + name.replace("_", ""))


@dataclass(frozen=True)
class PsdReport:
    omega: np.ndarray
    S_shot: np.ndarray
    S_th: float
    S_total: np.ndarray
    sensitivity: np.ndarray
    units: str = "hbar*m*omega_m^2"


@dataclass(frozen=True)
class SensitivityOptimum:
    u_star: float
    S_min: float
    g2_star: float | None = None
    u_analytic: float = U_STAR_EXACT


@dataclass(frozen=True)
class PhysicalSensitivity:
    sensitivity: float  # N / sqrt(Hz)
    thermal_floor: float  # N / sqrt(Hz)
    S_shot: float  # N^2 / Hz
    S_th: float  # N^2 / Hz
    sql: float  # sqrt(hbar m omega_m^2), N / sqrt(Hz)


def _check_resonant(params: SystemParams):
    scale = 1 + abs(params.delta) + abs(params.Delta)
    if abs(params.Delta) > 1e-12 * scale or abs(params.delta) > 1e-12 * scale:
        raise ValueError("closed-form transfer coefficients need Delta = delta = 0")


def transfer_set(params: SystemParams, ss: SteadyState, omega: float) -> TransferSet:
    """Closed-form transfer coefficients at frequency ``omega``.

    Raises
    ------
    SingularTransfer
        If ``|1 / chi_b| < 1e-14``.
    """
    _check_resonant(params)
    p = params
    m = p.mass
    w = omega
    k = p.kappa
    K = k - 1j * w
    L = p.kappa_b / 2 - 1j * w
    G = p.g1 * ss.x_s
    B = p.g1 * abs(ss.b_s)
    chi_m = 1.0 / (m * (p.omega_m**2 - w * w - 1j * p.gamma_m * w))
    A = L * K + p.g2**2
    chi_b_inv = A * A + G * G * K * K * (1 + 2 * m * p.omega_m**2 * chi_m)
    if abs(chi_b_inv) < 1e-14:
        raise SingularTransfer("chi_b is singular")
    chi_b = 1.0 / chi_b_inv
    sqa, sqb, sqe = math.sqrt(p.kappa_a), math.sqrt(p.kappa_b), math.sqrt(p.kappa_ex)
    g2 = p.g2
    return TransferSet(
        omega=w,
        chi_m=chi_m,
        A=A,
        chi_b=chi_b,
        chi_F=-SQRT2 * chi_m * G * B * K * K,
        chi_Xd=G * g2 * sqe * K,
        chi_Yd=sqe * (A * g2 + (k - p.kappa_ex - 1j * w) / (chi_b * g2 * p.kappa_ex)),
        chi_Xac=G * g2 * sqa * K,
        chi_Yac=sqa * (A * g2 - 1.0 / (g2 * chi_b)),
        chi_Xbc=A * sqb * K,
        chi_Ybc=-G * sqb * K * K,
        prefactor=chi_b * g2 * sqe / K,
    )


def output_phase_quadrature(params: SystemParams, ss: SteadyState, omega: float,
                            inputs: dict) -> complex:
    """Output phase quadrature for given input amplitudes.

    ``inputs`` maps any of ``X_d, Y_d, X_ac, Y_ac, X_bc, Y_bc, xi_m, f`` to
    complex amplitudes (missing keys are zero).  The quadrature is referred
    to the frame in which ``b_s`` is real.
    """
    unknown = set(inputs) - set(INPUT_NAMES) - {"xi_m", "f"}
    if unknown:
        raise KeyError(f"unknown inputs: {sorted(unknown)}")
    ts = transfer_set(params, ss, omega)
    total = ts.chi_F * (inputs.get("xi_m", 0.0) + inputs.get("f", 0.0))
    for name in INPUT_NAMES:
        total += ts.coefficient(name) * inputs.get(name, 0.0)
    return complex(ts.prefactor * total)


def effective_force(params: SystemParams, ss: SteadyState, omega: float,
                    inputs: dict) -> complex:
    """``Y_out / (dY_out / df)``: the output referred back to a force."""
    ts = transfer_set(params, ss, omega)
    if abs(ts.chi_F) < 1e-14:
        raise SingularTransfer("chi_F vanishes; no force transduction")
    return output_phase_quadrature(params, ss, omega, inputs) / complex(ts.prefactor * ts.chi_F)


def drive_frame_force_response(params: SystemParams, ss: SteadyState,
                               omega: float = 0.0) -> complex:
    """``dY_out / df`` with the quadrature referred to the drive phase.

    Solved from the full linearized equations ``(-i omega - J) y = e_p f`` and
    ``Y_out = -sqrt(kappa_ex) Y_a``.  Valid at any detuning.
    """
    J = build_jacobian(params, ss).entries
    rhs = np.zeros(6, dtype=complex)
    rhs[1] = 1.0
    y = np.linalg.solve(-1j * omega * np.eye(6) - J, rhs)
    return complex(-math.sqrt(params.kappa_ex) * y[3])


def analytic_phase_slope(params: SystemParams) -> float:
    """Weak-drive slope ``sqrt(2 I_in) kappa_ex g1 / (omega_m g2^2)``."""
    p = params
    return math.sqrt(2 * p.I_in) * p.kappa_ex * p.g1 / (p.omega_m * p.g2**2)


def analytic_phase_response(params: SystemParams, f) -> float:
    """Weak-drive phase quadrature ``slope * (f + omega_m x_s0)``."""
    return analytic_phase_slope(params) * (np.asarray(f) + params.omega_m * low_drive_position(params))


def force_noise_psd(params: SystemParams, ss: SteadyState, omega, kT: float = 0.0) -> PsdReport:
    """Shot, thermal and total effective-force PSDs.

    ``kT`` is the bath energy ``k_B T`` in units of ``hbar omega_m``.
    """
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    shot = np.empty(omegas.shape)
    for i, w in enumerate(omegas):
        ts = transfer_set(params, ss, float(w))
        if abs(ts.chi_F) < 1e-14:
            raise SingularTransfer("chi_F vanishes; no force transduction")
        shot[i] = 0.5 * (abs((ts.chi_Xd - 1j * ts.chi_Yd) / ts.chi_F) ** 2
                         + abs((ts.chi_Xac - 1j * ts.chi_Yac) / ts.chi_F) ** 2
                         + abs((ts.chi_Xbc - 1j * ts.chi_Ybc) / ts.chi_F) ** 2)
    s_th = 2 * params.mass * params.gamma_m * kT
    total = shot + s_th
    return PsdReport(omegas, shot, s_th, total, np.sqrt(total))


def shot_bracket(u):
    """``u^3 / 2 - u + 9 / (2 u)`` with ``u = g2^2 / (kappa g1 x_s)``."""
    u = np.asarray(u, dtype=float)
    return 0.5 * u**3 - u + 4.5 / u


def coupling_ratio(params: SystemParams, ss: SteadyState) -> float:
    c = params.kappa * params.g1 * ss.x_s
    if c == 0:
        raise ZeroDivisionError("coupling ratio needs g1 x_s != 0")
    return params.g2**2 / c


def dc_shot_psd_closed_form(params: SystemParams, ss: SteadyState) -> float:
    """Weak-loss DC shot-noise PSD ``(hbar m omega_m^2 / 4) * shot_bracket(u)``."""
    u = coupling_ratio(params, ss)
    return params.mass * params.omega_m**2 / 4 * float(shot_bracket(u))


def dc_shot_terms(params: SystemParams, ss: SteadyState) -> tuple[float, float, float]:
    """DC closed forms of ``|(chi_X - i chi_Y) / chi_F|^2`` for the drive, ring-vacuum
    and toroid-vacuum channels, valid for ``kappa_a, kappa_b << g2, kappa_ex``."""
    p = params
    unit = p.mass * p.omega_m**2 / 2
    c = p.kappa * p.g1 * ss.x_s
    g2 = p.g2
    t_d = unit * p.kappa_ex / p.kappa * (c * c * g2 * g2 + (g2**4 - 3 * c * c) ** 2 / (4 * g2 * g2)) / c**3
    t_a = unit * p.kappa_a / p.kappa * (c * c * g2 * g2 + 9 * c**4 / (g2 * g2)) / c**3
    t_b = unit * p.kappa_b / p.kappa * p.kappa**2 * (g2**4 + c * c) / c**3
    return t_d, t_a, t_b


def golden_section(fun, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 200) -> float:
    """Minimizer of a unimodal function on ``[lo, hi]`` to within ``tol``."""
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def optimize_coupling(params: SystemParams | None = None, ss: SteadyState | None = None,
                      tol: float = 1e-6) -> SensitivityOptimum:
    """Minimize the DC shot-noise bracket over ``u = g2^2 / (kappa g1 x_s)``.

    ``S_min`` is in units of ``hbar m omega_m^2``.  When a steady state is
    given, ``g2_star`` is the coupling that attains the optimum at its
    ``kappa g1 x_s``.
    """
    u = golden_section(lambda v: float(shot_bracket(v)), 0.1, 10.0, tol)
    s_min = float(shot_bracket(u)) / 4
    g2_star = None
    if params is not None and ss is not None:
        g2_star = math.sqrt(u * params.kappa * params.g1 * ss.x_s)
    return SensitivityOptimum(u, s_min, g2_star)


def physical_sensitivity(phys: PhysicalParams, psd_factor: float | None = None) -> PhysicalSensitivity:
    """Optimal shot-noise-limited force sensitivity in N/sqrt(Hz).

    ``psd_factor`` is the optimal DC shot PSD in units of ``hbar m omega_m^2``;
    by default it is taken from :func:`optimize_coupling`.
    """
    factor = optimize_coupling().S_min if psd_factor is None else psd_factor
    unit = HBAR * phys.mass * phys.omega_m_si**2
    s_shot = factor * unit
    s_th = 2 * phys.mass * phys.gamma_m_si * K_B * phys.temperature
    return PhysicalSensitivity(math.sqrt(s_shot), math.sqrt(s_th), s_shot, s_th, math.sqrt(unit))


def resonant_steady_state(params: SystemParams) -> SteadyState:
    """Unique steady state at ``Delta = delta = 0`` (lowest root if several)."""
    return steady_state_roots(params.replace(Delta=0.0, delta=0.0))[0]
