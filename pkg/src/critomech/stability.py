"""Linear stability of steady states.

The linearized dynamics of the fluctuations ``[x, p, X_a, Y_a, X_b, Y_b]``
are ``y' = J y``.  A steady state is classified from the spectrum of ``J``,
or, without an eigensolve, from the Hurwitz determinants of its
characteristic polynomial.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EigenFailure, MarginalStabilityWarning
from .params import SystemParams
from .steady import SteadyState, steady_state_roots

EPS_STAB = 1e-9
STATE_LABELS = ("x", "p", "X_a", "Y_a", "X_b", "Y_b")


class Stability(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    PARAMETRIC_UNSTABLE = "ParametricUnstable"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class StabilityClass:
    kind: Stability
    leading_eigenvalue: complex
    margin: float

    @property
    def stable(self) -> bool:
        return self.kind is Stability.STABLE


@dataclass(frozen=True)
class JacobianMatrix:
    entries: np.ndarray
    X_bs: float
    Y_bs: float

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def build_jacobian(params: SystemParams, ss: SteadyState) -> JacobianMatrix:
    """Jacobian of the mean-field equations at ``ss`` in the order ``STATE_LABELS``."""
    p = params
    r2 = math.sqrt(2.0)
    X = r2 * ss.b_s.real
    Y = r2 * ss.b_s.imag
    k, kb2, D, De, g1, g2 = p.kappa, p.kappa_b / 2, p.Delta, ss.delta_eff, p.g1, p.g2
    J = np.array([
        [0.0, p.omega_m, 0.0, 0.0, 0.0, 0.0],
        [-p.omega_m, -p.gamma_m, 0.0, 0.0, g1 * X, g1 * Y],
        [0.0, 0.0, -k, D, 0.0, g2],
        [0.0, 0.0, -D, -k, -g2, 0.0],
        [-g1 * Y, 0.0, 0.0, g2, -kb2, De],
        [g1 * X, 0.0, -g2, 0.0, -De, -kb2],
    ])
    return JacobianMatrix(J, X, Y)


def classify_eigen(J, eps_stab: float = EPS_STAB) -> StabilityClass:
    """Classify from the eigenvalues of ``J``.

    Stable if every real part is below ``-eps_stab``.  Otherwise the state is
    ParametricUnstable when the leading eigenvalue belongs to a complex pair
    (``|Im| > eps_stab``), and Unstable when it is real.
    """
    try:
        ev = np.linalg.eigvals(np.asarray(J, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    return _classify_spectrum(ev, eps_stab)


def _classify_spectrum(ev: np.ndarray, eps_stab: float) -> StabilityClass:
    order = np.lexsort((-np.abs(ev.imag), -ev.real))
    lead = ev[order[0]]
    margin = float(lead.real)
    if margin < -eps_stab:
        kind = Stability.STABLE
    elif abs(lead.imag) > eps_stab:
        kind = Stability.PARAMETRIC_UNSTABLE
    else:
        kind = Stability.UNSTABLE
    return StabilityClass(kind, complex(lead), margin)


def characteristic_polynomial(A) -> np.ndarray:
    """Coefficients of ``det(s I - A)``, highest power first (Faddeev--LeVerrier)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    M = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(A @ M) / k
    return coeffs


def hurwitz_matrix(coeffs) -> np.ndarray:
    """Hurwitz matrix of ``a0 s^n + a1 s^(n-1) + ... + an``."""
    a = np.asarray(coeffs, dtype=float)
    n = a.size - 1
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * j - i + 1
            if 0 <= k <= n:
                H[i, j] = a[k]
    return H


def hurwitz_determinants(coeffs) -> np.ndarray:
    H = hurwitz_matrix(coeffs)
    return np.array([np.linalg.det(H[:k, :k]) for k in range(1, H.shape[0] + 1)])


def classify_routh_hurwitz(J, marginal_tol: float = 1e-12) -> bool:
    """True iff every root of ``det(s I - J)`` has a negative real part.

    ``J`` is first divided by its infinity norm; the sign pattern of the
    Hurwitz determinants is unchanged by this positive rescaling of ``s``.
    Emits :class:`MarginalStabilityWarning` if a determinant is within
    ``marginal_tol`` of zero.
    """
    J = np.asarray(J, dtype=float)
    scale = np.linalg.norm(J, np.inf) or 1.0
    coeffs = characteristic_polynomial(J / scale)
    dets = hurwitz_determinants(coeffs)
    if np.any(np.abs(dets) < marginal_tol):
        warnings.warn("Hurwitz determinant within tolerance of zero; marginal case",
                      MarginalStabilityWarning, stacklevel=2)
    return bool(coeffs[0] > 0 and np.all(coeffs > 0) and np.all(dets > 0))


def classify_state(params: SystemParams, ss: SteadyState,
                   eps_stab: float = EPS_STAB) -> StabilityClass:
    return classify_eigen(build_jacobian(params, ss), eps_stab)


def classified_steady_states(params: SystemParams, force: float = 0.0,
                             eps_stab: float = EPS_STAB) -> list[SteadyState]:
    """``steady_state_roots`` with the ``stability`` field filled in."""
    return [ss.with_stability(classify_state(params, ss, eps_stab))
            for ss in steady_state_roots(params, force)]


def batch_classify(params: SystemParams, Delta, I_in, x, eps_stab: float = EPS_STAB):
    """Vectorized classification on arrays of ``(Delta, I_in, x)``.

    Returns ``(kind_code, margin, lead_imag)`` with kind codes
    0 = Stable, 1 = Unstable, 2 = ParametricUnstable and -1 for NaN ``x``.
    """
    Delta, I_in, x = np.broadcast_arrays(np.asarray(Delta, float), np.asarray(I_in, float),
                                         np.asarray(x, float))
    shape = x.shape
    Delta, I_in, x = Delta.ravel(), I_in.ravel(), x.ravel()
    ok = np.isfinite(x)
    kind = np.full(x.shape, -1)
    margin = np.full(x.shape, np.nan)
    lead_im = np.full(x.shape, np.nan)
    if ok.any():
        D, I, xs = Delta[ok], I_in[ok], x[ok]
        p = params
        lor = 1j * (D + p.delta - p.g1 * xs) + p.kappa_b / 2
        den = (1j * D + p.kappa) * lor + p.g2**2
        b = -1j * p.g2 * np.sqrt(p.kappa_ex * I) / den
        X, Y = math.sqrt(2) * b.real, math.sqrt(2) * b.imag
        De = D + p.delta - p.g1 * xs
        n = xs.size
        J = np.zeros((n, 6, 6))
        J[:, 0, 1] = p.omega_m
        J[:, 1, 0] = -p.omega_m
        J[:, 1, 1] = -p.gamma_m
        J[:, 1, 4] = p.g1 * X
        J[:, 1, 5] = p.g1 * Y
        J[:, 2, 2] = J[:, 3, 3] = -p.kappa
        J[:, 2, 3] = D
        J[:, 3, 2] = -D
        J[:, 2, 5] = p.g2
        J[:, 3, 4] = -p.g2
        J[:, 4, 0] = -p.g1 * Y
        J[:, 5, 0] = p.g1 * X
        J[:, 4, 3] = p.g2
        J[:, 5, 2] = -p.g2
        J[:, 4, 4] = J[:, 5, 5] = -p.kappa_b / 2
        J[:, 4, 5] = De
        J[:, 5, 4] = -De
        ev = np.linalg.eigvals(J)
        lead_idx = np.argmax(ev.real + 1e-12 * np.abs(ev.imag), axis=1)
        lead = ev[np.arange(n), lead_idx]
        m = lead.real
        k = np.where(m < -eps_stab, 0, np.where(np.abs(lead.imag) > eps_stab, 2, 1))
        kind[ok], margin[ok], lead_im[ok] = k, m, lead.imag
    return kind.reshape(shape), margin.reshape(shape), lead_im.reshape(shape)
