"""Reference computations written independently of the library internals.

They follow the textbook form of each quantity (explicit divisions, brute
force grids, dense linear solves) rather than the library's rearrangements.
"""
import math

import numpy as np


def lorentz_map(params, x):
    """``g1 g2^2 |a_s(x)|^2 / (omega_m (D_eff^2 + kappa_b^2 / 4)) - x``."""
    p = params
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return _lorentz(p, x)


def _lorentz(p, x):
    d_eff = p.Delta + p.delta - p.g1 * x
    kappa = 0.5 * (p.kappa_a + p.kappa_ex)
    a = math.sqrt(p.kappa_ex * p.I_in) / (1j * p.Delta + kappa
                                          + p.g2**2 / (1j * d_eff + p.kappa_b / 2))
    return p.g1 * p.g2**2 * np.abs(a) ** 2 / (p.omega_m * (d_eff**2 + p.kappa_b**2 / 4)) - x


def dense_scan_roots(params, n_log=60000, n_peak=40000):
    """All zeros of :func:`lorentz_map` by grid sign changes and bisection.

    Writing the map as ``h(x) - x``, roots lie in ``(0, max h]``.  ``1 / h``
    is a quadratic in ``x``; three samples give its vertex (the resonance)
    and width, where the grid is refined.
    """
    p = params
    h = lambda x: lorentz_map(p, x) + np.asarray(x, dtype=float)
    X = abs(p.Delta + p.delta) / p.g1 + 1.0
    q0, q1, q2 = (1.0 / h(v) for v in (0.0, X, 2 * X))
    c2 = (q2 - 2 * q1 + q0) / (2 * X * X)
    c1 = (q1 - q0) / X - c2 * X
    x_star = -c1 / (2 * c2) if c2 > 0 else 0.0
    q_min = q0 + c1 * x_star + c2 * x_star**2
    x_hi = 1.0 / max(q_min, 1e-300) if c2 > 0 else 10 * h(0.0)
    x_hi = max(x_hi, h(0.0)) * 1.01
    x_lo = min(1e-16 * x_hi, 0.1 * h(0.0))
    grid = np.geomspace(x_lo, x_hi, n_log)
    if c2 > 0 and x_star > 0:
        width = math.sqrt(max(q_min, 0.0) / c2) + 1e-12 * x_hi
        grid = np.concatenate([grid, np.linspace(max(x_lo, x_star - 60 * width),
                                                 min(x_hi, x_star + 60 * width), n_peak)])
    grid = np.unique(grid)
    vals = lorentz_map(p, grid)
    roots = []
    for k in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:])):
        lo, hi = grid[k], grid[k + 1]
        flo = vals[k]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = lorentz_map(p, mid)
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        roots.append(0.5 * (lo + hi))
    return np.array(roots)


def finite_difference_jacobian(fun, y, h=1e-6):
    y = np.asarray(y, dtype=float)
    n = y.size
    J = np.empty((n, n))
    for j in range(n):
        step = h * max(1.0, abs(y[j]))
        e = np.zeros(n)
        e[j] = step
        J[:, j] = (np.asarray(fun(y + e)) - np.asarray(fun(y - e))) / (2 * step)
    return J


def complex_rhs(params, force=0.0):
    """Mean-field equations in complex form, mapped to the quadrature vector."""
    p = params
    kappa = 0.5 * (p.kappa_a + p.kappa_ex)
    r2 = math.sqrt(2.0)

    def rhs(t, y):
        x, mom = y[0], y[1]
        a = (y[2] + 1j * y[3]) / r2
        b = (y[4] + 1j * y[5]) / r2
        dx = p.omega_m * mom
        dp = -p.gamma_m * mom - p.omega_m * x + p.g1 * abs(b) ** 2 + force
        da = -(1j * p.Delta + kappa) * a - 1j * p.g2 * b + math.sqrt(p.kappa_ex * p.I_in)
        db = -(1j * (p.Delta + p.delta - p.g1 * x) + p.kappa_b / 2) * b - 1j * p.g2 * a
        return [dx, dp, r2 * da.real, r2 * da.imag, r2 * db.real, r2 * db.imag]

    return rhs


def five_by_five_output(params, x_s, omega):
    """Y_out per unit input from a direct solve of the resonant linearized equations.

    Unknowns ``(x, X_a, Y_a, X_b, Y_b)`` in the frame where ``b_s`` is real;
    inputs ordered ``(xi+f, X_d, Y_d, X_ac, Y_ac, X_bc, Y_bc)``.
    """
    p = params
    m = 1.0 / p.omega_m
    kappa = 0.5 * (p.kappa_a + p.kappa_ex)
    K = kappa - 1j * omega
    L = p.kappa_b / 2 - 1j * omega
    chi_m = 1.0 / (m * (p.omega_m**2 - omega**2 - 1j * p.gamma_m * omega))
    b_s = math.sqrt(p.omega_m * x_s / p.g1)
    B = p.g1 * b_s
    G = p.g1 * x_s
    M = np.zeros((5, 5), complex)
    N = np.zeros((5, 7), complex)
    M[0] = [1, 0, 0, -chi_m * math.sqrt(2) * B, 0]
    N[0, 0] = chi_m
    M[1] = [0, K, 0, 0, -p.g2]
    N[1, 1], N[1, 3] = math.sqrt(p.kappa_ex), math.sqrt(p.kappa_a)
    M[2] = [0, 0, K, p.g2, 0]
    N[2, 2], N[2, 4] = math.sqrt(p.kappa_ex), math.sqrt(p.kappa_a)
    M[3] = [0, 0, -p.g2, L, G]
    N[3, 5] = math.sqrt(p.kappa_b)
    M[4] = [-math.sqrt(2) * B, p.g2, 0, -G, L]
    N[4, 6] = math.sqrt(p.kappa_b)
    S = np.linalg.solve(M, N)
    y_out = -math.sqrt(p.kappa_ex) * S[2]
    y_out[2] += 1.0
    return y_out
