"""Bifurcation structure in the ``(Delta, I_in)`` plane and along ``Delta``.

Plane scans label each grid node as region I (one stable or saddle root),
II (several roots) or III (one root, oscillatory instability).  Boundary
curves are extracted as zero contours and refined on the grid edges:
saddle-node curves on the cubic discriminant, Hopf curves on the stability
margin of the unique root.  Along a fixed ``I_in`` the steady-state curve is
followed by pseudo-arclength continuation, which rounds folds and closes
isolas.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from skimage.measure import find_contours

from .dynamics import integrate
from .errors import ContinuationStall, NonConvergence, TraceLost
from .params import SystemParams
from .response import transmission_at
from .stability import (EPS_STAB, Stability, StabilityClass, batch_classify,
                        classify_state)
from .steady import (SteadyState, batch_cubic_coefficients, batch_real_roots,
                     cubic_coefficients, drive_constant, make_steady_state,
                     normalized_discriminant, steady_state_roots)


class Region(enum.IntEnum):
    FLAGGED = 0
    I = 1
    II = 2
    III = 3

    def __str__(self):
        return self.name


KIND_BY_CODE = {0: Stability.STABLE, 1: Stability.UNSTABLE, 2: Stability.PARAMETRIC_UNSTABLE}


# ---------------------------------------------------------------------------
# plane scan


@dataclass(frozen=True)
class RegionMap:
    """Grid classification; arrays are indexed ``[i_iin, i_delta]``."""

    params: SystemParams
    delta_grid: np.ndarray
    iin_grid: np.ndarray
    roots: np.ndarray  # (n_iin, n_delta, 3), NaN padded
    root_count: np.ndarray
    region: np.ndarray  # Region codes
    margin: np.ndarray  # leading Re(lambda) of the unique root, NaN elsewhere
    lead_imag: np.ndarray
    flagged: np.ndarray

    @property
    def shape(self):
        return self.region.shape

    def contains(self, region: Region) -> bool:
        return bool(np.any(self.region == region))

    def region_at(self, Delta: float, I_in: float) -> Region:
        """Region of the grid node nearest ``(Delta, I_in)``."""
        j = int(np.argmin(np.abs(self.delta_grid - Delta)))
        i = int(np.argmin(np.abs(self.iin_grid - I_in)))
        return Region(int(self.region[i, j]))

    def cells(self):
        """Yield ``(Delta, I_in, root_count, Region, flagged)`` row by row."""
        for i, I in enumerate(self.iin_grid):
            for j, D in enumerate(self.delta_grid):
                yield (float(D), float(I), int(self.root_count[i, j]),
                       Region(int(self.region[i, j])), bool(self.flagged[i, j]))


def _resolution(resolution):
    if np.ndim(resolution) == 0:
        n_d = n_i = int(resolution)
    else:
        n_d, n_i = (int(r) for r in resolution)
    if n_d < 2 or n_i < 2:
        raise ValueError("resolution must be at least 2 per axis")
    return n_d, n_i


def _scan_rows(params, deltas, iins, eps_stab):
    DD, II = np.meshgrid(deltas, iins)
    roots = batch_real_roots(params, DD.ravel(), II.ravel())
    count = np.sum(np.isfinite(roots), axis=1)
    coeffs = batch_cubic_coefficients(params, DD.ravel(), II.ravel())
    x = np.nan_to_num(roots)
    resid = np.abs(((coeffs[:, :1] * x + coeffs[:, 1:2]) * x + coeffs[:, 2:3]) * x + coeffs[:, 3:4])
    size = (np.abs(coeffs[:, :1]) * np.abs(x) ** 3 + np.abs(coeffs[:, 1:2]) * x * x
            + np.abs(coeffs[:, 2:3]) * np.abs(x) + np.abs(coeffs[:, 3:4]))
    with np.errstate(invalid="ignore", divide="ignore"):
        bad = np.where(np.isfinite(roots), resid > 1e-8 * np.maximum(size, 1e-300), False)
    flagged = bad.any(axis=1) | (count == 0)
    single = count == 1
    kind = np.full(count.shape, -1)
    margin = np.full(count.shape, np.nan)
    lead_im = np.full(count.shape, np.nan)
    if single.any():
        k, m, im = batch_classify(params, DD.ravel()[single], II.ravel()[single], roots[single, 0],
                                  eps_stab)
        kind[single], margin[single], lead_im[single] = k, m, im
    region = np.where(count >= 2, Region.II, np.where(kind == 2, Region.III, Region.I))
    region = np.where(count == 0, Region.FLAGGED, region)
    shape = DD.shape
    return (roots.reshape(shape + (3,)), count.reshape(shape), region.reshape(shape),
            margin.reshape(shape), lead_im.reshape(shape), flagged.reshape(shape))


def scan_plane(params_base: SystemParams, delta_range, iin_range, resolution=400,
               n_jobs: int = 1, eps_stab: float = EPS_STAB) -> RegionMap:
    """Classify every node of a ``(Delta, I_in)`` grid.

    ``resolution`` is a node count per axis or a ``(n_delta, n_iin)`` pair.
    Nodes whose roots fail the cubic residual check are flagged, not raised.
    ``n_jobs`` threads share the rows.
    """
    if not all(np.isfinite(v) for v in (*delta_range, *iin_range)):
        raise ValueError("ranges must be finite")
    n_d, n_i = _resolution(resolution)
    deltas = np.linspace(delta_range[0], delta_range[1], n_d)
    iins = np.linspace(iin_range[0], iin_range[1], n_i)
    chunks = np.array_split(np.arange(n_i), max(1, min(int(n_jobs) * 4, n_i)))
    work = [(params_base, deltas, iins[c], eps_stab) for c in chunks if c.size]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=int(n_jobs)) as pool:
            parts = list(pool.map(lambda a: _scan_rows(*a), work))
    else:
        parts = [_scan_rows(*a) for a in work]
    stacked = [np.concatenate([p[k] for p in parts], axis=0) for k in range(6)]
    return RegionMap(params_base, deltas, iins, *stacked)


# ---------------------------------------------------------------------------
# boundary curves


@dataclass(frozen=True)
class BoundaryCurve:
    """A bifurcation locus as a polyline of ``(Delta, I_in)`` points."""

    kind: str  # "saddle-node" or "hopf"
    points: np.ndarray
    closed: bool
    exits_window: bool

    def __len__(self):
        return len(self.points)


def _grid_discriminant(params, deltas, iins):
    DD, II = np.meshgrid(deltas, iins)
    c = batch_cubic_coefficients(params, DD, II)
    a, b, cc, d = (c[..., k] for k in range(4))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.cbrt(np.abs(d / a))
        s = np.where((s > 0) & np.isfinite(s), s, 1.0)
        B, C, D = b / (a * s), cc / (a * s * s), d / (a * s**3)
        disc = 18 * B * C * D - 4 * B**3 * D + B * B * C * C - 4 * C**3 - 27 * D * D
    return np.where(np.isfinite(disc), disc, -1.0)


def _point_disc(params, D, I):
    return normalized_discriminant(cubic_coefficients(params.replace(Delta=D, I_in=I)))


def unique_root_margin(params: SystemParams, Delta: float, I_in: float,
                       eps_stab: float = EPS_STAB) -> tuple[float, float]:
    """``(Re, Im)`` of the leading eigenvalue at the lowest steady state."""
    p = params.replace(Delta=float(Delta), I_in=float(I_in))
    cls = classify_state(p, steady_state_roots(p)[0], eps_stab)
    return cls.margin, cls.leading_eigenvalue.imag


def _refine_on_edge(fun, row, col, deltas, iins):
    """Refine a contour vertex onto the zero of ``fun(Delta, I)`` on its grid edge."""
    n_i, n_d = len(iins), len(deltas)
    r0, c0 = int(math.floor(row)), int(math.floor(col))
    if abs(row - round(row)) < 1e-9:
        i = int(round(row))
        j0, j1 = min(c0, n_d - 2), min(c0, n_d - 2) + 1
        I = float(iins[i])
        lo, hi = float(deltas[j0]), float(deltas[j1])
        g = lambda D: fun(D, I)
        flo, fhi = g(lo), g(hi)
        if np.sign(flo) == np.sign(fhi):
            return float(np.interp(col, [j0, j1], [lo, hi])), I
        return brentq(g, lo, hi, xtol=1e-13 * (abs(lo) + abs(hi) + 1), rtol=1e-14), I
    j = int(round(col))
    i0, i1 = min(r0, n_i - 2), min(r0, n_i - 2) + 1
    D = float(deltas[j])
    lo, hi = float(iins[i0]), float(iins[i1])
    g = lambda I: fun(D, I)
    flo, fhi = g(lo), g(hi)
    if np.sign(flo) == np.sign(fhi):
        return D, float(np.interp(row, [i0, i1], [lo, hi]))
    return D, brentq(g, lo, hi, xtol=1e-13 * (abs(lo) + abs(hi) + 1), rtol=1e-14)


def _curves_from_field(values, mask, fun, rmap: RegionMap, kind: str) -> list[BoundaryCurve]:
    deltas, iins = rmap.delta_grid, rmap.iin_grid
    n_i, n_d = values.shape
    curves = []
    for contour in find_contours(values, 0.0, mask=mask):
        pts = np.array([_refine_on_edge(fun, r, c, deltas, iins) for r, c in contour])
        closed = bool(np.allclose(contour[0], contour[-1]))
        ends = contour[[0, -1]]
        on_edge = ((ends[:, 0] <= 1e-9) | (ends[:, 0] >= n_i - 1 - 1e-9)
                   | (ends[:, 1] <= 1e-9) | (ends[:, 1] >= n_d - 1 - 1e-9))
        curves.append(BoundaryCurve(kind, pts, closed, bool(not closed and on_edge.any())))
    return curves


def saddle_node_curves(rmap: RegionMap) -> list[BoundaryCurve]:
    """Loci where two steady states merge (zero of the cubic discriminant)."""
    params = rmap.params
    if params.g1 == 0:
        return []
    disc = _grid_discriminant(params, rmap.delta_grid, rmap.iin_grid)
    field_ = np.sign(disc)
    if np.all(field_ < 0) or np.all(field_ > 0):
        return []
    return _curves_from_field(field_, None, lambda D, I: _point_disc(params, D, I), rmap,
                              "saddle-node")


def hopf_curves(rmap: RegionMap, min_imag: float = 1e-2) -> list[BoundaryCurve]:
    """Loci where the unique root's leading complex pair crosses the imaginary axis.

    Only single-root nodes enter the field, so these are the borders of
    region III.  Vertices whose refined leading eigenvalue has
    ``|Im| <= min_imag`` are dropped.
    """
    params = rmap.params
    mask = rmap.root_count == 1
    field_ = np.where(mask, rmap.margin, np.nan)
    if not (np.nanmax(field_, initial=-np.inf) > 0 and np.nanmin(field_, initial=np.inf) < 0):
        return []
    fun = lambda D, I: unique_root_margin(params, D, I)[0]
    out = []
    for curve in _curves_from_field(np.nan_to_num(field_, nan=-1.0), mask, fun, rmap, "hopf"):
        keep = [abs(unique_root_margin(params, D, I)[1]) > min_imag for D, I in curve.points]
        pts = curve.points[np.array(keep, dtype=bool)]
        if len(pts) >= 2:
            out.append(BoundaryCurve("hopf", pts, curve.closed and all(keep), curve.exits_window))
    return out


def _pick_curve(curves, seed_cell, rmap, strict):
    if not curves:
        raise TraceLost("no boundary curve in the scan window")
    i, j = seed_cell
    D, I = rmap.delta_grid[j], rmap.iin_grid[i]
    sd = np.ptp(rmap.delta_grid) or 1.0
    si = np.ptp(rmap.iin_grid) or 1.0
    dist = [np.min(np.hypot((c.points[:, 0] - D) / sd, (c.points[:, 1] - I) / si)) for c in curves]
    curve = curves[int(np.argmin(dist))]
    if strict and curve.exits_window:
        raise TraceLost("boundary curve leaves the scan window")
    return curve


def trace_saddle_node(rmap: RegionMap, seed_cell, strict: bool = False) -> BoundaryCurve:
    """Saddle-node curve passing nearest the grid node ``seed_cell = (i_iin, i_delta)``.

    With ``strict=True`` a curve that leaves the window raises TraceLost;
    otherwise it is returned with ``exits_window`` set.
    """
    return _pick_curve(saddle_node_curves(rmap), seed_cell, rmap, strict)


def trace_hopf(rmap: RegionMap, seed_cell, strict: bool = False) -> BoundaryCurve:
    """Hopf curve passing nearest the grid node ``seed_cell``; see trace_saddle_node."""
    return _pick_curve(hopf_curves(rmap), seed_cell, rmap, strict)


def saddle_node_deltas(params: SystemParams, I_in: float, delta_range, n: int = 4001) -> np.ndarray:
    """Detunings of the saddle-node points on the line ``I_in = const``."""
    p = params.replace(I_in=float(I_in))
    if p.g1 == 0 or p.I_in == 0:
        return np.empty(0)
    deltas = np.linspace(delta_range[0], delta_range[1], n)
    disc = _grid_discriminant(p, deltas, np.array([p.I_in]))[0]
    out = []
    for k in np.flatnonzero(np.sign(disc[:-1]) != np.sign(disc[1:])):
        g = lambda D: _point_disc(p, D, p.I_in)
        out.append(brentq(g, deltas[k], deltas[k + 1], xtol=1e-13, rtol=1e-14))
    return np.array(out)


# ---------------------------------------------------------------------------
# branch continuation


class BranchLabel(str, enum.Enum):
    MAIN = "Main"
    ISOLA = "Isola"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BranchPoint:
    Delta: float
    x_s: float
    T: float
    stability: StabilityClass


@dataclass(frozen=True)
class BranchCurve:
    points: list
    closed: bool
    label: BranchLabel
    I_in: float = 0.0

    @property
    def delta(self) -> np.ndarray:
        return np.array([p.Delta for p in self.points])

    @property
    def x(self) -> np.ndarray:
        return np.array([p.x_s for p in self.points])

    def __len__(self):
        return len(self.points)


@dataclass
class _Cubic2D:
    """``F(Delta, x) = omega_m x (P^2 + Q^2) - C`` in scaled coordinates."""

    params: SystemParams
    LD: float
    LX: float
    scale: float = field(init=False)

    def __post_init__(self):
        self.scale = drive_constant(self.params) or 1.0

    def _parts(self, D, x):
        p = self.params
        k, kb2, d, g1 = p.kappa, p.kappa_b / 2, p.delta, p.g1
        P = k * kb2 + p.g2**2 - D * (D + d) + D * g1 * x
        Q = D * kb2 + k * (D + d) - k * g1 * x
        return P, Q

    def value(self, z):
        D, x = z[0] * self.LD, z[1] * self.LX
        P, Q = self._parts(D, x)
        return (self.params.omega_m * x * (P * P + Q * Q) - drive_constant(self.params)) / self.scale

    def grad(self, z):
        p = self.params
        D, x = z[0] * self.LD, z[1] * self.LX
        P, Q = self._parts(D, x)
        w, k, g1 = p.omega_m, p.kappa, p.g1
        Fx = w * (P * P + Q * Q) + 2 * w * x * (P * D * g1 - Q * k * g1)
        FD = 2 * w * x * (P * (-(2 * D + p.delta) + g1 * x) + Q * (p.kappa_b / 2 + k))
        return np.array([FD * self.LD, Fx * self.LX]) / self.scale

    def tangent(self, z, prev=None):
        g = self.grad(z)
        t = np.array([-g[1], g[0]])
        n = np.hypot(*t)
        if n == 0:
            raise ContinuationStall("singular point on the branch")
        t /= n
        if prev is not None and t @ prev < 0:
            t = -t
        return t

    def polish_x(self, D, x0, iters=50):
        """Newton in ``x`` at fixed ``Delta``; returns scaled ``z``."""
        z = np.array([D / self.LD, x0 / self.LX])
        for _ in range(iters):
            g = self.grad(z)[1]
            if g == 0:
                break
            step = self.value(z) / g
            z[1] -= step
            if abs(step) < 1e-14 * (1 + abs(z[1])):
                break
        return z


def _seg_dist(p, a, b):
    ab = b - a
    L = ab @ ab
    s = 0.0 if L == 0 else min(1.0, max(0.0, ((p - a) @ ab) / L))
    return float(np.hypot(*(a + s * ab - p)))


def _bridge_fold(cub: _Cubic2D, z, t, span, h_min):
    """Step across a fold too sharp for the corrector.

    Locates the discriminant zero ahead of ``z`` (within ``span`` in scaled
    ``Delta``) and returns the fold point and a point on the other flank at
    least ``10 * h_min`` from it, or None if there is no fold ahead.
    """
    p = cub.params
    D = z[0] * cub.LD
    disc = lambda d: normalized_discriminant(cubic_coefficients(p.replace(Delta=d)))
    d0 = disc(D)
    w = 1e-12 * cub.LD
    sgn = 0.0
    ahead = 1.0 if t[0] >= 0 else -1.0
    while w <= span * cub.LD:
        if np.sign(disc(D + ahead * w)) != np.sign(d0):
            sgn = ahead
            break
        w *= 2
    else:
        return None
    Df = brentq(disc, min(D, D + sgn * w), max(D, D + sgn * w), xtol=1e-15 * cub.LD, rtol=1e-15)
    crit = np.roots(np.polyder(cubic_coefficients(p.replace(Delta=Df))))
    crit = crit[np.abs(crit.imag) < 1e-6 * (1 + np.abs(crit.real))].real
    if crit.size == 0:
        return None
    xf = float(crit[np.argmin(np.abs(crit - z[1] * cub.LX))])

    roots_at = lambda d: np.array([ss.x_s for ss in steady_state_roots(p.replace(Delta=d))])

    def three_roots(off):
        for _ in range(60):
            r = roots_at(Df + side * off)
            if r.size >= 3:
                return off, r
            off *= 2
        return off, None

    side = -sgn  # z is on the three-root side
    # the pair born at the fold is unambiguous right next to it; sorted roots
    # keep their indices on this side of the fold
    _, near = three_roots(1e-12 * cub.LD)
    if near is None:
        return None
    lo, hi = sorted(int(k) for k in np.argsort(np.abs(near - xf))[:2])
    if hi - lo != 1:
        return None
    here = roots_at(D)
    xz = z[1] * cub.LX
    if here.size >= 3:
        upper = abs(here[hi] - xz) < abs(here[lo] - xz)
    else:
        # near a fold Delta - Df ~ (x - xf)^2: approaching with x falling means upper
        upper = t[1] < 0
    # land the partner far enough out that continuation can resume; past a
    # cusp-like fold the flank turns back within a distance below h_min
    off, far = three_roots(max(abs(D - Df), 10 * h_min * cub.LD))
    if far is None:
        return None
    D = Df + side * off
    xp = far[lo] if upper else far[hi]
    fold = np.array([Df / cub.LD, xf / cub.LX])
    partner = cub.polish_x(D, xp)
    return fold, partner


def _continue(cub: _Cubic2D, z0, t0, d_lo, d_hi, h0, h_min, h_max, max_steps, close_loop,
              max_turn=10.0):
    """Follow the zero set from ``z0`` along ``t0``; stop at the window edge or loop closure."""
    pts = [z0.copy()]
    z, t, h = z0.copy(), t0.copy(), h0
    cos_turn = math.cos(math.radians(max_turn))

    def closes(a, b, h):
        # same point, same direction: the opposite flank of a thin hairpin does not count
        return (close_loop and len(pts) > 3 and (b - a) @ t0 > 0
                and _seg_dist(pts[0], a, b) < max(0.25 * h, 1e-9))

    for _ in range(max_steps):
        bridged = None
        while True:
            zp = z + h * t
            zn = zp.copy()
            ok = False
            for it in range(10):
                F = cub.value(zn)
                g = cub.grad(zn)
                M = np.array([g, t])
                try:
                    dz = np.linalg.solve(M, [-F, -(t @ (zn - zp))])
                except np.linalg.LinAlgError:
                    break
                zn += dz
                if np.hypot(*dz) < 1e-12 * (1 + np.hypot(*zn)):
                    ok = True
                    break
            if ok:
                tn = cub.tangent(zn, t)
                if tn @ t > cos_turn:
                    break
            h *= 0.5
            if h < h_min:
                bridged = _bridge_fold(cub, z, t, 1e-2, h_min)
                if bridged is None:
                    raise ContinuationStall(
                        f"step fell below {h_min:g} at Delta={z[0] * cub.LD:.6g}")
                break
        if bridged is not None:
            fold, zn = bridged
            tn = cub.tangent(zn)
            tn = tn if tn[0] * (zn[0] - fold[0]) > 0 else -tn
            if closes(z, fold, h_min) or closes(fold, zn, h_min):
                pts.append(pts[0].copy())
                return pts, True
            pts.append(fold)
            # restart small: the flanks of a sharp fold are close together
            fast, h = True, 4 * h_min
        else:
            fast = it <= 2
        prev = z
        z, t = zn, tn
        if z[0] < d_lo or z[0] > d_hi:
            edge = d_lo if z[0] < d_lo else d_hi
            s = (edge - prev[0]) / (z[0] - prev[0])
            xe = (prev[1] + s * (z[1] - prev[1])) * cub.LX
            pts.append(cub.polish_x(edge * cub.LD, xe))
            return pts, False
        if closes(prev, z, h):
            pts.append(pts[0].copy())
            return pts, True
        pts.append(z.copy())
        if fast:
            h = min(h * 1.3, h_max)
    raise ContinuationStall(f"no closure after {max_steps} steps")


def _crossings(pts, closed: bool, u: float, tol: float = 1e-12) -> list:
    """Scaled ``x`` values where the polyline ``pts`` crosses the line ``Delta = u``."""
    arr = np.asarray(pts)
    if closed:
        arr = arr[:-1]
    n = len(arr)
    side = np.where(np.abs(arr[:, 0] - u) <= tol, 0, np.sign(arr[:, 0] - u)).astype(int)
    out = []
    last = n if closed else n - 1
    for k in range(last):
        a, b = arr[k], arr[(k + 1) % n]
        if side[k] * side[(k + 1) % n] < 0:
            out.append(a[1] + (u - a[0]) / (b[0] - a[0]) * (b[1] - a[1]))
    # vertices on the line: one crossing per run of on-line vertices that the
    # polyline passes through, or that ends the polyline
    if closed and np.all(side == 0):
        return out
    start = int(np.argmax(side != 0)) if closed else 0
    k = 0
    while k < n:
        i = (start + k) % n if closed else k
        if side[i] != 0:
            k += 1
            continue
        run_len = 0
        while run_len < n and side[(i + run_len) % n if closed else min(i + run_len, n - 1)] == 0:
            run_len += 1
            if not closed and i + run_len >= n:
                break
        before = side[(i - 1) % n] if (closed or i > 0) else 0
        j = i + run_len
        after = side[j % n] if (closed or j < n) else 0
        if before == 0 or after == 0 or before != after:
            out.append(arr[i][1])
        k += run_len
    return out


def _retraces(p, new, known, LD, LX, n_sample=25) -> bool:
    """Whether most vertices of ``new`` sit on the same root as a ``known`` curve.

    Chords cut fold tips, so crossing counts alone can miss a retraced curve;
    matching sorted root indices along the curve does not.
    """
    pts = np.asarray(new[0])
    if not known or len(pts) < 3:
        return False
    idx = np.unique(np.linspace(1, len(pts) - 2, min(n_sample, len(pts) - 2)).astype(int))
    hits = 0
    for v in pts[idx]:
        roots = np.array([ss.x_s for ss in steady_state_roots(p.replace(Delta=v[0] * LD))])
        if roots.size == 0:
            continue
        own = np.argmin(np.abs(roots - v[1] * LX))
        hits += any(np.argmin(np.abs(roots - x * LX)) == own
                    for curve in known for x in _crossings(*curve, v[0]))
    return hits > idx.size / 2


def sweep_branch(params_base: SystemParams, iin_fixed: float, delta_range, step: float = 0.01,
                 h_min: float = 1e-9, h_max: float = 0.1, n_seed: int = 801,
                 max_steps: int = 200000) -> list[BranchCurve]:
    """All steady-state branches across ``delta_range`` at fixed ``I_in``.

    Pseudo-arclength continuation runs in coordinates scaled by the window
    width (``Delta``) and the largest root magnitude (``x``); ``step`` is the
    initial arclength and ``[h_min, h_max]`` bound it.  A fold too sharp to
    round at ``h_min`` is bridged by locating it on the cubic discriminant.
    Continuation starts from the roots on the left window edge; roots on an
    ``n_seed``-point ``Delta`` grid that no traced curve passes through seed
    further runs.  Curves that leave the window are labelled Main, closed
    ones Isola.

    Raises
    ------
    ContinuationStall
        If the step shrinks below ``h_min`` away from any fold.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    p = params_base.replace(I_in=float(iin_fixed))
    d_lo, d_hi = float(delta_range[0]), float(delta_range[1])
    deltas = np.linspace(d_lo, d_hi, n_seed)
    if p.g1 == 0 or p.I_in == 0:
        x0 = steady_state_roots(p)[0].x_s
        pts = [_branch_point(p, D, x0) for D in deltas]
        return [BranchCurve(pts, False, BranchLabel.MAIN, p.I_in)]
    seeds = batch_real_roots(p, deltas, p.I_in)
    LD = max(abs(d_lo), abs(d_hi), d_hi - d_lo)
    LX = float(np.nanmax(np.abs(seeds))) or 1.0
    cub = _Cubic2D(p, LD, LX)
    u_lo, u_hi = d_lo / LD, d_hi / LD
    traced: list[tuple[list, bool]] = []

    def run(D, x):
        z0 = cub.polish_x(D, x)
        t0 = cub.tangent(z0)
        if D <= d_lo:
            t0 = t0 if t0[0] > 0 else -t0
            pts, closed = _continue(cub, z0, t0, u_lo, u_hi, step, h_min, h_max, max_steps, False)
            traced.append((pts, closed))
            return
        fwd, closed = _continue(cub, z0, t0, u_lo - 1e-12, u_hi + 1e-12, step, h_min, h_max,
                                max_steps, True)
        if closed:
            traced.append((fwd, True))
            return
        back, _ = _continue(cub, z0, -t0, u_lo - 1e-12, u_hi + 1e-12, step, h_min, h_max,
                            max_steps, False)
        traced.append((back[::-1] + fwd[1:], False))

    # solution curves of the cubic never cross, so every root on a seed line
    # is covered exactly when the traced curves cross that line once per root
    for D, row in zip(deltas, seeds):
        row = row[np.isfinite(row)]
        u = D / LD
        tried = set()
        while True:
            vals = [v for pts, closed in traced for v in _crossings(pts, closed, u)]
            if len(vals) >= row.size:
                break
            left = [k for k in range(row.size) if k not in tried]
            if not left:
                break
            k = max(left, key=lambda k: min((abs(row[k] / LX - v) for v in vals), default=np.inf))
            tried.add(k)
            run(float(D), float(row[k]))
            if (len(vals) + len(_crossings(*traced[-1], u)) > row.size
                    or _retraces(p, traced[-1], traced[:-1], LD, LX)):
                traced.pop()
    out = []
    for pts, closed in traced:
        bp = [_branch_point(p, z[0] * LD, z[1] * LX) for z in pts]
        out.append(BranchCurve(bp, closed, BranchLabel.ISOLA if closed else BranchLabel.MAIN,
                               p.I_in))
    return out


def _branch_point(params, D, x) -> BranchPoint:
    p = params.replace(Delta=float(D))
    ss = make_steady_state(p, float(x))
    T = float(transmission_at(p, float(x)))
    return BranchPoint(float(D), float(x), T, classify_state(p, ss))


# ---------------------------------------------------------------------------
# quasi-static sweeps


@dataclass(frozen=True)
class Jump:
    Delta_before: float
    Delta_after: float
    x_before: float
    x_after: float


@dataclass(frozen=True)
class HysteresisTrace:
    direction: str
    I_in: float
    delta: np.ndarray
    x: np.ndarray
    stable: np.ndarray  # whether the followed state is a stable fixed point
    jumps: list
    step: float

    @property
    def jump_deltas(self) -> np.ndarray:
        return np.array([j.Delta_after for j in self.jumps])


def _map_roots(prev: np.ndarray, cur: np.ndarray) -> dict:
    """Continuation map from old root indices to new ones between adjacent steps."""
    if prev.size == cur.size:
        return {i: i for i in range(prev.size)}
    if prev.size == 3 and cur.size == 1:
        merged = (0, 1) if prev[1] - prev[0] < prev[2] - prev[1] else (1, 2)
        survivor = 2 if merged == (0, 1) else 0
        return {survivor: 0}
    if prev.size == 1 and cur.size == 3:
        born = (0, 1) if cur[1] - cur[0] < cur[2] - cur[1] else (1, 2)
        return {0: 2 if born == (0, 1) else 0}
    # tangency steps with a double root: match by proximity
    return {i: int(np.argmin(np.abs(cur - v))) for i, v in enumerate(prev)}


def _settle(params, x_prev_state, candidates):
    """Tie-break between equidistant stable roots by a short integration."""
    traj = integrate(params, x_prev_state, 200.0, sample_dt=None)
    xf = traj.x[-1]
    return min(candidates, key=lambda ss: abs(ss.x_s - xf))


def hysteresis_sweep(params_base: SystemParams, iin_fixed: float, delta_range,
                     direction: str = "up", step: float | None = None,
                     x_start: float | None = None) -> HysteresisTrace:
    """Quasi-static ``Delta`` sweep that follows the occupied steady state.

    The followed root is continued step by step.  When it disappears at a
    fold the state jumps to the stable root nearest the last position (or,
    if none is stable, to the nearest root); equidistant candidates are
    decided by a short time integration.  A followed root that loses
    stability without disappearing is kept and marked unstable.  The start
    is the stable root nearest ``x_start``, or the lowest stable root.
    """
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    lo, hi = float(min(delta_range)), float(max(delta_range))
    if step is None:
        step = (hi - lo) / 2000
    n = int(round((hi - lo) / step)) + 1
    deltas = np.linspace(lo, hi, n)
    if direction == "down":
        deltas = deltas[::-1]
    p = params_base.replace(I_in=float(iin_fixed))

    def states(D):
        pp = p.replace(Delta=float(D))
        return pp, [ss.with_stability(classify_state(pp, ss)) for ss in steady_state_roots(pp)]

    pp, roots = states(deltas[0])
    stable = [ss for ss in roots if ss.stability.stable] or roots
    if x_start is None:
        cur = min(stable, key=lambda ss: ss.x_s)
    else:
        cur = min(stable, key=lambda ss: abs(ss.x_s - x_start))
    idx = roots.index(cur)
    xs, st, jumps = [cur.x_s], [cur.stability.stable], []
    prev_roots, prev_D = roots, deltas[0]
    for D in deltas[1:]:
        pp, roots = states(D)
        mapping = _map_roots(np.array([r.x_s for r in prev_roots]), np.array([r.x_s for r in roots]))
        if idx in mapping:
            idx = mapping[idx]
            cur = roots[idx]
        else:
            x_prev = prev_roots[idx].x_s
            pool = [ss for ss in roots if ss.stability.stable] or roots
            dist = np.array([abs(ss.x_s - x_prev) for ss in pool])
            near = [ss for ss, d in zip(pool, dist) if d <= dist.min() * (1 + 1e-9)]
            new = near[0] if len(near) == 1 else _settle(pp, prev_roots[idx], near)
            jumps.append(Jump(float(prev_D), float(D), float(x_prev), float(new.x_s)))
            idx = roots.index(new)
            cur = new
        xs.append(cur.x_s)
        st.append(cur.stability.stable)
        prev_roots, prev_D = roots, D
    return HysteresisTrace(direction, p.I_in, deltas, np.array(xs), np.array(st), jumps, float(step))
