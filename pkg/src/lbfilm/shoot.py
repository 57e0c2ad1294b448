"""Shooting solver for steady states at beta = 0.

At beta = 0 every steady state has mu identically zero, so profiles solve the
second-order BVP -u_xx + (u+c0)^3 - (u+c0) + nu*zeta = 0 with u(0) = u_x(L) = 0.
Rescaled to y = x/L with v = u + c0, the initial value problem is

    v_yy = L^2 * (v^3 - v + nu*zeta(L*y)),    v(0) = c0,  v_y(0) = z,

and steady states are zeros of the miss distance f(L, z) = v_y(1).  The slope
derivative dzf = df/dz is integrated alongside through the variational system
h_yy = L^2*(3v^2 - 1)*h, h(0) = 0, h_y(0) = 1, giving dzf = h_y(1).

Admissible slopes are confined to the bracket L*[z_l, z_r] from the model
layer, so a scan over that bracket plus Newton polishing recovers the complete
catalog up to scan resolution.  Branch points are parameter pairs where f and
dzf vanish together; they are located by a 2D Newton iteration on (z, L) with
a bisection fallback along traced zero branches.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BlowUpError, NoConvergenceError, StepUnderflowError
from .model import Field, Grid, ModelParams, chemical_potential, shooting_bounds, v_max

log = logging.getLogger(__name__)

TOL_F = 1e-10
TOL_DEGENERATE = 1e-6
TOL_TANGENT = 1e-6
TOL_BRANCH = 1e-6
DEDUP_TOL = 1e-8

# trajectories leaving |v| <= 10*max(1, v_max) can never return to a steady profile
_V_CAP = 10.0 * max(1.0, v_max())


@dataclass
class ShootSolution:
    """One integrated shooting trajectory on the rescaled interval [0, 1]."""

    params: ModelParams
    z: float
    f: float
    dzf: float
    v: Field
    vy: Field
    h: Field
    hy: Field
    accepted_steps: int
    max_abs_v: float
    max_abs_vy: float


@dataclass
class SteadyState:
    """Converged steady profile with shooting diagnostics."""

    params: ModelParams
    z: float
    u: Field
    mu_residual: float
    dzf: float
    nondegenerate: bool
    f_residual: float = 0.0
    index: int = -1
    iters: int = 0


@dataclass(frozen=True)
class Bracket:
    """Candidate zero location from a slope scan."""

    z_lo: float
    z_hi: float
    f_lo: float
    f_hi: float
    tangential: bool = False


@dataclass
class BranchPoint:
    """Parameter pair where f and dzf vanish together (catalog size changes)."""

    params: ModelParams
    L: float
    z: float
    f_residual: float
    dzf_residual: float
    second_deriv_dz2f: float


@dataclass
class PersistenceReport:
    """Observed trajectory maxima against the a-priori envelope bounds."""

    passed: bool
    max_abs_v: float
    bound_v: float
    max_abs_vy: float
    bound_vy: float


def _check_tol(tol: float):
    if not (1e-13 <= tol <= 1e-6):
        raise ValueError(f"integrator tol must lie in [1e-13, 1e-6], got {tol}")


def _rhs(p: ModelParams):
    L2 = p.L * p.L
    nu = p.nu
    L, xm, lm = p.L, p.x_mns, p.l_mns

    def rhs(y, s):
        v, w, h, q = s
        zeta = -0.5 * (1.0 + math.tanh((L * y - xm) / lm))
        return (w, L2 * (v * v * v - v + nu * zeta), q, L2 * (3.0 * v * v - 1.0) * h)

    return rhs


def _cap_event():
    def hit_cap(y, s):
        return _V_CAP - abs(s[0])

    hit_cap.terminal = True
    hit_cap.direction = -1
    return hit_cap


def integrate_ivp(p: ModelParams, z: float, tol: float = 1e-10, n_out: int = 257) -> ShootSolution:
    """Integrate the shooting IVP adaptively and sample it on n_out nodes."""
    _check_tol(tol)
    if n_out < 5:
        raise ValueError(f"n_out >= 5 required, got {n_out}")
    sol = solve_ivp(
        _rhs(p),
        (0.0, 1.0),
        (p.c0, z, 0.0, 1.0),
        method="RK45",
        rtol=tol,
        atol=tol,
        dense_output=True,
        events=_cap_event(),
    )
    if sol.status == 1:
        raise BlowUpError(float(sol.t_events[0][0]), z)
    if sol.status != 0:
        raise StepUnderflowError(f"integrator failed at z = {z:.6g}: {sol.message}")
    y_nodes = np.linspace(0.0, 1.0, n_out)
    samples = sol.sol(y_nodes)
    samples[:, -1] = sol.y[:, -1]
    if not np.all(np.isfinite(samples)):
        raise BlowUpError(1.0, z)
    grid = Grid(n_out, 0.0, 1.0)
    return ShootSolution(
        params=p,
        z=float(z),
        f=float(sol.y[1, -1]),
        dzf=float(sol.y[3, -1]),
        v=Field(grid, samples[0]),
        vy=Field(grid, samples[1]),
        h=Field(grid, samples[2]),
        hy=Field(grid, samples[3]),
        accepted_steps=int(sol.t.size - 1),
        max_abs_v=float(np.max(np.abs(samples[0]))),
        max_abs_vy=float(np.max(np.abs(samples[1]))),
    )


def shoot_f(p: ModelParams, z: float, tol: float = 1e-10) -> tuple[float, float]:
    """Miss distance f(L, z) = v_y(1) and its slope derivative dzf = h_y(1)."""
    _check_tol(tol)
    sol = solve_ivp(
        _rhs(p),
        (0.0, 1.0),
        (p.c0, z, 0.0, 1.0),
        method="RK45",
        rtol=tol,
        atol=tol,
        events=_cap_event(),
    )
    if sol.status == 1:
        raise BlowUpError(float(sol.t_events[0][0]), z)
    if sol.status != 0:
        raise StepUnderflowError(f"integrator failed at z = {z:.6g}: {sol.message}")
    return float(sol.y[1, -1]), float(sol.y[3, -1])


def _scan_steps(p: ModelParams, factor: float = 40.0) -> int:
    return int(max(400, math.ceil(factor * p.L * p.L)))


def _f_batch(p: ModelParams, z_arr, n_steps: int | None = None):
    """Fixed-step RK4 over a batch of slopes; NaN where trajectories escape.

    Vectorizing over the slope batch keeps scans and sweeps fast; the adaptive
    integrator re-verifies anything that ends up in a catalog.
    """
    if n_steps is None:
        n_steps = _scan_steps(p)
    z = np.asarray(z_arr, dtype=float)
    m = z.size
    L2 = p.L * p.L
    nu = p.nu
    dy = 1.0 / n_steps
    xg = p.L * (np.arange(2 * n_steps + 1) * (0.5 * dy))
    zeta_half = -0.5 * (1.0 + np.tanh((xg - p.x_mns) / p.l_mns))

    v = np.full(m, float(p.c0))
    w = z.copy()
    h = np.zeros(m)
    q = np.ones(m)
    alive = np.ones(m, dtype=bool)
    vmax = np.full(m, abs(float(p.c0)))
    wmax = np.abs(z)

    def accel(vv, zeta):
        return L2 * (vv * vv * vv - vv + nu * zeta)

    def hacc(vv, hh):
        return L2 * (3.0 * vv * vv - 1.0) * hh

    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            z0, zh, z1 = zeta_half[2 * i], zeta_half[2 * i + 1], zeta_half[2 * i + 2]
            k1v = w
            k1w = accel(v, z0)
            k1h = q
            k1q = hacc(v, h)
            v2 = v + 0.5 * dy * k1v
            h2 = h + 0.5 * dy * k1h
            k2v = w + 0.5 * dy * k1w
            k2w = accel(v2, zh)
            k2h = q + 0.5 * dy * k1q
            k2q = hacc(v2, h2)
            v3 = v + 0.5 * dy * k2v
            h3 = h + 0.5 * dy * k2h
            k3v = w + 0.5 * dy * k2w
            k3w = accel(v3, zh)
            k3h = q + 0.5 * dy * k2q
            k3q = hacc(v3, h3)
            v4 = v + dy * k3v
            h4 = h + dy * k3h
            k4v = w + dy * k3w
            k4w = accel(v4, z1)
            k4h = q + dy * k3q
            k4q = hacc(v4, h4)
            vn = v + dy / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            wn = w + dy / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            hn = h + dy / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
            qn = q + dy / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
            ok = (
                (np.abs(vn) <= _V_CAP)
                & np.isfinite(vn)
                & np.isfinite(wn)
                & np.isfinite(hn)
                & np.isfinite(qn)
            )
            upd = alive & ok
            v = np.where(upd, vn, v)
            w = np.where(upd, wn, w)
            h = np.where(upd, hn, h)
            q = np.where(upd, qn, q)
            alive &= ok
            np.maximum(vmax, np.where(alive, np.abs(v), vmax), out=vmax)
            np.maximum(wmax, np.where(alive, np.abs(w), wmax), out=wmax)

    f = np.where(alive, w, np.nan)
    dzf = np.where(alive, q, np.nan)
    return f, dzf, vmax, wmax


def scan_range(p: ModelParams) -> tuple[float, float]:
    """Slope scan window: the admissible bracket widened by a 5% margin."""
    z_l, z_r = shooting_bounds(p.c0)
    margin = 0.05 * p.L * (z_r - z_l)
    return p.L * z_l - margin, p.L * z_r + margin


def scan_zeros(p: ModelParams, n_scan: int = 512, n_steps: int | None = None) -> list[Bracket]:
    """Scan f over the slope bracket; return sign changes and tangential dips."""
    if n_scan < 64:
        raise ValueError(f"n_scan >= 64 required, got {n_scan}")
    lo, hi = scan_range(p)
    zs = np.linspace(lo, hi, n_scan)
    f, _, _, _ = _f_batch(p, zs, n_steps)
    out: list[Bracket] = []
    finite = np.isfinite(f)
    for i in range(n_scan - 1):
        if finite[i] and finite[i + 1] and f[i] * f[i + 1] < 0.0:
            out.append(Bracket(float(zs[i]), float(zs[i + 1]), float(f[i]), float(f[i + 1])))
    for i in range(1, n_scan - 1):
        if not (finite[i - 1] and finite[i] and finite[i + 1]):
            continue
        if abs(f[i]) >= TOL_TANGENT:
            continue
        if abs(f[i]) > abs(f[i - 1]) or abs(f[i]) > abs(f[i + 1]):
            continue
        if f[i - 1] * f[i + 1] < 0.0 or f[i - 1] * f[i] < 0.0 or f[i] * f[i + 1] < 0.0:
            continue  # already captured as a sign change
        out.append(Bracket(float(zs[i - 1]), float(zs[i + 1]), float(f[i - 1]), float(f[i + 1]), True))
    out.sort(key=lambda b: 0.5 * (b.z_lo + b.z_hi))
    return out


def _reconstruct(p: ModelParams, z: float, tol: float, n_out: int, sol: ShootSolution | None = None) -> SteadyState:
    if sol is None or sol.v.grid.n != n_out:
        sol = integrate_ivp(p, z, tol, n_out=n_out)
    grid = Grid(n_out, 0.0, p.L)
    u = Field(grid, sol.v.values - p.c0)
    mu = chemical_potential(u, p)
    return SteadyState(
        params=p,
        z=float(z),
        u=u,
        mu_residual=float(np.max(np.abs(mu.values))),
        dzf=float(sol.dzf),
        nondegenerate=abs(sol.dzf) >= TOL_DEGENERATE,
        f_residual=float(sol.f),
    )


def polish_zero(
    p: ModelParams,
    bracket: Bracket | None = None,
    z0: float | None = None,
    tol: float = 1e-10,
    n_out: int = 513,
    max_iter: int = 50,
) -> SteadyState:
    """Newton-polish a zero of f, bisection-safeguarded when a bracket is given."""
    if bracket is None and z0 is None:
        raise ValueError("need a bracket or an initial slope z0")
    if bracket is not None and not bracket.tangential:
        lo, hi = bracket.z_lo, bracket.z_hi
        f_lo, f_hi = bracket.f_lo, bracket.f_hi
        if f_lo * f_hi > 0.0:
            raise ValueError("bracket endpoints do not straddle a sign change")
        z = z0 if z0 is not None else 0.5 * (lo + hi)
    else:
        lo = hi = None
        z = z0 if z0 is not None else 0.5 * (bracket.z_lo + bracket.z_hi)

    f = dzf = None
    for it in range(max_iter):
        try:
            f, dzf = shoot_f(p, z, tol)
        except BlowUpError:
            if lo is None:
                raise NoConvergenceError(f"Newton iterate blew up at z = {z:.6g}")
            # retreat into the bracketed region
            z = 0.5 * (lo + hi)
            f, dzf = shoot_f(p, z, tol)
        if it == 0 and lo is None and abs(f) > 0.1:
            raise ValueError(f"unbracketed start needs |f| < 0.1, got {abs(f):.3g}")
        if abs(f) < TOL_F:
            ss = _reconstruct(p, z, tol, n_out)
            ss.iters = it
            return ss
        if lo is not None:
            if f * f_lo < 0.0:
                hi, f_hi = z, f
            else:
                lo, f_lo = z, f
        step = f / dzf if dzf != 0.0 else math.inf
        z_new = z - step
        if lo is not None and not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        if not np.isfinite(z_new):
            raise NoConvergenceError(f"Newton step not finite at z = {z:.6g}")
        z = z_new
    raise NoConvergenceError(
        f"no convergence after {max_iter} iterations (|f| = {abs(f):.3g})", residual=abs(f)
    )


def _polish_batch(p: ModelParams, brackets: list[Bracket], iters: int = 14) -> list[float]:
    """Newton-polish all brackets at once on the batched integrator."""
    if not brackets:
        return []
    n_steps = _scan_steps(p, factor=80.0)
    z = np.array([0.5 * (b.z_lo + b.z_hi) for b in brackets])
    lo = np.array([b.z_lo for b in brackets])
    hi = np.array([b.z_hi for b in brackets])
    f_lo = np.array([b.f_lo for b in brackets])
    guarded = np.array([not b.tangential for b in brackets])
    for _ in range(iters):
        f, dzf, _, _ = _f_batch(p, z, n_steps)
        with np.errstate(invalid="ignore", divide="ignore"):
            z_new = z - f / dzf
        for j in range(z.size):
            if not np.isfinite(f[j]):
                if guarded[j]:
                    z_new[j] = 0.5 * (lo[j] + hi[j])
                continue
            if guarded[j]:
                if f[j] * f_lo[j] < 0.0:
                    hi[j] = z[j]
                else:
                    lo[j], f_lo[j] = z[j], f[j]
                if not (lo[j] < z_new[j] < hi[j]) or not np.isfinite(z_new[j]):
                    z_new[j] = 0.5 * (lo[j] + hi[j])
            elif not np.isfinite(z_new[j]):
                z_new[j] = z[j]
        z = z_new
    f, _, _, _ = _f_batch(p, z, n_steps)
    return [float(zz) for zz, ff in zip(z, f) if np.isfinite(ff) and abs(ff) < 1e-6]


def find_steady_states(
    p: ModelParams,
    n_scan: int = 512,
    tol: float = 1e-10,
    n_out: int = 513,
) -> list[SteadyState]:
    """Complete catalog of steady states at beta = 0, ordered by initial slope.

    Scans the admissible slope bracket, polishes every sign change and
    tangential candidate, deduplicates, and re-verifies each root on a fresh
    adaptive integration.  Completeness is up to scan resolution: zeros closer
    together than the scan spacing can be missed, which callers surface as the
    n_scan caveat.
    """
    if p.beta != 0.0:
        raise ValueError("shooting catalog requires beta = 0")
    brackets = scan_zeros(p, n_scan)
    roots = _polish_batch(p, brackets)
    roots.sort()
    dedup: list[float] = []
    for z in roots:
        if not dedup or abs(z - dedup[-1]) > DEDUP_TOL:
            dedup.append(z)
    states: list[SteadyState] = []
    for z in dedup:
        try:
            st = polish_zero(p, z0=z, tol=tol, n_out=n_out)
        except (NoConvergenceError, BlowUpError, ValueError) as exc:
            log.warning("dropping candidate z = %.8g: %s", z, exc)
            continue
        states.append(st)
    states.sort(key=lambda s: s.z)
    final: list[SteadyState] = []
    for st in states:
        if final and abs(st.z - final[-1].z) <= DEDUP_TOL:
            continue
        st.index = len(final)
        final.append(st)
    return final


def check_persistence_bounds(sol: ShootSolution, slack: float = 1e-6) -> PersistenceReport:
    """Check observed trajectory maxima against the a-priori bounds.

    For a steady trajectory: sup|v| <= max(1, v_max) and
    sup|v_y| <= L*max(|z_l|, z_r) + L^2*max(1, v_max).
    """
    if abs(sol.f) >= 1e-8:
        raise ValueError(f"not a steady trajectory: |f| = {abs(sol.f):.3g} >= 1e-8")
    p = sol.params
    z_l, z_r = shooting_bounds(p.c0)
    bound_v = max(1.0, v_max())
    bound_vy = p.L * max(abs(z_l), z_r) + p.L * p.L * bound_v
    passed = sol.max_abs_v <= bound_v + slack and sol.max_abs_vy <= bound_vy + slack
    return PersistenceReport(
        passed=passed,
        max_abs_v=sol.max_abs_v,
        bound_v=bound_v,
        max_abs_vy=sol.max_abs_vy,
        bound_vy=bound_vy,
    )


def _roots_at(p: ModelParams, n_scan: int) -> list[tuple[float, float, float]]:
    """(z, f, dzf) for every polished root at the given parameters."""
    brackets = scan_zeros(p, n_scan)
    roots = _polish_batch(p, brackets)
    roots.sort()
    dedup: list[float] = []
    for z in roots:
        if not dedup or abs(z - dedup[-1]) > DEDUP_TOL:
            dedup.append(z)
    n_steps = _scan_steps(p, factor=80.0)
    if not dedup:
        return []
    f, dzf, _, _ = _f_batch(p, np.array(dedup), n_steps)
    return [
        (z, float(ff), float(dd))
        for z, ff, dd in zip(dedup, f, dzf)
        if np.isfinite(ff) and np.isfinite(dd)
    ]


def _newton_2d(p: ModelParams, L0: float, z0: float, tol: float = 1e-10, max_iter: int = 25):
    """2D Newton on (z, L) -> (f, dzf); returns (L, z, f, dzf, f_zz) or None."""
    L, z = float(L0), float(z0)
    for _ in range(max_iter):
        pL = replace(p, L=L)
        try:
            f, dzf = shoot_f(pL, z, tol)
            dz = 1e-6 * max(1.0, abs(z))
            fp, dzfp = shoot_f(pL, z + dz, tol)
            fm, dzfm = shoot_f(pL, z - dz, tol)
            dL = 1e-6 * max(1.0, L)
            fL, dzfL = shoot_f(replace(p, L=L + dL), z, tol)
        except BlowUpError:
            return None
        f_zz = (dzfp - dzfm) / (2.0 * dz)
        f_L = (fL - f) / dL
        dzf_L = (dzfL - dzf) / dL
        if max(abs(f), abs(dzf)) < 1e-9:
            return L, z, f, dzf, f_zz
        J = np.array([[dzf, f_L], [f_zz, dzf_L]])
        try:
            step = np.linalg.solve(J, np.array([f, dzf]))
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        # crude trust region keeps the iteration near the sweep cell
        nrm = max(abs(step[0]), abs(step[1]))
        if nrm > 0.5 * max(1.0, L):
            step *= 0.5 * max(1.0, L) / nrm
        z -= step[0]
        L -= step[1]
        if L <= 0:
            return None
    return None


def _bisect_branch(p: ModelParams, La: float, za: float, sa: float, Lb: float, zb: float, tol: float = 1e-10):
    """Bisect in L on the sign of dzf along a traced zero branch."""
    for _ in range(60):
        Lm = 0.5 * (La + Lb)
        t = (Lm - La) / (Lb - La) if Lb != La else 0.5
        zm = za + t * (zb - za)
        pm = replace(p, L=Lm)
        # local slope Newton to stay on the zero branch
        z = zm
        ok = False
        for _ in range(30):
            try:
                f, dzf = shoot_f(pm, z, tol)
            except BlowUpError:
                break
            if abs(f) < TOL_F:
                ok = True
                break
            if dzf == 0.0:
                break
            z -= f / dzf
        if not ok:
            return None
        if abs(Lb - La) < 1e-10 * max(1.0, Lm):
            f, dzf = shoot_f(pm, z, tol)
            dz = 1e-6 * max(1.0, abs(z))
            _, dzfp = shoot_f(pm, z + dz, tol)
            _, dzfm = shoot_f(pm, z - dz, tol)
            return Lm, z, f, dzf, (dzfp - dzfm) / (2.0 * dz)
        if dzf * sa < 0.0:
            Lb, zb = Lm, z
        else:
            La, za = Lm, z
    return None


def detect_branch_points(
    p: ModelParams,
    L_lo: float,
    L_hi: float,
    n_L: int = 64,
    n_scan: int = 256,
    tol: float = 1e-10,
) -> list[BranchPoint]:
    """Locate branch points (f = dzf = 0) for L in [L_lo, L_hi].

    Sweeps L uniformly, polishes the zero set at each L, traces zeros across
    neighbouring L values, and refines every candidate (a dzf sign change, a
    |dzf| dip below the branch tolerance, or a terminating branch) by 2D
    Newton, falling back to bisection along the branch when the Newton map is
    degenerate, as it is at symmetric pitchforks.  x_mns and l_mns are taken
    from p as fixed physical values across the sweep.
    """
    if n_L < 16:
        raise ValueError(f"n_L >= 16 required, got {n_L}")
    if not (0 < L_lo < L_hi):
        raise ValueError(f"need 0 < L_lo < L_hi, got [{L_lo}, {L_hi}]")
    Ls = np.linspace(L_lo, L_hi, n_L)
    sweep = [_roots_at(replace(p, L=float(L)), n_scan) for L in Ls]

    candidates: list[tuple[float, float]] = []
    fallbacks: list[tuple[float, float, float, float, float]] = []
    for j in range(n_L - 1):
        La, Lb = float(Ls[j]), float(Ls[j + 1])
        ra, rb = sweep[j], sweep[j + 1]
        used_b = set()
        for z, f, dzf in ra:
            if abs(dzf) < TOL_BRANCH:
                candidates.append((La, z))
            # nearest continuation of this root at the next L
            best, best_d = None, math.inf
            for k, (z2, f2, dzf2) in enumerate(rb):
                d = abs(z2 - z)
                if d < best_d:
                    best, best_d = k, d
            width = scan_range(replace(p, L=La))[1] - scan_range(replace(p, L=La))[0]
            if best is not None and best_d < 0.1 * width:
                used_b.add(best)
                z2, f2, dzf2 = rb[best]
                if dzf * dzf2 < 0.0:
                    candidates.append((0.5 * (La + Lb), 0.5 * (z + z2)))
                    fallbacks.append((La, z, dzf, Lb, z2))
            else:
                # branch dies between La and Lb: fold candidate
                candidates.append((La, z))
        for k, (z2, f2, dzf2) in enumerate(rb):
            if k not in used_b and abs(dzf2) < TOL_BRANCH:
                candidates.append((Lb, z2))

    found: list[BranchPoint] = []

    def push(res):
        L_star, z_star, f, dzf, f_zz = res
        if not (L_lo - 1e-6 <= L_star <= L_hi + 1e-6):
            return
        if max(abs(f), abs(dzf)) >= TOL_BRANCH:
            return
        for bp in found:
            if abs(bp.L - L_star) < 1e-5 * max(1.0, L_star) and abs(bp.z - z_star) < 1e-3:
                return
        found.append(
            BranchPoint(
                params=replace(p, L=L_star),
                L=L_star,
                z=z_star,
                f_residual=f,
                dzf_residual=dzf,
                second_deriv_dz2f=f_zz,
            )
        )

    done_fallbacks = []
    for Lc, zc in candidates:
        res = _newton_2d(p, Lc, zc, tol)
        if res is not None:
            push(res)
    for La, za, sa, Lb, zb in fallbacks:
        covered = any(La - 1e-9 <= bp.L <= Lb + 1e-9 for bp in found)
        if covered:
            continue
        res = _bisect_branch(p, La, za, sa, Lb, zb, tol)
        if res is not None:
            push(res)
        else:
            log.warning("branch-point candidate near L in [%.4f, %.4f] did not converge", La, Lb)
        done_fallbacks.append((La, Lb))
    found.sort(key=lambda bp: bp.L)
    return found
