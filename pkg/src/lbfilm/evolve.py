"""Time integration of the advective Cahn-Hilliard flow in mixed form.

One step solves a single banded linear system for the interleaved pair
(u, mu) on the shared grid:

    (u^{k+1} - u^k)/dt = mu^{k+1}_xx - beta u^k_x
    mu^{k+1} + u^{k+1}_xx - S u^{k+1} = W'(x, u^k + c0) - S u^k

with boundary rows u(0) = mu(0) = 0 and second-order one-sided u_x(L) =
mu_x(L) = 0.  The fourth-order part and the stabilization shift S are
implicit, the cubic and the advection are explicit; S defaults to
max |3(u+c0)^2 - 1| + 1 refreshed every step, which keeps the discrete
energy non-increasing at beta = 0.  The stationary equations of the scheme
coincide stencil-for-stencil with the damped-Newton steady solver, so its
converged states are fixed points of the stepper to solver tolerance.

Audits check the energy equality dE/dt = -int mu_x^2 - beta int u_x mu
between records, the Gronwall absorbing-ball envelope with the explicit
closed-form constants K1, K2, M1, and uniform higher-difference norms after
an initial smoothing delay.  Omega limits are classified against a steady
state catalog by discrete H^1 distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import NonFiniteStateError, SingularJacobianError
from .model import (
    Field,
    Grid,
    ModelParams,
    chemical_potential,
    difference_norms,
    energy,
    energy_e1,
    first_derivative,
    h1_distance,
    hm_norm,
    meniscus,
    meniscus_dx,
)
from .shoot import SteadyState, shoot_f

OMEGA_TOL = 1e-4
PLATEAU_RECORDS = 100
ENVELOPE_SLACK = 0.05


@dataclass
class EvolveOptions:
    dt: float
    T: float
    n: int = 257
    S: float | None = None  # None: refresh max|3(u+c0)^2 - 1| + 1 every step
    record_every: int = 20
    stop_tol: float = 1e-9

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.T > 0):
            raise ValueError(f"T must be positive, got {self.T}")
        if self.n < 33:
            raise ValueError(f"need n >= 33, got {self.n}")
        if self.S is not None and self.S < 0:
            raise ValueError(f"S must be >= 0, got {self.S}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")


def default_dt(p: ModelParams) -> float:
    """Step size 1e-3 * min(1, (L/pi)^2); resolves the slowest linear mode."""
    return 1e-3 * min(1.0, (p.L / np.pi) ** 2)


@dataclass
class TrajectorySample:
    t: float
    u: Field
    E: float
    E1: float
    muV2: float
    advect: float
    dEdt_residual: float
    ut_norm: float
    dist_H1: tuple


@dataclass
class Trajectory:
    params: ModelParams
    options: EvolveOptions
    samples: list = field(default_factory=list)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])


@dataclass
class EvolveReport:
    converged: bool
    omega_index: int | None
    final_dist: float
    t_plateau: float
    absorb_pass: bool
    M1_bound: float
    t_entry: float


def _banded_template(n: int, h: float, dt: float) -> np.ndarray:
    """Static part of the interleaved (u, mu) system in solve_banded layout.

    Unknown ordering x[2i] = u_i, x[2i+1] = mu_i gives bandwidths (l, u) =
    (4, 3); ab[3 + i - j, j] holds matrix entry (i, j).  The S-dependent
    diagonal shift on the constitutive rows is added per step.
    """
    ab = np.zeros((8, 2 * n))
    r = dt / h**2
    i = np.arange(1, n - 1)
    # transport rows 2i: u_i - r*(mu_{i-1} - 2 mu_i + mu_{i+1})
    ab[3, 2 * i] = 1.0
    ab[4, 2 * i - 1] = -r
    ab[2, 2 * i + 1] = 2.0 * r
    ab[0, 2 * i + 3] = -r
    # constitutive rows 2i+1: mu_i + (u_{i-1} - 2 u_i + u_{i+1})/h^2 - S u_i
    ab[3, 2 * i + 1] = 1.0
    ab[6, 2 * i - 2] += 1.0 / h**2
    ab[4, 2 * i] += -2.0 / h**2
    ab[2, 2 * i + 2] += 1.0 / h**2
    # boundary rows: u(0) = mu(0) = 0, one-sided u_x(L) = mu_x(L) = 0
    ab[3, 0] = 1.0
    ab[3, 1] = 1.0
    c = 1.0 / (2.0 * h)
    ab[3, 2 * n - 2] = 3.0 * c
    ab[5, 2 * n - 4] = -4.0 * c
    ab[7, 2 * n - 6] = c
    ab[3, 2 * n - 1] = 3.0 * c
    ab[5, 2 * n - 3] = -4.0 * c
    ab[7, 2 * n - 5] = c
    return ab


def _auto_s(u: np.ndarray, c0: float) -> float:
    s = u + c0
    return float(np.max(np.abs(3.0 * s * s - 1.0))) + 1.0


def _advance(uv: np.ndarray, p: ModelParams, opts: EvolveOptions, template: np.ndarray,
             zeta: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One scheme step from nodal values; returns (u_new, mu_new, increment).

    Solves for the increment delta = u^{k+1} - u^k rather than u^{k+1}: the
    right-hand side is then the freshly evaluated steady residual, which keeps
    the step noise at equilibrium near roundoff and makes the boundary rows
    self-correcting.
    """
    n = len(uv)
    S = _auto_s(uv, p.c0) if opts.S is None else opts.S
    ab = template.copy()
    ab[4, 2 : 2 * n - 2 : 2] -= S
    b = np.zeros(2 * n)
    s = uv + p.c0
    fv = s * s * s - s + p.nu * zeta
    d2u = (uv[:-2] - 2.0 * uv[1:-1] + uv[2:]) / h**2
    i = np.arange(1, n - 1)
    b[0] = -uv[0]
    if p.beta != 0.0:
        b[2 * i] = -opts.dt * p.beta * (uv[i + 1] - uv[i - 1]) / (2.0 * h)
    b[2 * i + 1] = fv[1:-1] - d2u
    b[2 * n - 2] = -(3.0 * uv[-1] - 4.0 * uv[-2] + uv[-3]) / (2.0 * h)
    try:
        y = solve_banded((4, 3), ab, b, overwrite_ab=True, overwrite_b=True,
                         check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobianError(f"banded step matrix is singular: {exc}") from exc
    if not np.all(np.isfinite(y)):
        raise NonFiniteStateError("step produced non-finite values; reduce dt or raise S")
    delta = y[0::2]
    return uv + delta, y[1::2], delta


def step(u: Field, p: ModelParams, opts: EvolveOptions) -> Field:
    """Advance one linearly stabilized semi-implicit step."""
    u_new, _ = step_mixed(u, p, opts)
    return u_new


def step_mixed(u: Field, p: ModelParams, opts: EvolveOptions) -> tuple[Field, Field]:
    """Like step but also returns the solved chemical potential."""
    g = u.grid
    if g.n != opts.n:
        raise ValueError(f"field has {g.n} nodes but options expect {opts.n}")
    if abs(u.values[0]) > 1e-12:
        raise ValueError(f"essential boundary value violated: u(0) = {u.values[0]:.3e}")
    template = _banded_template(g.n, g.h, opts.dt)
    zeta = meniscus(g.nodes(), p)
    un, mn, _ = _advance(u.values, p, opts, template, zeta, g.h)
    return Field(g, un), Field(g, mn)


def _resample(ss: SteadyState, g: Grid) -> Field:
    src = ss.u.grid
    if src.n == g.n and abs(src.b - g.b) < 1e-12:
        return Field(g, ss.u.values)
    spl = CubicSpline(src.nodes(), ss.u.values)
    return Field(g, spl(g.nodes()))


def _l2(values: np.ndarray, h: float) -> float:
    return float(np.sqrt(h * np.sum(values * values)))


def evolve(u0: Field, p: ModelParams, opts: EvolveOptions,
           catalog=()) -> tuple[Trajectory, EvolveReport]:
    """Integrate to T or to an ut_norm plateau; classify the omega limit.

    Records a TrajectorySample every record_every steps.  Convergence means
    ut_norm < stop_tol at PLATEAU_RECORDS consecutive records; the omega limit
    is the catalog member closest in discrete H^1 at the final record when
    that distance is below OMEGA_TOL.
    """
    g = u0.grid
    if g.n != opts.n:
        raise ValueError(f"u0 has {g.n} nodes but options expect {opts.n}")
    if not np.all(np.isfinite(u0.values)):
        raise NonFiniteStateError("initial data is not finite")
    if abs(u0.values[0]) > 1e-12:
        raise ValueError(f"essential boundary value violated: u0(0) = {u0.values[0]:.3e}")
    h = g.h
    template = _banded_template(g.n, h, opts.dt)
    zeta = meniscus(g.nodes(), p)
    targets = [_resample(ss, g) for ss in catalog]

    traj = Trajectory(params=p, options=opts)

    def record(t, uf, mu_vals, ut_norm, prev):
        mu_x = first_derivative(mu_vals, h)
        muV2 = float(np.trapezoid(mu_x * mu_x, dx=h))
        ux = first_derivative(uf.values, h)
        adv = -p.beta * float(np.trapezoid(ux * mu_vals, dx=h))
        E = energy(uf, p)
        res = 0.0
        if prev is not None:
            dtr = t - prev.t
            res = (E - prev.E) / dtr + 0.5 * (muV2 + prev.muV2) - 0.5 * (adv + prev.advect)
        sample = TrajectorySample(
            t=t, u=uf, E=E, E1=energy_e1(uf, p), muV2=muV2, advect=adv,
            dEdt_residual=res, ut_norm=ut_norm,
            dist_H1=tuple(h1_distance(uf, tgt) for tgt in targets),
        )
        traj.samples.append(sample)
        return sample

    mu0 = chemical_potential(u0, p)
    prev = record(0.0, u0, mu0.values, 0.0, None)

    # round the horizon up to a whole number of record intervals so the
    # samples stay uniformly spaced and the final state is always recorded
    n_raw = max(1, int(round(opts.T / opts.dt)))
    every = min(opts.record_every, n_raw)
    n_steps = every * ((n_raw + every - 1) // every)
    uv = u0.values.copy()
    plateau = 0
    t_plateau = np.inf
    converged = False
    for k in range(1, n_steps + 1):
        uv, mn, delta = _advance(uv, p, opts, template, zeta, h)
        if k % every == 0:
            t = k * opts.dt
            ut = _l2(delta, h) / opts.dt
            prev = record(t, Field(g, uv), mn, ut, prev)
            if ut < opts.stop_tol:
                plateau += 1
                if plateau >= PLATEAU_RECORDS:
                    converged = True
                    t_plateau = t
                    break
            else:
                plateau = 0

    final = traj.samples[-1]
    omega = None
    final_dist = np.inf
    if final.dist_H1:
        j = int(np.argmin(final.dist_H1))
        final_dist = float(final.dist_H1[j])
        if converged and final_dist < OMEGA_TOL:
            omega = j
    ab_report = absorbing_audit(traj, p)
    report = EvolveReport(
        converged=converged,
        omega_index=omega,
        final_dist=final_dist,
        t_plateau=float(t_plateau),
        absorb_pass=ab_report.absorb_pass,
        M1_bound=ab_report.M1,
        t_entry=ab_report.t_entry,
    )
    return traj, report


@dataclass
class EnergyAudit:
    max_abs_residual: float
    residuals: np.ndarray
    monotone: bool | None  # None when beta != 0


def energy_audit(traj: Trajectory, p: ModelParams) -> EnergyAudit:
    """Check the discrete energy equality between consecutive records.

    Residual per interval: [E_{k+1} - E_k]/dt + avg(muV2) + beta int u_x mu,
    the last two terms as trapezoid averages of the record endpoint values.
    At beta = 0 additionally flags whether E is non-increasing to 1e-10 slack.
    """
    ss = traj.samples
    if len(ss) < 3:
        raise ValueError(f"need at least 3 samples, got {len(ss)}")
    ts = np.array([s.t for s in ss])
    dts = np.diff(ts)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * dts[0] + 1e-14:
        raise ValueError("records are not uniformly spaced")
    E = np.array([s.E for s in ss])
    mv = np.array([s.muV2 for s in ss])
    ad = np.array([s.advect for s in ss])
    r = np.diff(E) / dts + 0.5 * (mv[:-1] + mv[1:]) - 0.5 * (ad[:-1] + ad[1:])
    monotone = None
    if p.beta == 0.0:
        monotone = bool(np.all(np.diff(E) <= 1e-10))
    return EnergyAudit(max_abs_residual=float(np.max(np.abs(r))), residuals=r,
                       monotone=monotone)


@dataclass
class AbsorbingAudit:
    K1: float
    K2: float
    M1: float
    t_entry: float
    absorb_pass: bool
    envelope_pass: bool


def gronwall_constants(p: ModelParams, g: Grid) -> tuple[float, float, float]:
    """Closed-form absorbing-ball constants K1(L), K2(L, zeta), M1."""
    L = p.L
    K1 = 235.0 * L / 4.0 + L**5 + 8.0 * L**9
    zx = meniscus_dx(g.nodes(), p)
    zeta_x_sq = float(np.trapezoid(zx * zx, dx=g.h))
    K2 = L * (144.0 * (L**4 + 2.0) + 1.0) / (4.0 * (L**4 + 4.0)) + zeta_x_sq + 2.0 * K1
    M1 = (L**4 + 4.0) * K2 + 1.0
    return K1, K2, M1


def absorbing_audit(traj: Trajectory, p: ModelParams) -> AbsorbingAudit:
    """Verify the Gronwall envelope and the absorbing bound E1 <= M1.

    Envelope: (E1(0) - C) e^{-t/(L^4+4)} + C with C = (L^4+4) K2, allowed a
    relative ENVELOPE_SLACK.  t_entry is the first record time from which
    E1 <= M1 holds onward.
    """
    if not (0.0 <= p.beta <= 1.0):
        raise ValueError(f"audit constants assume beta in [0, 1], got {p.beta}")
    ss = traj.samples
    if not ss:
        raise ValueError("empty trajectory")
    g = ss[0].u.grid
    K1, K2, M1 = gronwall_constants(p, g)
    C = (p.L**4 + 4.0) * K2
    ts = np.array([s.t for s in ss])
    E1 = np.array([s.E1 for s in ss])
    env = (E1[0] - C) * np.exp(-ts / (p.L**4 + 4.0)) + C
    envelope_pass = bool(np.all(E1 <= env * (1.0 + ENVELOPE_SLACK) + 1e-9))
    below = E1 <= M1
    t_entry = np.inf
    for k in range(len(ss)):
        if np.all(below[k:]):
            t_entry = float(ts[k])
            break
    return AbsorbingAudit(K1=K1, K2=K2, M1=M1, t_entry=t_entry,
                          absorb_pass=np.isfinite(t_entry),
                          envelope_pass=envelope_pass)


def smoothing_norms(traj: Trajectory, m: int) -> list[tuple[float, float]]:
    """Discrete H^m norm (repeated first differences) at every record."""
    if m > 4:
        raise ValueError(f"difference order m = {m} exceeds the supported 4")
    out = []
    for s in traj.samples:
        out.append((s.t, hm_norm(s.u.values, s.u.grid.h, m)))
    return out


def smoothing_sup(traj: Trajectory, m: int, tau: float) -> float:
    """Sup of the discrete H^m norm over records with t >= tau."""
    vals = [v for t, v in smoothing_norms(traj, m) if t >= tau]
    if not vals:
        raise ValueError(f"no records at or after t = {tau}")
    return float(max(vals))


def seeded_initial_data(p: ModelParams, n: int, seed: int,
                        h1_target: float = 1.0, n_modes: int = 8) -> Field:
    """Reproducible random initial data compatible with the boundary rows.

    Combines the boundary-adapted modes sin((k + 1/2) pi x / L) with decaying
    standard-normal coefficients and rescales to the requested discrete H^1
    norm, so every seed gives data inside the unit H^1 ball by default.
    """
    g = Grid(n, 0.0, p.L)
    x = g.nodes()
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal(n_modes) / (1.0 + np.arange(n_modes)) ** 2
    vals = np.zeros(n)
    for k, a in enumerate(coef):
        vals += a * np.sin((k + 0.5) * np.pi * x / p.L)
    n0, n1 = difference_norms(vals, g.h, 1)
    scale = h1_target / np.sqrt(n0 * n0 + n1 * n1)
    return Field(g, vals * scale)


def equilibrium_consistency(ss: SteadyState, tol_f: float = 1e-6,
                            tol_newton: float = 1e-8) -> tuple[bool, float]:
    """Re-verify a classified omega limit against its defining equations.

    At beta = 0 the shooting miss |f(L, z)| must stay below tol_f; for
    advective states the damped-Newton steady solver, seeded at the profile,
    must reconverge below tol_newton without drifting to a different state.
    """
    p = ss.params
    if p.beta == 0.0:
        f, _ = shoot_f(p, ss.z)
        return abs(f) < tol_f, abs(f)
    from .continuation import newton_steady

    st = newton_steady((ss.u, chemical_potential(ss.u, p)), p, tol=min(tol_newton, 1e-10))
    same = h1_distance(st.u, ss.u) < 1e-2
    return st.f_residual < tol_newton and same, st.f_residual
