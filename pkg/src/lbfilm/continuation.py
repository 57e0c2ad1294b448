"""Finite-difference steady solver and parameter continuation.

Steady states solve the mixed second-order system

    mu_xx - beta*u_x = 0
    mu + u_xx - (u+c0)^3 + (u+c0) - nu*zeta = 0

with u(0) = mu(0) = 0 and u_x(L) = mu_x(L) = 0.  Keeping (u, mu) as separate
unknowns avoids a fourth-order stencil; the residual stacks the u-block rows
(constitutive equation plus the two u boundary rows) on top of the mu-block
rows (transport equation plus the two mu boundary rows).  A damped Newton
iteration with an analytic sparse Jacobian drives the residual below
tol_newton = 1e-10 in sup norm.

Continuation in beta re-solves the discretization with warm starts and halves
the parameter step on failure; continuation in L re-runs the shooting solver
with slope warm starts, since at beta = 0 shooting is both cheaper and more
accurate than the discretization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ContinuationStalledError, NoConvergenceError, SingularJacobianError
from .model import Field, Grid, ModelParams, chemical_potential, first_derivative, hm_norm, meniscus, second_derivative
from .shoot import TOL_DEGENERATE, SteadyState, polish_zero, scan_zeros

log = logging.getLogger(__name__)

TOL_NEWTON = 1e-10
MAX_NEWTON_ITER = 30
# smallest-singular-value gate for the Newton matrix; fold states sit around
# 4e-4 on the reference grids while regular states stay above 2e-2
SINGULAR_SIGMA = 1e-3


def _sigma_min_estimate(lu, m: int, iters: int = 10) -> float:
    """Smallest singular value of the factored matrix by inverse power iteration."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(m)
    v /= np.linalg.norm(v)
    sigma = np.inf
    for _ in range(iters):
        w = lu.solve(lu.solve(v, trans="T"))
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0.0:
            return 0.0
        v = w / nw
        sigma = 1.0 / np.sqrt(nw)
    return float(sigma)


def assemble_steady_residual(state: np.ndarray, p: ModelParams) -> np.ndarray:
    """Residual of the mixed steady system for stacked unknowns (u, mu)."""
    state = np.asarray(state, dtype=float)
    if state.ndim != 1 or state.size % 2 or state.size < 10:
        raise ValueError(f"state must stack (u, mu) with n >= 5 nodes, got shape {state.shape}")
    n = state.size // 2
    u, mu = state[:n], state[n:]
    h = p.L / (n - 1)
    x = np.linspace(0.0, p.L, n)
    s = u + p.c0
    zeta = meniscus(x, p)
    r = np.empty(2 * n)
    # u block: constitutive rows with Dirichlet left / one-sided Neumann right
    r[0] = u[0]
    r[1 : n - 1] = (
        mu[1:-1] + (u[:-2] - 2.0 * u[1:-1] + u[2:]) / h**2 - (s[1:-1] ** 3 - s[1:-1]) - p.nu * zeta[1:-1]
    )
    r[n - 1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    # mu block: transport rows
    r[n] = mu[0]
    r[n + 1 : 2 * n - 1] = (mu[:-2] - 2.0 * mu[1:-1] + mu[2:]) / h**2 - p.beta * (u[2:] - u[:-2]) / (2.0 * h)
    r[2 * n - 1] = (3.0 * mu[-1] - 4.0 * mu[-2] + mu[-3]) / (2.0 * h)
    return r


def steady_jacobian(state: np.ndarray, p: ModelParams) -> sp.csr_matrix:
    """Analytic Jacobian of assemble_steady_residual (sparse, block banded)."""
    state = np.asarray(state, dtype=float)
    n = state.size // 2
    u = state[:n]
    h = p.L / (n - 1)
    s = u + p.c0
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    add(0, 0, 1.0)
    for i in range(1, n - 1):
        add(i, n + i, 1.0)
        add(i, i - 1, 1.0 / h**2)
        add(i, i, -2.0 / h**2 - (3.0 * s[i] ** 2 - 1.0))
        add(i, i + 1, 1.0 / h**2)
    add(n - 1, n - 1, 3.0 / (2.0 * h))
    add(n - 1, n - 2, -4.0 / (2.0 * h))
    add(n - 1, n - 3, 1.0 / (2.0 * h))
    add(n, n, 1.0)
    for i in range(1, n - 1):
        add(n + i, n + i - 1, 1.0 / h**2)
        add(n + i, n + i, -2.0 / h**2)
        add(n + i, n + i + 1, 1.0 / h**2)
        add(n + i, i + 1, -p.beta / (2.0 * h))
        add(n + i, i - 1, p.beta / (2.0 * h))
    add(2 * n - 1, 2 * n - 1, 3.0 / (2.0 * h))
    add(2 * n - 1, 2 * n - 2, -4.0 / (2.0 * h))
    add(2 * n - 1, 2 * n - 3, 1.0 / (2.0 * h))
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n))


def _independent_residual(u: Field, p: ModelParams) -> float:
    """Recompute the steady defect from the profile alone.

    At beta = 0 this is the sup norm of the discrete chemical potential; for
    beta > 0 it is the sup norm of mu_xx - beta*u_x with mu rebuilt from u.
    Carries the O(h^2) truncation floor of the second-order stencils.
    """
    mu = chemical_potential(u, p)
    if p.beta == 0.0:
        return float(np.max(np.abs(mu.values)))
    h = u.grid.h
    defect = second_derivative(mu.values, h) - p.beta * first_derivative(u.values, h)
    return float(np.max(np.abs(defect[1:-1])))


def newton_steady(
    initial: tuple[Field, Field],
    p: ModelParams,
    tol: float = TOL_NEWTON,
    max_iter: int = MAX_NEWTON_ITER,
) -> SteadyState:
    """Damped Newton on the mixed discretization from an (u, mu) initial pair."""
    u0, mu0 = initial
    if u0.grid != mu0.grid:
        raise ValueError("u and mu must share a grid")
    g = u0.grid
    if abs(g.a) > 1e-12 or abs(g.b - p.L) > 1e-12 * max(1.0, p.L):
        raise ValueError(f"grid [{g.a}, {g.b}] does not span [0, {p.L}]")
    x = np.concatenate([u0.values, mu0.values])
    r = assemble_steady_residual(x, p)
    rnorm = np.max(np.abs(r))
    sigma = np.inf
    for it in range(max_iter):
        if rnorm < tol:
            break
        J = steady_jacobian(x, p).tocsc()
        try:
            lu = splu(J)
        except RuntimeError as exc:
            raise SingularJacobianError(f"factorization failed: {exc}") from exc
        sigma = _sigma_min_estimate(lu, 2 * g.n)
        if sigma < SINGULAR_SIGMA:
            raise SingularJacobianError(
                f"Newton matrix near singular (sigma_min ~ {sigma:.2e}), "
                "likely near a branch point"
            )
        d = lu.solve(-r)
        lam = 1.0
        while True:
            x_try = x + lam * d
            r_try = assemble_steady_residual(x_try, p)
            rnorm_try = np.max(np.abs(r_try))
            if rnorm_try < rnorm or rnorm_try < tol:
                x, r, rnorm = x_try, r_try, rnorm_try
                break
            lam *= 0.5
            if lam < 1.0 / 256.0:
                raise NoConvergenceError(
                    f"damping underflow at iteration {it} (residual {rnorm:.3e})",
                    residual=rnorm,
                )
    else:
        raise NoConvergenceError(
            f"no convergence in {max_iter} Newton iterations (residual {rnorm:.3e})",
            residual=rnorm,
        )
    if not np.isfinite(sigma):
        # converged without ever factoring (seed already steady): assess now
        sigma = _sigma_min_estimate(splu(steady_jacobian(x, p).tocsc()), 2 * g.n)
    n = g.n
    u = Field(g, x[:n])
    ux0 = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * g.h)
    return SteadyState(
        params=p,
        z=float(p.L * ux0),
        u=u,
        mu_residual=_independent_residual(u, p),
        dzf=float("nan"),
        nondegenerate=sigma >= SINGULAR_SIGMA,
        f_residual=float(rnorm),
        iters=it,
    )


@dataclass
class BranchSample:
    """One continuation record."""

    value: float
    state: SteadyState
    newton_iters: int = 0
    residual: float = 0.0
    flagged: bool = False


@dataclass
class Branch:
    """Continuation samples ordered monotonically in the parameter."""

    parameter: str
    samples: list[BranchSample] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)

    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples])


def _check_monotone(targets, name):
    t = np.asarray(targets, dtype=float)
    if t.size == 0:
        raise ValueError(f"no {name} targets")
    d = np.diff(t)
    if t.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError(f"{name} targets must be strictly monotone")
    return t


def continue_in_beta(seed: SteadyState, beta_targets, tol: float = TOL_NEWTON) -> Branch:
    """Natural continuation of a beta = 0 steady state to positive beta.

    Solves the discretization at each target with warm starts, halving the
    parameter step on Newton failure.  ratios[k] records the H4-like distance
    ||u_beta - u_0|| / beta for each positive-beta sample; boundedness of the
    ratios as beta -> 0 is the small-beta persistence diagnostic.
    """
    if seed.params.beta != 0.0:
        raise ValueError("seed must be a beta = 0 state")
    if not seed.nondegenerate:
        raise ValueError("seed must be nondegenerate")
    targets = _check_monotone(beta_targets, "beta")
    if np.any(targets <= 0.0):
        raise ValueError("beta targets must be positive")
    targets = np.sort(targets)
    g = seed.u.grid
    h = g.h
    # re-solve beta = 0 on this grid so the scaling baseline shares the
    # discretization error of the continued states; otherwise the H4-like
    # differences amplify the O(h^2) shooting-vs-grid offset
    base = newton_steady((seed.u, Field(g, np.zeros(g.n))), seed.params, tol=tol)
    u_ref = base.u.values
    branch = Branch(parameter="beta")
    branch.samples.append(BranchSample(0.0, base, base.iters, abs(base.f_residual)))

    b_cur = 0.0
    x_u = base.u
    x_mu = Field(g, np.zeros(g.n))
    for b_t in targets:
        pending = [float(b_t)]
        while pending:
            b_try = pending[-1]
            p_try = replace(seed.params, beta=b_try)
            try:
                st = newton_steady((x_u, x_mu), p_try, tol=tol)
            except (NoConvergenceError, SingularJacobianError):
                if b_try - b_cur < 1e-8 * max(1.0, b_t):
                    raise ContinuationStalledError(
                        f"beta step underflow between {b_cur:.6g} and {b_try:.6g}"
                    )
                pending.append(0.5 * (b_cur + b_try))
                continue
            pending.pop()
            b_cur = b_try
            x_u = st.u
            mu_vals = chemical_potential(st.u, p_try).values
            x_mu = Field(g, mu_vals)
            if b_try == b_t:
                branch.samples.append(BranchSample(b_try, st, st.iters, abs(st.f_residual)))
                branch.ratios.append(hm_norm(st.u.values - u_ref, h, 4) / b_try)
    return branch


def continue_in_L(seed: SteadyState, L_targets, tol: float = 1e-10) -> Branch:
    """Trace a beta = 0 branch in L by re-shooting with slope warm starts.

    The meniscus location and width are carried over from the seed as fixed
    physical values.  The branch terminates with a flagged sample when the
    slope derivative degenerates (|dzf| < 1e-6, branch-point proximity),
    when the corrector fails, or when the corrected slope jumps far outside
    the predictor trust radius, which happens when a step crosses a fold and
    the corrector lands on a different branch; both ends are data, not
    errors.  The trust radius is 5x the last inter-sample slope change with
    a floor of 0.5, so branches separated by less than that can in principle
    still be conflated.
    """
    if seed.params.beta != 0.0:
        raise ValueError("seed must be a beta = 0 state")
    targets = _check_monotone(L_targets, "L")
    branch = Branch(parameter="L")
    branch.samples.append(BranchSample(seed.params.L, seed, seed.iters, abs(seed.f_residual)))
    n_out = seed.u.grid.n
    hist: list[tuple[float, float]] = [(seed.params.L, seed.z)]
    for L_t in targets:
        if len(hist) >= 2:
            (L1, z1), (L2, z2) = hist[-2], hist[-1]
            z_pred = z2 + (z2 - z1) * (L_t - L2) / (L2 - L1)
        else:
            z_pred = hist[-1][1]
        p_t = replace(seed.params, L=float(L_t))
        st = None
        try:
            st = polish_zero(p_t, z0=z_pred, tol=tol, n_out=n_out)
        except Exception:
            # corrector lost the branch: look for a nearby sign change
            try:
                brackets = scan_zeros(p_t, 256)
                brackets.sort(key=lambda b: abs(0.5 * (b.z_lo + b.z_hi) - z_pred))
                if brackets:
                    st = polish_zero(p_t, bracket=brackets[0], tol=tol, n_out=n_out)
            except Exception:
                st = None
        if st is not None:
            stride = abs(hist[-1][1] - hist[-2][1]) if len(hist) >= 2 else 0.0
            if abs(st.z - z_pred) > max(0.5, 5.0 * stride):
                log.info(
                    "corrector hopped branches at L = %.6g (z %.4g vs predicted %.4g)",
                    L_t, st.z, z_pred,
                )
                st = None
        if st is None:
            log.info("branch lost at L = %.6g", L_t)
            if branch.samples:
                branch.samples[-1].flagged = True
            break
        branch.samples.append(BranchSample(float(L_t), st, st.iters, abs(st.f_residual)))
        hist.append((float(L_t), st.z))
        if abs(st.dzf) < TOL_DEGENERATE:
            branch.samples[-1].flagged = True
            log.info("branch degenerate at L = %.6g (dzf = %.3e)", L_t, st.dzf)
            break
    return branch
