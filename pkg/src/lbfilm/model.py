"""Model layer: parameters, grids, fields, energies for the thin-film equation.

The order parameter u = c - c0 solves the 1D advective Cahn-Hilliard equation

    u_t = mu_xx - beta * u_x,   mu = -u_xx + (u + c0)^3 - (u + c0) + nu * zeta(x)

on (0, L) with boundary conditions u(0) = u_x(L) = mu(0) = mu_x(L) = 0.  The
meniscus profile zeta(x) = -(1 + tanh((x - x_mns)/l_mns))/2 takes values in
(-1, 0) and tilts the double well

    W(x, s) = (s^2 - 1)^2 / 4 + nu * zeta(x) * s

toward s = -1 behind the meniscus.  This module owns parameter validation, the
analytic meniscus and potential, finite-difference chemical potential and
energies, and the slope bracket used by the shooting solver.

Derivatives use second-order central differences in the interior and one-sided
second-order stencils at the ends; integrals use the trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded
from scipy.optimize import brentq


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters. x_mns and l_mns default to L/2 and L/10."""

    L: float
    beta: float = 0.0
    c0: float = -0.3
    nu: float = 1.0
    x_mns: float | None = None
    l_mns: float | None = None
    strict: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L > 0 required, got {self.L}")
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta >= 0 required, got {self.beta}")
        if self.nu < 0 or not np.isfinite(self.nu):
            raise ValueError(f"nu >= 0 required, got {self.nu}")
        if self.x_mns is None:
            object.__setattr__(self, "x_mns", 0.5 * self.L)
        if self.l_mns is None:
            object.__setattr__(self, "l_mns", 0.1 * self.L)
        if self.l_mns <= 0:
            raise ValueError(f"l_mns > 0 required, got {self.l_mns}")
        if not np.isfinite(self.c0):
            raise ValueError("c0 must be finite")
        if self.strict and not (-1.0 < self.c0 < 0.0):
            raise ValueError(f"strict mode requires c0 in (-1, 0), got {self.c0}")


@dataclass(frozen=True)
class Grid:
    """Uniform grid of n nodes on [a, b]."""

    n: int
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"grid needs n >= 3 nodes, got {self.n}")
        if not self.b > self.a:
            raise ValueError(f"empty interval [{self.a}, {self.b}]")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n)


class Field:
    """Nodal values on a Grid.  Values are copied and frozen at construction."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        vals = np.array(values, dtype=float)
        if vals.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    def __repr__(self):
        return f"Field(n={self.grid.n}, [{self.grid.a}, {self.grid.b}])"


def meniscus(x, p: ModelParams):
    """Meniscus profile zeta(x) in (-1, 0), monotonically decreasing."""
    x = np.asarray(x, dtype=float)
    return -0.5 * (1.0 + np.tanh((x - p.x_mns) / p.l_mns))


def meniscus_dx(x, p: ModelParams):
    """Analytic derivative zeta'(x) = -sech^2((x - x_mns)/l_mns) / (2 l_mns)."""
    x = np.asarray(x, dtype=float)
    return -0.5 / p.l_mns / np.cosh((x - p.x_mns) / p.l_mns) ** 2


def potential_w(x, s, p: ModelParams):
    """Tilted double well W(x, s) = (s^2 - 1)^2/4 + nu * zeta(x) * s."""
    s = np.asarray(s, dtype=float)
    return 0.25 * (s * s - 1.0) ** 2 + p.nu * meniscus(x, p) * s


def dw_ds(x, s, p: ModelParams):
    """Partial derivative of W in s: s^3 - s + nu * zeta(x)."""
    s = np.asarray(s, dtype=float)
    return s**3 - s + p.nu * meniscus(x, p)


def first_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order first derivative: central interior, one-sided 3-point ends."""
    v = np.asarray(values, dtype=float)
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    d[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return d


def second_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order second derivative: central interior, one-sided 4-point ends."""
    v = np.asarray(values, dtype=float)
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
    d[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    return d


def _check_model_grid(u: Field, p: ModelParams, n_min: int):
    g = u.grid
    if g.n < n_min:
        raise ValueError(f"grid too coarse: need n >= {n_min}, got {g.n}")
    if abs(g.a) > 1e-12 * p.L or abs(g.b - p.L) > 1e-12 * max(1.0, p.L):
        raise ValueError(f"grid [{g.a}, {g.b}] does not span [0, {p.L}]")


def chemical_potential(u: Field, p: ModelParams) -> Field:
    """Discrete mu = -u_xx + (u+c0)^3 - (u+c0) + nu*zeta on the grid of u."""
    _check_model_grid(u, p, 5)
    x = u.grid.nodes()
    s = u.values + p.c0
    mu = -second_derivative(u.values, u.grid.h) + s**3 - s + p.nu * meniscus(x, p)
    return Field(u.grid, mu)


def energy(u: Field, p: ModelParams) -> float:
    """Free energy E(u) = int 0.5*u_x^2 + W(x, u + c0) dx by trapezoid rule."""
    _check_model_grid(u, p, 3)
    x = u.grid.nodes()
    ux = first_derivative(u.values, u.grid.h)
    integrand = 0.5 * ux * ux + potential_w(x, u.values + p.c0, p)
    return float(np.trapezoid(integrand, dx=u.grid.h))


def _poisson_neumann_banded(n: int, h: float) -> np.ndarray:
    """SPD reduced system for -phi_xx = u, phi(0) = 0, phi_x(L) = 0.

    Unknowns are phi_1..phi_{n-1}; the Neumann end uses ghost elimination with
    the halved closing equation, which keeps the matrix symmetric.  Returned in
    upper banded form for solveh_banded.
    """
    ab = np.zeros((2, n - 1))
    ab[0, 1:] = -1.0 / h**2
    ab[1, :] = 2.0 / h**2
    ab[1, -1] = 1.0 / h**2
    return ab


def inverse_laplacian_sq(u: Field) -> float:
    """Squared H^-1-type seminorm (u, (-Laplace)^{-1} u) with u(0)-side Dirichlet.

    Solves -phi_xx = u with phi(0) = 0, phi_x(L) = 0 on the grid of u through a
    tridiagonal solve and returns the trapezoid inner product of u and phi.
    """
    g = u.grid
    if g.n < 5:
        raise ValueError(f"grid too coarse: need n >= 5, got {g.n}")
    h = g.h
    ab = _poisson_neumann_banded(g.n, h)
    rhs = u.values[1:].copy()
    rhs[-1] *= 0.5
    try:
        phi = solveh_banded(ab, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - SPD by construction
        raise np.linalg.LinAlgError(f"Poisson solve failed: {exc}") from exc
    # trapezoid weights on nodes 1..n-1 are h*(1,...,1,1/2); node 0 drops out
    w = np.full(g.n - 1, h)
    w[-1] = 0.5 * h
    return float(np.sum(w * u.values[1:] * phi))


def inverse_laplacian(u: Field) -> Field:
    """Solve -phi_xx = u, phi(0) = 0, phi_x(L) = 0; returns phi."""
    g = u.grid
    if g.n < 5:
        raise ValueError(f"grid too coarse: need n >= 5, got {g.n}")
    ab = _poisson_neumann_banded(g.n, g.h)
    rhs = u.values[1:].copy()
    rhs[-1] *= 0.5
    phi = solveh_banded(ab, rhs)
    return Field(g, np.concatenate(([0.0], phi)))


def energy_e1(u: Field, p: ModelParams) -> float:
    """Modified energy int W0(u+c0) + 0.5*||u_x||^2 + (u, (-Laplace)^{-1} u).

    W0(s) = (s^2 - 1)^2 / 4 is the untilted well; the last term is the squared
    H^-1-type seminorm from inverse_laplacian_sq.  Controls the H^1 norm of u
    along trajectories and enters the absorbing-ball audit.
    """
    _check_model_grid(u, p, 5)
    s = u.values + p.c0
    w0 = 0.25 * (s * s - 1.0) ** 2
    ux = first_derivative(u.values, u.grid.h)
    quad = float(np.trapezoid(w0 + 0.5 * ux * ux, dx=u.grid.h))
    return quad + inverse_laplacian_sq(u)


def shooting_bounds(c0: float) -> tuple[float, float]:
    """Slope bracket [z_l, z_r] containing every admissible u_x(0).

    Any steady profile has sqrt(2)*u_x(0) between -|c0^2 - 1| and
    sqrt(5 - 4*c0 + (c0^2 - 1)^2); scaled slopes v_y(0) = L*u_x(0) inherit the
    bracket scaled by L.
    """
    a = c0 * c0 - 1.0
    z_l = -abs(a) / np.sqrt(2.0)
    z_r = np.sqrt(5.0 - 4.0 * c0 + a * a) / np.sqrt(2.0)
    return float(z_l), float(z_r)


def v_max() -> float:
    """Largest root of v^3 - v = 1; caps |v| for rescaled steady profiles."""
    return brentq(lambda v: v**3 - v - 1.0, 1.0, 2.0, xtol=1e-15, rtol=8.9e-16)


def difference_norms(values: np.ndarray, h: float, m: int) -> list[float]:
    """L2 norms of v and its first m forward-difference derivatives.

    Difference j lives on a staggered grid of n - j points; each norm uses the
    midpoint (rectangle) rule, which is what the smoothing and continuation
    diagnostics expect.
    """
    v = np.asarray(values, dtype=float)
    if m >= len(v):
        raise ValueError(f"order {m} too high for {len(v)} nodes")
    out = [float(np.sqrt(h * np.sum(v * v)))]
    d = v
    for _ in range(m):
        d = np.diff(d) / h
        out.append(float(np.sqrt(h * np.sum(d * d))))
    return out


def h1_distance(f: Field, g: Field) -> float:
    """Discrete H^1 distance between two fields on the same grid."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    w = f.values - g.values
    n0, n1 = difference_norms(w, f.grid.h, 1)
    return float(np.sqrt(n0 * n0 + n1 * n1))


def hm_norm(values: np.ndarray, h: float, m: int) -> float:
    """Sum of the L2 norms of v and its first m difference derivatives."""
    return float(sum(difference_norms(values, h, m)))
