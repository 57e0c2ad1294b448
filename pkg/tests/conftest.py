import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from lbfilm.model import Field, Grid, ModelParams, chemical_potential
from lbfilm.shoot import find_steady_states

HUB = dict(L=1.0, c0=-0.5, nu=0.3)
# fold of the fixed-meniscus family (x_mns = 1.0, l_mns = 0.2, c0 = -0.5, nu = 0.3)
FOLD_L = 2.0977073037460277
FOLD_Z = 1.0440452695525875


@pytest.fixture(scope="session")
def hub_params():
    return ModelParams(**HUB)


@pytest.fixture(scope="session")
def hub_catalog(hub_params):
    return find_steady_states(hub_params)


@pytest.fixture(scope="session")
def hub_state(hub_catalog):
    assert len(hub_catalog) == 1
    return hub_catalog[0]


@pytest.fixture(scope="session")
def fold_params():
    return ModelParams(L=FOLD_L, c0=-0.5, nu=0.3, x_mns=1.0, l_mns=0.2)


def resample_state(ss, n):
    """Cubic resample of a steady profile onto an n-node grid over the same span."""
    g = Grid(n, 0.0, ss.params.L)
    vals = CubicSpline(ss.u.grid.nodes(), ss.u.values)(g.nodes())
    return Field(g, vals)


def mu_of(u, p):
    return chemical_potential(u, p)


def rel_err(a, b):
    return abs(a - b) / max(1.0, abs(b))


def rk4_shoot(p, z, n_steps=4000):
    """Independent fixed-step classical RK4 for the shooting system.

    Integrates (v, v_y, h, h_y) with v(0) = c0, v_y(0) = z, h(0) = 0,
    h_y(0) = 1 on [0, 1] and returns (v_y(1), h_y(1)).  Deliberately coded
    from the equations, not from the library integrator.
    """
    L2 = p.L * p.L

    def f(y, s):
        v, w, hh, q = s
        zeta = -0.5 * (1.0 + np.tanh((p.L * y - p.x_mns) / p.l_mns))
        return np.array([w, L2 * (v**3 - v + p.nu * zeta), q, L2 * (3.0 * v * v - 1.0) * hh])

    s = np.array([p.c0, z, 0.0, 1.0])
    dy = 1.0 / n_steps
    y = 0.0
    for _ in range(n_steps):
        k1 = f(y, s)
        k2 = f(y + 0.5 * dy, s + 0.5 * dy * k1)
        k3 = f(y + 0.5 * dy, s + 0.5 * dy * k2)
        k4 = f(y + dy, s + dy * k3)
        s = s + (dy / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y += dy
    return float(s[1]), float(s[3])
