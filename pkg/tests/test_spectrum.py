import numpy as np
import pytest

from lbfilm.model import Field, Grid, ModelParams
from lbfilm.shoot import SteadyState, find_steady_states, integrate_ivp
from lbfilm.spectrum import (
    TOL_GAP,
    TOL_KERNEL,
    assemble_l4,
    assemble_m,
    discrete_laplace_eigs,
    eigenvalues,
    kernel_indicator,
    spectral_gap,
    _neg_laplacian_parts,
)
from conftest import FOLD_Z


def synthetic_state(p, n, values=None):
    g = Grid(n, 0.0, p.L)
    u = Field(g, np.zeros(n) if values is None else values)
    return SteadyState(params=p, z=0.0, u=u, mu_residual=0.0, dzf=1.0, nondegenerate=True)


def jacobi_eigs(S, sweeps=30, tol=1e-13):
    """Cyclic Jacobi eigenvalues of a symmetric matrix; independent of LAPACK."""
    A = np.array(S, dtype=float)
    m = A.shape[0]
    for _ in range(sweeps):
        off = 0.0
        for p_ in range(m - 1):
            for q_ in range(p_ + 1, m):
                if abs(A[p_, q_]) < 1e-300:
                    continue
                off = max(off, abs(A[p_, q_]))
                theta = 0.5 * (A[q_, q_] - A[p_, p_]) / A[p_, q_]
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                G = np.eye(m)
                G[p_, p_] = G[q_, q_] = c
                G[p_, q_] = s
                G[q_, p_] = -s
                A = G.T @ A @ G
        if off < tol * max(1.0, np.max(np.abs(np.diag(A)))):
            break
    return np.sort(np.diag(A))


def test_reduced_laplace_matches_closed_form():
    # assembled D^{-1} T versus the analytic discrete eigenvalues, both grids
    for m, h, length in ((40, 1.0 / 40, 1.0), (64, 1.7 / 64, 1.7)):
        T, d = _neg_laplacian_parts(m, h)
        P = T / d[:, None]
        got = np.sort(np.linalg.eigvals(P).real)
        want = np.sort(discrete_laplace_eigs(m, h, length))
        assert np.max(np.abs(got - want)) < 1e-9 * want[-1]


def test_reduced_laplace_similar_to_symmetric():
    T, d = _neg_laplacian_parts(32, 1.0 / 32)
    P = T / d[:, None]
    rd = np.sqrt(d)
    S = (P * rd[:, None]) / rd[None, :]
    assert np.max(np.abs(S - S.T)) < 1e-9


def test_m_constant_coefficient_exact():
    # u = 0: q is constant, so eig(M) = discrete kappa + L^2 (3 c0^2 - 1)
    p = ModelParams(L=1.3, c0=-0.5, nu=0.3)
    n = 65
    ss = synthetic_state(p, n)
    M = assemble_m(ss)
    hy = 1.0 / (n - 1)
    shift = p.L**2 * (3.0 * p.c0**2 - 1.0)
    want = np.sort(discrete_laplace_eigs(n - 1, hy, 1.0) + shift)
    got = np.sort(np.linalg.eigvals(M).real)
    assert np.max(np.abs(got - want)) < 1e-9 * max(1.0, np.max(np.abs(want)))


def test_l4_constant_coefficient_exact():
    # u = 0: A = -P(P + cI) shares eigenvectors with P, eigs -kappa(kappa + c)
    p = ModelParams(L=1.3, c0=-0.5, nu=0.3)
    n = 65
    ss = synthetic_state(p, n)
    A = assemble_l4(ss, 0.0)
    h = ss.u.grid.h
    kappa = discrete_laplace_eigs(n - 1, h, p.L)
    c = 3.0 * p.c0**2 - 1.0
    want = np.sort(-kappa * (kappa + c))
    res = eigenvalues(A, operator="L4")
    assert res.max_abs_imag == 0.0
    assert np.max(np.abs(res.eigenvalues.real - want)) < 1e-8 * np.max(np.abs(want))


def test_m_eigs_against_jacobi_oracle(hub_params):
    # np.linalg.eig on M versus a hand-rolled Jacobi solve of the similar
    # symmetric matrix S = D^{1/2} M D^{-1/2}
    ss = find_steady_states(hub_params, n_out=41)[0]
    M = assemble_m(ss)
    n = ss.u.grid.n
    _, d = _neg_laplacian_parts(n - 1, 1.0 / (n - 1))
    rd = np.sqrt(d)
    S = (M * rd[:, None]) / rd[None, :]
    assert np.max(np.abs(S - S.T)) < 1e-7
    S = 0.5 * (S + S.T)
    want = jacobi_eigs(S)
    got = np.sort(np.linalg.eigvals(M).real)
    assert np.max(np.abs(got - want)) < 1e-8 * max(1.0, np.max(np.abs(want)))


def test_l4_real_spectrum_at_catalog_state(hub_state):
    res = eigenvalues(assemble_l4(hub_state, 0.0), operator="L4")
    assert res.max_abs_imag == 0.0
    assert np.all(res.eigenvalues.real < 0)  # stable branch at the hub
    assert res.n == hub_state.u.grid.n - 1


def test_kernel_indicator_hub_frozen(hub_state):
    ki = kernel_indicator(hub_state)
    assert ki.sigma_min == pytest.approx(2.4566069084058593, rel=1e-6)
    assert ki.consistent
    assert ki.sigma_min > TOL_KERNEL
    assert abs(ki.dzf) > 1e-3


def test_spectral_gap_hub_frozen(hub_state):
    delta, hyperbolic = spectral_gap(hub_state, 0.0)
    assert delta == pytest.approx(6.064402258778587, rel=1e-6)
    assert hyperbolic


def _fold_state(fold_params, n=513):
    sol = integrate_ivp(fold_params, FOLD_Z, 1e-12, n_out=n)
    g = Grid(n, 0.0, fold_params.L)
    u = Field(g, sol.v.values - fold_params.c0)
    return SteadyState(params=fold_params, z=FOLD_Z, u=u, mu_residual=0.0,
                       dzf=sol.dzf, nondegenerate=abs(sol.dzf) >= 1e-6)


def test_fold_kernel_collapse(fold_params):
    # at the fold both degeneracy indicators collapse together
    ss = _fold_state(fold_params)
    ki = kernel_indicator(ss)
    assert ki.sigma_min < TOL_KERNEL
    assert abs(ki.dzf) < 1e-8
    assert ki.consistent
    delta, hyperbolic = spectral_gap(ss, 0.0)
    assert not hyperbolic
    assert delta < TOL_GAP


def test_beta_perturbation_linear(hub_state):
    # O(beta) response of the slow (gap-setting) end of the spectrum; the
    # stiff end is outside the linear regime already at beta ~ 1e-3
    base = np.sort(eigenvalues(assemble_l4(hub_state, 0.0)).eigenvalues.real)
    diffs = []
    for beta in (2e-3, 1e-3):
        pert = np.sort(eigenvalues(assemble_l4(hub_state, beta)).eigenvalues.real)
        diffs.append(np.max(np.abs(pert[-20:] - base[-20:])))
    assert 1.5 < diffs[0] / diffs[1] < 2.5


def test_gap_stable_under_small_beta(hub_state):
    d0, _ = spectral_gap(hub_state, 0.0)
    d1, hyp = spectral_gap(hub_state, 0.05)
    assert hyp
    assert abs(d1 - d0) < 0.5 * d0


def test_gap_mesh_convergence(hub_params):
    # second-order approach of the gap on truncation-dominated grids
    gaps = []
    for n in (65, 129, 257):
        ss = find_steady_states(hub_params, n_out=n)[0]
        gaps.append(spectral_gap(ss, 0.0)[0])
    q = (gaps[0] - gaps[1]) / (gaps[1] - gaps[2])
    assert 3.0 < q < 5.0
    # sigma_min of the nonsymmetric realization carries an O(h) boundary
    # weight: first-order quotient, value stable to a percent
    sigs = []
    for n in (65, 129, 257):
        ss = find_steady_states(hub_params, n_out=n)[0]
        sigs.append(kernel_indicator(ss).sigma_min)
    q = (sigs[0] - sigs[1]) / (sigs[1] - sigs[2])
    assert 1.5 < abs(q) < 2.6
    assert abs(sigs[0] - sigs[2]) < 0.01 * sigs[2]


def test_assembly_validation(hub_state):
    p_beta = ModelParams(L=1.0, beta=0.1)
    with pytest.raises(ValueError):
        assemble_m(synthetic_state(p_beta, 33))
    with pytest.raises(ValueError):
        assemble_m(synthetic_state(ModelParams(L=1.0), 5))
    with pytest.raises(ValueError):
        assemble_l4(hub_state, -0.2)
    with pytest.raises(ValueError):
        eigenvalues(np.zeros((3, 4)))


def test_spectrum_result_fields(hub_state):
    res = eigenvalues(assemble_l4(hub_state, 0.0), operator="L4", beta=0.0)
    assert res.operator == "L4"
    assert res.beta == 0.0
    assert res.min_abs == pytest.approx(np.min(np.abs(res.eigenvalues)))
    assert res.min_abs_real_part <= res.min_abs
    lams = res.eigenvalues.real
    assert np.all(np.diff(lams) >= 0)  # sorted ascending by real part
