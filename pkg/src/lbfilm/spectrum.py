"""Linearized operators and spectra around steady states.

Two operators are discretized.  The second-order Sturm-Liouville operator on
the rescaled interval [0, 1],

    M h = -h_yy + L^2 * (3 v^2 - 1) h,     h(0) = 0,  h_y(1) = 0,

has a kernel exactly at branch points of the shooting map, so its smallest
singular value is a kernel indicator dual to dzf.  The fourth-order linearized
evolution operator on [0, L],

    A h = (-h_xx + W0''(u + c0) h)_xx - beta * h_x,

with h(0) = h_x(L) = 0 and the linearized potential g = -h_xx + W0''*h
satisfying g(0) = g_x(L) = 0, governs linear stability; hyperbolicity is a
spectral gap min |Re lambda| above tol_gap.

Both discretizations eliminate the left Dirichlet value and close the right
Neumann conditions by ghost-node elimination with a halved last equation.
That writes each second-order factor as D^{-1} T with T symmetric and D the
half-weight diagonal, so the fourth-order product at beta = 0 is similar to a
symmetric matrix and its discrete spectrum is real up to roundoff, matching
the similarity structure of the continuous operator.  The discrete Laplacian
eigenvalues are known in closed form, kappa_k = (2 - 2 cos(omega_k h))/h^2
with omega_k = (k + 1/2) pi / L, which the tests use as exact oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .shoot import SteadyState

TOL_GAP = 1e-4
TOL_KERNEL = 1e-3
TOL_DEGENERATE = 1e-6


@dataclass
class SpectrumResult:
    """Eigenvalues of a discretized operator, sorted by real part."""

    eigenvalues: np.ndarray
    min_abs: float
    min_abs_real_part: float
    max_abs_imag: float
    n: int
    operator: str = ""
    beta: float = 0.0


@dataclass
class KernelIndicator:
    """Smallest singular value of M against the shooting degeneracy measure."""

    sigma_min: float
    dzf: float
    consistent: bool


def _neg_laplacian_parts(m: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric factor T and half-weight diagonal D of the reduced -Laplace.

    Unknowns are nodes 1..m (left Dirichlet value eliminated); the right
    Neumann condition is closed by a ghost node with the final equation halved.
    The operator itself is D^{-1} T.
    """
    T = np.zeros((m, m))
    idx = np.arange(m)
    T[idx, idx] = 2.0 / h**2
    T[idx[:-1], idx[:-1] + 1] = -1.0 / h**2
    T[idx[1:], idx[1:] - 1] = -1.0 / h**2
    T[-1, -1] = 1.0 / h**2
    d = np.ones(m)
    d[-1] = 0.5
    return T, d


def discrete_laplace_eigs(m: int, h: float, length: float) -> np.ndarray:
    """Exact eigenvalues of the reduced -Laplace: (2 - 2cos(omega_k h))/h^2."""
    k = np.arange(m)
    omega = (k + 0.5) * np.pi / length
    return (2.0 - 2.0 * np.cos(omega * h)) / h**2


def assemble_m(ss: SteadyState) -> np.ndarray:
    """Discretize M at a steady state; returns the reduced (n-1) x (n-1) matrix."""
    p = ss.params
    if p.beta != 0.0:
        raise ValueError("M is defined for beta = 0 steady states")
    n = ss.u.grid.n
    if n < 7:
        raise ValueError(f"grid too coarse for spectra: n = {n}")
    hy = 1.0 / (n - 1)
    v = ss.u.values + p.c0  # rescaled profile on the shared uniform nodes
    q = p.L**2 * (3.0 * v[1:] ** 2 - 1.0)
    T, d = _neg_laplacian_parts(n - 1, hy)
    return T / d[:, None] + np.diag(q)


def kernel_indicator(ss: SteadyState) -> KernelIndicator:
    """sigma_min of M versus |dzf|; both collapse together at branch points."""
    M = assemble_m(ss)
    sigma_min = float(np.linalg.svd(M, compute_uv=False)[-1])
    degenerate_sigma = sigma_min <= TOL_KERNEL
    degenerate_dzf = abs(ss.dzf) <= TOL_DEGENERATE
    return KernelIndicator(
        sigma_min=sigma_min,
        dzf=ss.dzf,
        consistent=degenerate_sigma == degenerate_dzf,
    )


def assemble_l4(ss: SteadyState, beta: float) -> np.ndarray:
    """Discretize the fourth-order linearized operator via the mixed form.

    The linearized potential block g = -h_xx + W0''(u+c0) h is eliminated
    exactly (Schur complement), leaving a dense (n-1) x (n-1) matrix acting on
    the interior-plus-right-end values of h.
    """
    if beta < 0:
        raise ValueError(f"beta >= 0 required, got {beta}")
    p = ss.params
    n = ss.u.grid.n
    if n < 7:
        raise ValueError(f"grid too coarse for spectra: n = {n}")
    h = ss.u.grid.h
    m = n - 1
    s = ss.u.values + p.c0
    q = 3.0 * s[1:] ** 2 - 1.0
    T, d = _neg_laplacian_parts(m, h)
    P = T / d[:, None]  # reduced -Laplace with the mixed BCs
    Mq = P + np.diag(q)
    A = -P @ Mq
    if beta != 0.0:
        Dx = np.zeros((m, m))
        for i in range(m - 1):  # rows for nodes 1..n-2; h_x(L) = 0 kills the last row
            if i > 0:
                Dx[i, i - 1] = -1.0 / (2.0 * h)
            Dx[i, i + 1] = 1.0 / (2.0 * h)
        A = A - beta * Dx
    return A


def eigenvalues(matrix: np.ndarray, operator: str = "", beta: float = 0.0) -> SpectrumResult:
    """Dense spectrum of an assembled operator, sorted by real part.

    Five eigenpairs are spot-checked against the backward-stable residual
    bound ||Av - lambda v|| <= 1e-8 * max(1, ||A||_F) * ||v||.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"need a square matrix, got shape {A.shape}")
    vals, vecs = np.linalg.eig(A)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    vecs = vecs[:, order]
    scale = max(1.0, float(np.linalg.norm(A)))
    m = A.shape[0]
    for j in np.linspace(0, m - 1, min(5, m)).astype(int):
        v = vecs[:, j]
        res = np.linalg.norm(A @ v - vals[j] * v) / np.linalg.norm(v)
        if res > 1e-8 * scale:
            raise RuntimeError(f"eigenpair {j} residual {res:.3e} exceeds tolerance")
    return SpectrumResult(
        eigenvalues=vals,
        min_abs=float(np.min(np.abs(vals))),
        min_abs_real_part=float(np.min(np.abs(vals.real))),
        max_abs_imag=float(np.max(np.abs(vals.imag))),
        n=m,
        operator=operator,
        beta=beta,
    )


def spectral_gap(ss: SteadyState, beta: float, tol_gap: float = TOL_GAP) -> tuple[float, bool]:
    """Distance of the fourth-order spectrum to the imaginary axis.

    Returns (delta, hyperbolic) with delta = min |Re lambda|; the state is
    reported hyperbolic when delta exceeds tol_gap.
    """
    res = eigenvalues(assemble_l4(ss, beta), operator="L4", beta=beta)
    delta = res.min_abs_real_part
    return delta, delta > tol_gap
