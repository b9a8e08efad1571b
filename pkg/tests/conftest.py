"""Shared fixtures and independent numerical oracles for the test suite.

The oracles here are deliberately written in the most direct (dense,
loop-based) style possible so that they share no contraction code with
the package under test.
"""

import numpy as np
import pytest
from scipy.linalg import expm

from ptmpo import (
    Bath,
    PowerLawSD,
    TempoParameters,
    eta_coefficients,
    liouvillian,
    pt_tempo_compute,
)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

UP = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
DOWN = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
PLUS = 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)
MINUS = 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]], dtype=complex)


def vec(rho):
    """Row-major vectorization (matches the package convention)."""
    return np.asarray(rho, dtype=complex).reshape(-1)


def unvec(v):
    d = int(round(np.sqrt(len(v))))
    return np.asarray(v, dtype=complex).reshape(d, d)


def super_left_right(a, b):
    """Superoperator for rho -> a rho b, row-major vectorization."""
    return np.kron(np.asarray(a, dtype=complex),
                   np.asarray(b, dtype=complex).T)


# -- dense influence-network oracle --------------------------------------------


def dense_influence_dynamics(sys, bath, rho0, dt, n_steps, k_max=None):
    """Exact untruncated contraction of the discretized influence network.

    Keeps the full path-history tensor (one d^2 axis per past step) and
    multiplies in every pairwise influence factor explicitly; no MPS, no
    SVD. Exponential in n_steps, so only usable for small networks.
    Returns the list of density matrices [rho(t_0) ... rho(t_N)].
    """
    d = bath.dimension
    d2 = d * d
    if k_max is None:
        k_max = n_steps - 1
    eta = eta_coefficients(bath, dt, k_max)

    # coupling eigenbasis, descending eigenvalues (package convention)
    evals, evecs = np.linalg.eigh(bath.coupling_operator)
    order = np.argsort(-evals, kind="stable")
    s = evals[order]
    p = evecs[:, order]
    u = np.kron(p, p.conj())          # rotates eigenbasis vec back to lab
    uh = u.conj().T

    diff = (s[:, None] - s[None, :]).reshape(-1)

    def drive(k):
        e = eta.values[k]
        return (e * s[:, None] - np.conj(e) * s[None, :]).reshape(-1)

    def b_matrix(k):
        if k > k_max:
            return np.ones((d2, d2), dtype=complex)
        return np.exp(-np.outer(diff, drive(k)))

    b0_diag = np.exp(-diff * drive(0))
    v_half_eig = uh @ expm(liouvillian(sys) * dt / 2.0) @ u

    hist = uh @ vec(rho0)             # axes grow to [j_1 ... j_n, current]
    states = [np.asarray(rho0, dtype=complex)]
    for n in range(1, n_steps + 1):
        # pre half step on the current axis
        hist = np.tensordot(hist, v_half_eig, axes=([hist.ndim - 1], [1]))
        # the current axis is the new path variable j_n: same-step factor
        # plus one lagged factor per previous path axis
        hist = hist * b0_diag
        for m in range(1, n):
            bk = b_matrix(n - m)      # [later j_n, earlier j_m]
            shape = [1] * hist.ndim
            shape[m - 1] = d2
            shape[-1] = d2
            hist = hist * bk.T.reshape(shape)
        # post half step introduces a fresh current axis; j_n is kept
        hist = hist[..., None] * v_half_eig.T
        w_now = hist.sum(axis=tuple(range(hist.ndim - 1)))
        states.append(unvec(u @ w_now))
    return states


# -- dense Trotterized chain-gate oracle ----------------------------------------


def dense_chain_gate_dynamics(chain, initial, dt, n_steps, order=2):
    """Apply the same even/odd gate sequence as the TEBD engine, densely
    on the full chain Hilbert space (no MPS, no truncation).

    ``initial`` is a list of per-site density matrices. Returns per-site
    reduced states: states[site][step].
    """
    n = chain.length
    d = chain.site_dimension

    def two_site_h(b):
        h = chain.bond_hamiltonians[b].astype(complex).copy()
        wl = 1.0 if b == 0 else 0.5
        wr = 1.0 if b == n - 2 else 0.5
        h += wl * np.kron(chain.site_hamiltonians[b], np.eye(d))
        h += wr * np.kron(np.eye(d), chain.site_hamiltonians[b + 1])
        return h

    rho = initial[0].astype(complex)
    for r in initial[1:]:
        rho = np.kron(rho, r)

    def apply_gate(rho, b, tau):
        u = expm(-1j * two_site_h(b) * tau)
        dim_l = d ** b
        dim_r = d ** (n - b - 2)
        full_u = np.kron(np.kron(np.eye(dim_l), u), np.eye(dim_r))
        return full_u @ rho @ full_u.conj().T

    evens = list(range(0, n - 1, 2))
    odds = list(range(1, n - 1, 2))

    def sweep(rho, tau):
        for b in evens:
            rho = apply_gate(rho, b, tau)
        for b in odds:
            rho = apply_gate(rho, b, tau)
        return rho

    def sweep_rev(rho, tau):
        for b in odds:
            rho = apply_gate(rho, b, tau)
        for b in evens:
            rho = apply_gate(rho, b, tau)
        return rho

    def reduced(rho, site):
        t = rho.reshape((d,) * n + (d,) * n)
        out = t
        for i in reversed([i for i in range(n) if i != site]):
            out = np.trace(out, axis1=i, axis2=out.ndim // 2 + i)
        return out

    states = [[reduced(rho, site)] for site in range(n)]
    for _ in range(n_steps):
        if order == 1:
            rho = sweep(rho, dt)
        else:
            rho = sweep(rho, dt / 2.0)
            rho = sweep_rev(rho, dt / 2.0)
        for site in range(n):
            states[site].append(reduced(rho, site))
    return states


# -- shared baths and process tensors -------------------------------------------


@pytest.fixture(scope="session")
def ohmic_bath():
    """Weak Ohmic bath at T=0 with S = sigma_z/2 (workhorse instance)."""
    return Bath(0.5 * SIGMA_Z, PowerLawSD(0.1, 1.0, 5.0), temperature=0.0)


@pytest.fixture(scope="session")
def small_pt(ohmic_bath):
    """A small but non-trivial PT shared by application/gradient tests."""
    params = TempoParameters(dt=0.0625, epsrel=1e-9, tcut=1.0)
    return pt_tempo_compute(ohmic_bath, params, 16)
