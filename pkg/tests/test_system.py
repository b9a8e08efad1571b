"""System descriptions: Liouvillians, propagators, parameterized
Hamiltonians and their derivatives, chains, and field-coupled systems."""

import numpy as np
import pytest
from scipy.linalg import expm
from hypothesis import given, settings, strategies as st

from ptmpo import (
    FieldSystem,
    ParameterizedSystem,
    System,
    SystemChain,
    half_propagators,
    liouvillian,
    xy_chain,
)
from ptmpo.system import propagator_derivatives
from conftest import (
    ID2, SIGMA_MINUS, SIGMA_X, SIGMA_Y, SIGMA_Z, UP, super_left_right, unvec,
    vec,
)


def random_density_matrix(d, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


class TestLiouvillian:

    def test_commutator_spectrum(self):
        liou = liouvillian(System(SIGMA_Z))
        eig = np.sort_complex(np.linalg.eigvals(liou))
        want = np.sort_complex(np.array([0.0, 0.0, -2.0j, 2.0j]))
        np.testing.assert_allclose(eig, want, atol=1e-12)

    def test_zero_system(self):
        liou = liouvillian(System(np.zeros((2, 2))))
        np.testing.assert_array_equal(liou, np.zeros((4, 4)))

    def test_trace_annihilation(self):
        sys = System(0.7 * SIGMA_X + 0.2 * SIGMA_Z,
                     [(0.3, SIGMA_MINUS), (0.1, SIGMA_Z)])
        liou = liouvillian(sys)
        for seed in range(5):
            rho = random_density_matrix(2, seed)
            drho = unvec(liou @ vec(rho))
            assert abs(np.trace(drho)) <= 1e-12

    def test_lindblad_form(self):
        gamma, op = 0.4, SIGMA_MINUS
        liou = liouvillian(System(SIGMA_X, [(gamma, op)]))
        rho = random_density_matrix(2, 42)
        got = unvec(liou @ vec(rho))
        want = -1j * (SIGMA_X @ rho - rho @ SIGMA_X)
        want += gamma * (op @ rho @ op.conj().T
                         - 0.5 * (op.conj().T @ op @ rho
                                  + rho @ op.conj().T @ op))
        np.testing.assert_allclose(got, want, atol=1e-13)

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            System(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            System(SIGMA_X, [(-0.1, SIGMA_MINUS)])


class TestHalfPropagators:

    def test_constant_hamiltonian(self):
        sys = System(0.3 * SIGMA_X)
        pre, post = half_propagators(sys, 0, 0.1)
        want = expm(liouvillian(sys) * 0.05)
        np.testing.assert_allclose(pre, want, atol=1e-13)
        np.testing.assert_allclose(post, want, atol=1e-13)

    def test_small_dt_near_identity(self):
        sys = System(SIGMA_X)
        pre, post = half_propagators(sys, 0, 1e-8)
        np.testing.assert_allclose(pre, np.eye(4), atol=1e-7)

    def test_time_dependent_substep_oracle(self):
        """Composed full steps of H(t) = t sigma_x match a 1000x
        subdivided midpoint propagation to the Trotter order."""
        sys = System(lambda t: t * SIGMA_X)
        dt = 0.05
        n_steps = 10
        w = vec(UP)
        for n in range(n_steps):
            pre, post = half_propagators(sys, n, dt)
            w = post @ (pre @ w)
        w_ref = vec(UP)
        m = 1000
        for j in range(n_steps * m):
            t_mid = (j + 0.5) * dt / m
            w_ref = expm(liouvillian(sys, t_mid) * dt / m) @ w_ref
        assert np.max(np.abs(w - w_ref)) < n_steps * dt ** 3

    def test_trace_preservation(self):
        sys = System(0.4 * SIGMA_Y + SIGMA_Z, [(0.2, SIGMA_MINUS)])
        pre, post = half_propagators(sys, 3, 0.08)
        for seed in range(4):
            rho = random_density_matrix(2, seed)
            out = unvec(post @ pre @ vec(rho))
            assert abs(np.trace(out) - 1.0) <= 1e-12

    def test_unitarity_without_channels(self):
        sys = System(0.9 * SIGMA_X + 0.1 * SIGMA_Y)
        pre, _ = half_propagators(sys, 0, 0.1)
        np.testing.assert_allclose(pre.conj().T @ pre, np.eye(4),
                                   atol=1e-12)

    @given(st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_frobenius_preservation_closed(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        sys = System(m + m.conj().T)
        pre, post = half_propagators(sys, 0, 0.07)
        rho = random_density_matrix(2, seed + 1)
        out = unvec(post @ pre @ vec(rho))
        assert np.linalg.norm(out, "fro") == pytest.approx(
            np.linalg.norm(rho, "fro"), abs=1e-12)


class TestParameterizedSystem:

    @staticmethod
    def two_param():
        return ParameterizedSystem(
            lambda hx, hz: hx * SIGMA_X + hz * SIGMA_Z, 2)

    def test_builder_probe_dimension(self):
        assert self.two_param().dimension == 2

    def test_commuting_family_closed_form(self):
        """For H = c sigma_z the half-step propagator derivative has the
        closed form (dL/dc)(dt/2) V."""
        ps = ParameterizedSystem(lambda c: c * SIGMA_Z, 1)
        dt = 0.1
        values = np.full((2 * 3, 1), 0.7)
        derivs = propagator_derivatives(ps, values, dt)
        dl = -1j * (np.kron(SIGMA_Z, ID2) - np.kron(ID2, SIGMA_Z.T))
        v = expm(ps.liouvillian([0.7]) * dt / 2.0)
        want = dl @ v * (dt / 2.0)
        for n in range(6):
            np.testing.assert_allclose(derivs[n, 0], want, atol=1e-10)

    def test_derivative_finite_difference_oracle(self):
        ps = self.two_param()
        dt = 0.08
        rng = np.random.default_rng(5)
        values = rng.normal(size=(4, 2))
        derivs = propagator_derivatives(ps, values, dt)
        h = 1e-6
        for n in range(4):
            for a in range(2):
                vp = values.copy()
                vm = values.copy()
                vp[n, a] += h
                vm[n, a] -= h
                fd = (expm(ps.liouvillian(vp[n]) * dt / 2.0)
                      - expm(ps.liouvillian(vm[n]) * dt / 2.0)) / (2.0 * h)
                err = np.max(np.abs(derivs[n, a] - fd))
                assert err / max(np.max(np.abs(fd)), 1.0) < 1e-8

    def test_out_of_bounds_rejected(self):
        ps = ParameterizedSystem(lambda c: c * SIGMA_X, 1,
                                 bounds=[(-1.0, 1.0)])
        with pytest.raises(ValueError):
            ps.check_bounds(np.array([[2.0]]))

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ValueError):
            ParameterizedSystem(lambda c: c * SIGMA_X, 1,
                                bounds=[(1.0, -1.0)])


class TestSystemChain:

    def test_xy_chain_shapes(self):
        chain = xy_chain(5, epsilon=1.0, coupling=1.0, anisotropy=0.04)
        assert chain.length == 5
        assert len(chain.bond_hamiltonians) == 4
        for h in chain.bond_hamiltonians:
            np.testing.assert_allclose(h, h.conj().T, atol=1e-15)

    def test_xx_chain_total_sz_symmetry(self):
        """The isotropic chain commutes with total S^z (checked densely
        for N <= 4)."""
        for n in (2, 3, 4):
            chain = xy_chain(n, epsilon=1.3, coupling=0.8, anisotropy=0.0)
            dim = 2 ** n
            h_tot = np.zeros((dim, dim), dtype=complex)
            sz_tot = np.zeros((dim, dim), dtype=complex)
            for i in range(n):
                ops = [ID2] * n
                ops[i] = chain.site_hamiltonians[i]
                term = ops[0]
                for o in ops[1:]:
                    term = np.kron(term, o)
                h_tot += term
                ops = [ID2] * n
                ops[i] = SIGMA_Z
                term = ops[0]
                for o in ops[1:]:
                    term = np.kron(term, o)
                sz_tot += term
            for b in range(n - 1):
                pre = np.eye(2 ** b)
                post = np.eye(2 ** (n - b - 2))
                h_tot += np.kron(np.kron(pre, chain.bond_hamiltonians[b]),
                                 post)
            comm = h_tot @ sz_tot - sz_tot @ h_tot
            assert np.max(np.abs(comm)) < 1e-12

    def test_too_short_chain_rejected(self):
        with pytest.raises(ValueError):
            xy_chain(1)
        with pytest.raises(ValueError):
            SystemChain(site_dimension=2,
                        site_hamiltonians=[SIGMA_Z],
                        bond_hamiltonians=[])

    def test_bond_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SystemChain(site_dimension=2,
                        site_hamiltonians=[SIGMA_Z, SIGMA_Z],
                        bond_hamiltonians=[])


class TestFieldSystem:

    def test_frozen_field_matches_direct(self):
        fs = FieldSystem(
            lambda t, a: SIGMA_Z + a.real * SIGMA_X + a.imag * SIGMA_Y,
            SIGMA_MINUS)
        frozen = fs.frozen(lambda t: 0.3 + 0.4j * np.cos(t))
        for t in (0.0, 0.5, 1.1):
            a = 0.3 + 0.4j * np.cos(t)
            np.testing.assert_allclose(frozen.hamiltonian(t),
                                       fs.hamiltonian(t, a), atol=1e-15)

    def test_expectation_operator_dimension_checked(self):
        with pytest.raises(ValueError):
            FieldSystem(lambda t, a: SIGMA_Z, np.eye(3))
