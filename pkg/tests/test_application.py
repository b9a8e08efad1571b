"""Applying process tensors: dynamics with controls and n-time
correlation functions."""

import numpy as np
import pytest
from scipy.linalg import expm
from hypothesis import given, settings, strategies as st

from ptmpo import (
    Bath,
    ControlSequence,
    PowerLawSD,
    System,
    TempoParameters,
    compute_correlations_nt,
    compute_dynamics,
    liouvillian,
    tempo_compute,
    trivial_pt,
)
from ptmpo.operators import left_super, right_super
from conftest import (
    DOWN, PLUS, SIGMA_MINUS, SIGMA_X, SIGMA_Z, UP, super_left_right, unvec,
    vec,
)


def random_density_matrix(d, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


class TestComputeDynamics:

    def test_dense_lindblad_oracle(self):
        """Trivial PT plus a decay channel reproduces the dense Lindblad
        semigroup."""
        gamma = 0.4
        sys = System(0.8 * SIGMA_X, [(gamma, SIGMA_MINUS)])
        dt, n = 0.05, 40
        pt = trivial_pt(2, n, dt)
        dyn = compute_dynamics(sys, pt, UP)
        v = expm(liouvillian(sys) * dt)
        w = vec(UP)
        for i in range(n + 1):
            np.testing.assert_allclose(dyn.states[i], unvec(w), atol=1e-9)
            w = v @ w

    def test_reset_control_consistency(self):
        """With no memory (trivial PT), resetting at step n makes the
        tail identical to a fresh run from the reset state."""
        sys = System(0.6 * SIGMA_X + 0.2 * SIGMA_Z, [(0.1, SIGMA_MINUS)])
        dt, n, n_reset = 0.1, 12, 5
        reset = np.outer(vec(UP), vec(np.eye(2)))  # rho -> Tr[rho] |up><up|
        controls = ControlSequence()
        controls.add(n_reset, "pre", reset)
        pt = trivial_pt(2, n, dt)
        dyn = compute_dynamics(sys, pt, PLUS, controls=controls)
        fresh = compute_dynamics(sys, trivial_pt(2, n - n_reset, dt), UP,
                                 start_time=n_reset * dt)
        for i in range(n - n_reset + 1):
            np.testing.assert_allclose(dyn.states[n_reset + i],
                                       fresh.states[i], atol=1e-12)

    def test_two_bath_non_additivity(self):
        """Hot/cold two-bath configuration: the combined effect differs
        from either bath alone, and each single-bath PT run matches its
        own direct TEMPO computation."""
        epsrel = 1e-8
        from ptmpo import pt_tempo_compute
        sys = System(1.0 * SIGMA_Z + 0.5 * SIGMA_X)
        params = TempoParameters(dt=0.0625, epsrel=epsrel, tcut=1.0)
        n = 16
        bath_cold = Bath(0.5 * SIGMA_Z, PowerLawSD(0.16, 1.0, 1.0), 0.8)
        bath_hot = Bath(0.5 * SIGMA_X, PowerLawSD(0.16, 1.0, 1.0), 1.6)
        pt_cold = pt_tempo_compute(bath_cold, params, n)
        pt_hot = pt_tempo_compute(bath_hot, params, n)
        d_cold = compute_dynamics(sys, pt_cold, UP)
        d_hot = compute_dynamics(sys, pt_hot, UP)
        d_both = compute_dynamics(sys, [pt_cold, pt_hot], UP)
        dist_c = max(np.max(np.abs(a - b))
                     for a, b in zip(d_both.states, d_cold.states))
        dist_h = max(np.max(np.abs(a - b))
                     for a, b in zip(d_both.states, d_hot.states))
        assert dist_c > 1e-3 and dist_h > 1e-3
        # single-bath PT runs agree with direct TEMPO (tolerance reflects
        # the accumulation of per-step truncation noise from two
        # independent contraction orders; it shrinks with epsrel)
        for bath, ref in ((bath_cold, d_cold), (bath_hot, d_hot)):
            direct = tempo_compute(sys, bath, UP, params, n)
            diff = max(np.max(np.abs(a - b))
                       for a, b in zip(direct.states, ref.states))
            assert diff < 2e-5

    def test_control_step_out_of_range_rejected(self):
        controls = ControlSequence()
        controls.add(9, "pre", np.eye(4))
        with pytest.raises(ValueError):
            compute_dynamics(System(SIGMA_X), trivial_pt(2, 4, 0.1), UP,
                             controls=controls)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            compute_dynamics(System(SIGMA_X), trivial_pt(3, 4, 0.1), UP)

    @given(st.floats(0.0, 1.0), st.integers(0, 1000))
    @settings(max_examples=20, deadline=None)
    def test_linearity_in_initial_state(self, small_pt, mix, seed):
        sys = System(0.5 * SIGMA_X + 0.1 * SIGMA_Z)
        rho1 = random_density_matrix(2, seed)
        rho2 = random_density_matrix(2, seed + 1)
        rho_mix = mix * rho1 + (1.0 - mix) * rho2
        d1 = compute_dynamics(sys, small_pt, rho1)
        d2 = compute_dynamics(sys, small_pt, rho2)
        dm = compute_dynamics(sys, small_pt, rho_mix)
        for a, b, c in zip(d1.states, d2.states, dm.states):
            np.testing.assert_allclose(mix * a + (1.0 - mix) * b, c,
                                       atol=1e-12)

    def test_trace_preserved_under_cptp_controls(self, small_pt):
        sys = System(0.5 * SIGMA_X)
        u = expm(-1j * 0.7 * SIGMA_Z)
        controls = ControlSequence()
        controls.add(4, "pre", super_left_right(u, u.conj().T))
        dyn = compute_dynamics(sys, small_pt, UP, controls=controls)
        for rho in dyn.states:
            assert abs(np.trace(rho) - 1.0) <= 100 * 1e-9


class TestCorrelations:

    def test_zero_coupling_heisenberg_phase(self):
        """<sigma_x(t) sigma_x(0)> = exp(i eps t) for H = eps sigma_z/2
        from the ground state; -1 at t = pi/2 for eps = 2."""
        eps = 2.0
        dt = np.pi / 2.0 / 16.0
        n = 32
        pt = trivial_pt(2, n, dt)
        sys = System(0.5 * eps * SIGMA_Z)
        got = compute_correlations_nt(
            sys, pt, [(SIGMA_X, "left"), (SIGMA_X, "left")],
            [0, list(range(n + 1))], UP)
        times = dt * np.arange(n + 1)
        np.testing.assert_allclose(got, np.exp(1j * eps * times), atol=1e-8)
        assert got[16] == pytest.approx(-1.0, abs=1e-8)

    def test_final_step_operator_equals_expectation(self, small_pt):
        sys = System(0.5 * SIGMA_X + 0.1 * SIGMA_Z)
        n = small_pt.n_steps
        dyn = compute_dynamics(sys, small_pt, UP)
        corr = compute_correlations_nt(sys, small_pt, [(SIGMA_Z, "left")],
                                       [n], UP)
        want = np.trace(SIGMA_Z @ dyn.states[n])
        assert complex(corr) == pytest.approx(complex(want), abs=1e-12)

    def test_sweep_equals_repeated_runs(self, small_pt):
        sys = System(0.4 * SIGMA_X + 0.3 * SIGMA_Z)
        ops = [(SIGMA_X, "left"), (SIGMA_X, "right"), (SIGMA_Z, "left")]
        sweep_steps = list(range(6, 13))
        swept = compute_correlations_nt(sys, small_pt, ops,
                                        [2, 4, sweep_steps], UP)
        for i, step in enumerate(sweep_steps):
            single = compute_correlations_nt(sys, small_pt, ops,
                                             [2, 4, step], UP)
            assert abs(swept[i] - single) <= 1e-12

    def test_left_right_sides(self, small_pt):
        """A right-side operator multiplies from the right: check against
        a dense trivial-PT computation."""
        sys = System(0.5 * SIGMA_X)
        n = 8
        dt = small_pt.dt
        pt = trivial_pt(2, n, dt)
        v = expm(liouvillian(sys) * dt)
        w = vec(UP)
        for _ in range(3):
            w = v @ w
        w = right_super(SIGMA_Z) @ w
        for _ in range(3, n):
            w = v @ w
        want = np.trace(SIGMA_X @ unvec(w))
        got = compute_correlations_nt(sys, pt,
                                      [(SIGMA_Z, "right"),
                                       (SIGMA_X, "left")],
                                      [3, n], UP)
        assert complex(got) == pytest.approx(complex(want), abs=1e-12)

    def test_out_of_time_order_rejected(self, small_pt):
        sys = System(0.5 * SIGMA_X)
        with pytest.raises(ValueError):
            compute_correlations_nt(
                sys, small_pt,
                [(SIGMA_X, "left"), (SIGMA_X, "left"), (SIGMA_X, "left")],
                [4, 2, 8], UP)

    def test_per_side_ordering_enforced(self, small_pt):
        sys = System(0.5 * SIGMA_X)
        # left ops at 5 then 3 (decreasing) with a right op between: the
        # left side alone violates time ordering
        with pytest.raises(ValueError):
            compute_correlations_nt(
                sys, small_pt,
                [(SIGMA_X, "left"), (SIGMA_X, "right"), (SIGMA_X, "left")],
                [5, 5, 3], UP)

    def test_times_outside_range_rejected(self, small_pt):
        sys = System(0.5 * SIGMA_X)
        with pytest.raises(ValueError):
            compute_correlations_nt(sys, small_pt, [(SIGMA_X, "left")],
                                    [small_pt.n_steps + 1], UP)


class TestSerialization:

    def test_dynamics_csv_roundtrip(self, tmp_path, small_pt):
        from ptmpo.application import dynamics_to_csv
        sys = System(0.5 * SIGMA_X)
        dyn = compute_dynamics(sys, small_pt, UP)
        path = tmp_path / "dyn.csv"
        dynamics_to_csv(dyn, path)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert data.shape[0] == len(dyn.times)
        np.testing.assert_allclose(data[:, 0], dyn.times)
        re00 = np.array([s[0, 0].real for s in dyn.states])
        np.testing.assert_allclose(data[:, 1], re00)
