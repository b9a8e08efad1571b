"""Mean-field co-evolution of open subsystems with a classical field."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ptmpo import (
    Bath,
    PowerLawSD,
    TempoParameters,
    compute_dynamics,
    pt_tempo_compute,
    trivial_pt,
)
from ptmpo.meanfield import compute_meanfield_dynamics, field_to_csv
from ptmpo.system import FieldSystem, MeanFieldSystem
from conftest import DOWN, SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, UP, vec


def bare_subsystem():
    """Subsystem whose Hamiltonian ignores the field entirely."""
    return FieldSystem(lambda t, a: 0.5 * SIGMA_Z, SIGMA_MINUS)


def coupled_subsystem(w0=1.0, rabi=0.4):
    def h(t, a):
        return 0.5 * w0 * SIGMA_Z + 0.5 * rabi * (a * SIGMA_PLUS
                                                  + np.conj(a) * SIGMA_MINUS)
    return FieldSystem(h, SIGMA_MINUS)


class TestFieldIntegration:

    def test_decoupled_field_decay(self):
        # Field decoupled from the subsystems; d(alpha)/dt = -(i w_c + kappa)
        # alpha has |alpha(t)| = |alpha_0| exp(-kappa t).
        kappa, w_c, dt, n = 0.05, 0.2, 0.003, 100
        mfs = MeanFieldSystem(
            [bare_subsystem()], lambda t, a, e: -(1j * w_c + kappa) * a)
        pt = trivial_pt(2, n, dt)
        res = compute_meanfield_dynamics(mfs, [pt], [UP], 1.0 + 0.0j)
        t = np.arange(n + 1) * dt
        assert np.max(np.abs(np.abs(res.fields) - np.exp(-kappa * t))) < 1e-8

    def test_field_modulus_conserved(self):
        # kappa = 0, no field-subsystem coupling, no dissipation.
        w_c, dt, n = 0.2, 0.005, 100
        mfs = MeanFieldSystem([bare_subsystem()],
                              lambda t, a, e: -1j * w_c * a)
        pt = trivial_pt(2, n, dt)
        res = compute_meanfield_dynamics(mfs, [pt], [UP], 0.7 + 0.2j)
        assert np.max(np.abs(np.abs(res.fields) - abs(0.7 + 0.2j))) < 1e-10

    def test_dense_ode_oracle(self):
        # Trivial PT, resonant field, kappa = 0, closed subsystem: the
        # whole scheme approximates the coupled mean-field ODE system
        # (Bloch equations + field) and must match a stiff dense
        # integration to 1e-6.
        w0 = 1.0
        rabi = 0.8
        dt, n = 0.001, 200
        fs = coupled_subsystem(w0=w0, rabi=rabi)
        mfs = MeanFieldSystem(
            [fs], lambda t, a, e: -1j * w0 * a - 0.5j * rabi * e[0])
        pt = trivial_pt(2, n, dt)
        rho0 = 0.5 * np.array([[1.0, 0.6], [0.6, 1.0]], dtype=complex)
        a0 = 0.3 - 0.1j
        res = compute_meanfield_dynamics(mfs, [pt], [rho0], a0)

        def rhs(t, y):
            rho = y[:4].reshape(2, 2)
            a = y[4] + 1j * y[5]
            h = fs.hamiltonian(t, a)
            drho = -1j * (h @ rho - rho @ h)
            da = -1j * w0 * a - 0.5j * rabi * np.trace(SIGMA_MINUS @ rho)
            return np.concatenate([drho.reshape(-1), [da.real, da.imag]])

        y0 = np.concatenate([rho0.reshape(-1), [a0.real, a0.imag]])
        t_eval = np.arange(n + 1) * dt
        sol = solve_ivp(rhs, (0.0, n * dt), y0, t_eval=t_eval,
                        method="DOP853", rtol=1e-12, atol=1e-12)
        assert sol.success
        ref_fields = sol.y[4] + 1j * sol.y[5]
        assert np.max(np.abs(res.fields - ref_fields)) < 1e-6
        for i, t in enumerate(t_eval):
            ref_rho = np.complex128(sol.y[:4, i]).reshape(2, 2)
            assert np.max(np.abs(res.dynamics[0].states[i] - ref_rho)) < 1e-6

    def test_identical_subsystems_symmetry(self):
        # Two identical entries produce identical trajectories, and a
        # mean-coupled EOM gives the same field as the single-entry run.
        def eom(t, a, exps):
            return -1j * a - 0.4j * np.mean(exps)

        dt, n = 0.01, 40
        fs = coupled_subsystem()
        pt = trivial_pt(2, n, dt)
        rho0 = 0.5 * np.array([[1.0, 0.4], [0.4, 1.0]], dtype=complex)
        single = compute_meanfield_dynamics(
            MeanFieldSystem([coupled_subsystem()], eom), [pt], [rho0], 0.5)
        double = compute_meanfield_dynamics(
            MeanFieldSystem([coupled_subsystem(), coupled_subsystem()], eom),
            [pt, pt], [rho0, rho0], 0.5)
        np.testing.assert_allclose(double.fields, single.fields, atol=1e-13)
        for a, b in zip(double.dynamics[0].states, double.dynamics[1].states):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(double.dynamics[0].states, single.dynamics[0].states):
            np.testing.assert_allclose(a, b, atol=1e-13)


class TestFrozenFieldConsistency:

    def test_frozen_field_reproduces_dynamics(self):
        # Re-running one subsystem alone under the recorded
        # piecewise-linear field trajectory must reproduce its dynamics.
        dt, n = 0.05, 20
        bath = Bath(0.5 * SIGMA_Z, PowerLawSD(0.1, 1.0, 5.0), 0.0)
        pt = pt_tempo_compute(bath, TempoParameters(dt=dt, epsrel=1e-10), n)
        fs = coupled_subsystem()
        mfs = MeanFieldSystem(
            [fs], lambda t, a, e: -1j * a - 0.3j * e[0])
        rho0 = 0.5 * np.array([[1.0, 0.8], [0.8, 1.0]], dtype=complex)
        res = compute_meanfield_dynamics(mfs, [pt], [rho0], 0.4 + 0.1j)

        fields, slopes = res.fields, res.field_slopes

        def field_of_t(s):
            i = min(int(np.floor(s / dt + 1e-12)), n - 1)
            return fields[i] + slopes[i] * (s - i * dt)

        frozen = fs.frozen(field_of_t)
        dyn = compute_dynamics(frozen, pt, rho0)
        for a, b in zip(res.dynamics[0].states, dyn.states):
            np.testing.assert_allclose(a, b, atol=1e-10)


class TestAccounting:

    def test_operation_count_linear_in_subsystem_types(self):
        def eom(t, a, exps):
            return -1j * a - 0.1j * np.sum(exps)

        dt, n = 0.02, 25
        pt = trivial_pt(2, n, dt)
        counts = []
        for n_types in (1, 2, 3):
            mfs = MeanFieldSystem(
                [coupled_subsystem(rabi=0.1 * (k + 1))
                 for k in range(n_types)], eom)
            res = compute_meanfield_dynamics(
                mfs, [pt] * n_types, [UP] * n_types, 0.3)
            counts.append(res.operation_counts)
        for key in ("propagator_builds", "slot_applications"):
            base = counts[0][key]
            assert [c[key] for c in counts] == [base, 2 * base, 3 * base]
        # EOM evaluations are per-step, independent of the type count.
        assert len({c["eom_evaluations"] for c in counts}) == 1

    def test_divergent_eom_aborts_with_partial_trajectory(self):
        def eom(t, a, exps):
            return np.nan if t > 0.1 else -1j * a

        dt, n = 0.02, 50
        mfs = MeanFieldSystem([bare_subsystem()], eom)
        pt = trivial_pt(2, n, dt)
        res = compute_meanfield_dynamics(mfs, [pt], [UP], 1.0)
        assert res.operation_counts["aborted"] is True
        assert 1 < len(res.fields) < n + 1
        assert len(res.dynamics[0].states) == len(res.fields)
        assert np.all(np.isfinite(res.fields))

    def test_field_to_csv_roundtrip(self, tmp_path):
        times = np.array([0.0, 0.1, 0.2])
        fields = np.array([1.0 + 0.5j, 0.8 - 0.2j, 0.3 + 0.0j])
        path = tmp_path / "field.csv"
        field_to_csv(times, fields, path)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        np.testing.assert_allclose(data[:, 0], times)
        np.testing.assert_allclose(data[:, 1] + 1j * data[:, 2], fields)
        np.testing.assert_allclose(data[:, 3], np.abs(fields) ** 2)


class TestValidation:

    def test_pt_count_mismatch_rejected(self):
        mfs = MeanFieldSystem([bare_subsystem()], lambda t, a, e: 0.0j)
        pt = trivial_pt(2, 4, 0.1)
        with pytest.raises(ValueError):
            compute_meanfield_dynamics(mfs, [pt, pt], [UP], 1.0)

    def test_rho0_count_mismatch_rejected(self):
        mfs = MeanFieldSystem([bare_subsystem()], lambda t, a, e: 0.0j)
        pt = trivial_pt(2, 4, 0.1)
        with pytest.raises(ValueError):
            compute_meanfield_dynamics(mfs, [pt], [UP, DOWN], 1.0)

    def test_dt_disagreement_rejected(self):
        mfs = MeanFieldSystem([bare_subsystem(), bare_subsystem()],
                              lambda t, a, e: 0.0j)
        with pytest.raises(ValueError):
            compute_meanfield_dynamics(
                mfs, [trivial_pt(2, 4, 0.1), trivial_pt(2, 4, 0.2)],
                [UP, UP], 1.0)

    def test_params_dt_mismatch_rejected(self):
        mfs = MeanFieldSystem([bare_subsystem()], lambda t, a, e: 0.0j)
        pt = trivial_pt(2, 4, 0.1)
        with pytest.raises(ValueError):
            compute_meanfield_dynamics(
                mfs, [pt], [UP], 1.0,
                params=TempoParameters(dt=0.2, epsrel=1e-7))

    def test_empty_subsystems_rejected(self):
        with pytest.raises(ValueError):
            MeanFieldSystem([], lambda t, a, e: 0.0j)
