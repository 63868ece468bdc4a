#!/usr/bin/env python3
"""
Tests for the integrating-factor RK4 stepper and the run loop.
"""

import math
import sys

import numpy as np
import pytest

from gmhd2d.diagnostics import DiagnosticsConfig, NormSeries
from gmhd2d.dynamics import PhysicsParams
from gmhd2d.errors import BlowupDetected
from gmhd2d.fields import FlowState, InitialCondition, make_initial_condition
from gmhd2d.kernel_lab import mild_solution
from gmhd2d.spectral import Grid2D, forward_transform, l2_norm
from gmhd2d import timestepper
from gmhd2d.timestepper import StepperConfig, choose_dt, linear_propagator, run, step


def _orszag_tang(n: int) -> FlowState:
    return make_initial_condition(InitialCondition(), Grid2D(n))


def _integrate(state: FlowState, params: PhysicsParams, dt: float, t_end: float, scheme: str = "if_rk4") -> FlowState:
    steps = int(round(t_end / dt))
    for _ in range(steps):
        state = step(state, params, dt, scheme)
    return state


class TestStepperConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="scheme"):
            StepperConfig(scheme="leapfrog")
        with pytest.raises(ValueError, match="cfl"):
            StepperConfig(cfl=1.5)
        with pytest.raises(ValueError, match="dt_fixed"):
            StepperConfig(dt_fixed=-1.0)

    def test_cfl_step(self):
        state = _orszag_tang(32)
        config = StepperConfig(cfl=0.5, dt_max=1.0)
        dt = choose_dt(state, PhysicsParams(), config)
        assert 0 < dt <= 0.5 * (2 * np.pi / 32)
        assert choose_dt(state, PhysicsParams(), StepperConfig(dt_fixed=1e-3)) == 1e-3

    def test_zero_state_takes_dt_max(self):
        config = StepperConfig(dt_max=0.02)
        assert choose_dt(FlowState.zeros(Grid2D(16)), PhysicsParams(), config) == 0.02

    def test_step_halves_when_speeds_double(self):
        state = _orszag_tang(32)
        faster = FlowState.build(state.omega_hat * 2.0, state.j_hat * 2.0)
        config = StepperConfig(cfl=0.5, dt_max=1.0)
        dt = choose_dt(state, PhysicsParams(), config)
        assert dt < 1.0
        assert choose_dt(faster, PhysicsParams(), config) == pytest.approx(0.5 * dt, rel=1e-12)


class TestStep:
    def test_linear_propagator_single_mode(self):
        grid = Grid2D(16)
        x1, x2 = grid.coordinates()
        F = forward_transform(np.cos(x1 + x2), grid)
        out = linear_propagator(F, 2.4, 0.7, 0.3)
        np.testing.assert_allclose(out.coeffs, F.coeffs * math.exp(-0.7 * 0.3 * 2.0 ** 1.2), atol=1e-13)
        with pytest.raises(ValueError):
            linear_propagator(F, 2.0, 1.0, -0.1)

    def test_linear_propagator_semigroup(self):
        grid = Grid2D(32)
        F = forward_transform(np.random.default_rng(7).standard_normal(grid.shape), grid)
        for s, c in ((2.4, 0.7), (1.0, 2.0), (3.0, 0.05)):
            composed = linear_propagator(linear_propagator(F, s, c, 0.013), s, c, 0.031)
            direct = linear_propagator(F, s, c, 0.044)
            np.testing.assert_allclose(composed.coeffs, direct.coeffs, rtol=1e-12, atol=1e-14 * F.scale())
            np.testing.assert_array_equal(linear_propagator(F, s, c, 0.0).coeffs, F.coeffs)

    def test_rejects_bad_dt(self):
        state = _orszag_tang(16)
        with pytest.raises(ValueError, match="time step"):
            step(state, PhysicsParams(), 0.0)

    def test_means_stay_zero(self):
        state = _integrate(_orszag_tang(32), PhysicsParams(), 0.01, 0.1)
        assert abs(state.omega_hat.mean_mode) <= 1e-12
        assert abs(state.j_hat.mean_mode) <= 1e-12
        assert state.time == pytest.approx(0.1)

    def test_pure_diffusion_matches_mild_solution(self):
        grid = Grid2D(16)
        ic = InitialCondition(kind="single_mode", mode=(1, 0), amplitude=0.0, magnetic_amplitude=1.0)
        state = make_initial_condition(ic, grid)
        params = PhysicsParams.magnetic_diffusion(1.2)
        current = state
        for k in range(1, 11):
            current = _integrate(current, params, 0.01, 0.05)
            expected = mild_solution(state.j_hat, None, 0.05 * k, 1.2, 1.0)
            assert np.max(np.abs(current.j_hat.coeffs - expected.coeffs)) <= 1e-8 * state.j_hat.scale()

    @pytest.mark.parametrize("scheme, order", [("if_rk4", 3.5), ("imex_euler", 0.8)])
    def test_self_convergence(self, scheme, order):
        state = _orszag_tang(32)
        params = PhysicsParams(nu=0.0, kappa=0.0)
        coarse, mid, fine = (_integrate(state, params, dt, 0.2, scheme) for dt in (0.02, 0.01, 0.005))
        e1 = l2_norm(coarse.omega_hat - mid.omega_hat) + l2_norm(coarse.j_hat - mid.j_hat)
        e2 = l2_norm(mid.omega_hat - fine.omega_hat) + l2_norm(mid.j_hat - fine.j_hat)
        assert math.log2(e1 / e2) >= order

    @pytest.mark.slow
    def test_self_convergence_acceptance(self):
        state = _orszag_tang(128)
        params = PhysicsParams.magnetic_diffusion(1.25)
        runs = [_integrate(state, params, dt, 0.5) for dt in (0.01, 0.005, 0.0025)]
        e1 = l2_norm(runs[0].omega_hat - runs[1].omega_hat) + l2_norm(runs[0].j_hat - runs[1].j_hat)
        e2 = l2_norm(runs[1].omega_hat - runs[2].omega_hat) + l2_norm(runs[1].j_hat - runs[2].j_hat)
        assert math.log2(e1 / e2) >= 3.5


class TestRun:
    def test_records_on_cadence_lattice(self):
        result = run(
            _orszag_tang(16),
            PhysicsParams.magnetic_diffusion(1.5),
            StepperConfig(t_end=0.1),
            DiagnosticsConfig(cadence=0.025),
        )
        np.testing.assert_allclose(result.series.times, [0.0, 0.025, 0.05, 0.075, 0.1], atol=1e-14)
        assert result.state.time == pytest.approx(0.1)

    def test_zero_horizon_records_once(self):
        result = run(_orszag_tang(16), PhysicsParams(), StepperConfig(t_end=0.0), DiagnosticsConfig())
        assert len(result.series) == 1

    def test_ideal_energy_conserved(self):
        result = run(
            _orszag_tang(32),
            PhysicsParams(nu=0.0, kappa=0.0),
            StepperConfig(t_end=0.5, dt_max=5e-3),
            DiagnosticsConfig(cadence=0.1),
        )
        energy = result.series.column("energy_u") + result.series.column("energy_b")
        assert np.max(np.abs(energy - energy[0])) <= 1e-6 * energy[0]

    def test_blowup_carries_partial_series(self):
        with pytest.raises(BlowupDetected) as info:
            run(
                _orszag_tang(16),
                PhysicsParams(),
                StepperConfig(t_end=1.0, blowup_threshold=1e-3),
                DiagnosticsConfig(cadence=0.1),
            )
        exc = info.value
        assert isinstance(exc.series, NormSeries)
        assert exc.series.blown_up
        assert exc.series.status[0] == "ok"
        assert exc.state is not None
        assert "linf_omega" in exc.diagnostics

    def test_stage_failure_keeps_last_finite_record(self, monkeypatch):
        original = timestepper.vorticity_current_nonlinear
        calls = []

        def failing_third_step(omega_hat, j_hat):
            calls.append(1)
            n_omega, n_j = original(omega_hat, j_hat)
            if len(calls) == 9:
                n_omega = n_omega.with_coeffs(np.full(n_omega.coeffs.shape, np.nan))
            return n_omega, n_j

        monkeypatch.setattr(timestepper, "vorticity_current_nonlinear", failing_third_step)
        with pytest.raises(BlowupDetected) as info:
            run(
                _orszag_tang(16),
                PhysicsParams.magnetic_diffusion(1.5),
                StepperConfig(t_end=0.1, dt_fixed=0.01),
                DiagnosticsConfig(cadence=0.01),
            )
        exc = info.value
        series = exc.series
        assert series.status == ["ok", "ok", "ok", "blowup"]
        np.testing.assert_allclose(series.times[:3], [0.0, 0.01, 0.02], atol=1e-14)
        assert exc.time == pytest.approx(0.03)
        assert exc.state.time == pytest.approx(0.02)
        assert exc.diagnostics == series.records[2]
        assert all(np.isfinite(value) for value in series.records[2].values())

    @pytest.mark.slow
    def test_ideal_energy_conserved_acceptance(self):
        result = run(
            _orszag_tang(256),
            PhysicsParams(nu=0.0, kappa=0.0),
            StepperConfig(t_end=1.0, dt_max=2.5e-3),
            DiagnosticsConfig(cadence=0.1),
        )
        energy = result.series.column("energy_u") + result.series.column("energy_b")
        assert np.max(np.abs(energy - energy[0])) <= 1e-6 * energy[0]


def main():
    """Run this module's tests"""
    code = pytest.main([__file__, "-q"])
    if code == 0:
        print("\n✅ timestepper tests passed")
    else:
        print("\n❌ timestepper tests failed")
    sys.exit(code)


if __name__ == "__main__":
    main()
