from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from omtube.action import om_action
from omtube.errors import InputError, ShootingOverflow
from omtube.model import el_rhs_value, path_potential
from omtube.variational import (
    action_vs_time,
    direct_minimizer,
    el_rhs,
    energy_of_time,
    energy_profile,
    relaxation_solution,
    resolved_by_shooting,
    shoot,
    solve_mptp,
    terminal_sensitivity,
    time_reparameterization,
    uniform_bound_diagnostics,
)


class TestElRhs:
    def test_double_well(self, double_well):
        assert el_rhs(double_well, 0.0) == 0.0
        assert el_rhs(double_well, 1.0) == pytest.approx(-3.0)

    def test_brownian(self, brownian):
        assert el_rhs(brownian, 2.5) == 0.0

    def test_non_finite(self, brownian):
        with pytest.raises(InputError):
            el_rhs(brownian, math.nan)


class TestShoot:
    def test_brownian_is_free_flight(self, brownian):
        shot = shoot(brownian, 2.0, 0.75, n_steps=100)
        np.testing.assert_allclose(shot.path.values, 0.75 * shot.path.times, atol=1e-12)
        assert shot.terminal_x == pytest.approx(1.5)

    def test_fourth_order(self, double_well):
        ends = [shoot(double_well, 0.5, 1.0, n_steps=n).terminal_x for n in (50, 100, 200)]
        ratio = (ends[0] - ends[1]) / (ends[1] - ends[2])
        assert 10.0 <= ratio <= 22.0

    def test_overflow(self, brownian):
        with pytest.raises(ShootingOverflow) as info:
            shoot(brownian, 1.0, 1e4)
        assert math.isfinite(info.value.terminal)

    def test_too_few_steps(self, brownian):
        with pytest.raises(InputError):
            shoot(brownian, 1.0, 1.0, n_steps=4)


class TestSolveMptp:
    def test_brownian_straight_line(self, brownian):
        sol = solve_mptp(brownian, 1.0)
        assert sol.v0 == pytest.approx(1.0, rel=1e-10)
        assert sol.energy == pytest.approx(0.5, rel=1e-10)
        assert sol.residual <= 1e-8
        np.testing.assert_allclose(sol.path.values, sol.path.times, atol=1e-10)

    def test_endpoints(self, double_well):
        sol = solve_mptp(double_well, 1.0)
        assert sol.path.values[0] == -1.0
        assert sol.path.values[-1] == pytest.approx(1.0, abs=1e-8)
        assert sol.n_roots >= 1

    @pytest.mark.parametrize(
        ("system", "T"),
        [
            ("double_well", 0.5),
            ("double_well", 1.0),
            ("double_well", 1.5),
            ("brownian", 0.5),
            ("brownian", 1.0),
            ("brownian", 2.0),
        ],
    )
    def test_matches_direct_minimizer(self, request, system, T):
        system = request.getfixturevalue(system)
        sol = solve_mptp(system, T)
        direct = direct_minimizer(system, T)
        assert om_action(direct, system).total == pytest.approx(
            sol.om_action.total, rel=1e-3, abs=1e-9
        )
        np.testing.assert_allclose(
            np.interp(direct.times, sol.path.times, sol.path.values),
            direct.values,
            atol=1e-2,
        )

    @pytest.mark.slow
    def test_long_transit_is_symmetric(self, double_well):
        sol = solve_mptp(double_well, 10.0)
        values = sol.path.values
        crossing = sol.path.times[np.argmax(values > 0.0)]
        assert crossing == pytest.approx(5.0, abs=0.1)
        assert values[0] == -1.0
        assert values[-1] == pytest.approx(1.0, abs=1e-8)
        np.testing.assert_allclose(values, -values[::-1], atol=1e-6)
        assert sol.energy_conserved

    def test_euler_lagrange_residual_is_second_order(self, double_well):
        def residual(n):
            path = solve_mptp(double_well, 1.0, n_steps=n).path
            x, h = path.values, path.dt
            accel = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / h**2
            return float(np.max(np.abs(accel - el_rhs_value(double_well, x[1:-1]))))

        ratio = residual(100) / residual(200)
        assert 3.0 <= ratio <= 5.0

    @pytest.mark.parametrize("T", [0.5, 1.0, 1.5])
    def test_energy_conserved(self, double_well, T):
        sol = solve_mptp(double_well, T)
        assert sol.energy_conserved
        assert sol.energy_drift <= 1e-6 * max(1.0, abs(sol.energy))

    def test_energy_drift_shrinks_with_step(self, double_well):
        coarse = solve_mptp(double_well, 1.0, n_steps=250)
        fine = solve_mptp(double_well, 1.0, n_steps=1000)
        assert coarse.energy_drift >= 16.0 * fine.energy_drift
        assert energy_profile(coarse, double_well).drift >= energy_profile(
            fine, double_well
        ).drift

    def test_drifting_solution_is_not_conserved(self, double_well):
        sol = solve_mptp(double_well, 1.0)
        drifting = dataclasses.replace(sol, energy_drift=1e-3 * max(1.0, abs(sol.energy)))
        assert not drifting.energy_conserved

    @pytest.mark.filterwarnings("error::RuntimeWarning")
    def test_scan_is_warning_free(self, double_well, brownian):
        assert solve_mptp(double_well, 1.0).residual <= 1e-8
        assert solve_mptp(brownian, 1.0).residual <= 1e-8

    def test_bad_time(self, brownian):
        with pytest.raises(InputError):
            solve_mptp(brownian, 0.0)


class TestResolution:
    @pytest.mark.parametrize("T", [0.5, 2.0])
    def test_brownian_sensitivity_is_time(self, brownian, T):
        assert terminal_sensitivity(brownian, T, 0.3) == pytest.approx(T, rel=1e-12)

    def test_matches_finite_difference(self, double_well):
        v0, dv = solve_mptp(double_well, 1.0).v0, 1e-6
        up = shoot(double_well, 1.0, v0 + dv).terminal_x
        down = shoot(double_well, 1.0, v0 - dv).terminal_x
        expected = (up - down) / (2 * dv)
        assert terminal_sensitivity(double_well, 1.0, v0) == pytest.approx(expected, rel=1e-5)

    def test_short_transit_resolved(self, double_well):
        sol = solve_mptp(double_well, 1.0)
        assert resolved_by_shooting(double_well, 1.0, sol.v0, sol.path.n_steps)

    def test_hover_near_hilltop_unresolved(self, double_well):
        crit = np.polynomial.polynomial.polyroots(double_well.el_rhs_coeffs)
        hilltop = float(max(r.real for r in crit if abs(r.imag) < 1e-12))
        lift = path_potential(double_well, hilltop) - path_potential(double_well, -1.0)
        v0 = math.sqrt(2.0 * lift)
        assert not resolved_by_shooting(double_well, 10.0, v0, 10_000)


class TestRelaxation:
    def test_brownian_line(self, brownian):
        sol = relaxation_solution(brownian, 2.0)
        np.testing.assert_allclose(sol.path.values, sol.path.times / 2.0, atol=1e-9)
        assert sol.energy == pytest.approx(0.125, rel=1e-8)

    def test_agrees_with_shooting(self, double_well):
        shot = solve_mptp(double_well, 1.0)
        relaxed = relaxation_solution(double_well, 1.0, shot.path.n_steps)
        np.testing.assert_allclose(relaxed.path.values, shot.path.values, atol=1e-6)
        assert relaxed.om_action.total == pytest.approx(shot.om_action.total, rel=1e-6)
        assert relaxed.energy_conserved

    def test_reflected_about_midpoint(self, double_well):
        sol = relaxation_solution(double_well, 2.0)
        values = sol.path.values
        assert (values[0], values[-1]) == (-1.0, 1.0)
        np.testing.assert_allclose(values, -values[::-1], atol=1e-9)
        assert values[values.size // 2] == pytest.approx(0.0, abs=1e-8)


class TestDirectMinimizer:
    def test_brownian_line(self, brownian):
        path = direct_minimizer(brownian, 2.0, n_nodes=64)
        np.testing.assert_allclose(path.values, np.linspace(0.0, 1.0, 64), atol=1e-12)

    def test_node_floor(self, brownian):
        with pytest.raises(InputError):
            direct_minimizer(brownian, 1.0, n_nodes=16)


class TestEnergy:
    def test_brownian(self, brownian):
        assert energy_of_time(brownian, 0.5) == pytest.approx(2.0, rel=1e-10)

    @pytest.mark.parametrize("T", [0.5, 1.0, 1.5])
    def test_action_derivative_is_minus_energy(self, double_well, T):
        dT = 1e-3
        s_plus = solve_mptp(double_well, T + dT).om_action.total
        s_minus = solve_mptp(double_well, T - dT).om_action.total
        slope = (s_plus - s_minus) / (2 * dT)
        assert slope == pytest.approx(-energy_of_time(double_well, T), rel=1e-2)

    def test_transit_time_from_energy(self, double_well):
        solution = solve_mptp(double_well, 1.0)
        assert time_reparameterization(double_well, solution) == pytest.approx(1.0, rel=1e-2)

    def test_reparameterization_needs_monotone_path(self, brownian):
        solution = solve_mptp(brownian, 1.0)
        bent = dataclasses.replace(
            solution,
            path=dataclasses.replace(solution.path, values=np.sin(np.pi * solution.path.times)),
        )
        with pytest.raises(InputError):
            time_reparameterization(brownian, bent)


class TestActionCurve:
    def test_brownian(self, brownian):
        rows = action_vs_time(brownian, 0.5, [0.25, 0.5, 1.0])
        for row in rows:
            assert row.ok
            assert row.s_om == pytest.approx(1 / (2 * row.T), rel=1e-8)
            assert row.s_mom == pytest.approx(
                1 / (2 * row.T) + math.pi**2 * row.T / 2, rel=1e-8
            )
            assert row.energy == pytest.approx(1 / (2 * row.T**2), rel=1e-8)

    def test_om_action_decreases(self, double_well):
        rows = action_vs_time(double_well, 0.5, [0.5, 1.0, 2.0, 4.0])
        s = [row.s_om for row in rows]
        assert all(row.ok for row in rows)
        assert all(a > b for a, b in zip(s, s[1:]))

    def test_drifting_rows_flagged(self, double_well, monkeypatch):
        monkeypatch.setattr("omtube.variational.ENERGY_TOL", 0.0)
        (row,) = action_vs_time(double_well, 0.5, [1.0])
        assert not row.ok
        assert row.reason.startswith("energy drift")


class TestUniformBounds:
    def test_brownian(self, brownian):
        bounds = uniform_bound_diagnostics(brownian, [0.5, 1.0, 2.0], rho=0.7)
        assert bounds.n_solved == 3
        assert bounds.max_velocity == pytest.approx(1.0, rel=1e-8)
        assert bounds.max_acceleration == 0.0
        assert bounds.max_length == pytest.approx(1.0, rel=1e-8)
        assert bounds.el_rhs_hull_bound == 0.0

    def test_double_well_hull_dominates(self, double_well):
        bounds = uniform_bound_diagnostics(double_well, [0.5, 1.0], rho=0.1)
        assert bounds.n_solved == 2
        assert bounds.max_acceleration <= bounds.el_rhs_hull_bound + 1e-12
