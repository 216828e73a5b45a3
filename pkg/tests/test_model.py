from __future__ import annotations

import math

import numpy as np
import pytest

from omtube.errors import (
    BadNoise,
    DomainTooSmall,
    InputError,
    InvalidTube,
    MetastabilityViolation,
)
from omtube.model import (
    DriftModel,
    SdeSystem,
    TubeSpec,
    check_tube,
    drift_eval,
    el_rhs_value,
    horner,
    interval_abs_sup,
    path_potential,
    validate_system,
)


class TestDriftModel:
    def test_double_well_at_stable_state(self):
        ev = drift_eval(DriftModel.from_preset("double-well"), 1.0)
        assert (ev.b, ev.db, ev.d2b) == (0.0, -2.0, -6.0)
        assert ev.antiderivative == pytest.approx(0.25)

    def test_double_well_at_saddle(self):
        ev = drift_eval(DriftModel.from_preset("double-well"), 0.0)
        assert (ev.b, ev.db, ev.d2b) == (0.0, 1.0, 0.0)

    def test_brownian_is_zero(self):
        ev = drift_eval(DriftModel.from_preset("brownian"), 3.7)
        assert tuple(ev) == (0.0, 0.0, 0.0, 0.0)

    def test_ou_rate(self):
        model = DriftModel.from_preset("ou", theta=2.5)
        assert model.b(2.0) == pytest.approx(-5.0)
        assert model.db(0.3) == pytest.approx(-2.5)

    def test_antiderivative_origin(self):
        model = DriftModel.from_preset("double-well")
        ev = drift_eval(model, 1.0, origin=-1.0)
        assert ev.antiderivative == pytest.approx(0.0, abs=1e-15)

    def test_system_binds_antiderivative_to_x0(self, double_well):
        ev = double_well.drift_eval(1.0)
        assert ev.antiderivative == pytest.approx(0.0, abs=1e-15)
        assert ev.db == -2.0

    def test_non_finite_point_rejected(self):
        with pytest.raises(InputError):
            drift_eval(DriftModel.from_preset("double-well"), math.nan)

    def test_degree_limit(self):
        with pytest.raises(InputError):
            DriftModel(tuple(range(12)))

    def test_horner_accepts_arrays(self):
        xs = np.linspace(-2, 2, 7)
        np.testing.assert_allclose(horner((0.0, 1.0, 0.0, -1.0), xs), xs - xs**3)

    def test_derivatives_match_finite_differences(self):
        model = DriftModel((0.3, -1.2, 0.5, 0.7, -0.2))
        xs = np.linspace(-3, 3, 61)
        h = 1e-5
        fd1 = (model.b(xs + h) - model.b(xs - h)) / (2 * h)
        fd2 = (model.db(xs + h) - model.db(xs - h)) / (2 * h)
        np.testing.assert_allclose(model.db(xs), fd1, rtol=1e-7, atol=1e-6)
        np.testing.assert_allclose(model.d2b(xs), fd2, rtol=1e-7, atol=1e-6)


class TestValidation:
    def test_double_well_valid(self, double_well):
        assert validate_system(double_well) is double_well

    def test_idempotent(self, double_well):
        assert validate_system(validate_system(double_well)) == double_well

    def test_brownian_admitted(self, brownian):
        assert validate_system(brownian) is brownian

    def test_non_root_start(self):
        system = SdeSystem(DriftModel.from_preset("double-well"), 1.0, 5.0, 0.5, 1.0)
        with pytest.raises(MetastabilityViolation):
            validate_system(system)

    def test_non_positive_noise(self):
        system = SdeSystem(DriftModel.from_preset("double-well"), 0.0, 5.0, -1.0, 1.0)
        with pytest.raises(BadNoise):
            validate_system(system)

    def test_domain_must_contain_span(self):
        system = SdeSystem(DriftModel.from_preset("double-well"), 1.0, 2.0, -1.0, 1.0)
        with pytest.raises(DomainTooSmall):
            validate_system(system)

    def test_kappa_range(self):
        system = SdeSystem(
            DriftModel.from_preset("double-well"), 1.0, 5.0, -1.0, 1.0, kappa=1.5
        )
        with pytest.raises(InputError):
            validate_system(system)

    def test_errors_carry_exit_code(self):
        assert MetastabilityViolation.exit_code == 2


class TestTube:
    def test_valid_radius(self, double_well):
        assert TubeSpec.for_system(double_well, 0.5).delta == 0.5

    @pytest.mark.parametrize("delta", [0.0, -0.1, 2.0, 3.0, math.inf])
    def test_invalid_radius(self, double_well, delta):
        with pytest.raises(InvalidTube):
            check_tube(double_well, delta)


class TestPathPotential:
    def test_double_well_values(self, double_well):
        assert path_potential(double_well, 0.0) == pytest.approx(-0.5)
        assert path_potential(double_well, 1.0) == pytest.approx(1.0)

    def test_brownian_flat(self, brownian):
        assert path_potential(brownian, 2.3) == 0.0

    def test_gradient_is_euler_lagrange_rhs(self):
        system = SdeSystem(DriftModel.from_preset("double-well"), 0.7, 5.0, -1.0, 1.0)
        xs = np.linspace(-2, 2, 81)
        h = 1e-5
        grad = (path_potential(system, xs + h) - path_potential(system, xs - h)) / (2 * h)
        np.testing.assert_allclose(-grad, el_rhs_value(system, xs), atol=1e-6)

    def test_non_finite(self, double_well):
        with pytest.raises(InputError):
            path_potential(double_well, math.inf)


class TestSymmetry:
    def test_double_well_is_symmetric(self, double_well):
        assert double_well.midpoint == 0.0
        assert double_well.el_flow_symmetric

    def test_brownian_is_symmetric(self, brownian):
        assert brownian.el_flow_symmetric

    def test_ou_is_not(self, ou):
        assert not ou.el_flow_symmetric

    def test_off_centre_double_well_is_not(self):
        system = SdeSystem(DriftModel.from_preset("double-well"), 1.0, 5.0, 0.0, 1.0)
        assert not system.el_flow_symmetric

    def test_slope_coefficients(self, double_well):
        xs = np.linspace(-1.5, 1.5, 31)
        h = 1e-6
        slope = (el_rhs_value(double_well, xs + h) - el_rhs_value(double_well, xs - h)) / (2 * h)
        np.testing.assert_allclose(
            horner(double_well.el_rhs_slope_coeffs, xs), slope, rtol=1e-6, atol=1e-6
        )


class TestIntervalSup:
    def test_linear_curvature(self):
        # b'' of x - x^3 is -6x
        assert interval_abs_sup((0.0, -6.0), -1.5, 1.5) == pytest.approx(9.0)

    def test_interior_extremum(self):
        # x - x^3 peaks at 1/sqrt(3) inside [0, 1]
        peak = 1 / math.sqrt(3) - (1 / math.sqrt(3)) ** 3
        assert interval_abs_sup((0.0, 1.0, 0.0, -1.0), 0.0, 1.0) == pytest.approx(peak)

    def test_constant(self):
        assert interval_abs_sup((0.0,), -3.0, 3.0) == 0.0
