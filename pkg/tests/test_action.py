from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from omtube.action import (
    ActionFunctional,
    ActionValue,
    evaluate_action,
    fw_action,
    fw_limit_gap,
    kappa_action,
    modified_om_action,
    om_action,
    tube_penalty,
)
from omtube.errors import InputError, PathTooShort
from omtube.model import DriftModel, SdeSystem
from omtube.simulate import Path


class TestActionValue:
    def test_total_is_sum_of_parts(self):
        v = ActionValue.from_parts(0.3, -0.1, 0.25)
        assert v.total == 0.3 + -0.1 + 0.25
        assert v.as_row() == (v.total, 0.3, -0.1, 0.25)


class TestKappaAction:
    def test_brownian_line(self, brownian, make_line):
        v = kappa_action(make_line(0.0, 1.0, 2.0), brownian, 0.5)
        assert v.kinetic_part == pytest.approx(0.25, rel=1e-12)
        assert v.total == pytest.approx(0.25, rel=1e-12)

    @pytest.mark.parametrize("T", [0.5, 1.0, 3.0])
    def test_double_well_rest_point(self, double_well, T):
        rest = Path(0.0, T / 100, np.full(101, -1.0))
        v = kappa_action(rest, double_well, 0.5)
        assert v.kinetic_part == pytest.approx(0.0, abs=1e-20)
        assert v.total == pytest.approx(-T, rel=1e-12)

    def test_om_is_kappa_half(self, double_well, make_line):
        psi = make_line(-1.0, 1.0, 1.3)
        assert om_action(psi, double_well) == kappa_action(psi, double_well, 0.5)

    def test_affine_in_kappa(self, double_well, make_line):
        psi = Path(0.0, 0.01, -1.0 + 2.0 * np.linspace(0, 1, 101) ** 2)
        s0, s_half, s1 = (kappa_action(psi, double_well, k).total for k in (0.0, 0.5, 1.0))
        assert s_half == pytest.approx(0.5 * (s0 + s1), rel=1e-12)
        slope = s1 - s0
        db = double_well.drift.db(psi.values)
        assert slope == pytest.approx(trapezoid(db, dx=psi.dt), rel=1e-12)

    def test_second_order_convergence(self, brownian):
        def kinetic(n: int) -> float:
            t = np.linspace(0.0, 1.0, n + 1)
            return kappa_action(Path(0.0, 1.0 / n, np.sin(t)), brownian, 0.5).total

        exact = 0.25 + math.sin(2.0) / 8
        e1, e2 = abs(kinetic(50) - exact), abs(kinetic(100) - exact)
        assert 3.0 < e1 / e2 < 5.0

    def test_additive_in_time(self, brownian):
        t = np.linspace(0.0, 1.0, 101)
        psi = Path(0.0, 0.01, t**2)
        whole = kappa_action(psi, brownian, 0.5).total
        first = kappa_action(Path(0.0, 0.01, psi.values[:51]), brownian, 0.5).total
        second = kappa_action(Path(0.5, 0.01, psi.values[50:]), brownian, 0.5).total
        assert whole == pytest.approx(first + second, rel=1e-12)

    def test_too_short(self, brownian):
        with pytest.raises(PathTooShort):
            kappa_action(Path(0.0, 0.1, [0.0, 1.0]), brownian, 0.5)

    def test_kappa_range(self, brownian, make_line):
        with pytest.raises(InputError):
            kappa_action(make_line(0.0, 1.0, 1.0), brownian, 1.5)


class TestModifiedAction:
    @pytest.mark.parametrize("T", [0.2, 1 / math.pi, 1.0])
    def test_brownian_closed_form(self, brownian, make_line, T):
        v = modified_om_action(make_line(0.0, 1.0, T), brownian, 0.5)
        assert v.total == pytest.approx(1 / (2 * T) + math.pi**2 * T / 2, rel=1e-12)
        assert v.tube_penalty == pytest.approx(math.pi**2 * T / 2)

    def test_infinite_tube_is_om(self, double_well, make_line):
        psi = make_line(-1.0, 1.0, 1.0)
        assert modified_om_action(psi, double_well, math.inf).total == om_action(
            psi, double_well
        ).total

    def test_increasing_past_minimizer(self, brownian, make_line):
        ts = np.linspace(0.4, 2.0, 10)
        values = [modified_om_action(make_line(0.0, 1.0, T), brownian, 0.5).total for T in ts]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_penalty_needs_positive_radius(self):
        with pytest.raises(InputError):
            tube_penalty(1.0, 0.0, 1.0)


class TestFreidlinWentzell:
    def test_brownian_line(self, brownian, make_line):
        assert fw_action(make_line(0.0, 1.0, 1.0), brownian) == pytest.approx(1.0)

    def test_deterministic_flow_is_free(self, ou):
        t = np.linspace(0.0, 1.0, 2001)
        relaxation = Path(0.0, t[1], np.exp(-t))
        assert fw_action(relaxation, ou) < 1e-10

    def test_small_noise_gap_scales_like_c_squared(self):
        t = np.linspace(0.0, 1.0, 401)
        psi = Path(0.0, t[1], -1.0 + 2.0 * t**2)
        gaps = []
        for c in (0.1, 0.05, 0.025):
            system = SdeSystem(DriftModel.from_preset("double-well"), c, 5.0, -1.0, 1.0)
            gaps.append(fw_limit_gap(psi, system, 0.5))
        for coarse, fine in zip(gaps, gaps[1:]):
            assert 4.0 / 1.5 <= coarse / fine <= 4.0 * 1.5


class TestEvaluateAction:
    def test_dispatch(self, double_well, make_line):
        psi = make_line(-1.0, 1.0, 1.0)
        assert evaluate_action(psi, double_well, "om") == om_action(psi, double_well)
        assert evaluate_action(psi, double_well, ActionFunctional.KAPPA, kappa=0.2) == (
            kappa_action(psi, double_well, 0.2)
        )
        mom = evaluate_action(psi, double_well, "mom", delta=0.5)
        assert mom == modified_om_action(psi, double_well, 0.5)
        fw = evaluate_action(psi, double_well, "fw")
        assert fw.total == fw.kinetic_part == fw_action(psi, double_well)

    def test_kappa_defaults_to_system(self, make_line):
        system = SdeSystem(
            DriftModel.from_preset("double-well"), 1.0, 5.0, -1.0, 1.0, kappa=0.3
        )
        psi = make_line(-1.0, 1.0, 1.0)
        assert evaluate_action(psi, system, "kappa") == kappa_action(psi, system, 0.3)

    def test_modified_needs_radius(self, double_well, make_line):
        with pytest.raises(InputError):
            evaluate_action(make_line(-1.0, 1.0, 1.0), double_well, "mom")
