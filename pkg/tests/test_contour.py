"""Tests for the nested contour integral formula and its planner."""

from fractions import Fraction

import pytest

from qmunu.chains import ParamSchedule
from qmunu.contour import (
    ContourSpec,
    ObservableSpec,
    check_boundary,
    check_feasible,
    check_free_evolution,
    contours_from_radii,
    convergence_ratios,
    nodes_for_ratio,
    plan_contours,
    qmoment_contour,
    qmoment_contour_batch,
    radius_recursion,
)
from qmunu.exact import qmoment_oracle
from qmunu.qdist import ModelParams
from qmunu.utils.exceptions import ContourInfeasible, DomainError, ScheduleError


class TestPlanning:
    """Radius recursion, feasibility and node estimates."""

    def test_recursion(self):
        assert radius_recursion(3, 0.5, 0.1, 0.01) == pytest.approx((0.79, 0.56, 0.1))

    def test_feasible(self):
        check_feasible((0.9, 0.3), 0.5, 0.1)

    def test_circle_reaches_one_over_nu(self):
        """At nu = 0.6 every radius must stay below 1/nu - 1 = 2/3."""
        with pytest.raises(ContourInfeasible, match="circle 1"):
            check_feasible((0.7,), 0.5, 0.6)

    def test_nesting_violated(self):
        with pytest.raises(ContourInfeasible, match="q \\* circle 2"):
            check_feasible((0.3, 0.9), 0.5, 0.1)

    def test_user_radii(self):
        spec = contours_from_radii([0.9, 0.3], 0.5, 0.1, nodes=63)
        assert spec.nodes == (64, 64)
        with pytest.raises(ContourInfeasible):
            contours_from_radii([0.3, 0.9], 0.5, 0.1)

    def test_plan_is_feasible(self):
        spec = plan_contours(3, 0.5, 0.2)
        check_feasible(spec.radii, 0.5, 0.2, spec.delta)
        assert all(ratio < 1 for ratio in convergence_ratios(spec.radii, 0.5, 0.2))

    def test_plan_fixed_pair(self):
        spec = plan_contours(2, 0.5, 0.1, delta=0.01, eps=0.2, nodes=100)
        assert spec.radii == pytest.approx((0.61, 0.2))
        assert spec.nodes == (100, 100)

    def test_plan_infeasible(self):
        """With 1/nu - 1 = 1/9 no circle can contain q gamma_2 at q = 0.3."""
        with pytest.raises(ContourInfeasible):
            plan_contours(2, 0.3, 0.9)

    def test_nodes_for_ratio(self):
        assert nodes_for_ratio(0.5, 1e-10) == 38
        assert nodes_for_ratio(0.0, 1e-10) == 32
        with pytest.raises(ContourInfeasible):
            nodes_for_ratio(1.0, 1e-10)

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            ContourSpec((0.5,), (31,))
        with pytest.raises(DomainError):
            ContourSpec((0.5, 0.2), (32,))


class TestObservableSpec:
    def test_negative_horizon(self):
        with pytest.raises(DomainError):
            ObservableSpec((1,), -1)

    def test_short_schedule(self):
        with pytest.raises(ScheduleError):
            ObservableSpec((1,), 3, mu_schedule=(0.4, 0.3))

    def test_schedule_below_nu(self, float_params):
        with pytest.raises(ScheduleError):
            ObservableSpec((1,), 1, mu_schedule=(0.05,)).mus(float_params)


class TestQMoments:
    """Contour values against the exact oracle."""

    def test_time_zero(self, float_params):
        assert abs(qmoment_contour(ObservableSpec((1,), 0), float_params).value - 1) < 1e-10
        assert abs(qmoment_contour(ObservableSpec((2, 2), 0), float_params).value - 1) < 1e-9

    def test_one_step(self):
        p = ModelParams(1 / 3, 0.5, 0.2)
        result = qmoment_contour(ObservableSpec((1,), 1), p)
        assert abs(result.value - 0.625) < 1e-10
        assert result.imag_residual < 1e-10

    @pytest.mark.parametrize("nvec, t", [((2,), 3), ((2, 1), 2), ((3, 3), 2), ((2, 2), 4)])
    def test_against_oracle(self, exact_params, nvec, t):
        expected = float(qmoment_oracle(nvec, t, ParamSchedule(exact_params)))
        result = qmoment_contour(ObservableSpec(nvec, t), exact_params.as_float())
        assert abs(result.value.real - expected) < 1e-8 * max(1.0, abs(expected))

    def test_three_variables(self, exact_params):
        expected = float(qmoment_oracle((2, 2, 1), 1, ParamSchedule(exact_params)))
        result = qmoment_contour(ObservableSpec((2, 2, 1), 1), exact_params.as_float(), tol=1e-9)
        assert abs(result.value.real - expected) < 1e-7

    def test_time_dependent_mu(self, exact_params):
        schedule = (Fraction(2, 5), Fraction(1, 5), Fraction(3, 10))
        expected = float(qmoment_oracle((2, 1), 3, ParamSchedule(exact_params, mu_schedule=schedule)))
        obs = ObservableSpec((2, 1), 3, mu_schedule=tuple(float(m) for m in schedule))
        assert abs(qmoment_contour(obs, exact_params.as_float()).value.real - expected) < 1e-8

    def test_user_circles(self, exact_params):
        p = exact_params.as_float()
        spec = contours_from_radii([0.9, 0.4], p.q, p.nu, nodes=128)
        expected = float(qmoment_oracle((2, 1), 2, ParamSchedule(exact_params)))
        assert abs(qmoment_contour(ObservableSpec((2, 1), 2), p, spec).value.real - expected) < 1e-8

    def test_batch_matches_single(self, float_params):
        observables = [ObservableSpec((2, 1), 1), ObservableSpec((2, 2), 3), ObservableSpec((1, 1), 2)]
        batch = qmoment_contour_batch(observables, float_params)
        for obs, result in zip(observables, batch):
            single = qmoment_contour(obs, float_params)
            assert abs(result.value - single.value) < 1e-9

    def test_empty_batch(self, float_params):
        assert qmoment_contour_batch([], float_params) == []

    def test_result_dict(self, float_params):
        data = qmoment_contour(ObservableSpec((1,), 2), float_params).to_dict()
        assert set(data) == {"value", "imag_residual", "nodes", "refinement_delta", "doublings"}


class TestSystemIdentities:
    """The contour solution solves the free evolution and the two-body boundary condition."""

    @pytest.mark.parametrize("nvec, t", [((1,), 0), ((2, 1), 1), ((3, 2), 2)])
    def test_free_evolution(self, float_params, nvec, t):
        assert check_free_evolution(ObservableSpec(nvec, t), float_params) < 1e-8

    @pytest.mark.parametrize("nvec, t", [((2, 2), 1), ((3, 3), 2)])
    def test_boundary(self, float_params, nvec, t):
        assert check_boundary(ObservableSpec(nvec, t), float_params) < 1e-8

    def test_boundary_needs_equal_pair(self, float_params):
        with pytest.raises(DomainError):
            check_boundary(ObservableSpec((3, 1), 1), float_params)
