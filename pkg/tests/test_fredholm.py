"""
Tests for the Fredholm determinant formulas, the moment series, moment
inversion and the continuous-time degeneration.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from qmunu.chains import ParamSchedule
from qmunu.fredholm import (
    KernelConfig,
    cauchy_config,
    det_cauchy,
    det_mb,
    g_eval,
    g_ratio,
    invert_distribution,
    laplace_series_oracle,
    mb_config,
    mb_radius,
    mhadp_g_limit,
    mhadp_g_limit_check,
    mhadp_params,
    support_cap_for,
    validate_config,
)
from qmunu.qdist import INFINITY, ModelParams, phi_pmf
from qmunu.qseries import qpoch_inf
from qmunu.utils.exceptions import (
    ConfigError,
    DomainError,
    IllConditionedError,
    PoleProximityError,
)


def one_step_transform(zeta, p):
    """E[1/(zeta q^J; q)_inf] for one free jump J ~ phi(.|inf), summed directly."""
    total = 0j
    for j in range(200):
        weight = phi_pmf(j, INFINITY, p)
        total += weight / qpoch_inf(zeta * p.q**j, p.q)
        if weight < 1e-18:
            break
    return total


class TestG:
    """The function g(w) and its q-shift ratio."""

    def test_trivial(self):
        assert g_eval(0.5, 0, 0, ModelParams(0.5, 0.4, 0.0)) == 1.0

    def test_origin(self, float_params):
        assert abs(g_eval(0.0, 3, 4, float_params) - 1) < 1e-15

    def test_ratio(self, float_params):
        w = 0.3 + 0.2j
        direct = g_eval(w, 2, 3, float_params) / g_eval(float_params.q * w, 2, 3, float_params)
        assert abs(g_ratio(w, 2, 3, float_params) - direct) < 1e-12

    def test_mu_sequence(self, float_params):
        """A constant sequence gives the same value as the horizon."""
        w = -0.4 + 0.1j
        assert abs(g_eval(w, 1, (0.4,) * 5, float_params) - g_eval(w, 1, 5, float_params)) < 1e-14

    def test_array(self, float_params):
        w = np.array([0.1, -0.2j, 0.5 + 0.5j])
        values = g_eval(w, 2, 2, float_params)
        assert values.shape == (3,)
        assert abs(values[1] - g_eval(-0.2j, 2, 2, float_params)) < 1e-14

    @pytest.mark.parametrize("w", [1.0, 2.0 + 1e-12j])
    def test_pole_guard(self, float_params, w):
        with pytest.raises(PoleProximityError):
            g_eval(w, 1, 0, float_params)


class TestConfigs:
    """Contour constraints of the two kernels."""

    def test_mb_radius(self):
        expected = 0.5 * (1 - math.sqrt(0.5)) / (1 + math.sqrt(0.5))
        assert mb_radius(0.5, 0.1) == pytest.approx(expected)

    def test_mb_config_valid(self, float_params):
        cfg = mb_config(-0.2, 1, 1, float_params)
        validate_config(cfg, float_params)
        assert cfg.s_step > 0 and cfg.s_half_width >= 1

    def test_cauchy_config_valid(self, float_params):
        cfg = cauchy_config(0.2j, float_params)
        validate_config(cfg, float_params)
        assert cfg.center == 0.5 and cfg.radius == 1.0

    def test_cauchy_radius_with_large_nu(self):
        """1/nu - 1 = 1/2 at nu = 2/3 keeps 1/nu outside."""
        p = ModelParams(0.5, 0.7, 2 / 3)
        cfg = cauchy_config(-0.1, p)
        assert cfg.radius == pytest.approx(0.75)
        validate_config(cfg, p)

    @pytest.mark.parametrize("zeta", [0.2, 1.0 + 0j])
    def test_positive_zeta(self, float_params, zeta):
        with pytest.raises(ConfigError):
            cauchy_config(zeta, float_params)
        with pytest.raises(ConfigError):
            mb_config(zeta, 1, 1, float_params)

    def test_mb_needs_q(self):
        with pytest.raises(ConfigError):
            mb_config(-0.1, 1, 1, ModelParams(0.0, 0.4, 0.1))

    def test_cauchy_circle_missing_origin(self, float_params):
        with pytest.raises(ConfigError):
            validate_config(KernelConfig("cauchy", -0.1 + 0j, 0.5, 0.4, 64), float_params)

    def test_mb_circle_too_large(self, float_params):
        with pytest.raises(ConfigError):
            validate_config(KernelConfig("mb", -0.1 + 0j, 1.0, 0.3, 64, 5.0, 0.1), float_params)

    def test_unknown_kind(self, float_params):
        with pytest.raises(ConfigError):
            validate_config(KernelConfig("other", -0.1 + 0j, 1.0, 0.05, 64), float_params)


class TestDeterminants:
    """Both determinants against each other and against direct sums."""

    def test_zero_zeta(self, float_params):
        assert det_mb(0, 2, 2, float_params).value == 1

    @pytest.mark.parametrize("zeta", [-0.2, 0.2j, -0.1 - 0.1j])
    def test_one_step_first_particle(self, float_params, zeta):
        expected = one_step_transform(zeta, float_params)
        assert abs(det_mb(zeta, 1, 1, float_params).value - expected) < 1e-7
        assert abs(det_cauchy(zeta, 1, 1, float_params).value - expected) < 1e-7

    @pytest.mark.parametrize("params", [(0.5, 0.4, 0.1), (0.3, 0.6, 0.25)])
    def test_agreement_with_series(self, params):
        p = ModelParams(*params)
        series = laplace_series_oracle(-0.2, 2, 2, ParamSchedule(p))
        assert abs(det_mb(-0.2, 2, 2, p).value - series) < 1e-7
        assert abs(det_cauchy(-0.2, 2, 2, p).value - series) < 1e-7

    def test_small_zeta(self, float_params):
        assert abs(det_mb(-1e-6, 2, 2, float_params).value - 1) < 1e-5

    def test_result_history(self, float_params):
        result = det_cauchy(-0.1, 1, 1, float_params)
        assert result.history[-1] == result.value
        assert result.change < 1e-10
        assert result.to_dict()["config"]["kind"] == "cauchy"

    @pytest.mark.parametrize("nodes", [16, 32])
    def test_starting_nodes(self, float_params, nodes):
        result = det_cauchy(-0.1, 1, 1, float_params, nodes=nodes)
        assert result.nodes == nodes * 2 ** (len(result.history) - 1)
        mb = det_mb(-0.1, 1, 1, float_params, nodes=nodes)
        assert mb.nodes == nodes * 2 ** (len(mb.history) - 1)
        assert abs(mb.value - result.value) < 1e-7


class TestSeries:
    def test_zero(self, float_params):
        assert laplace_series_oracle(0, 2, 3, ParamSchedule(float_params)) == 1

    def test_one_step(self, float_params):
        zeta = -0.3 + 0.1j
        value = laplace_series_oracle(zeta, 1, 1, ParamSchedule(float_params))
        assert abs(value - one_step_transform(zeta, float_params)) < 1e-10


class TestInversion:
    """Recovering the law of x_n(t) + n from its q-moments."""

    def test_support_cap_at_time_zero(self, exact_params):
        assert support_cap_for(0, ParamSchedule(exact_params)) == (0, 0.0)

    def test_point_mass(self, exact_params):
        result = invert_distribution(2, 0, ParamSchedule(exact_params))
        assert result.pmf == [1]
        assert result.mass_defect == 0

    def test_one_step(self, exact_params):
        result = invert_distribution(1, 1, ParamSchedule(exact_params))
        p = exact_params.as_float()
        for j, value in enumerate(result.pmf):
            assert abs(float(value) - phi_pmf(j, INFINITY, p)) < 1e-9
        assert result.min_probability > -1e-9
        assert result.neglected_mass < 1e-12

    def test_explicit_cap(self, exact_params):
        result = invert_distribution(1, 1, ParamSchedule(exact_params), support_cap=4)
        assert len(result.pmf) == 5
        assert all(isinstance(value, Fraction) for value in result.pmf)

    def test_second_particle(self, exact_params):
        """x_2(1) + 2 is the jump of a particle with support 0, i.e. always 0."""
        result = invert_distribution(2, 1, ParamSchedule(exact_params))
        assert abs(float(result.pmf[0]) - 1) < 1e-9

    def test_float_mode(self, exact_params):
        result = invert_distribution(1, 0, ParamSchedule(exact_params.as_float()), support_cap=3, exact=False)
        assert np.allclose(result.pmf, [1, 0, 0, 0], atol=1e-10)

    def test_float_ill_conditioned(self, exact_params):
        with pytest.raises(IllConditionedError):
            invert_distribution(1, 1, ParamSchedule(exact_params.as_float()), support_cap=40, exact=False)

    def test_exact_needs_rationals(self, float_params):
        with pytest.raises(DomainError):
            invert_distribution(1, 1, ParamSchedule(float_params))

    def test_needs_positive_q(self):
        p = ModelParams(Fraction(0), Fraction(1, 2), Fraction(1, 4))
        with pytest.raises(DomainError):
            invert_distribution(1, 1, ParamSchedule(p))


class TestDegeneration:
    """mu = q, nu = (q - eps)/(1 - eps), t = tau/eps as eps -> 0."""

    def test_params(self):
        p = mhadp_params(0.3, 0.01)
        assert p.mu == 0.3
        assert p.nu == pytest.approx(0.29 / 0.99)

    def test_limit_at_origin(self):
        assert mhadp_g_limit(0j, 2, 1.0, 0.5) == 1

    @pytest.mark.parametrize("q, w", [(0.5, 0.3), (0.3, 0.2 + 0.2j), (0.5, -0.5)])
    def test_linear_rate(self, q, w):
        report = mhadp_g_limit_check(w, 2, 1.0, q, (1e-2, 1e-3, 1e-4))
        for residuals in list(report.rate_residuals.values()) + [report.g_residuals]:
            for factor in report.decrease_factors(residuals):
                assert 7 <= factor <= 13

    def test_origin_residuals_vanish(self):
        report = mhadp_g_limit_check(0j, 2, 1.0, 0.5, (1e-2, 1e-3))
        assert max(report.g_residuals) <= 1e-14
        assert set(report.to_dict()) == {"eps", "g_residuals", "g_factors", "rate_residuals", "rate_factors"}
