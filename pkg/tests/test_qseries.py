"""
Tests for q-Pochhammer symbols, 2phi1 and the classical identities.

Exact expectations are worked out by hand with Fractions at q = 1/2.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmunu.qseries import (
    CompensatedSum,
    identity_a,
    identity_expansion,
    identity_q_gauss_degenerate,
    identity_suite,
    phi21,
    q_number,
    qbinomial,
    qfactorial,
    qpoch,
    qpoch_inf,
    qpoch_inf_log,
    qpoch_log,
    terminating_index,
    validate_q,
)
from qmunu.utils.exceptions import DivergenceError, DomainError, PoleError

HALF = Fraction(1, 2)

rationals = st.fractions(min_value=Fraction(-3), max_value=Fraction(3), max_denominator=12)
nomes = st.fractions(min_value=Fraction(0), max_value=Fraction(9, 10), max_denominator=12)


class TestQPochhammer:
    """Finite and infinite products."""

    def test_empty_product(self):
        """(a;q)_0 = 1 for any a."""
        assert qpoch(Fraction(7, 3), HALF, 0) == 1

    def test_exact_value(self):
        """(1/2;1/2)_2 = (1/2)(3/4)."""
        assert qpoch(HALF, HALF, 2) == Fraction(3, 8)

    def test_vanishing_factor(self):
        """(q^{-1};q)_2 has the factor 1 - q^{-1} q = 0."""
        assert qpoch(Fraction(2), HALF, 2) == 0

    def test_negative_n_rejected(self):
        with pytest.raises(DomainError):
            qpoch(0.3, 0.5, -1)

    def test_complex_input(self):
        value = qpoch(0.5j, 0.5, 3)
        expected = (1 - 0.5j) * (1 - 0.25j) * (1 - 0.125j)
        assert abs(value - expected) < 1e-15

    def test_array_input(self):
        a = np.array([0.0, 0.3, 0.5])
        values = qpoch(a, 0.5, 4)
        assert values.shape == (3,)
        assert values[0] == 1.0

    def test_infinite_matches_long_finite(self):
        """(a;q)_inf agrees with a 200-factor product."""
        assert abs(qpoch_inf(0.3, 0.5) - qpoch(0.3, 0.5, 200)) < 1e-14

    def test_infinite_at_q_zero(self):
        assert qpoch_inf(0.3, 0.0) == pytest.approx(0.7)

    def test_infinite_array(self):
        a = np.array([0.1, -0.4 + 0.2j])
        values = qpoch_inf(a, 0.6)
        for i, point in enumerate(a):
            assert abs(values[i] - qpoch_inf(complex(point), 0.6)) < 1e-14

    def test_log_sign(self):
        """(3;1/2)_4 = (-2)(-1/2)(1/4)(5/8) = 5/32."""
        log_abs, sign = qpoch_log(3.0, 0.5, 4)
        assert sign == 1
        assert math.exp(log_abs) == pytest.approx(0.15625)

    def test_log_zero_factor(self):
        assert qpoch_log(2.0, 0.5, 3) == (-math.inf, 0)

    @pytest.mark.parametrize("a, q", [(0.3, 0.5), (-0.4, 0.2), (0.9, 0.0)])
    def test_infinite_log(self, a, q):
        assert qpoch_inf_log(a, q) == pytest.approx(math.log(qpoch_inf(a, q)), abs=1e-13)

    def test_infinite_log_past_underflow(self):
        """(0.99; 0.999)_inf is below the smallest double, its logarithm is not."""
        assert qpoch_inf(0.99, 0.999) == 0.0
        assert -2000 < qpoch_inf_log(0.99, 0.999) < -1000

    def test_infinite_log_needs_a_below_one(self):
        with pytest.raises(DomainError):
            qpoch_inf_log(1.0, 0.5)


class TestCompensatedSum:
    def test_small_addends(self):
        total = CompensatedSum(1.0)
        for _ in range(10_000):
            total.add(1e-16)
        assert total.value == pytest.approx(1 + 1e-12, rel=0, abs=1e-15)

    def test_cancellation(self):
        total = CompensatedSum()
        for value in (1e16, 1.0, -1e16):
            total.add(value)
        assert total.value == 1.0


class TestQNumbers:
    """q-integers, q-factorials and Gaussian binomials."""

    def test_q_number(self):
        assert q_number(3, HALF) == Fraction(7, 4)

    def test_q_number_zero(self):
        assert q_number(0, HALF) == 0

    def test_qfactorial(self):
        """3_q! = 1 * 3/2 * 7/4 at q = 1/2."""
        assert qfactorial(3, HALF) == Fraction(21, 8)

    def test_qfactorial_q_zero(self):
        assert qfactorial(5, 0) == 1

    def test_qfactorial_negative(self):
        with pytest.raises(DomainError):
            qfactorial(-1, HALF)

    def test_qbinomial(self):
        """[4 choose 2]_{1/2} = 35/16."""
        assert qbinomial(4, 2, HALF) == Fraction(35, 16)

    def test_qbinomial_outside_range(self):
        assert qbinomial(3, 5, HALF) == 0

    def test_qbinomial_symmetry(self):
        for m in range(7):
            for j in range(m + 1):
                assert qbinomial(m, j, HALF) == qbinomial(m, m - j, HALF)


class TestNomeValidation:
    @pytest.mark.parametrize("q", [-0.1, 1.0, 1.5, 0.5j])
    def test_rejected(self, q):
        with pytest.raises(DomainError):
            validate_q(q)

    @pytest.mark.parametrize("q", [0, 0.0, 0.99, HALF])
    def test_accepted(self, q):
        validate_q(q)


class TestPhi21:
    """Basic hypergeometric series evaluation."""

    def test_zero_argument(self):
        assert phi21(0.3, 0.2, 0.5, 0.4, 0.0) == 1.0

    def test_terminating_index(self):
        assert terminating_index(Fraction(8), HALF) == 3
        assert terminating_index(Fraction(3), HALF) is None
        assert terminating_index(1, HALF) == 0

    def test_terminating_exact(self):
        """2phi1(q^{-1}, b; c; q, z) = 1 + (1 - q^{-1})(1 - b) z / ((1 - c)(1 - q))."""
        b, c, z = Fraction(1, 3), Fraction(1, 5), Fraction(2)
        expected = 1 + (1 - 2) * (1 - b) * z / ((1 - c) * (1 - HALF))
        assert phi21(Fraction(2), b, c, HALF, z) == expected

    def test_divergent(self):
        with pytest.raises(DivergenceError):
            phi21(0.3, 0.2, 0.5, 0.4, 1.2)

    def test_pole(self):
        """c = q^{-1} makes (c;q)_2 vanish."""
        with pytest.raises(PoleError):
            phi21(0.3, 0.2, 2.0, 0.5, 0.5)

    def test_q_binomial_theorem(self):
        """2phi1(a, 0; 0; q, z) = (az;q)_inf / (z;q)_inf."""
        value = phi21(0.3, 0.0, 0.0, 0.5, 0.4)
        expected = qpoch_inf(0.12, 0.5) / qpoch_inf(0.4, 0.5)
        assert abs(value - expected) < 1e-12


class TestIdentities:
    """Classical identities, exact and in floating point."""

    @given(a=rationals, q=nomes, y=st.integers(min_value=0, max_value=8))
    def test_expansion_exact(self, a, q, y):
        assert identity_expansion(a, q, y) == 0

    @given(
        b=rationals.filter(lambda v: v != 0),
        c=rationals,
        q=nomes.filter(lambda v: v != 0),
        n=st.integers(min_value=0, max_value=6),
    )
    def test_degenerate_q_gauss_exact(self, b, c, q, n):
        try:
            assert identity_q_gauss_degenerate(n, b, c, q) == 0
        except DomainError:
            pass

    @given(
        a=st.floats(min_value=-2, max_value=2, allow_nan=False),
        q=st.floats(min_value=0, max_value=0.9),
        n=st.integers(min_value=0, max_value=10),
    )
    @settings(max_examples=200)
    def test_identity_a_float(self, a, q, n):
        assert identity_a(a, q, n) < 1e-12

    def test_suite_exact_points(self):
        points = [
            (Fraction(1, 3), Fraction(1, 4), Fraction(1, 8), 3, 1),
            (Fraction(-2, 3), Fraction(1, 2), Fraction(1, 10), 5, 2),
            (Fraction(3, 2), Fraction(2, 3), Fraction(1, 5), 4, 4),
        ]
        report = identity_suite(HALF, points)
        for name in ("pochhammer_recursion", "B", "C", "q_gauss_degenerate", "expansion"):
            assert report.max_residual[name] == 0
        assert report.passed(1e-12)

    def test_suite_records_rejections(self):
        """a = 0 violates the preconditions of (B) and (C) only."""
        report = identity_suite(0.5, [(0.0, 0.3, 0.2, 3, 1)])
        rejected = {entry["identity"] for entry in report.rejected}
        assert {"B", "C"} <= rejected
        assert "expansion" in report.checked

    def test_suite_to_dict(self):
        report = identity_suite(0.5, [(0.3, 0.4, 0.1, 2, 1)])
        data = report.to_dict()
        assert set(data) == {"max_residual", "checked", "rejected"}
