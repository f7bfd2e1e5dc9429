"""Tests for the suite machinery and small runs of the verification suites."""

from fractions import Fraction

import pytest

from qmunu.suites import (
    DEFAULT_SUITES,
    SUITES,
    BaseSuite,
    BinexpSuite,
    DegenerationSuite,
    DistSuite,
    IntertwineSuite,
    QSeriesSuite,
    RecoverySuite,
    SuiteReport,
)
from qmunu.suites.agreement import AgreementSuite
from qmunu.suites.base import rational, rational_grid
from qmunu.suites.evolution import EvolutionSuite
from qmunu.suites.fredholm import FredholmSuite


class SquareSuite(BaseSuite):
    """Minimal suite: case i has residual i^2, case 3 errors and case 4 is skipped."""

    def __init__(self, config):
        super().__init__(config)
        self.name = "square"

    def _get_all_cases(self):
        return [{"id": i, "_hidden": object()} for i in range(6)]

    def process(self, case):
        if case["id"] == 3:
            return "square case 3: failed"
        if case["id"] == 4:
            return None
        return self._result(case, case["id"] ** 2, threshold=10)


class EmptySuite(SquareSuite):
    def _get_all_cases(self):
        return []


class TestBase:
    """Case collection, ordering and the report."""

    def test_rational(self):
        assert rational(0.4) == Fraction(2, 5)
        assert rational(Fraction(1, 3)) == Fraction(1, 3)

    def test_grid_puts_configured_triple_first(self, settings):
        grid = rational_grid(settings, [("1/2", "2/5", "1/10"), ("2/5", "1/2", "1/10")])
        assert (grid[0].q, grid[0].mu, grid[0].nu) == (Fraction(2, 5), Fraction(1, 2), Fraction(1, 10))
        # the second extra triple repeats the configured one
        assert len(grid) == 2

    def test_run(self, settings):
        report = SquareSuite(settings).run()
        assert [case["id"] for case in report.cases] == [0, 1, 2, 5]
        assert report.errors == ["square case 3: failed"]
        assert report.max_residual == 25.0
        assert [case["id"] for case in report.failures] == [5]
        assert not report.passed
        assert all("_hidden" not in case for case in report.cases)

    def test_empty(self, settings):
        report = EmptySuite(settings).run()
        assert report.passed
        assert report.max_residual == 0.0

    def test_report_dict(self):
        report = SuiteReport("demo", cases=[{"id": 0, "residual": 0.5, "passed": True}])
        data = report.to_dict()
        assert data["passed"] and data["case_count"] == 1 and data["failures"] == 0

    def test_registry(self):
        assert set(DEFAULT_SUITES) <= set(SUITES)
        assert SUITES["qseries"] is QSeriesSuite


class TestSuiteRuns:
    """The cheaper suites pass on the default configuration."""

    def test_qseries(self, settings):
        report = QSeriesSuite(settings).run()
        assert report.passed, report.to_dict()["failures"]
        assert len(report.cases) == 10

    def test_dist(self, settings):
        report = DistSuite(settings).run()
        assert report.passed
        assert all(case["residual"] == 0 for case in report.cases if case["check"] == "duality")

    def test_degeneration(self, settings):
        report = DegenerationSuite(settings).run()
        assert report.passed


@pytest.mark.slow
class TestSlowSuiteRuns:
    """Suites with large exact state spaces or many quadrature grids."""

    def test_binexp(self, settings):
        assert BinexpSuite(settings).run().passed

    def test_intertwine(self, settings):
        assert IntertwineSuite(settings).run().passed

    def test_evolution(self, settings):
        assert EvolutionSuite(settings).run().passed

    def test_agreement_exact(self, settings):
        assert AgreementSuite(settings, include_mc=False).run().passed

    def test_fredholm(self, settings):
        assert FredholmSuite(settings).run().passed

    def test_recovery_without_simulation(self, settings):
        report = RecoverySuite(settings, include_mc=False).run()
        assert report.passed
        assert {case["check"] for case in report.cases} == {"point_mass", "one_step"}
