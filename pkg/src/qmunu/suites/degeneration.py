import itertools
from logging import getLogger
from typing import Any, Dict, List

from ..fredholm import mhadp_g_limit_check
from ..utils.exceptions import QmunuError
from .base import BaseSuite, CaseResult

logger = getLogger(__name__)

EPS_LIST = (1e-2, 1e-3, 1e-4)
NOMES = (0.3, 0.5)
POINTS = (0j, 0.3 + 0j, 0.2 + 0.2j, -0.5 + 0j)


class DegenerationSuite(BaseSuite):
    """
    Continuous-time limit mu = q, nu = (q - eps)/(1 - eps), t = tau/eps.

    The residual of a case is the largest distance of a decrease factor
    from 10 over the rate and g(w) sequences; w = 0 must give zero residuals.
    """

    EXPECTED_FACTOR = 10.0
    FACTOR_SLACK = 3.0
    TAU = 1.0
    N = 2

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.name = "degeneration"

    def _get_all_cases(self) -> List[Dict[str, Any]]:
        cases = []
        for q, w in itertools.product(NOMES, POINTS):
            cases.append({"id": len(cases), "q": q, "w": w})
        return cases

    def process(self, case: Dict[str, Any]) -> CaseResult:
        try:
            report = mhadp_g_limit_check(case["w"], self.N, self.TAU, case["q"], EPS_LIST)
            sequences = list(report.rate_residuals.values())
            if case["w"] != 0:
                sequences.append(report.g_residuals)
            elif max(report.g_residuals) > 1e-14:
                return self._result(case, max(report.g_residuals), 1e-14, report=report.to_dict())
            deviation = max(
                abs(factor - self.EXPECTED_FACTOR)
                for residuals in sequences
                for factor in report.decrease_factors(residuals)
            )
            return self._result(case, deviation, self.FACTOR_SLACK, report=report.to_dict())
        except QmunuError as e:
            return f"degeneration case {case['id']} (q={case['q']}, w={case['w']}): {e}"
