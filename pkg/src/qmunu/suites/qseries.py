from fractions import Fraction
from logging import getLogger
from typing import Any, Dict, List

import numpy as np

from ..qseries import identity_suite
from ..utils.exceptions import QmunuError
from .base import BaseSuite, CaseResult, rational

logger = getLogger(__name__)


class QSeriesSuite(BaseSuite):
    """
    Classical q-Pochhammer and q-hypergeometric identities.

    One case per (q, arithmetic) pair; each case checks every identity on a
    seeded list of (a, b, c, n, k) points.
    """

    POINTS_PER_CASE = 24

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.name = "qseries"

    def _sample_points(self, seed: int, exact: bool) -> List[tuple]:
        rng = np.random.default_rng([self.config["seed"], seed])
        points = []
        for _ in range(self.POINTS_PER_CASE):
            a, b, c = (Fraction(int(v), 10) for v in rng.integers(-9, 10, size=3))
            n = int(rng.integers(0, 7 if exact else 5))
            k = int(rng.integers(0, n + 1))
            if not exact:
                a, b, c = float(a), float(b), float(c)
            points.append((a, b, c, n, k))
        return points

    def _get_all_cases(self) -> List[Dict[str, Any]]:
        nomes = list(dict.fromkeys([rational(self.config["q"]), Fraction(0), Fraction(3, 10),
                                    Fraction(1, 2), Fraction(7, 10)]))
        cases = []
        for q in nomes:
            for exact in (True, False):
                cases.append({"id": len(cases), "q": str(q), "exact": exact, "_q": q})
        return cases

    def process(self, case: Dict[str, Any]) -> CaseResult:
        try:
            q = case["_q"] if case["exact"] else float(case["_q"])
            report = identity_suite(q, self._sample_points(case["id"], case["exact"]))
            residual = max(report.max_residual.values(), default=0.0)
            # Terminating float sums lose digits to cancellation
            threshold = self.tol if case["exact"] else max(self.tol, 1e-8)
            return self._result(case, residual, threshold, report=report.to_dict())
        except QmunuError as e:
            return f"qseries case {case['id']} (q={case['q']}): {e}"
