from logging import getLogger
from typing import Any, Dict, List

from ..exact import binexp_membership
from ..utils.exceptions import QmunuError
from .base import BaseSuite, CaseResult, rational_grid

logger = getLogger(__name__)

PARAMETER_GRID = [
    ("1/2", "2/5", "1/10"),
    ("1/3", "3/5", "0"),
    ("1/4", "1/2", "1/2"),
    ("3/4", "9/10", "1/5"),
    ("0", "1/3", "0"),
]


class BinexpSuite(BaseSuite):
    """(pA + (1-p)B)^m = sum_j phi(j|m) A^j B^{m-j} modulo BA = alpha AA + beta AB + gamma BB."""

    MAX_DEGREE = 8

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.name = "binexp"

    def _get_all_cases(self) -> List[Dict[str, Any]]:
        cases = []
        for p in rational_grid(self.config, PARAMETER_GRID):
            for m in range(1, self.MAX_DEGREE + 1):
                cases.append({
                    "id": len(cases),
                    "m": m,
                    "params": [str(p.q), str(p.mu), str(p.nu)],
                    "_p": p,
                })
        return cases

    def process(self, case: Dict[str, Any]) -> CaseResult:
        try:
            result = binexp_membership(case["m"], case["_p"])
            return self._result(
                case,
                0.0 if result.member else 1.0,
                0.0,
                member=result.member,
                rank_ideal=result.rank_ideal,
                rank_augmented=result.rank_augmented,
            )
        except QmunuError as e:
            return f"binexp case {case['id']} (m={case['m']}, {case['params']}): {e}"
