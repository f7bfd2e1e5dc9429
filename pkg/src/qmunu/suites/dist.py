from logging import getLogger
from typing import Any, Dict, List

from ..qdist import ModelParams, phi_row, verify_duality, verify_duality_infinite
from ..utils.exceptions import QmunuError
from .base import BaseSuite, CaseResult, rational_grid

logger = getLogger(__name__)

# (q, mu, nu) triples checked besides the configured one
PARAMETER_GRID = [
    (q, mu, nu)
    for q in ("0", "1/4", "1/2", "3/4")
    for mu in ("1/3", "3/5", "9/10")
    for nu in ("0", "1/5")
    if nu == "0" or q != "0"
]


class DistSuite(BaseSuite):
    """
    Normalisation and duality of phi_{q,mu,nu}.

    Checks per parameter triple:
    - sum_j phi(j|m) = 1 for m <= 64, exactly and in floats
    - S_{m,y} = S_{y,m} for m, y <= 12, exactly
    - sum_j phi(j|inf) q^{jy} = phi(0|y) for y <= 12 with a certified tail
    """

    MAX_NORMALISATION_M = 64
    MAX_DUALITY_INDEX = 12

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.name = "dist"

    def _get_all_cases(self) -> List[Dict[str, Any]]:
        cases = []
        for p in rational_grid(self.config, PARAMETER_GRID):
            for check in ("normalisation", "normalisation_float", "duality", "duality_infinite"):
                cases.append({
                    "id": len(cases),
                    "check": check,
                    "params": [str(p.q), str(p.mu), str(p.nu)],
                    "_p": p,
                })
        return cases

    def _normalisation(self, p: ModelParams) -> Any:
        worst = 0
        for m in range(self.MAX_NORMALISATION_M + 1):
            worst = max(worst, abs(sum(phi_row(m, p)) - 1))
        return worst

    def _duality(self, p: ModelParams) -> Any:
        size = self.MAX_DUALITY_INDEX + 1
        return max(verify_duality(m, y, p) for m in range(size) for y in range(m + 1, size))

    def _duality_infinite(self, p: ModelParams) -> float:
        p = p.as_float()
        return max(
            verify_duality_infinite(y, p, tol=self.tol)
            for y in range(self.MAX_DUALITY_INDEX + 1)
        )

    def process(self, case: Dict[str, Any]) -> CaseResult:
        try:
            p = case["_p"]
            check = case["check"]
            if check == "normalisation":
                residual = self._normalisation(p)
            elif check == "normalisation_float":
                residual = self._normalisation(p.as_float())
            elif check == "duality":
                residual = self._duality(p)
            else:
                residual = self._duality_infinite(p)
            exact = check in ("normalisation", "duality")
            threshold = 0.0 if exact else max(self.tol, 1e-12)
            return self._result(case, residual, threshold)
        except QmunuError as e:
            return f"dist case {case['id']} ({case['check']}, {case['params']}): {e}"
