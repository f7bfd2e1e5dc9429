"""Free evolution and two-body boundary residuals of the contour solution."""

from logging import getLogger
from typing import Any, Dict, List

import numpy as np

from ..contour import ObservableSpec, check_boundary, check_free_evolution
from ..qdist import ModelParams
from ..utils.exceptions import QmunuError
from .base import BaseSuite, CaseResult

logger = getLogger(__name__)

NOMES = (0.3, 0.5)
MUS = (0.4, 0.6)
NUS = (0.0, 0.1, 0.25)


class EvolutionSuite(BaseSuite):
    """
    Random (nvec, t, params) cases with k <= 2.

    Each case checks the free evolution equation; cases with an equal
    adjacent pair also check the boundary condition.
    """

    CASE_COUNT = 24
    MAX_INDEX = 4
    MAX_HORIZON = 3
    THRESHOLD = 1e-8

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.name = "evolution"

    def _get_all_cases(self) -> List[Dict[str, Any]]:
        rng = np.random.default_rng([self.config["seed"], 1])
        cases = []
        for _ in range(self.CASE_COUNT):
            k = int(rng.integers(1, 3))
            nvec = sorted((int(n) for n in rng.integers(1, self.MAX_INDEX + 1, size=k)), reverse=True)
            if k == 2 and rng.random() < 0.5:
                nvec[1] = nvec[0]
            params = (float(rng.choice(NOMES)), float(rng.choice(MUS)), float(rng.choice(NUS)))
            t = int(rng.integers(0, self.MAX_HORIZON + 1))
            for check in ("free", "boundary"):
                if check == "boundary" and (k < 2 or nvec[0] != nvec[1]):
                    continue
                cases.append({"id": len(cases), "check": check, "nvec": nvec, "t": t,
                              "params": list(params)})
        return cases

    def process(self, case: Dict[str, Any]) -> CaseResult:
        try:
            p = ModelParams(*case["params"])
            obs = ObservableSpec(tuple(case["nvec"]), case["t"])
            tol = min(self.tol, self.THRESHOLD / 100)
            if case["check"] == "free":
                residual = check_free_evolution(obs, p, tol=tol)
            else:
                residual = check_boundary(obs, p, i=1, tol=tol)
            return self._result(case, residual, self.THRESHOLD)
        except QmunuError as e:
            return f"evolution case {case['id']} ({case['check']}, {case['nvec']}): {e}"
