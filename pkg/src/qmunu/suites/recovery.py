from logging import getLogger
from typing import Any, Dict, List

import numpy as np

from ..chains import ParamSchedule, histogram_observable, mc_estimate
from ..fredholm import invert_distribution
from ..qdist import INFINITY, phi_pmf
from ..utils.exceptions import QmunuError
from .base import BaseSuite, CaseResult, rational_grid

logger = getLogger(__name__)

PARAMETER_GRID = [("1/2", "2/5", "1/10"), ("1/3", "3/5", "0")]


class RecoverySuite(BaseSuite):
    """
    Distribution of x_n(t) + n recovered from its q-moments.

    - t = 0 gives a point mass at 0
    - (n, t) = (1, 1) gives phi(.|inf) on the certified support
    - (n, t) = (2, 3) is compared bin by bin with a simulated histogram
    """

    PMF_THRESHOLD = 1e-9
    MC_SIGMAS = 4.0

    def __init__(self, config: Dict[str, Any], include_mc: bool = True):
        super().__init__(config)
        self.name = "recovery"
        self.include_mc = include_mc

    def _get_all_cases(self) -> List[Dict[str, Any]]:
        cases = []
        for p in rational_grid(self.config, PARAMETER_GRID):
            checks = ["point_mass", "one_step"] + (["histogram"] if self.include_mc else [])
            for check in checks:
                cases.append({"id": len(cases), "check": check,
                              "params": [str(p.q), str(p.mu), str(p.nu)], "_p": p})
        return cases

    def process(self, case: Dict[str, Any]) -> CaseResult:
        try:
            p = case["_p"]
            sched = ParamSchedule(p)
            if case["check"] == "point_mass":
                result = invert_distribution(2, 0, sched)
                target = [1] + [0] * result.support_cap
                residual = max(abs(a - b) for a, b in zip(result.pmf, target))
                return self._result(case, residual, self.PMF_THRESHOLD, support_cap=result.support_cap)

            if case["check"] == "one_step":
                result = invert_distribution(1, 1, sched)
                residual = max(
                    abs(float(value) - float(phi_pmf(j, INFINITY, p.as_float())))
                    for j, value in enumerate(result.pmf)
                )
                return self._result(case, residual, self.PMF_THRESHOLD,
                                    support_cap=result.support_cap, mass_defect=result.mass_defect)

            result = invert_distribution(2, 3, sched)
            estimate = mc_estimate(
                histogram_observable(2, result.support_cap),
                3,
                ParamSchedule(p.as_float()),
                self.config["replicas"],
                self.config["seed"] + case["id"],
                n_particles=2,
                block_size=self.config["block_size"],
            )
            pmf = np.array([float(value) for value in result.pmf])
            stderr = np.maximum(np.asarray(estimate.stderr), 1.0 / self.config["replicas"])
            z_scores = np.abs(np.asarray(estimate.mean) - pmf) / stderr
            return self._result(case, float(np.max(z_scores)), self.MC_SIGMAS,
                                support_cap=result.support_cap)
        except QmunuError as e:
            return f"recovery case {case['id']} ({case['check']}, {case['params']}): {e}"
