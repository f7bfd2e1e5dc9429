from fractions import Fraction
from logging import getLogger
from typing import Any, Dict, List

from ..chains import ParamSchedule
from ..exact import verify_intertwining
from ..utils.exceptions import QmunuError
from .base import BaseSuite, CaseResult, rational_grid

logger = getLogger(__name__)

PARAMETER_GRID = [("1/2", "2/5", "1/10"), ("1/3", "3/5", "0")]

# Inhomogeneous variant: a_i and mu_t chosen so that a_i mu_t stays in [nu, 1)
SITE_WEIGHTS = (Fraction(1), Fraction(4, 5), Fraction(6, 5))
MU_FACTORS = (Fraction(1), Fraction(3, 4), Fraction(5, 4))


class IntertwineSuite(BaseSuite):
    """
    P^TASEP H = H (P^Boson)^T on a truncated grid of (x, y).

    Exact cases must vanish identically; float cases use the certified
    truncation of the first particle's infinite sum.
    """

    MAX_SITES = 3
    MAX_PARTICLES = 4
    WINDOW = 12

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.name = "intertwine"

    def _schedules(self, p) -> Dict[str, ParamSchedule]:
        homogeneous = ParamSchedule(p)
        mus = tuple(p.mu * factor for factor in MU_FACTORS)
        if all(p.nu <= a * mu < 1 for a in SITE_WEIGHTS for mu in mus):
            return {
                "homogeneous": homogeneous,
                "inhomogeneous": ParamSchedule(p, a=SITE_WEIGHTS, mu_schedule=mus),
            }
        return {"homogeneous": homogeneous}

    def _get_all_cases(self) -> List[Dict[str, Any]]:
        cases = []
        for p in rational_grid(self.config, PARAMETER_GRID):
            for label, sched in self._schedules(p).items():
                steps = range(len(MU_FACTORS)) if sched.mu_schedule else (0,)
                for t in steps:
                    for N in range(1, self.MAX_SITES + 1):
                        for mode in ("exact", "float"):
                            cases.append({
                                "id": len(cases),
                                "params": [str(p.q), str(p.mu), str(p.nu)],
                                "schedule": label,
                                "t": t,
                                "N": N,
                                "mode": mode,
                                "_sched": sched,
                            })
        return cases

    def process(self, case: Dict[str, Any]) -> CaseResult:
        try:
            k_max = self.MAX_PARTICLES
            residual = verify_intertwining(
                case["N"],
                k_max,
                self.WINDOW,
                case["_sched"],
                t=case["t"],
                tol=self.tol,
                mode=case["mode"],
            )
            threshold = 0.0 if case["mode"] == "exact" else self.tol
            return self._result(case, residual, threshold, k_max=k_max)
        except QmunuError as e:
            return f"intertwine case {case['id']} (N={case['N']}, {case['mode']}): {e}"
