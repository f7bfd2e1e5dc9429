import cmath
import itertools
from logging import getLogger
from typing import Any, Dict, List

from ..chains import ParamSchedule
from ..fredholm import det_cauchy, det_mb, laplace_series_oracle
from ..qdist import ModelParams
from ..utils.exceptions import QmunuError
from .base import BaseSuite, CaseResult

logger = getLogger(__name__)

PARAMETER_GRID = [(0.5, 0.4, 0.1), (0.3, 0.6, 0.25), (0.6, 0.5, 0.3)]
PARTICLE_HORIZONS = [(1, 1), (2, 2)]
# |zeta| <= 0.3, away from the positive axis
ZETAS = [-0.2, 0.2j, 0.3 * cmath.exp(2.5j), 0.15 * cmath.exp(-1.2j)]


class FredholmSuite(BaseSuite):
    """
    Both Fredholm determinants against each other and against the moment series.

    Also checks det -> 1 at |zeta| = 1e-6.
    """

    AGREEMENT_THRESHOLD = 1e-6
    SMALL_ZETA = 1e-6
    SMALL_ZETA_THRESHOLD = 1e-8

    def __init__(self, config: Dict[str, Any]):
        super().__init__(config)
        self.name = "fredholm"

    def _get_all_cases(self) -> List[Dict[str, Any]]:
        cases = []
        for params, (n, t), zeta in itertools.product(PARAMETER_GRID, PARTICLE_HORIZONS, ZETAS):
            cases.append({"id": len(cases), "kind": "agreement", "params": list(params),
                          "n": n, "t": t, "zeta": zeta})
        for params in PARAMETER_GRID:
            cases.append({"id": len(cases), "kind": "small_zeta", "params": list(params),
                          "n": 2, "t": 2, "zeta": -self.SMALL_ZETA})
        return cases

    def process(self, case: Dict[str, Any]) -> CaseResult:
        try:
            p = ModelParams(*case["params"])
            n, t, zeta = case["n"], case["t"], case["zeta"]
            tol = min(self.tol, 1e-10)
            mb = det_mb(zeta, n, t, p, tol=tol, nodes=self.config["nystrom_nodes"])
            if case["kind"] == "small_zeta":
                return self._result(case, abs(mb.value - 1), self.SMALL_ZETA_THRESHOLD,
                                    det_mb=mb.value)
            cauchy = det_cauchy(zeta, n, t, p, tol=tol, nodes=self.config["nystrom_nodes"])
            series = laplace_series_oracle(zeta, n, t, ParamSchedule(p))
            residual = max(abs(mb.value - cauchy.value), abs(mb.value - series))
            return self._result(
                case,
                residual,
                self.AGREEMENT_THRESHOLD,
                det_mb=mb.value,
                det_cauchy=cauchy.value,
                series=series,
                mb_nodes=mb.nodes,
                cauchy_nodes=cauchy.nodes,
            )
        except QmunuError as e:
            return f"fredholm case {case['id']} (zeta={case['zeta']}, {case['params']}): {e}"
