"""Contour formula against the exact duality oracle and against Monte Carlo."""

import itertools
from logging import getLogger
from typing import Any, Dict, List

from ..chains import ParamSchedule, mc_estimate, q_moment_observable
from ..contour import ObservableSpec, qmoment_contour, qmoment_contour_batch
from ..exact import moment_table
from ..qdist import ModelParams
from ..utils.exceptions import QmunuError
from .base import BaseSuite, CaseResult

logger = getLogger(__name__)

NOMES = (0.3, 0.5)
MUS = (0.4, 0.6)
NUS = (0.0, 0.1, 0.25)

# (nvec, t, (q, mu, nu)) spot checks against simulation
MC_SPOT_CASES = [
    ((1,), 3, (0.5, 0.4, 0.1)),
    ((2, 1), 2, (0.3, 0.6, 0.25)),
    ((3, 3), 4, (0.5, 0.6, 0.0)),
    ((2, 2, 1), 2, (0.5, 0.4, 0.1)),
    ((5,), 5, (0.3, 0.4, 0.0)),
]


class AgreementSuite(BaseSuite):
    """
    Pipeline agreement for the q-moments of TASEP with step initial data.

    Exact cases: one per (params, k, t); every weakly decreasing nvec with
    entries in 1..N is evaluated on one contour grid and compared with the
    exact oracle by relative error. Monte Carlo cases compare within
    MC_SIGMAS standard errors.
    """

    MAX_K = 3
    MAX_N = 5
    MAX_T = 5
    RELATIVE_THRESHOLD = 1e-8
    MC_SIGMAS = 4.0

    def __init__(self, config: Dict[str, Any], include_mc: bool = True):
        super().__init__(config)
        self.name = "agreement"
        self.include_mc = include_mc

    def _get_all_cases(self) -> List[Dict[str, Any]]:
        cases = []
        for q, mu, nu in itertools.product(NOMES, MUS, NUS):
            for k in range(1, self.MAX_K + 1):
                for t in range(self.MAX_T + 1):
                    cases.append({"id": len(cases), "kind": "exact", "params": [q, mu, nu],
                                  "k": k, "t": t})
        if self.include_mc:
            for nvec, t, params in MC_SPOT_CASES:
                cases.append({"id": len(cases), "kind": "mc", "params": list(params),
                              "nvec": list(nvec), "t": t})
        return cases

    def _exact_case(self, case: Dict[str, Any]) -> Dict[str, Any]:
        p = ModelParams(*case["params"])
        k, t = case["k"], case["t"]
        table = moment_table(self.MAX_N, k, t, ParamSchedule(p))
        nvecs = [nvec for nvec in sorted(table) if nvec[-1] > 0]
        results = qmoment_contour_batch(
            [ObservableSpec(nvec, t) for nvec in nvecs], p, tol=min(self.tol, 1e-12)
        )
        worst, worst_nvec = 0.0, None
        for nvec, result in zip(nvecs, results):
            oracle = float(table[nvec])
            error = abs(result.value.real - oracle) / abs(oracle)
            if error >= worst:
                worst, worst_nvec = error, list(nvec)
        return self._result(case, worst, self.RELATIVE_THRESHOLD, worst_nvec=worst_nvec,
                            nvec_count=len(nvecs))

    def _mc_case(self, case: Dict[str, Any]) -> Dict[str, Any]:
        p = ModelParams(*case["params"])
        nvec, t = tuple(case["nvec"]), case["t"]
        contour = qmoment_contour(ObservableSpec(nvec, t), p, tol=self.tol).value.real
        estimate = mc_estimate(
            q_moment_observable(nvec, p.q),
            t,
            ParamSchedule(p),
            self.config["replicas"],
            self.config["seed"] + case["id"],
            n_particles=max(nvec),
            block_size=self.config["block_size"],
        )
        z_score = abs(estimate.mean - contour) / estimate.stderr if estimate.stderr > 0 else 0.0
        return self._result(case, z_score, self.MC_SIGMAS, contour=contour,
                            mc_mean=estimate.mean, mc_stderr=estimate.stderr)

    def process(self, case: Dict[str, Any]) -> CaseResult:
        try:
            if case["kind"] == "exact":
                return self._exact_case(case)
            return self._mc_case(case)
        except QmunuError as e:
            return f"agreement case {case['id']} ({case['kind']}, {case['params']}): {e}"
