from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from fractions import Fraction
from logging import getLogger
from typing import Any, Dict, List, Optional, Union

from tqdm import tqdm

from ..qdist import ModelParams

logger = getLogger(__name__)

CaseResult = Optional[Union[Dict[str, Any], str]]


def rational(value: Any) -> Fraction:
    """Exact rational for a configured parameter, e.g. 0.4 -> 2/5."""
    return value if isinstance(value, Fraction) else Fraction(str(value))


def rational_grid(config: Dict[str, Any], extra: List[tuple]) -> List[ModelParams]:
    """The configured (q, mu, nu) as rationals followed by a fixed list of triples."""
    triples = [(rational(config["q"]), rational(config["mu"]), rational(config["nu"]))]
    triples += [tuple(Fraction(v) for v in triple) for triple in extra]
    unique = list(dict.fromkeys(triples))
    return [ModelParams(*triple) for triple in unique]


@dataclass
class SuiteReport:
    """Per-case residuals of one suite, with the errors raised by failing cases."""

    name: str
    cases: List[Dict[str, Any]] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max((case["residual"] for case in self.cases), default=0.0)

    @property
    def failures(self) -> List[Dict[str, Any]]:
        return [case for case in self.cases if not case["passed"]]

    @property
    def passed(self) -> bool:
        return not self.errors and not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "case_count": len(self.cases),
            "failures": len(self.failures),
            "errors": self.errors,
            "cases": self.cases,
        }


class BaseSuite(ABC):
    """
    An abstract base class for all verification suites.

    A suite enumerates independent cases, evaluates them on a worker pool and
    reduces the results in case order, so reports do not depend on the pool
    size.

    Features:
    - Concurrent processing using ThreadPoolExecutor
    - Progress tracking with tqdm
    - Per-case error collection
    - Case-ordered, reproducible reports
    """

    def __init__(self, config: Dict[str, Any]):
        """
        Initializes the suite with the resolved run settings.

        Args:
            config: Settings dictionary (file configuration plus overrides)
        """
        self.config = config
        self.tol: float = config["tol"]

        # These must be set by subclasses
        self.name: str = ""  # Suite name used on the command line and in reports

    @abstractmethod
    def _get_all_cases(self) -> List[Dict[str, Any]]:
        """
        Enumerates the cases of this suite.

        Returns:
            A list of case dictionaries; each carries a unique integer 'id'
        """
        pass

    @abstractmethod
    def process(self, case: Dict[str, Any]) -> CaseResult:
        """
        Evaluates a single case.

        Called concurrently for each case from _get_all_cases().

        Returns:
            - A dict with at least 'id', 'residual' and 'threshold'
            - On error: A string describing the error
            - None to skip this case
        """
        pass

    def _result(self, case: Dict[str, Any], residual: Any, threshold: Optional[float] = None,
                **details: Any) -> Dict[str, Any]:
        threshold = self.tol if threshold is None else threshold
        residual = float(residual)
        result = {
            key: value for key, value in case.items() if not key.startswith("_")
        }
        result.update(details)
        result.update({"residual": residual, "threshold": threshold, "passed": residual <= threshold})
        return result

    def run(self) -> SuiteReport:
        """
        Runs every case on the worker pool.

        Returns:
            A SuiteReport with cases sorted by id
        """
        logger.info(f"--- Running {self.name} suite ---")

        all_cases = self._get_all_cases()
        report = SuiteReport(self.name)

        if not all_cases:
            logger.warning(f"No {self.name} cases to process.")
            return report

        logger.info(f"Found {len(all_cases)} {self.name} case(s). Starting concurrent processing...")

        with ThreadPoolExecutor(max_workers=self.config["max_workers"]) as executor:
            future_map = {executor.submit(self.process, case): case for case in all_cases}

            for future in tqdm(
                as_completed(future_map),
                total=len(all_cases),
                desc=f"Verifying {self.name}",
            ):
                result = future.result()
                if isinstance(result, dict):
                    report.cases.append(result)
                elif result is not None:
                    report.errors.append(str(result))

        report.cases.sort(key=lambda x: x["id"])
        report.errors.sort()

        logger.info(
            f"{self.name} suite complete: max residual {report.max_residual:.3e}, "
            f"{len(report.failures)} failure(s)"
        )
        if report.errors:
            logger.warning(f"{len(report.errors)} error(s) occurred during {self.name}:")
            for error in report.errors:
                logger.error(f"  - {error}")
        for failure in report.failures:
            logger.warning(
                f"  {self.name} case {failure['id']} residual {failure['residual']:.3e} "
                f"above {failure['threshold']:.1e}"
            )
        return report
