"""Verification suites, one per identity family."""

from typing import Dict, Type

from .agreement import AgreementSuite
from .base import BaseSuite, SuiteReport
from .binexp import BinexpSuite
from .degeneration import DegenerationSuite
from .dist import DistSuite
from .evolution import EvolutionSuite
from .fredholm import FredholmSuite
from .intertwine import IntertwineSuite
from .qseries import QSeriesSuite
from .recovery import RecoverySuite

SUITES: Dict[str, Type[BaseSuite]] = {
    "qseries": QSeriesSuite,
    "dist": DistSuite,
    "intertwine": IntertwineSuite,
    "binexp": BinexpSuite,
    "evolution": EvolutionSuite,
    "agreement": AgreementSuite,
    "fredholm": FredholmSuite,
    "degeneration": DegenerationSuite,
    "recovery": RecoverySuite,
}

# What `verify all` runs
DEFAULT_SUITES = ("qseries", "dist", "intertwine", "binexp", "evolution", "agreement")

__all__ = [
    "AgreementSuite",
    "BaseSuite",
    "BinexpSuite",
    "DegenerationSuite",
    "DistSuite",
    "EvolutionSuite",
    "FredholmSuite",
    "IntertwineSuite",
    "QSeriesSuite",
    "RecoverySuite",
    "SuiteReport",
    "SUITES",
    "DEFAULT_SUITES",
]
