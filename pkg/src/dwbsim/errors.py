"""Exception hierarchy; each class carries the CLI exit code it maps to."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class DwbError(RuntimeError):
    exit_code = EXIT_SOLVER


class ConfigError(DwbError, ValueError):
    """Invalid scenario configuration, detected before any run."""

    exit_code = EXIT_CONFIG


class DomainError(DwbError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = EXIT_SOLVER


class RankDeficiencyError(DwbError):
    """Constraint matrix is numerically rank deficient (conflicting bearings)."""

    exit_code = EXIT_SOLVER

    def __init__(self, message: str, pair: Optional[Tuple[str, ...]] = None) -> None:
        super().__init__(message)
        self.pair = pair


class InfeasibleError(DwbError):
    exit_code = EXIT_SOLVER


class SolverError(DwbError):
    exit_code = EXIT_SOLVER


class OutputError(DwbError):
    exit_code = EXIT_IO


def join_problems(problems: Sequence[str]) -> str:
    return "; ".join(problems)
