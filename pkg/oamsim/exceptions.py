"""
OAMSIM Exceptions
Error hierarchy shared by the simulation library, the plugins and the CLI
"""

from dataclasses import dataclass
from typing import List, Optional


class OamsimError(Exception):
    """Base class for every error raised by oamsim"""


class ParameterError(OamsimError, ValueError):
    """Invalid physical or dimensionless model parameters"""


class ExactnessError(OamsimError):
    """Float parameters handed to an operation that needs exact rationals"""


class NoInvariantStateError(OamsimError):
    """A Gibbs state was requested for theta <= 0"""


class TruncationGuardError(OamsimError):
    """Initial support plus guard does not fit below the truncation level"""


class TruncationOverflow(OamsimError):
    """Cumulative probability lost through the truncation boundary exceeded the budget"""

    def __init__(self, step: int, leakage: float, budget: float,
                 trajectory: Optional[int] = None):
        self.step = step
        self.leakage = leakage
        self.budget = budget
        self.trajectory = trajectory
        where = f" (trajectory {trajectory})" if trajectory is not None else ""
        super().__init__(
            f"leakage {leakage:.3e} exceeds budget {budget:.3e} at step {step}{where}")

    def to_record(self) -> dict:
        return {
            "error": "TruncationOverflow",
            "step": self.step,
            "leakage": self.leakage,
            "budget": self.budget,
            "trajectory": self.trajectory,
        }


class NonHermitianError(OamsimError, ValueError):
    """Matrix handed to a Hermitian-only routine is not Hermitian"""


class HorizonError(OamsimError, ValueError):
    """Outcome horizon too large or mismatched"""


class TransportError(OamsimError):
    """Optimal transport problem is infeasible (weight sums differ)"""


@dataclass(frozen=True)
class ConfigIssue:
    """A single configuration violation located by a JSON pointer"""
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path or '/'}: {self.message}"


class ConfigValidationError(OamsimError):
    """Configuration rejected; carries every violation found"""

    def __init__(self, issues: List[ConfigIssue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(issue) for issue in self.issues))

    def to_record(self) -> dict:
        return {
            "error": "ConfigValidationError",
            "issues": [{"path": i.path, "message": i.message} for i in self.issues],
        }
