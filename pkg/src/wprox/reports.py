"""Result records shared by the inequality checkers.

Slack sign convention: ``slack = rhs - lhs``, so a nonnegative slack means
the inequality holds.  A check passes when every slack is ``>= -tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

REPORT_SCHEMA_VERSION = 1


@dataclass
class CheckReport:
    name: str
    slacks: list
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return all(s >= -self.tol for s in self.slacks)

    @property
    def worst_slack(self) -> float:
        return min(self.slacks) if self.slacks else math.inf

    # single-instance checks read more naturally with this name
    slack = worst_slack

    @property
    def n_failed(self) -> int:
        return sum(s < -self.tol for s in self.slacks)

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA_VERSION,
            "name": self.name,
            "holds": self.holds,
            "tol": self.tol,
            "instances": len(self.slacks),
            "failed": self.n_failed,
            "worst_slack": None if not self.slacks else self.worst_slack,
            "slacks": list(self.slacks),
            "details": self.details,
        }


def merge(name: str, reports) -> CheckReport:
    """Concatenate reports that share a tolerance."""
    reports = list(reports)
    tol = max(r.tol for r in reports)
    slacks = [s for r in reports for s in r.slacks]
    return CheckReport(name, slacks, tol, {"parts": [r.name for r in reports]})
