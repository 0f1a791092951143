"""Certificate reports shared by the algorithm and diagnostics modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"
INCONCLUSIVE = "inconclusive"
INAPPLICABLE = "inapplicable"


@dataclass
class CertificateReport:
    """Outcome of checking one inequality over many instances.

    ``worst_residual`` is the largest observed violation ``lhs - rhs``; the
    check passes when it does not exceed ``tolerance``.
    """

    name: str
    status: str
    worst_residual: float = -math.inf
    worst_index: int | None = None
    tolerance: float = 0.0
    checked: int = 0
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status,
            "worst_residual": _finite_or_none(self.worst_residual),
            "worst_index": self.worst_index,
            "tolerance": self.tolerance,
            "checked": self.checked,
            "details": _jsonable(self.details),
        }

    @classmethod
    def skipped(cls, name: str, reason: str) -> "CertificateReport":
        return cls(name, SKIPPED, details={"reason": reason})


def check_inequalities(name: str, violations, tolerance: float, start: int = 0,
                       **details) -> CertificateReport:
    """Build a report from a sequence of ``lhs - rhs`` values.

    The i-th value is reported under index ``start + i``.
    """
    worst = -math.inf
    worst_index = None
    count = 0
    for i, v in enumerate(violations):
        count += 1
        if v > worst or (math.isnan(v) and not math.isnan(worst)):
            worst = v
            worst_index = start + i
    if count == 0:
        return CertificateReport(name, PASS, tolerance=tolerance, details={"vacuous": True, **details})
    status = PASS if worst <= tolerance else FAIL
    return CertificateReport(name, status, worst, worst_index, tolerance, count, dict(details))


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if hasattr(obj, "tolist"):
        return obj.tolist()
    return obj
