"""
ctxkit error hierarchy and validation reports.

Report-style checks (validate_*, is_nondisturbing) return a ValidationReport
and never raise for content problems. Everything else raises a CtxkitError
subclass; the CLI maps those onto exit codes.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


class CtxkitError(Exception):
    """Base class for every error raised by ctxkit"""


class SchemaError(CtxkitError):
    """A JSON document does not match the expected layout"""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class PreconditionError(CtxkitError):
    pass


class ScenarioMismatchError(CtxkitError):
    pass


class EnumerationCapError(CtxkitError):
    def __init__(self, what: str, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: {size} elements exceeds enumeration cap {cap}")


class SolverError(CtxkitError):
    """LP or optimizer failure"""


class WiringError(CtxkitError):
    pass


class IncompatibleAssociationError(WiringError):
    """Two buttons of an association set X_[j] or Y_[j] share a context"""

    def __init__(self, light: int, kind: str, buttons: List[int], context: int):
        self.light = light
        self.kind = kind
        self.buttons = buttons
        self.context = context
        super().__init__(
            f"post light {light}: {kind} buttons {buttons} appear together in context {context}"
        )


class SupportMismatchError(WiringError):
    """The pre-box presses something the middle box cannot answer"""


class NotNondisturbingError(CtxkitError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"box is disturbing (worst deviation {report.worst_deviation:.3e})")


@dataclass
class Violation:
    rule: str
    message: str
    where: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'rule': self.rule, 'message': self.message, 'where': self.where}


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, rule: str, message: str, **where) -> None:
        self.violations.append(Violation(rule, message, where))

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def extend(self, other: 'ValidationReport', prefix: Optional[str] = None) -> None:
        for v in other.violations:
            rule = f"{prefix}.{v.rule}" if prefix else v.rule
            self.violations.append(Violation(rule, v.message, dict(v.where)))
        self.warnings.extend(other.warnings)

    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'ok': self.ok,
            'violations': [v.to_dict() for v in self.violations],
            'warnings': list(self.warnings),
        }
