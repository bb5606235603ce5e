"""Exception hierarchy shared by every module."""

from __future__ import annotations


class ApplianceError(Exception):
    """Base class for all errors raised by this package."""


# value lattice / model construction


class LatticeUndefined(ApplianceError):
    """The variable has no finite value lattice (input buffers)."""


class InvalidSpec(ApplianceError):
    """A variable spec or model object violates its structural invariants."""


class UnknownAction(ApplianceError):
    def __init__(self, action: str):
        super().__init__(f"unknown action {action!r}")
        self.action = action


class UnknownVariable(ApplianceError):
    def __init__(self, variable: str):
        super().__init__(f"unknown variable {variable!r}")
        self.variable = variable


# schema io


class ParseError(ApplianceError):
    def __init__(self, message: str, path: str = "$", line: int | None = None):
        where = path if line is None else f"{path} (line {line})"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


class SchemaVersionUnsupported(ParseError):
    pass


class InvariantViolation(ApplianceError):
    def __init__(self, diagnostics: list):
        codes = sorted({d.code for d in diagnostics})
        super().__init__("model is not admissible: " + ", ".join(codes))
        self.diagnostics = diagnostics
        self.codes = codes


# planning


class PlanningError(ApplianceError):
    """Base class for compiler failures; ``feature`` is filled in by compile_plan."""

    feature: str | None = None


class TargetUnreachable(PlanningError):
    pass


class NoDigitEncoding(PlanningError):
    pass


class GoalVariableNotInFeature(PlanningError):
    pass


class PredictionMismatch(PlanningError):
    """The compiled emissions do not reach the goal when replayed on the belief."""


# closed loop


class Unparseable(ApplianceError):
    pass


class ExplorationCapExceeded(ApplianceError):
    pass


class ExplorationBlocked(ApplianceError):
    """A guard blocked the exploring action, so no cycle can be observed."""


class InconsistentSequence(ApplianceError):
    pass


class GoalInfeasible(ApplianceError):
    def __init__(self, variable: str, target: str, nearest: list[str]):
        super().__init__(
            f"goal {variable}={target!r} is not in the repaired lattice; nearest: {nearest}"
        )
        self.variable = variable
        self.target = target
        self.nearest = nearest


# bench


class NotApplicable(ApplianceError):
    pass


class GoalUnreachable(ApplianceError):
    pass


# extraction


class ExtractionFailed(ApplianceError):
    def __init__(self, attempts: int, diagnostics: list):
        codes = sorted({getattr(d, "code", str(d)) for d in diagnostics})
        super().__init__(f"extraction failed after {attempts} attempt(s): {codes}")
        self.attempts = attempts
        self.diagnostics = diagnostics


class BackendUnavailable(ApplianceError):
    pass
