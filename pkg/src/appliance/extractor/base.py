"""Backend interface and the validator-gated extraction loops."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

from ..errors import ExtractionFailed, ParseError
from ..model import ApplianceModel, GoalState, TaskPolicy
from ..schema import ModelDocument, Provenance, goal_from_json, load_model, policy_from_json
from ..validator import Diagnostic, errors_only, validate, validate_goal

log = logging.getLogger(__name__)

# diagnostics for drafts that never made it to the validator
PARSE_CODE = "PARSE"


@dataclass(frozen=True)
class ExtractionRequest:
    manual_text: str
    instruction: str | None = None
    panel_elements: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.manual_text.strip():
            raise ValueError("manual_text must not be empty")
        object.__setattr__(self, "panel_elements", tuple(self.panel_elements))


@runtime_checkable
class ExtractorBackend(Protocol):
    """Produces canonical-schema JSON text; the loops below parse and check it.

    ``feedback`` holds the error diagnostics of the previous attempt and is
    empty on the first call.
    """

    def extract_model(self, request: ExtractionRequest, feedback: Sequence[Diagnostic] = ()) -> str: ...

    def extract_goal(
        self, model: ApplianceModel, instruction: str, feedback: Sequence[Diagnostic] = ()
    ) -> str: ...


def _parse_diag(exc: ParseError) -> Diagnostic:
    return Diagnostic(PARSE_CODE, "error", exc.path, str(exc))


def extract_with_validation(
    backend: ExtractorBackend, request: ExtractionRequest, max_attempts: int = 3
) -> ModelDocument:
    """Ask the backend for a model until one passes the validator."""
    feedback: list[Diagnostic] = []
    for attempt in range(1, max_attempts + 1):
        draft = backend.extract_model(request, tuple(feedback))
        try:
            doc = load_model(draft, strict=True, check=False)
        except ParseError as exc:
            feedback = [_parse_diag(exc)]
        else:
            feedback = errors_only(validate(doc.model))
            if not feedback:
                log.info("model draft accepted on attempt %d", attempt)
                return ModelDocument(doc.model, Provenance("extracted", f"accepted on attempt {attempt}"))
        log.info("model draft rejected on attempt %d: %s", attempt, [d.code for d in feedback])
    raise ExtractionFailed(max_attempts, feedback)


def parse_goal_draft(text: str) -> tuple[TaskPolicy, GoalState]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", "$", exc.lineno) from exc
    if not isinstance(data, dict) or "task_policy" not in data or "goal_state" not in data:
        raise ParseError("expected an object with task_policy and goal_state", "$")
    extra = set(data) - {"task_policy", "goal_state"}
    if extra:
        raise ParseError(f"unknown field(s) {sorted(extra)}", "$")
    policy = policy_from_json(data["task_policy"], "$.task_policy")
    goal = goal_from_json(data["goal_state"], "$.goal_state", allow_empty=True)
    return policy, goal


def extract_goal_with_validation(
    backend: ExtractorBackend, model: ApplianceModel, instruction: str, max_attempts: int = 3
) -> tuple[TaskPolicy, GoalState]:
    """Ask the backend for a policy and goal until they pass the goal checks."""
    feedback: list[Diagnostic] = []
    for attempt in range(1, max_attempts + 1):
        draft = backend.extract_goal(model, instruction, tuple(feedback))
        try:
            policy, goal = parse_goal_draft(draft)
        except ParseError as exc:
            feedback = [_parse_diag(exc)]
            continue
        feedback = errors_only(validate_goal(model, goal, policy))
        if not feedback:
            return policy, goal
        log.info("goal draft rejected on attempt %d: %s", attempt, [d.code for d in feedback])
    raise ExtractionFailed(max_attempts, feedback)
