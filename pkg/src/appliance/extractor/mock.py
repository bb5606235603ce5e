"""Deterministic backends for tests and offline use."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Sequence

from ..model import ApplianceModel
from ..schema import FixtureBundle, goal_to_json, load_bundles, model_document_to_json, dumps, policy_to_json
from ..validator import Diagnostic
from .base import ExtractionRequest


def _squash(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().lower()


class MockBackend:
    """Answers from fixture bundles, keyed by manual text and task instruction.

    Manuals and instructions are matched after collapsing whitespace and case.
    An unknown manual yields a stub model that the validator rejects; an unknown instruction yields a goal that binds nothing.
    """

    def __init__(self, bundles: Sequence[FixtureBundle] | str | Path):
        if isinstance(bundles, (str, Path)):
            bundles = load_bundles(bundles)
        self.bundles = list(bundles)
        self._by_manual = {_squash(b.manual_text): b for b in self.bundles}

    def extract_model(self, request: ExtractionRequest, feedback: Sequence[Diagnostic] = ()) -> str:
        b = self._by_manual.get(_squash(request.manual_text))
        if b is None:
            # a lone variable nothing adjusts: the validator rejects it (V4)
            spec = {"kind": "discrete", "values": ["unknown"], "cyclic": True}
            stub = {"variables": [{"name": "unknown", "current": "unknown", "spec": spec}], "actions": [], "features": []}
            return json.dumps({"schema_version": "1.0", "model": stub})
        return dumps(model_document_to_json(b.model_doc)).decode("utf-8")

    def extract_goal(self, model: ApplianceModel, instruction: str, feedback: Sequence[Diagnostic] = ()) -> str:
        key = _squash(instruction)
        for b in self.bundles:
            if b.model_doc.model != model:
                continue
            for t in b.tasks:
                if _squash(t.instruction) == key and t.policy is not None:
                    return json.dumps({"task_policy": policy_to_json(t.policy), "goal_state": goal_to_json(t.goal)})
        return json.dumps({"task_policy": {"features": []}, "goal_state": {"assignments": {}}})


class ScriptedBackend:
    """Replays canned drafts in order and records the feedback it was given."""

    def __init__(self, model_drafts: Sequence[str] = (), goal_drafts: Sequence[str] = ()):
        self.model_drafts = list(model_drafts)
        self.goal_drafts = list(goal_drafts)
        self.feedback_log: list[tuple[Diagnostic, ...]] = []
        self._calls = {"model": 0, "goal": 0}

    def _next(self, kind: str, drafts: list[str], feedback: Sequence[Diagnostic]) -> str:
        if not drafts:
            raise LookupError(f"scripted backend has no {kind} drafts")
        self.feedback_log.append(tuple(feedback))
        i = self._calls[kind]
        self._calls[kind] += 1
        # the last draft repeats once the script runs out
        return drafts[min(i, len(drafts) - 1)]

    def extract_model(self, request: ExtractionRequest, feedback: Sequence[Diagnostic] = ()) -> str:
        return self._next("model", self.model_drafts, feedback)

    def extract_goal(self, model: ApplianceModel, instruction: str, feedback: Sequence[Diagnostic] = ()) -> str:
        return self._next("goal", self.goal_drafts, feedback)
