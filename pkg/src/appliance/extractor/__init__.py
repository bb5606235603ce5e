"""Turning manuals and instructions into validated models and goals."""

from .base import (
    PARSE_CODE,
    ExtractionRequest,
    ExtractorBackend,
    extract_goal_with_validation,
    extract_with_validation,
    parse_goal_draft,
)
from .http import HttpBackend, HttpConfig
from .mock import MockBackend, ScriptedBackend

__all__ = [
    "PARSE_CODE",
    "ExtractionRequest",
    "ExtractorBackend",
    "HttpBackend",
    "HttpConfig",
    "MockBackend",
    "ScriptedBackend",
    "extract_goal_with_validation",
    "extract_with_validation",
    "parse_goal_draft",
]
