"""Appliance manual modeling, planning and closed-loop execution.

The usual flow: load or extract an ``ApplianceModel``, check it with
``validate``, compile a goal with ``compile_plan`` and execute it with
``run_episode`` against an ``Environment`` such as ``Simulator``.
"""

from .compiler import CompiledMacro, Plan, compile_adjustment, compile_digits, compile_macro, compile_plan
from .errors import ApplianceError
from .executor import EpisodeResult, RepairRecord, infer_spec, run_episode
from .model import (
    ApplianceModel,
    Digit,
    Feature,
    FeatureCursor,
    FeatureStep,
    GoalState,
    GoTo,
    Guards,
    NeighborBackward,
    NeighborForward,
    ProgramMap,
    SymbolicAction,
    TaskPolicy,
    VariableState,
)
from .schema import ModelDocument, load_bundle, load_bundles, load_model, save_model
from .simulator import Environment, Simulator
from .validator import Diagnostic, validate, validate_goal
from .values import ContinuousSpec, DiscreteSpec, InputBufferSpec, TimeSpec, value_lattice

__version__ = "0.1.0"

__all__ = [
    "ApplianceError",
    "ApplianceModel",
    "CompiledMacro",
    "ContinuousSpec",
    "Diagnostic",
    "Digit",
    "DiscreteSpec",
    "Environment",
    "EpisodeResult",
    "Feature",
    "FeatureCursor",
    "FeatureStep",
    "GoTo",
    "GoalState",
    "Guards",
    "InputBufferSpec",
    "ModelDocument",
    "NeighborBackward",
    "NeighborForward",
    "Plan",
    "ProgramMap",
    "RepairRecord",
    "Simulator",
    "SymbolicAction",
    "TaskPolicy",
    "TimeSpec",
    "VariableState",
    "compile_adjustment",
    "compile_digits",
    "compile_macro",
    "compile_plan",
    "infer_spec",
    "load_bundle",
    "load_bundles",
    "load_model",
    "run_episode",
    "save_model",
    "validate",
    "validate_goal",
    "value_lattice",
]
