"""Write the demo scenarios next to this file.

    python demos/build_demos.py

dial_repair/   the combination oven with its function dial believed in the
               wrong order; ``appliance run`` repairs it in one round.
timer_script/  a cyclic 0-60 minute timer and a press script for ``simulate``.
"""

from __future__ import annotations

from pathlib import Path

from appliance.model import (
    ApplianceModel,
    Feature,
    FeatureStep,
    GoalState,
    NeighborBackward,
    NeighborForward,
    SymbolicAction,
    TaskPolicy,
    VariableState,
)
from appliance.schema import ModelDocument, Provenance, TaskDocument, fixtures_root, load_bundle, save_model, save_task_suite
from appliance.values import ContinuousSpec, DiscreteSpec

HERE = Path(__file__).resolve().parent

BELIEVED_ORDER = ("Fermentation", "Lower heater", "Upper heater", "Convection", "Rotary", "Off", "Lower & upper heater")


def dial_repair(out: Path) -> None:
    truth = load_bundle(fixtures_root() / "microwave_combi").model_doc.model
    current = truth.variable("function").current
    belief = truth.with_variable(VariableState("function", DiscreteSpec(BELIEVED_ORDER), current))
    task = TaskDocument(
        "Switch the oven to lower and upper heat.",
        GoalState((("function", "Lower & upper heater"),)),
        TaskPolicy(("select_function",), ("function",)),
        None,
    )
    out.mkdir(parents=True, exist_ok=True)
    (out / "truth.appliance.json").write_bytes(save_model(ModelDocument(truth)))
    note = "function dial order: combined heater placed after Off"
    (out / "belief.appliance.json").write_bytes(save_model(ModelDocument(belief, Provenance("perturbed", note))))
    (out / "tasks.tasks.json").write_bytes(save_task_suite([task]))


def timer_script(out: Path) -> None:
    model = ApplianceModel(
        variables=(VariableState("timer", ContinuousSpec(((0, 60, 10),), "min"), "0"),),
        actions=(
            SymbolicAction("press_plus", "press", NeighborForward("timer")),
            SymbolicAction("press_minus", "press", NeighborBackward("timer")),
        ),
        features=(Feature("set_timer", (FeatureStep(1, ("press_plus", "press_minus"), "timer"),)),),
    )
    out.mkdir(parents=True, exist_ok=True)
    (out / "timer.appliance.json").write_bytes(save_model(ModelDocument(model)))
    (out / "wrap.script").write_text("# up to the top, wrap to 0, then step back down to 60\npress_plus,6\npress_plus\npress_minus\n", encoding="utf-8")


if __name__ == "__main__":
    dial_repair(HERE / "dial_repair")
    timer_script(HERE / "timer_script")
