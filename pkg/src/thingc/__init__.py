"""Thinging-machine models: parse, validate, simplify, extract events, simulate, render."""

from .core import (
    Arc, ArcKind, Diagnostic, EventDef, Machine, Model, ModelError, SourceSpan,
    Stage, StageKind, StateVar, TMError, check_model, flow_relation, validate_model,
)
from .dsl import ParseError, parse, parse_file, serialize
from .events import (
    BehaviorGraph, EventError, build_behavior, check_region, compose_events,
    detect_send_events,
)
from .render import export_json, import_json, render_behavior_dot, render_model_dot
from .sim import (
    EventOccurrence, Scenario, ScenarioError, SimulationError, Trace,
    load_scenario, simulate, trace_to_events,
)
from .transform import UseCaseDiagram, reduce_to_use_case, simplify_level1, simplify_level2

__version__ = "0.1.0"
