"""loopfsm: lift FSM-style parsing loops into constraint-labeled state
machines by controlled abstract interpretation, with oracles and an
evaluation harness for checking the result at desk scale."""

from .engine import EngineConfig, infer_fsm
from .fsm import Fsm, accepts, export_dot, export_json, generate_messages, import_json, normalize
from .lang import Program, concrete_run, enumerate_accepted, parse_program, pretty_print

__all__ = [
    "EngineConfig",
    "Fsm",
    "Program",
    "accepts",
    "concrete_run",
    "enumerate_accepted",
    "export_dot",
    "export_json",
    "generate_messages",
    "import_json",
    "infer_fsm",
    "normalize",
    "parse_program",
    "pretty_print",
]
