"""munity: interpreter, weakly fair scheduler and property checker for a
prioritized guarded-command specification language with mobile-system
constructs (locations, interactions, inhibitions, transactions, reactions),
plus a built-in publish/subscribe suite exercised over simulated fragile
networks.
"""

from .checker import (
    CheckError, Verdict, check_co, check_ensures, check_invariant,
    check_trace_co, check_trace_invariant, check_trace_leadsto,
    check_transient,
)
from .engine import (
    Engine, ExecError, ReactionDivergence, SchedulerConfig, StepRecord,
    Trace, default_weights, state_digest,
)
from .ens import build_ens_system, render_ens_system
from .env import (
    ConnectivityScript, ConnectivityEvent, EnvHooks, MoveEvent, SetVarEvent,
    default_run_hooks,
)
from .explore import ExploreBounds, TransitionSystem, explore, replay_path
from .instantiate import CompileError, CompiledSystem, compile_system
from .nodes import ProgramDef, SystemDef
from .parser import ParseError, parse_expression, parse_program, parse_system
from .printer import pretty_print, print_program
from .proplang import Property, parse_properties
from .scenario import (
    EnsScenario, TagRegistry, load_scenario, run_scenario, scan_conservation,
    scenario_from_dict,
)
from .semantics import (
    EvalContext, SystemState, apply_assignment, canonical_state, eval_expr,
)
from .transform import count_reactive, eliminate_reacts_to
from .validator import Diagnostic, validate
from .values import (
    BOTTOM, Addr, EvalError, Loc, Msg, Rec, Sym, value_eq,
)

__version__ = "0.1.0"
