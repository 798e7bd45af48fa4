"""Reversible interpreter and time-travel debugger for a first-order
actor language.

Programs spawn processes that exchange asynchronous messages through a
global in-transit mailbox.  The interpreter comes in two synchronized
flavours: a plain one, and an instrumented one whose per-process
histories make every step undoable.  On top of the instrumented
semantics sit causal-consistent rollback to programmer checkpoints,
exhaustive schedule exploration, property checkers (exact
reversibility, rollback soundness, FIFO delivery), a CLI and an HTTP
debug service.
"""

from .canon import canonical_bytes, canonicalize, digest
from .checks import check_fifo, check_loop, check_soundness
from .explore import (
    RandomPolicy, RoundRobin, ScriptPolicy, StateGraph, explore, run_policy,
    terminal_values, to_dot,
)
from .exprstep import (
    Finished, RunError, Stepped, eval_builtin, match_case, step_expr,
)
from .progen import gen_module
from .reversible import (
    RProcess, RSystem, checkpoints_of, enabled_forward, fstep,
    initial_rsystem, project,
)
from .rollback import (
    StuckRollback, bstep, request_rollback, rollback, rollback_drive,
    undo_forward_step,
)
from .snapshots import state_snapshot
from .syntax import (
    FName, Module, ParseError, Pid, parse_expr, parse_module, pretty_expr,
    pretty_module,
)
from .systems import (
    ChoiceNotEnabled, Deliver, Local, Process, System, enabled_standard,
    initial_system, step_system,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
