"""Verifier for phaser-synchronized concurrent programs.

Checks control state reachability (assertion violations, races, runtime
errors) and plain reachability (deadlocks) by gap-order backward
reachability, with a bounded concrete interpreter as an oracle and a
view-abstraction mode for task-parameterized programs.
"""

from .lang import (ControlSeq, ControlSpace, ParseError, Program, RegMode,
                   control_sequences, head, parse, parse_file, pretty, tail)
from .gapgraph import (Clause, GapGraph, UNSAT, close, conjoin, degree,
                       graph_entails, graph_of, is_sat, project_away, shift,
                       substitute)
from .concrete import (Configuration, Safe, Violation, explore_bounded,
                       initial, is_blocked, is_deadlock, detect_race, replay,
                       step)
from .symconstraint import (Constraint, canonicalize, constraint_of,
                            degree_of, entails, is_free, relax, satisfies,
                            strengthen)
from .targets import bad_set, bad_sets_up_to, top_of
from .preengine import PreEngine
from .checker import (BoundExceeded, Reached, Unreachable, check, minimize,
                      replay_trace)
from .paramview import (PostEngine, PotentialViolation, SafeForAllN,
                        TraceViolation, abstract_k, param_check,
                        param_fixpoint, project_view)
from .cli import main

__version__ = "0.1.0"
