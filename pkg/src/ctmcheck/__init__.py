"""Approximate model checking of infinite-state CTMCs.

The package parses guarded-command CTMC models and time-bounded CSL
queries, explores a threshold-truncated slice of the state space with an
absorbing sink for everything beyond it, and reports two-sided probability
bounds that it tightens by lowering the threshold, guided by the property
where possible.
"""

from .checker import (Bound, RefineParams, RunReport, Verdict,
                      check_bounded_until, compare_bound, refine,
                      resolve_nested)
from .csl import (CslQuery, PathFormula, ProbAtom, UntilClass, classify,
                  format_property, parse_property, parse_property_file, sat)
from .errors import (CtmcheckError, ModelRuntimeError, ParseError,
                     ResourceCapError, UnsupportedOperatorError)
from .explorer import (TruncatedGraph, approximate, expand_property_guided,
                       export_states, finalize, graph_stats)
from .model import (Command, Model, Transition, VariableDecl, eval_predicate,
                    exit_rate, format_model, initial_state, parse_model,
                    successors)
from .numerics import (PoissonWindow, SparseKernel, backward_until,
                       poisson_window, spmv, transient, transient_kernel,
                       uniformize)
from .oracle import FullGraph, enumerate_full, exact_transient, exact_until

__version__ = "0.1.0"

__all__ = [
    "Bound", "Command", "CslQuery", "CtmcheckError", "FullGraph", "Model",
    "ModelRuntimeError", "ParseError", "PathFormula", "PoissonWindow",
    "ProbAtom", "RefineParams", "ResourceCapError", "RunReport",
    "SparseKernel", "Transition", "TruncatedGraph", "UnsupportedOperatorError",
    "UntilClass", "Verdict", "VariableDecl", "approximate", "backward_until",
    "check_bounded_until", "classify", "compare_bound", "enumerate_full",
    "eval_predicate", "exact_transient", "exact_until", "exit_rate",
    "expand_property_guided", "export_states", "finalize", "format_model",
    "format_property", "graph_stats", "initial_state", "parse_model",
    "parse_property", "parse_property_file", "poisson_window", "refine",
    "resolve_nested", "sat", "spmv", "successors", "transient",
    "transient_kernel", "uniformize",
]
