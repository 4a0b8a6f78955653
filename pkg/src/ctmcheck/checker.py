"""Bounded-until checking on truncated graphs, with iterative tightening.

A finalized truncated graph yields two-sided bounds on P(phi U<=t psi):
states satisfying psi (success) or neither side (failure) are made
absorbing, the transient distribution at t is computed, and the success
mass is the lower bound. Whatever probability drained into the absorbing
sink belongs to paths that left the explored region, so adding it gives
the upper bound; the true probability always lies between the two.

`refine` drives the loop: explore at the starting threshold, check, and
while the answer is not settled divide the threshold by the reduction
factor and expand (property-guided for non-nested untils, plain otherwise),
re-checking each round. It stops when a threshold comparison becomes
decisive, when the bound width drops under epsilon, or at the iteration
cap.
"""

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import csl, explorer, numerics
from .errors import CtmcheckError


@dataclass
class Bound:
    pmin: float
    pmax: float
    absorbing_mass: float
    states: int
    transitions: int


@dataclass
class RefineParams:
    kappa0: float = 1e-3
    reduction_factor: float = 1000.0
    epsilon: float = 1e-3
    max_iterations: int = 10
    target: tuple | None = None  # (comparator, p); defaults to the query's
    state_cap: int = explorer.DEFAULT_STATE_CAP
    transient_tol: float = 1e-10
    force_agnostic: bool = False

    def validate(self):
        if not 0.0 < self.kappa0 <= 1.0:
            raise ValueError("kappa must be in (0,1]")
        if self.reduction_factor <= 1.0:
            raise ValueError("reduction factor must be greater than 1")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max iterations must be at least 1")


class Verdict(enum.Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    EXACT_WITHIN_EPSILON = "ExactWithinEpsilon"
    INCONCLUSIVE = "Inconclusive"


class Comparison(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


@dataclass
class IterationRecord:
    r: int
    kappa: float
    bound: Bound
    build_time: float
    analyze_time: float
    expansion_mode: str  # 'guided' or 'agnostic'


@dataclass
class RunReport:
    iterations: list
    verdict: Verdict
    final_bound: Bound
    graph: object = field(default=None, repr=False)  # final explored graph


def _atom_args(atoms, state, inner):
    return tuple(csl._atom_value(atom, state, inner) for atom in atoms)


def _satisfaction_masks(graph, phi, psi, inner):
    """Boolean success (psi) and failure (neither phi nor psi) masks over
    the graph's states; the absorbing sink satisfies nothing."""
    model = graph.model
    phi_fn, phi_atoms = csl.compile_state_formula(model, phi)
    psi_fn, psi_atoms = csl.compile_state_formula(model, psi)
    n = graph.size
    success = np.zeros(n, dtype=bool)
    failure = np.zeros(n, dtype=bool)
    sink = graph.absorbing_index
    for i, v in enumerate(graph.states):
        if i == sink:
            continue
        if psi_fn(v, _atom_args(psi_atoms, v, inner)):
            success[i] = True
        elif not phi_fn(v, _atom_args(phi_atoms, v, inner)):
            failure[i] = True
    return success, failure


def check_bounded_until(graph, phi, psi, t, inner=None, tol=1e-10):
    """Two-sided bound on P(phi U<=t psi) from the initial state of a
    finalized graph. `inner` carries nested-operator tables from
    resolve_nested when the formulas need them."""
    if graph.absorbing_index is None:
        raise CtmcheckError("graph must be finalized before checking")
    n = graph.size
    transitions = graph.transition_count()
    success, failure = _satisfaction_masks(graph, phi, psi, inner)
    if success[0]:
        return Bound(1.0, 1.0, 0.0, n, transitions)
    sink = graph.absorbing_index
    absorb = [i for i in range(n)
              if success[i] or failure[i] or i == sink]
    init = np.zeros(n)
    init[0] = 1.0
    dist = numerics.transient(graph, t, init, tol, absorbing=absorb)
    pmin = float(dist[success].sum())
    gap = float(dist[sink])
    pmax = min(1.0, pmin + gap)
    return Bound(pmin, pmax, gap, n, transitions)


def resolve_nested(graph, formula, tol=1e-10):
    """Evaluate every nested threshold operator of `formula` for all
    explored states in one backward sweep each.

    Returns {operator: {state: bool}}. Point values are the lower bounds
    (mass lost to the absorbing sink counts as not satisfying); the sink
    itself is treated as satisfying nothing by the checker.
    """
    if graph.absorbing_index is None:
        raise CtmcheckError("graph must be finalized before checking")
    atoms = csl.collect_prob_atoms(formula)
    if not atoms:
        raise CtmcheckError("formula has no nested probability operator")
    sink = graph.absorbing_index
    tables = {}
    for atom in atoms:
        success, failure = _satisfaction_masks(
            graph, atom.path.left, atom.path.right, None)
        absorb = [i for i in range(graph.size)
                  if success[i] or failure[i] or i == sink]
        kernel = numerics.uniformize(graph, absorbing=absorb)
        values = numerics.backward_until(
            kernel, atom.path.time_bound, success.astype(np.float64), tol)
        table = {}
        for i, v in enumerate(graph.states):
            if i == sink:
                continue
            table[v] = csl._compare(float(values[i]), atom.comparator,
                                    atom.threshold)
        tables[atom] = table
    return tables


def compare_bound(bound, comparator, p):
    """HOLDS if the whole bound interval satisfies the comparison, FAILS if
    none of it does, UNKNOWN when p splits the interval."""
    if comparator == ">=":
        if bound.pmin >= p:
            return Comparison.HOLDS
        if bound.pmax < p:
            return Comparison.FAILS
    elif comparator == ">":
        if bound.pmin > p:
            return Comparison.HOLDS
        if bound.pmax <= p:
            return Comparison.FAILS
    elif comparator == "<=":
        if bound.pmax <= p:
            return Comparison.HOLDS
        if bound.pmin > p:
            return Comparison.FAILS
    elif comparator == "<":
        if bound.pmax < p:
            return Comparison.HOLDS
        if bound.pmin >= p:
            return Comparison.FAILS
    else:
        raise ValueError(f"unknown comparator {comparator!r}")
    return Comparison.UNKNOWN


def _resolve_inner_tables(graph, phi, psi, tol):
    tables = {}
    if csl.collect_prob_atoms(phi):
        tables.update(resolve_nested(graph, phi, tol))
    if csl.collect_prob_atoms(psi):
        tables.update(resolve_nested(graph, psi, tol))
    return tables or None


def refine(model, query, params=None):
    """Run the full check-and-tighten loop for `query` on `model`."""
    if params is None:
        params = RefineParams()
    params.validate()
    nested = csl.classify(query) is csl.UntilClass.NESTED_UNTIL
    guided = not nested and not params.force_agnostic
    if params.target is not None:
        target = params.target
    elif query.mode == "threshold":
        target = (query.comparator, query.target_p)
    else:
        target = None

    phi = query.path.left
    psi = query.path.right
    horizon = query.path.time_bound

    iterations = []
    graph = None
    kappa = params.kappa0
    r = 1
    verdict = None
    while True:
        t_build = time.perf_counter()
        if r == 1:
            g = explorer.approximate(model, kappa, state_cap=params.state_cap)
            mode = "agnostic"
        elif guided:
            g = explorer.expand_property_guided(graph, model, kappa, phi, psi,
                                                state_cap=params.state_cap)
            mode = "guided"
        else:
            g = explorer.approximate(model, kappa, prior=graph,
                                     state_cap=params.state_cap)
            mode = "agnostic"
        g = explorer.finalize(g, model)
        build_time = time.perf_counter() - t_build

        t_check = time.perf_counter()
        inner = _resolve_inner_tables(g, phi, psi, params.transient_tol) \
            if nested else None
        bound = check_bounded_until(g, phi, psi, horizon, inner,
                                    params.transient_tol)
        analyze_time = time.perf_counter() - t_check

        iterations.append(IterationRecord(r, kappa, bound, build_time,
                                          analyze_time, mode))
        graph = g

        if target is not None:
            outcome = compare_bound(bound, *target)
            if outcome is Comparison.HOLDS:
                verdict = Verdict.HOLDS
                break
            if outcome is Comparison.FAILS:
                verdict = Verdict.FAILS
                break
        if bound.pmax - bound.pmin < params.epsilon:
            verdict = (Verdict.EXACT_WITHIN_EPSILON if target is None
                       else Verdict.INCONCLUSIVE)
            break
        if r >= params.max_iterations:
            verdict = Verdict.INCONCLUSIVE
            break
        r += 1
        kappa = kappa / params.reduction_factor

    return RunReport(iterations, verdict, iterations[-1].bound, graph=graph)
