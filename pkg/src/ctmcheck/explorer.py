"""Threshold-truncated state graph construction.

Exploration keeps a per-state reachability mass estimate. The initial state
starts with mass 1.0; expanding a state moves its whole mass to its
successors in proportion to the embedded jump probabilities (rate divided
by exit rate), so the total mass over all states is conserved at every
step. Only states whose mass clears the truncation threshold `kappa` enter
the FIFO frontier; states left below it stay terminal. A state whose mass
climbs over the threshold through a later-discovered incoming path is
scheduled at that point, even if an earlier update left it below. Each
state redistributes at most once per exploration pass (mass arriving at an
already-swept state stays put); without that rule a recurrent model would
recirculate mass forever.

Re-exploring at a lower threshold reuses the prior graph only as a cache:
the retained states keep their generated successor rows, but the mass
profile restarts from the initial state, so a continued pass produces
exactly the state set and mass values of a from-scratch pass at the new
threshold.

Property-guided expansion additionally freezes states that decide a
bounded-until formula on their own (states where the right side holds, or
where neither side holds): frozen states keep their mass and are never
expanded, so nothing beyond them is generated.

`finalize` adds the absorbing sink: every terminal state keeps its
transitions into already-explored states and sends the summed rate of its
remaining, unexplored continuations to the sink. The sink's transient mass
is exactly the width of the probability bounds reported by the checker.
"""

import os
from collections import deque
from math import fsum

from . import csl
from .errors import CtmcheckError, ResourceCapError

DEFAULT_STATE_CAP = 50_000_000

# expansions allowed before exploration is declared non-converging; guards
# against zero-branching cycles that recirculate mass without adding states
STEP_CAP_BASE = 1_000_000
STEP_CAP_PER_STATE = 1000


class TruncatedGraph:
    """Explored slice of a model's state space plus bookkeeping.

    States are valuation tuples, indexed densely in discovery order; index 0
    is the initial state. `adj[i]` is None until state i is expanded, an
    empty list for expanded deadlock states, and otherwise the merged
    (target index, rate) row. Redirect rows added by `finalize` live apart
    in `final_adj` so un-finalizing is exact.
    """

    def __init__(self, model):
        init = tuple(v.init for v in model.variables)
        self.model = model
        self.states = [init]
        self.index = {init: 0}
        self.mass = [1.0]
        self.adj = [None]
        self.exit_rates = [0.0]
        self.expanded = [False]
        self.frozen = [False]
        self.kappa = 1.0
        self.absorbing_index = None
        self.final_adj = {}

    # -- basic accessors ----------------------------------------------------

    @property
    def size(self):
        return len(self.states)

    def is_terminal(self, i):
        return not self.expanded[i] and i != self.absorbing_index

    def transition_count(self):
        n = sum(len(row) for row in self.adj if row)
        n += sum(len(row) for row in self.final_adj.values())
        return n

    def rows(self):
        """Merged outgoing rows, including finalize redirects."""
        for i in range(len(self.states)):
            row = self.adj[i] if self.adj[i] else []
            extra = self.final_adj.get(i)
            yield (row + extra) if extra else row

    def total_mass(self):
        return fsum(self.mass)

    def copy_unfinalized(self):
        """Independent copy with the absorbing sink and its redirects
        removed and the mass profile reset to the initial state, ready for
        a fresh exploration pass. Explored states keep their cached
        successor rows, so re-expanding them is cheap and the pass result
        is identical to exploring from scratch."""
        g = object.__new__(TruncatedGraph)
        g.model = self.model
        n = len(self.states)
        if self.absorbing_index is not None:
            n -= 1  # the sink is always the last state
        g.states = self.states[:n]
        g.index = {s: i for i, s in enumerate(g.states)}
        g.mass = [0.0] * n
        g.mass[0] = 1.0
        g.adj = self.adj[:n]
        g.exit_rates = self.exit_rates[:n]
        g.expanded = self.expanded[:n]
        g.frozen = [False] * n
        g.kappa = self.kappa
        g.absorbing_index = None
        g.final_adj = {}
        return g


def _explore(graph, model, kappa, *, strict, freeze_fn=None,
             state_cap=DEFAULT_STATE_CAP, debug_hook=None):
    states = graph.states
    index = graph.index
    mass = graph.mass
    adj = graph.adj
    exit_rates = graph.exit_rates
    expanded = graph.expanded
    frozen = graph.frozen

    if strict:
        def admit(m):
            return m > kappa
    else:
        def admit(m):
            return m >= kappa

    queue = deque()
    queued = [False] * len(states)
    done = [False] * len(states)  # expanded in this pass
    for i in range(len(states)):
        if frozen[i] or adj[i] == []:
            continue
        if admit(mass[i]):
            queue.append(i)
            queued[i] = True

    steps = 0
    while queue:
        i = queue.popleft()
        queued[i] = False
        done[i] = True
        steps += 1
        if steps > STEP_CAP_PER_STATE * len(states) + STEP_CAP_BASE:
            raise ResourceCapError(
                f"exploration did not converge after {steps} expansions of "
                f"{len(states)} states (threshold {kappa:g})")
        row = adj[i]
        if row is None:
            items = model.successor_items(states[i])
            if not items:
                adj[i] = []
                expanded[i] = True
                if debug_hook is not None:
                    debug_hook(graph)
                continue
            row = []
            for target, rate in items:
                j = index.get(target)
                if j is None:
                    if len(states) >= state_cap:
                        raise ResourceCapError(
                            f"state count exceeds cap {state_cap}")
                    j = len(states)
                    index[target] = j
                    states.append(target)
                    mass.append(0.0)
                    adj.append(None)
                    exit_rates.append(0.0)
                    expanded.append(False)
                    frozen.append(freeze_fn(target) if freeze_fn else False)
                    queued.append(False)
                    done.append(False)
                row.append((j, rate))
            adj[i] = row
            exit_rates[i] = fsum(rate for _, rate in items)
        elif not row:
            expanded[i] = True
            continue
        m = mass[i]
        mass[i] = 0.0
        expanded[i] = True
        total = exit_rates[i]
        for j, rate in row:
            new_mass = mass[j] + m * (rate / total)
            mass[j] = new_mass
            if (not queued[j] and not done[j] and not frozen[j]
                    and adj[j] != [] and admit(new_mass)):
                queue.append(j)
                queued[j] = True
        if debug_hook is not None:
            debug_hook(graph)
    return graph


def _check_kappa(kappa):
    if not 0.0 < kappa <= 1.0:
        raise ValueError("kappa must be in (0,1]")


def approximate(model, kappa, prior=None, *, state_cap=DEFAULT_STATE_CAP,
                debug_hook=None):
    """Property-agnostic truncated exploration at threshold `kappa`.

    With `prior` given (a graph explored at a higher threshold, finalized
    or not), its states and cached successor rows carry over so the pass
    runs faster; the result is identical to exploring from scratch.
    """
    _check_kappa(kappa)
    if prior is None:
        graph = TruncatedGraph(model)
    else:
        if prior.kappa <= kappa:
            raise ValueError("re-exploration needs a threshold below the "
                             f"prior graph's ({prior.kappa:g})")
        graph = prior.copy_unfinalized()
    graph.kappa = kappa
    return _explore(graph, model, kappa, strict=False, state_cap=state_cap,
                    debug_hook=debug_hook)


def expand_property_guided(graph, model, kappa, phi, psi, *,
                           state_cap=DEFAULT_STATE_CAP, debug_hook=None):
    """Expand `graph` at threshold `kappa`, freezing states that settle the
    until formula `phi U psi`: states satisfying psi, or neither phi nor
    psi, keep their mass and are never expanded."""
    _check_kappa(kappa)
    phi_fn, phi_atoms = csl.compile_state_formula(model, phi)
    psi_fn, psi_atoms = csl.compile_state_formula(model, psi)
    if phi_atoms or psi_atoms:
        raise CtmcheckError("property-guided expansion needs non-nested "
                            "state formulas")

    def freeze_fn(v):
        return psi_fn(v, ()) or not phi_fn(v, ())

    g = graph.copy_unfinalized()
    g.kappa = kappa
    for i, v in enumerate(g.states):
        g.frozen[i] = freeze_fn(v)
    return _explore(g, model, kappa, strict=True, freeze_fn=freeze_fn,
                    state_cap=state_cap, debug_hook=debug_hook)


def finalize(graph, model):
    """Add the absorbing sink: terminal states keep transitions into
    explored states and redirect the rest of their outgoing rate to the
    sink. Idempotent."""
    if graph.absorbing_index is not None:
        return graph
    n = len(graph.states)
    sink = n
    for i in range(n):
        if graph.expanded[i]:
            continue
        known = []
        unknown_rates = []
        for target, rate in model.successor_items(graph.states[i]):
            j = graph.index.get(target)
            if j is None:
                unknown_rates.append(rate)
            else:
                known.append((j, rate))
        if unknown_rates:
            known.append((sink, fsum(unknown_rates)))
        graph.final_adj[i] = known
    graph.states.append(None)
    graph.mass.append(0.0)
    graph.adj.append([])
    graph.exit_rates.append(0.0)
    graph.expanded.append(False)
    graph.frozen.append(False)
    graph.absorbing_index = sink
    return graph


def graph_stats(graph):
    """(state count, transition count, terminal count, summed mass still
    sitting in terminal states)."""
    terminal = [i for i in range(graph.size) if graph.is_terminal(i)]
    absorbed_estimate = fsum(graph.mass[i] for i in terminal)
    return (graph.size, graph.transition_count(), len(terminal),
            absorbed_estimate)


def export_states(graph, path):
    """Write states to `path` and transitions to a sibling '.tra' file.

    State lines: index, comma-joined valuation, mass, flags (E expanded,
    T terminal, A absorbing), tab-separated, ordered by index.
    """
    base, _ = os.path.splitext(path)
    tra_path = base + ".tra"
    with open(path, "w", encoding="utf-8") as fh:
        for i, v in enumerate(graph.states):
            if i == graph.absorbing_index:
                valuation = ""
                flags = "A"
            else:
                valuation = ",".join(str(x) for x in v)
                flags = "E" if graph.expanded[i] else "T"
            fh.write(f"{i}\t{valuation}\t{graph.mass[i]:.12g}\t{flags}\n")
    with open(tra_path, "w", encoding="utf-8") as fh:
        for i, row in enumerate(graph.rows()):
            for j, rate in row:
                fh.write(f"{i}\t{j}\t{rate:.12g}\n")
    return tra_path
