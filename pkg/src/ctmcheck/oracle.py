"""Brute-force exact reference for finite instances.

Everything here is deliberately independent of the main analysis engine:
the rate matrix is kept as raw COO triplet arrays, the jump step is a
matrix-free bincount scatter, Poisson weights come from scipy.stats with a
survival-function cutoff, the uniformization rate convention differs, and
normalization happens once at the end. Only the model parser and its
successor semantics are shared. The oracle trades speed for simplicity and
is meant for cross-checking, not production runs.
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np
from scipy import stats

from .errors import ResourceCapError
from .model import initial_state

DEFAULT_CAP = 100_000


@dataclass
class FullGraph:
    """Complete reachable state space with its rate matrix in COO form."""
    model: object
    states: list
    index: dict
    src: np.ndarray
    dst: np.ndarray
    rate: np.ndarray
    exit: np.ndarray
    initial_index: int = 0

    @property
    def size(self):
        return len(self.states)


def enumerate_full(model, cap=DEFAULT_CAP):
    """Enumerate every reachable state by BFS with no truncation.

    Raises ResourceCapError("state space exceeds cap ...") past `cap`
    states; for genuinely infinite models that error is the expected
    signal.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    init = initial_state(model)
    states = [init]
    index = {init: 0}
    src, dst, rate = [], [], []
    head = 0
    while head < len(states):
        v = states[head]
        for target, r in model.successor_items(v):
            j = index.get(target)
            if j is None:
                if len(states) >= cap:
                    raise ResourceCapError(f"state space exceeds cap {cap}")
                j = len(states)
                index[target] = j
                states.append(target)
            src.append(head)
            dst.append(j)
            rate.append(r)
        head += 1
    n = len(states)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    rate = np.asarray(rate, dtype=np.float64)
    exit = np.bincount(src, weights=rate, minlength=n)
    return FullGraph(model, states, index, src, dst, rate, exit)


def _poisson_count(lam, tol):
    """Number of jump terms keeping the omitted Poisson tail below tol."""
    if lam <= 0.0:
        return 0
    upper = stats.poisson.isf(tol, lam)
    if not np.isfinite(upper):
        upper = lam + 10.0 * sqrt(lam) + 50.0
    return int(upper) + 5


def _dense_transient(n, src, dst, rate, exit, init, t, tol):
    q = float(exit.max()) + 1.0 if len(exit) and exit.max() > 0.0 else 1.0
    lam = q * t
    terms = _poisson_count(lam, tol)
    weights = stats.poisson.pmf(np.arange(terms + 1), lam)
    v = np.asarray(init, dtype=np.float64).copy()
    acc = weights[0] * v
    for k in range(1, terms + 1):
        flow = np.bincount(dst, weights=v[src] * rate, minlength=n)
        v = v + (flow - v * exit) / q
        acc = acc + weights[k] * v
    return acc / weights.sum()


def exact_transient(g, t, tol=1e-10):
    """Transient distribution at time `t` from the initial state, with the
    internal truncation two orders tighter than `tol`."""
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    init = np.zeros(g.size)
    init[g.initial_index] = 1.0
    if t == 0.0:
        return init
    return _dense_transient(g.size, g.src, g.dst, g.rate, g.exit, init, t,
                            tol / 100.0)


def _as_mask(g, predicate):
    if callable(predicate):
        return np.array([bool(predicate(s)) for s in g.states])
    from .model import eval_predicate
    return np.array([eval_predicate(g.model, s, predicate) for s in g.states])


def exact_until(g, phi, psi, t, tol=1e-10):
    """Exact P(phi U<=t psi) from the initial state. `phi` and `psi` are
    callables over valuation tuples (or boolean expression ASTs)."""
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    success = _as_mask(g, psi)
    failure = ~success & ~_as_mask(g, phi)
    if t == 0.0 or success[g.initial_index]:
        return float(success[g.initial_index])
    absorbing = success | failure
    keep = ~absorbing[g.src]
    exit = g.exit.copy()
    exit[absorbing] = 0.0
    init = np.zeros(g.size)
    init[g.initial_index] = 1.0
    dist = _dense_transient(g.size, g.src[keep], g.dst[keep], g.rate[keep],
                            exit, init, t, tol / 100.0)
    return float(dist[success].sum())
