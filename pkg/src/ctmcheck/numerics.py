"""Sparse CTMC transient analysis via uniformization.

The rate matrix of a (finalized) truncated graph is turned into the
row-stochastic jump matrix P = I + Q/q with a uniformization rate q just
above the largest exit rate. The distribution at time t is the Poisson
weighted sum over jump counts

    pi_t = sum_k  Poisson(q*t)[k] * init @ P^k,

with the weight window truncated so the omitted tail mass stays far below
the requested tolerance. Weights are computed by an outward recurrence from
the Poisson mode in plain float64, which stays finite and accurate for q*t
up to 1e6 and beyond. A backward variant propagates an indicator through
P^k to obtain per-state bounded-until probabilities in a single sweep.
"""

from dataclasses import dataclass
from math import exp, fsum, lgamma, log

import numpy as np
from scipy import sparse

from .errors import CtmcheckError

Q_INFLATION = 1.02
STEADY_EPS = 1e-14


@dataclass
class SparseKernel:
    """Uniformized jump matrix, row-stochastic including the diagonal."""
    size: int
    q: float
    matrix: object  # scipy CSR


@dataclass
class PoissonWindow:
    """Poisson(lambda_t) weights for counts left..right; `total` is their
    exact sum, used to renormalize away the truncated tail."""
    left: int
    right: int
    weights: np.ndarray
    total: float


def uniformize(graph, absorbing=None, q=None):
    """Build the jump kernel of a finalized graph.

    `absorbing` lists extra state indices whose outgoing transitions are
    dropped (their rows become identity). `q` overrides the uniformization
    rate; it must be at least the largest exit rate.
    """
    if graph.absorbing_index is None:
        raise CtmcheckError("graph must be finalized before analysis")
    n = graph.size
    absorb = frozenset(absorbing) if absorbing is not None else frozenset()

    rows = []
    max_exit = 0.0
    for i, row in enumerate(graph.rows()):
        if i in absorb:
            row = []
        rows.append(row)
        if row:
            e = fsum(rate for _, rate in row)
            if e > max_exit:
                max_exit = e
    if q is None:
        q = Q_INFLATION * max_exit if max_exit > 0.0 else 1.0
    elif q < max_exit:
        raise ValueError(f"q={q:g} is below the maximum exit rate "
                         f"{max_exit:g}")

    data, ri, ci = [], [], []
    for i, row in enumerate(rows):
        e = 0.0
        if row:
            e = fsum(rate for _, rate in row)
            for j, rate in row:
                data.append(rate / q)
                ri.append(i)
                ci.append(j)
        data.append(1.0 - e / q)
        ri.append(i)
        ci.append(i)
    matrix = sparse.csr_array(
        (np.asarray(data), (np.asarray(ri), np.asarray(ci))), shape=(n, n))
    return SparseKernel(n, q, matrix)


def poisson_window(lambda_t, tol):
    """Truncated Poisson(lambda_t) weights with omitted tail mass below
    `tol` (each side is cut at tol/100, so the slack is generous)."""
    if lambda_t < 0.0:
        raise ValueError("lambda_t must be nonnegative")
    if not 0.0 < tol <= 1e-3:
        raise ValueError("tol must be in (0, 1e-3]")
    if lambda_t == 0.0:
        return PoissonWindow(0, 0, np.array([1.0]), 1.0)

    side_target = tol / 100.0
    mode = int(lambda_t)
    p_mode = exp(-lambda_t + mode * log(lambda_t) - lgamma(mode + 1))

    # upward from the mode; geometric bound on the remaining right tail
    upper = [p_mode]
    k = mode
    p = p_mode
    while True:
        p_next = p * lambda_t / (k + 1)
        ratio = lambda_t / (k + 2)
        if ratio < 1.0 and p_next / (1.0 - ratio) < side_target:
            right = k
            break
        upper.append(p_next)
        p = p_next
        k += 1

    # downward from the mode
    lower = []
    k = mode
    p = p_mode
    while k > 0:
        p_prev = p * k / lambda_t
        ratio = (k - 1) / lambda_t
        if ratio < 1.0 and p_prev / (1.0 - ratio) < side_target:
            break
        lower.append(p_prev)
        p = p_prev
        k -= 1
    left = k

    weights = np.array(lower[::-1] + upper)
    return PoissonWindow(left, right, weights, fsum(weights))


def spmv(kernel, v):
    """One forward jump: v @ P. Preserves the vector sum for a stochastic
    kernel."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (kernel.size,):
        raise ValueError(f"dimension mismatch: vector has shape {v.shape}, "
                         f"kernel is {kernel.size}")
    return v @ kernel.matrix


def transient_kernel(kernel, t, init, tol, detect_steady_state=True):
    """Distribution at time `t` starting from `init`, on a prebuilt kernel."""
    if t <= 0.0:
        raise ValueError("time horizon must be positive")
    v = np.array(init, dtype=np.float64)
    if v.shape != (kernel.size,):
        raise ValueError("dimension mismatch between init and kernel")
    win = poisson_window(kernel.q * t, tol)
    wnorm = win.weights / win.total
    result = np.zeros(kernel.size)
    for k in range(win.right + 1):
        if k >= win.left:
            result += wnorm[k - win.left] * v
        if k == win.right:
            break
        v_next = v @ kernel.matrix
        if detect_steady_state and np.max(np.abs(v_next - v)) < STEADY_EPS:
            start = max(k + 1, win.left) - win.left
            result += wnorm[start:].sum() * v_next
            break
        v = v_next
    np.clip(result, 0.0, None, out=result)
    return result


def transient(graph, t, init, tol=1e-10, absorbing=None, q=None,
              detect_steady_state=True):
    """Distribution at time `t` on a finalized graph (see transient_kernel)."""
    kernel = uniformize(graph, absorbing=absorbing, q=q)
    return transient_kernel(kernel, t, init, tol,
                            detect_steady_state=detect_steady_state)


def backward_until(kernel, t, success, tol, detect_steady_state=True):
    """Per-state probability of sitting in a `success` state at time `t`,
    swept backward: u_k+1 = P @ u_k starting from the indicator.

    With success states absorbing in the kernel this is the bounded-until
    probability for every state at once.
    """
    if t <= 0.0:
        raise ValueError("time horizon must be positive")
    u = np.asarray(success, dtype=np.float64)
    if u.shape != (kernel.size,):
        raise ValueError("dimension mismatch between indicator and kernel")
    win = poisson_window(kernel.q * t, tol)
    wnorm = win.weights / win.total
    result = np.zeros(kernel.size)
    for k in range(win.right + 1):
        if k >= win.left:
            result += wnorm[k - win.left] * u
        if k == win.right:
            break
        u_next = kernel.matrix @ u
        if detect_steady_state and np.max(np.abs(u_next - u)) < STEADY_EPS:
            start = max(k + 1, win.left) - win.left
            result += wnorm[start:].sum() * u_next
            break
        u = u_next
    np.clip(result, 0.0, 1.0, out=result)
    return result


def validate_kernel(kernel, tol=1e-12):
    """Check row stochasticity (sum 1 within tol, entries in [0,1])."""
    m = kernel.matrix.tocoo()
    if len(m.data) and (m.data.min() < -tol or m.data.max() > 1.0 + tol):
        raise CtmcheckError("kernel entries leave [0,1]")
    sums = np.asarray(kernel.matrix.sum(axis=1)).ravel()
    worst = np.max(np.abs(sums - 1.0)) if len(sums) else 0.0
    if worst > tol:
        raise CtmcheckError(f"kernel row sums off by {worst:g}")
    return True


def validate_distribution(v, tol=1e-10):
    """Check a transient result: entries nonnegative, sum 1 within tol."""
    arr = np.asarray(v)
    if arr.min() < -1e-14:
        raise CtmcheckError("distribution has a negative entry")
    total = fsum(arr.tolist())
    if abs(total - 1.0) > tol:
        raise CtmcheckError(f"distribution sums to {total!r}")
    return True
