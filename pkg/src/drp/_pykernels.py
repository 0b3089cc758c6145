"""Pure-Python/numpy implementations of the hot loops.

These mirror ``_kernels.pyx`` function for function and are used when the
compiled module is unavailable or ``DRP_PURE_PYTHON=1`` is set.

Variable status codes shared with the simplex engine:
0 basic, 1 nonbasic at lower bound, 2 nonbasic at upper bound,
3 nonbasic free (held at zero), 4 nonbasic fixed.
"""

import numpy as np

BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = 0, 1, 2, 3, 4


def order_search(tt, ee, a, b, k, t0, battery):
    """Find a visiting order for a load of ``k`` requests, or ``None``.

    Local indices: 0 start depot, 1..k the requests, k+1 end depot. ``tt`` and
    ``ee`` are indexed ``[S, i, j]`` where ``S`` is the bitmask (bit ``m-1`` for
    local request ``m``) of requests still aboard when leaving ``i`` for ``j``.
    Service at ``j`` starts at ``max(arrival, a[j])`` and must not pass ``b[j]``.
    """
    full = (1 << k) - 1
    end = k + 1
    eps = 1e-9
    order = [0] * k

    def dfs(depth, cur, aboard, time, energy):
        if depth == k:
            arr = time + tt[0, cur, end]
            en = energy + ee[0, cur, end]
            return arr <= b[end] + eps and en <= battery + eps
        for m in range(1, k + 1):
            bit = 1 << (m - 1)
            if not aboard & bit:
                continue
            en = energy + ee[aboard, cur, m]
            if en > battery + eps:
                continue
            arr = time + tt[aboard, cur, m]
            if arr > b[m] + eps:
                continue
            order[depth] = m
            if dfs(depth + 1, m, aboard & ~bit, max(arr, a[m]), en):
                return True
        return False

    if dfs(0, 0, full, t0, 0.0):
        return list(order)
    return None


def pivot(T, r, j):
    """Gauss-Jordan pivot on ``T[r, j]`` over all rows of ``T``."""
    row = T[r]
    row /= row[j]
    col = T[:, j].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if nz.size:
        T[nz] -= np.outer(col[nz], row)
    T[r, j] = 1.0
    T[nz, j] = 0.0


def price_dantzig(d, status, tol):
    """Entering column by most negative reduced cost along a feasible direction.

    Returns ``(j, direction)``, or ``(-1, 0)`` at optimality.
    """
    score = np.zeros_like(d)
    lo = status == AT_LOWER
    up = status == AT_UPPER
    fr = status == FREE
    score[lo] = np.where(d[lo] < -tol, -d[lo], 0.0)
    score[up] = np.where(d[up] > tol, d[up], 0.0)
    score[fr] = np.where(np.abs(d[fr]) > tol, np.abs(d[fr]), 0.0)
    j = int(np.argmax(score))
    if score[j] <= 0.0:
        return -1, 0
    return j, (1 if d[j] < 0 else -1)


def price_bland(d, status, tol):
    """Lowest-index attractive column (anti-cycling)."""
    for j in range(d.shape[0]):
        s = status[j]
        if s == AT_LOWER and d[j] < -tol:
            return j, 1
        if s == AT_UPPER and d[j] > tol:
            return j, -1
        if s == FREE and abs(d[j]) > tol:
            return j, (1 if d[j] < 0 else -1)
    return -1, 0


def ratio_test(alpha, xb, lb, ub, direction, piv_tol, feas_tol, bland, basis):
    """Primal ratio test for an entering column ``alpha`` moving in ``direction``.

    Basic variable ``i`` changes at rate ``-direction * alpha[i]``. Uses a
    two-pass Harris test; under Bland's rule ties go to the lowest variable
    index. Returns ``(row, step, to_upper)``; ``row == -1`` means unblocked.
    """
    rate = -direction * alpha
    dec = rate < -piv_tol
    inc = rate > piv_tol
    m = xb.shape[0]
    relaxed = np.full(m, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        relaxed[dec] = (xb[dec] - lb[dec] + feas_tol) / -rate[dec]
        relaxed[inc] = (ub[inc] - xb[inc] + feas_tol) / rate[inc]
    relaxed[np.isnan(relaxed)] = np.inf
    cap = relaxed.min() if m else np.inf
    if not np.isfinite(cap):
        return -1, np.inf, False
    exact = np.full(m, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact[dec] = (xb[dec] - lb[dec]) / -rate[dec]
        exact[inc] = (ub[inc] - xb[inc]) / rate[inc]
    cand = np.nonzero((exact <= cap) & (dec | inc))[0]
    if cand.size == 0:
        cand = np.array([int(np.argmin(relaxed))])
    if bland:
        best = cand[np.argmin(np.asarray(basis)[cand])]
    else:
        best = cand[np.argmax(np.abs(rate[cand]))]
    step = max(exact[best], 0.0)
    return int(best), float(step), bool(inc[best])


def dual_ratio(row, d, status, span, sign, delta, piv_tol):
    """Entering column for the dual simplex, with bound flipping.

    ``row`` is the tableau row of the leaving variable, ``sign`` is +1 when
    that variable must increase and -1 when it must decrease, and ``delta``
    is its bound violation beyond the feasibility tolerance. Candidates are passed in order of ratio
    ``|d_j| / |row_j|``; a boxed candidate whose full flip leaves the
    violation positive is flipped instead of entering. Returns
    ``(column, flipped columns)``, column -1 meaning the row proves the
    problem infeasible.
    """
    absr = np.abs(row)
    elig = (absr > piv_tol) & (
        ((status == AT_LOWER) & (-row * sign > 0))
        | ((status == AT_UPPER) & (row * sign > 0))
        | (status == FREE)
    )
    idx = np.nonzero(elig)[0]
    if idx.size == 0:
        return -1, idx
    ratio = np.abs(d[idx]) / absr[idx]
    idx = idx[np.lexsort((-absr[idx], ratio))]
    slope = delta - np.cumsum(absr[idx] * span[idx])
    stop = np.nonzero(slope <= 0)[0]
    if stop.size == 0:
        return -1, idx[:0]
    k = int(stop[0])
    return int(idx[k]), idx[:k]
