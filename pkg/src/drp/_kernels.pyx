# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; see ``_pykernels`` for the contracts."""

from libc.math cimport fabs, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef enum:
    BASIC = 0
    AT_LOWER = 1
    AT_UPPER = 2
    FREE = 3
    FIXED = 4


cdef bint _dfs(double[:, :, :] tt, double[:, :, :] ee, double[:] a, double[:] b,
               int k, int depth, int cur, long aboard, double time, double energy,
               double battery, int[:] order):
    cdef int m, end = k + 1
    cdef long bit
    cdef double arr, en, start
    if depth == k:
        arr = time + tt[0, cur, end]
        en = energy + ee[0, cur, end]
        return arr <= b[end] + 1e-9 and en <= battery + 1e-9
    for m in range(1, k + 1):
        bit = 1 << (m - 1)
        if not (aboard & bit):
            continue
        en = energy + ee[aboard, cur, m]
        if en > battery + 1e-9:
            continue
        arr = time + tt[aboard, cur, m]
        if arr > b[m] + 1e-9:
            continue
        order[depth] = m
        start = arr if arr > a[m] else a[m]
        if _dfs(tt, ee, a, b, k, depth + 1, m, aboard & ~bit, start, en, battery, order):
            return True
    return False


def order_search(tt, ee, a, b, int k, double t0, double battery):
    cdef int[:] order = np.zeros(max(k, 1), dtype=np.intc)
    cdef double[:, :, :] tv = tt
    cdef double[:, :, :] ev = ee
    cdef double[:] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef long full = (1 << k) - 1
    if _dfs(tv, ev, av, bv, k, 0, 0, full, t0, 0.0, battery, order):
        return [order[i] for i in range(k)]
    return None


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j):
    cdef Py_ssize_t m = T.shape[0], n = T.shape[1], i, c, k, nnz = 0
    cdef double p = T[r, j], f
    cdef double *row = &T[r, 0]
    cdef double *dst
    cdef Py_ssize_t[::1] cols = np.empty(n, dtype=np.intp)
    for c in range(n):
        if row[c] != 0.0:
            row[c] /= p
            cols[nnz] = c
            nnz += 1
    row[j] = 1.0
    # only the pivot row's nonzero columns change in the other rows
    for i in range(m):
        if i == r:
            continue
        dst = &T[i, 0]
        f = dst[j]
        if f == 0.0:
            continue
        for k in range(nnz):
            c = cols[k]
            dst[c] -= f * row[c]
        dst[j] = 0.0


def price_dantzig(double[:] d, signed char[:] status, double tol):
    cdef Py_ssize_t j, n = d.shape[0], best = -1
    cdef double score, top = 0.0
    cdef signed char s
    for j in range(n):
        s = status[j]
        if s == AT_LOWER:
            score = -d[j]
        elif s == AT_UPPER:
            score = d[j]
        elif s == FREE:
            score = fabs(d[j])
        else:
            continue
        if score > tol and score > top:
            top = score
            best = j
    if best < 0:
        return -1, 0
    return best, (1 if d[best] < 0 else -1)


def price_bland(double[:] d, signed char[:] status, double tol):
    cdef Py_ssize_t j, n = d.shape[0]
    cdef signed char s
    for j in range(n):
        s = status[j]
        if s == AT_LOWER and d[j] < -tol:
            return j, 1
        if s == AT_UPPER and d[j] > tol:
            return j, -1
        if s == FREE and fabs(d[j]) > tol:
            return j, (1 if d[j] < 0 else -1)
    return -1, 0


def ratio_test(double[:] alpha, double[:] xb, double[:] lb, double[:] ub, int direction,
               double piv_tol, double feas_tol, bint bland, long[:] basis):
    cdef Py_ssize_t i, m = xb.shape[0], best = -1
    cdef double rate, lim, cap = INFINITY, ex, best_mag = -1.0
    cdef bint best_up = False
    for i in range(m):
        rate = -direction * alpha[i]
        if rate < -piv_tol:
            lim = (xb[i] - lb[i] + feas_tol) / -rate
        elif rate > piv_tol:
            lim = (ub[i] - xb[i] + feas_tol) / rate
        else:
            continue
        if lim < cap:
            cap = lim
    if cap == INFINITY:
        return -1, INFINITY, False
    for i in range(m):
        rate = -direction * alpha[i]
        if rate < -piv_tol:
            ex = (xb[i] - lb[i]) / -rate
        elif rate > piv_tol:
            ex = (ub[i] - xb[i]) / rate
        else:
            continue
        if ex > cap:
            continue
        if bland:
            if best < 0 or basis[i] < basis[best]:
                best, best_up = i, rate > 0
        elif fabs(rate) > best_mag:
            best, best_mag, best_up = i, fabs(rate), rate > 0
    if best < 0:
        return -1, INFINITY, False
    rate = -direction * alpha[best]
    ex = (xb[best] - lb[best]) / -rate if rate < 0 else (ub[best] - xb[best]) / rate
    return best, (ex if ex > 0 else 0.0), best_up


def dual_ratio(double[:] row, double[:] d, signed char[:] status, double[:] span, int sign,
               double delta, double piv_tol):
    cdef Py_ssize_t j, k, n = row.shape[0], cnt = 0
    cdef double r, slope
    cdef signed char s
    cdef bint ok
    cand = np.empty(n, dtype=np.int64)
    cdef long[:] cv = cand
    for j in range(n):
        s = status[j]
        if s == BASIC or s == FIXED:
            continue
        r = row[j]
        if fabs(r) <= piv_tol:
            continue
        if s == AT_LOWER:
            ok = -r * sign > 0
        elif s == AT_UPPER:
            ok = r * sign > 0
        else:
            ok = True
        if ok:
            cv[cnt] = j
            cnt += 1
    if cnt == 0:
        return -1, cand[:0]
    idx = cand[:cnt]
    rv = np.asarray(row)[idx]
    absr = np.abs(rv)
    ratio = np.abs(np.asarray(d)[idx]) / absr
    idx = idx[np.lexsort((-absr, ratio))]
    cdef long[:] iv = idx
    slope = delta
    for k in range(cnt):
        j = iv[k]
        slope -= fabs(row[j]) * span[j]
        if slope <= 0:
            return j, idx[:k]
    return -1, idx[:0]
