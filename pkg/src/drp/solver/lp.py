"""Dense bounded-variable simplex.

Rows are written as ``A x - s = 0`` with one slack per row whose bounds carry
the row range, so every variable is simply boxed. The engine keeps the full
tableau ``B^-1 [A | -I | artificials]`` with the reduced-cost row appended as
its last row; pivots update both at once.

Primal simplex uses Dantzig pricing and falls back to Bland's rule after
``3 * (rows + cols)`` iterations without objective progress. A bounded dual
simplex re-optimizes after bound changes, which is how branch-and-bound
reuses the parent's basis. It picks the leaving row by exact dual steepest
edge (the row norms of ``B^-1`` sit in the slack block of the tableau) and
enters with a bound-flipping ratio test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import kernels
from ..kernels import AT_LOWER, AT_UPPER, BASIC, FIXED, FREE

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9


class LpStallError(RuntimeError):
    """The simplex made no progress even under Bland's rule."""


@dataclass
class LpProblem:
    """``min c x + const`` s.t. ``row_lo <= A x <= row_hi``, ``col_lo <= x <= col_hi``."""

    c: np.ndarray
    A: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.A.size == 0:
            self.A = self.A.reshape(0, self.c.shape[0])
        self.row_lo = np.asarray(self.row_lo, dtype=float)
        self.row_hi = np.asarray(self.row_hi, dtype=float)
        self.col_lo = np.asarray(self.col_lo, dtype=float)
        self.col_hi = np.asarray(self.col_hi, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.col_lo.shape != (n,) or self.col_hi.shape != (n,):
            raise ValueError("column data has inconsistent length")
        if self.row_lo.shape != (m,) or self.row_hi.shape != (m,):
            raise ValueError("row data has inconsistent length")

    @property
    def shape(self):
        return self.A.shape


@dataclass
class LpResult:
    status: str
    objective: float
    x: Optional[np.ndarray]
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class SimplexEngine:
    """Stateful simplex on one :class:`LpProblem`; column bounds may be changed between solves."""

    def __init__(self, problem: LpProblem, refactor_every: int = 256):
        self.problem = problem
        self.refactor_every = refactor_every
        m, n = problem.shape
        self.m, self.n = m, n
        self.iterations = 0
        self.bland = False
        self.col_lo = problem.col_lo.copy()
        self.col_hi = problem.col_hi.copy()
        self._cold_columns()

    # -- setup --------------------------------------------------------------

    def _build_columns(self, art_rows: np.ndarray, art_sign: np.ndarray):
        """Lay out ``[A | -I | artificials]`` with one artificial per listed row."""
        p = self.problem
        m, n = self.m, self.n
        na = art_rows.size
        N = n + m + na
        K = np.zeros((m, N))
        K[:, :n] = p.A
        K[np.arange(m), n + np.arange(m)] = -1.0
        K[art_rows, n + m + np.arange(na)] = art_sign
        self.K = K
        self.N = N
        self.n_art = na
        self.art_start = n + m
        self.art_rows = art_rows
        self.art_sign = art_sign
        # row and sign of each unit column (slacks and artificials)
        self.unit_row = np.concatenate([np.full(n, -1), np.arange(m), art_rows]).astype(np.int64)
        self.unit_sign = np.concatenate([np.zeros(n), np.full(m, -1.0), art_sign])
        self.lo = np.concatenate([self.col_lo, p.row_lo, np.zeros(na)])
        self.hi = np.concatenate([self.col_hi, p.row_hi, np.full(na, np.inf)])
        self.T = np.empty((m + 1, N))

    def _cold_columns(self):
        p = self.problem
        m, n = self.m, self.n
        lo, hi = self.col_lo, self.col_hi
        # nonbasic structurals start at the bound nearer zero (0 when free)
        fl, fh = np.isfinite(lo), np.isfinite(hi)
        near_lo = fl & (~fh | (np.abs(lo) <= np.abs(hi)))
        xs = np.where(near_lo, lo, np.where(fh, hi, 0.0))
        act = p.A @ xs if m else np.zeros(0)
        need = (act < p.row_lo - FEAS_TOL) | (act > p.row_hi + FEAS_TOL)
        art_rows = np.nonzero(need)[0]
        target = np.where(act < p.row_lo, p.row_lo, p.row_hi)[art_rows]
        sign = np.where(target - act[art_rows] > 0, 1.0, -1.0)
        self._build_columns(art_rows, sign)
        na = art_rows.size
        self.x = np.concatenate([xs, act, np.zeros(na)])
        basis = n + np.arange(m)
        self.status = np.full(self.N, -1, dtype=np.int8)
        for k, i in enumerate(art_rows):
            col = n + m + k
            self.x[n + i] = target[k]
            self.x[col] = abs(target[k] - act[i])
            basis[i] = col
        self.basis = basis.astype(np.int64)
        self.status[self.basis] = BASIC
        for i in art_rows:
            j = n + i
            if p.row_lo[i] == p.row_hi[i]:
                self.status[j] = FIXED
            else:
                self.status[j] = AT_LOWER if self.x[j] == p.row_lo[i] else AT_UPPER
        self._place_nonbasic()
        self.current = False
        self.pivots = 0

    def _place_nonbasic(self, d: Optional[np.ndarray] = None):
        """Assign every nonbasic variable a bound status and the matching value.

        Boxed variables keep their current side unless ``d`` says that side is
        dual infeasible; fresh ones go to the bound nearer zero.
        """
        lo, hi, st = self.lo, self.hi, self.status
        nb = st != BASIC
        fl, fh = np.isfinite(lo), np.isfinite(hi)
        boxed = nb & fl & fh & (lo != hi)
        if d is None:
            pick_lo = np.where(st == AT_UPPER, False, np.where(st == AT_LOWER, True, np.abs(lo) <= np.abs(hi)))
        else:
            pick_lo = np.where(
                (st == AT_LOWER) & (d >= -OPT_TOL), True,
                np.where((st == AT_UPPER) & (d <= OPT_TOL), False, d >= 0),
            )
        st[boxed & pick_lo] = AT_LOWER
        st[boxed & ~pick_lo] = AT_UPPER
        st[nb & fl & fh & (lo == hi)] = FIXED
        st[nb & fl & ~fh] = AT_LOWER
        st[nb & ~fl & fh] = AT_UPPER
        st[nb & ~fl & ~fh] = FREE
        x = self.x
        x[st == AT_LOWER] = lo[st == AT_LOWER]
        x[st == FIXED] = lo[st == FIXED]
        x[st == AT_UPPER] = hi[st == AT_UPPER]
        x[st == FREE] = 0.0

    def _costs(self, phase: int) -> np.ndarray:
        c = np.zeros(self.N)
        if phase == 1:
            c[self.art_start:] = 1.0
        else:
            c[: self.n] = self.problem.c
        return c

    # -- linear algebra -------------------------------------------------------

    def refactor(self, cost: np.ndarray):
        m = self.m
        if m:
            self.T[:m] = self._binv_k()
            self.T[:m, self.basis] = np.eye(m)
        self.current = True
        self.pivots = 0
        self._update_costs(cost)
        self._recompute_basics()

    def _binv_k(self) -> np.ndarray:
        """``B^-1 K``, solving only the block of rows not covered by basic unit columns."""
        m, n, K = self.m, self.n, self.K
        basis = self.basis
        struct = basis < n
        ps, pu = np.nonzero(struct)[0], np.nonzero(~struct)[0]
        urow = self.unit_row[basis[pu]]
        rest = np.ones(m, dtype=bool)
        rest[urow] = False
        crow = np.nonzero(rest)[0]
        if crow.size != ps.size or np.unique(urow).size != urow.size:
            return np.linalg.solve(K[:, basis], K)
        out = np.empty((m, self.N))
        cols = basis[ps]
        xs = np.linalg.solve(K[np.ix_(crow, cols)], K[crow]) if ps.size else np.zeros((0, self.N))
        out[ps] = xs
        out[pu] = (K[urow] - K[np.ix_(urow, cols)] @ xs) / self.unit_sign[basis[pu]][:, None]
        return out

    def _prepare(self, cost: np.ndarray):
        """Make the tableau match the basis and ``cost``, refactoring only when needed."""
        if self.current and self.pivots < self.refactor_every:
            self._update_costs(cost)
        else:
            self.refactor(cost)

    def _update_costs(self, cost: np.ndarray):
        self.cost = cost
        m = self.m
        d = cost - (cost[self.basis] @ self.T[:m] if m else 0.0)
        d[self.basis] = 0.0
        self.T[m] = d

    def _recompute_basics(self):
        m = self.m
        if not m:
            return
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = -(self.T[:m] @ xn)

    @property
    def d(self) -> np.ndarray:
        return self.T[self.m]

    def objective(self) -> float:
        return float(self.problem.c @ self.x[: self.n]) + self.problem.const

    # -- primal simplex -------------------------------------------------------

    def _primal(self, cost: np.ndarray, max_iter: int) -> str:
        m = self.m
        self._prepare(cost)
        stall = 0
        best = float(cost @ self.x)
        bland = False
        limit = 3 * (self.m + self.N)
        for _ in range(max_iter):
            if self.pivots >= self.refactor_every:
                self.refactor(cost)
            d = self.T[m]
            if bland:
                j, direction = kernels.price_bland(d, self.status, OPT_TOL)
            else:
                j, direction = kernels.price_dantzig(d, self.status, OPT_TOL)
            if j < 0:
                return "optimal"
            self.iterations += 1
            alpha = np.ascontiguousarray(self.T[:m, j])
            xb = self.x[self.basis]
            lb = self.lo[self.basis]
            ub = self.hi[self.basis]
            r, step, to_upper = kernels.ratio_test(
                alpha, xb, lb, ub, direction, PIVOT_TOL, FEAS_TOL, bland, self.basis
            )
            flip = self.hi[j] - self.lo[j] if self.status[j] in (AT_LOWER, AT_UPPER) else np.inf
            if r < 0 and not math.isfinite(flip):
                return "unbounded"
            if flip <= step or r < 0:
                self.x[self.basis] = xb - direction * flip * alpha
                if self.status[j] == AT_LOWER:
                    self.status[j], self.x[j] = AT_UPPER, self.hi[j]
                else:
                    self.status[j], self.x[j] = AT_LOWER, self.lo[j]
            else:
                self._pivot_in(r, j, xb - direction * step * alpha, self.x[j] + direction * step, to_upper)
            val = float(cost @ self.x)
            if val < best - 1e-12 * max(1.0, abs(best)):
                best = val
                stall = 0
            else:
                stall += 1
                if stall > limit:
                    if bland:
                        raise LpStallError(
                            f"no progress in {stall} iterations under Bland's rule "
                            f"(rows={self.m}, cols={self.N}, objective={val:g})"
                        )
                    bland = True
                    stall = 0
        raise LpStallError(f"iteration limit {max_iter} reached")

    def _pivot_in(self, r: int, j: int, new_xb: np.ndarray, x_enter: float, to_upper: bool):
        leave = int(self.basis[r])
        self.x[self.basis] = new_xb
        if self.lo[leave] == self.hi[leave]:
            self.status[leave], self.x[leave] = FIXED, self.lo[leave]
        elif to_upper:
            self.status[leave], self.x[leave] = AT_UPPER, self.hi[leave]
        else:
            self.status[leave], self.x[leave] = AT_LOWER, self.lo[leave]
        kernels.pivot(self.T, r, j)
        self.pivots += 1
        self.basis[r] = j
        self.status[j] = BASIC
        self.x[j] = x_enter

    # -- dual simplex ---------------------------------------------------------

    def _dual_feasible(self) -> bool:
        d = self.T[self.m]
        st = self.status
        bad = ((st == AT_LOWER) & (d < -1e-7)) | ((st == AT_UPPER) & (d > 1e-7)) | ((st == FREE) & (np.abs(d) > 1e-7))
        return not bool(bad.any())

    def _primal_infeasibility(self):
        xb = self.x[self.basis]
        below = self.lo[self.basis] - xb
        above = xb - self.hi[self.basis]
        viol = np.maximum(below, above)
        return viol, below > above

    def _flip(self, cols: np.ndarray, span: np.ndarray):
        """Move nonbasic boxed columns to their opposite bound and update the basics."""
        up = self.status[cols] == AT_LOWER
        step = np.where(up, span[cols], -span[cols])
        self.x[cols] = np.where(up, self.hi[cols], self.lo[cols])
        self.status[cols] = np.where(up, AT_UPPER, AT_LOWER)
        self.x[self.basis] -= self.T[: self.m, cols] @ step

    def _dual_bland_entering(self, row: np.ndarray, sign: int) -> int:
        st, d = self.status, self.T[self.m]
        ok = (st != BASIC) & (st != FIXED) & (np.abs(row) > PIVOT_TOL)
        ok &= np.where(st == AT_LOWER, -row * sign > 0, np.where(st == AT_UPPER, row * sign > 0, True))
        idx = np.nonzero(ok)[0]
        if idx.size == 0:
            return -1
        ratio = np.abs(d[idx]) / np.abs(row[idx])
        return int(idx[np.nonzero(ratio <= ratio.min() + 1e-12)[0][0]])

    def _dual(self, cost: np.ndarray, max_iter: int, cutoff: float) -> str:
        """Bounded dual simplex; Bland-style choices after a run of non-improving steps."""
        m = self.m
        self._prepare(cost)
        best = -math.inf
        stall = 0
        bland = False
        limit = self.m + self.N
        for _ in range(max_iter):
            if self.pivots >= self.refactor_every:
                self.refactor(cost)
            viol, below = self._primal_infeasibility()
            if m == 0:
                return "optimal"
            infeasible = viol > FEAS_TOL
            if not infeasible.any():
                return "optimal"
            val = self.objective()
            if math.isfinite(cutoff) and val > cutoff:
                return "cutoff"
            if val > best + 1e-12 * max(1.0, abs(best) if math.isfinite(best) else 1.0):
                best, stall = val, 0
            else:
                stall += 1
                if stall > limit:
                    if bland:
                        raise LpStallError(f"dual simplex made no progress in {stall} iterations under Bland's rule")
                    bland, stall = True, 0
            self.iterations += 1
            if bland:
                rows = np.nonzero(infeasible)[0]
                r = int(rows[np.argmin(self.basis[rows])])
            else:
                # dual steepest edge: the slack block of the tableau holds -B^-1
                rows = np.nonzero(infeasible)[0]
                Binv = self.T[rows, self.n:self.n + m]
                w = np.einsum("ij,ij->i", Binv, Binv)
                r = int(rows[np.argmax(viol[rows] ** 2 / np.maximum(w, 1e-12))])
            sign = 1 if below[r] else -1
            row = np.ascontiguousarray(self.T[r, :])
            if bland:
                j = self._dual_bland_entering(row, sign)
            else:
                span = self.hi - self.lo
                j, flips = kernels.dual_ratio(row, self.T[m], self.status, span, sign, float(viol[r]) - FEAS_TOL, PIVOT_TOL)
                if j >= 0 and flips.size:
                    self._flip(flips, span)
            if j < 0:
                return "infeasible"
            leave = int(self.basis[r])
            target = self.lo[leave] if below[r] else self.hi[leave]
            dx = (self.x[leave] - target) / row[j]
            alpha = self.T[:m, j]
            new_xb = self.x[self.basis] - dx * alpha
            new_xb[r] = target
            self._pivot_in(r, j, new_xb, self.x[j] + dx, not below[r])
        raise LpStallError(f"dual simplex iteration limit {max_iter} reached")

    # -- drivers --------------------------------------------------------------

    def _max_iter(self) -> int:
        return 50 * (self.m + self.N) + 10000

    def _finish(self, status: str) -> LpResult:
        if status != "optimal":
            return LpResult(status, math.nan, None, self.iterations)
        x = self.x[: self.n].copy()
        return LpResult("optimal", self.objective(), x, self.iterations)

    def solve(self) -> LpResult:
        """Cold two-phase solve from the slack/artificial crash basis."""
        if (self.col_lo > self.col_hi + FEAS_TOL).any():
            return LpResult("infeasible", math.nan, None, self.iterations)
        self._cold_columns()
        if self.n_art:
            st = self._primal(self._costs(1), self._max_iter())
            if st != "optimal":
                return self._finish("infeasible")
            infeas = float(self.x[self.art_start:].sum())
            if infeas > FEAS_TOL * max(1.0, self.m):
                return self._finish("infeasible")
        self._fix_artificials()
        st = self._primal(self._costs(2), self._max_iter())
        if st == "optimal" and not self._verify():
            st = self._primal(self._costs(2), self._max_iter())
        return self._finish(st)

    def _fix_artificials(self):
        a = self.art_start
        self.lo[a:] = 0.0
        self.hi[a:] = 0.0
        nb = self.status[a:] != BASIC
        self.status[a:][nb] = FIXED
        self.x[a:][nb] = 0.0

    def _verify(self) -> bool:
        """Check the row residual and bounds; refactor first if the residual has drifted."""
        if self.m:
            resid = np.abs(self.K @ self.x).max()
            if resid > 1e-9 * max(1.0, np.abs(self.x).max()):
                self.refactor(self.cost)
        viol, _ = self._primal_infeasibility()
        return bool(viol.size == 0 or viol.max() <= FEAS_TOL)

    def set_col_bounds(self, j, lo, hi) -> None:
        """Change bounds of column(s) ``j``; kept across cold restarts."""
        self.col_lo[j] = lo
        self.col_hi[j] = hi
        self.lo[j] = lo
        self.hi[j] = hi

    def col_bounds(self, j: int):
        return self.lo[j], self.hi[j]

    def snapshot(self):
        """Basis, statuses and the artificial-column layout they refer to."""
        return self.basis.copy(), self.status.copy(), (self.art_rows.copy(), self.art_sign.copy())

    def restore(self, snap) -> None:
        """Adopt a basis taken after phase 1 (from this or another engine on the same problem)."""
        basis, status, (rows, sign) = snap
        if not (np.array_equal(rows, self.art_rows) and np.array_equal(sign, self.art_sign)):
            self._build_columns(rows, sign)
            self.x = np.zeros(self.N)
            self.current = False
        if not (self.current and self._pivot_to(basis)):
            self.basis = basis.copy()
            self.current = False
        self.status = status.copy()
        self._fix_artificials()

    def _pivot_to(self, basis: np.ndarray) -> bool:
        """Reach ``basis`` by pivoting the live tableau; False if a refactor is cheaper or safer."""
        m = self.m
        target = np.zeros(self.N, dtype=bool)
        target[basis] = True
        enter = [j for j in basis if self.status[j] != BASIC]
        if len(enter) > m // 8 or self.pivots + len(enter) >= self.refactor_every:
            return False
        for j in enter:
            col = np.abs(self.T[:m, j])
            col[target[self.basis]] = 0.0
            r = int(np.argmax(col))
            if col[r] < 1e-7:
                return False
            leave = int(self.basis[r])
            kernels.pivot(self.T, r, j)
            self.pivots += 1
            self.status[leave] = AT_LOWER
            self.basis[r] = j
            self.status[j] = BASIC
        # keep the snapshot's row order so later snapshots compare equal
        order = np.argsort(np.argsort(basis))
        pos = np.argsort(self.basis)
        perm = pos[order]
        self.T[:m] = self.T[perm]
        self.basis = self.basis[perm]
        return True

    def resolve(self, cutoff: float = math.inf) -> LpResult:
        """Re-optimize from the current basis after bound changes."""
        cost = self._costs(2)
        if (self.col_lo > self.col_hi + FEAS_TOL).any():
            return LpResult("infeasible", math.nan, None, self.iterations)
        try:
            self._prepare(cost)
        except np.linalg.LinAlgError:
            return self.solve()
        self._place_nonbasic(self.d)
        self._recompute_basics()
        viol, _ = self._primal_infeasibility()
        try:
            if viol.size == 0 or viol.max() <= FEAS_TOL:
                st = self._primal(cost, self._max_iter())
            elif self._dual_feasible():
                st = self._dual(cost, self._max_iter(), cutoff)
                if st == "optimal":
                    # clean up any dual infeasibility left by tolerances
                    st = self._primal(cost, self._max_iter())
            else:
                return self.solve()
        except LpStallError:
            return self.solve()
        if st == "cutoff":
            return LpResult("cutoff", self.objective(), None, self.iterations)
        if st == "optimal" and not self._verify():
            return self.solve()
        return self._finish(st)


def solve_lp(problem: LpProblem) -> LpResult:
    """Solve an LP from scratch."""
    lo_bad = problem.col_lo > problem.col_hi + FEAS_TOL
    row_bad = problem.row_lo > problem.row_hi + FEAS_TOL
    if lo_bad.any() or row_bad.any():
        return LpResult("infeasible", math.nan, None, 0)
    return SimplexEngine(problem).solve()
