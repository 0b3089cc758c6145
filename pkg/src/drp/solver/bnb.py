"""LP-based branch-and-bound for :class:`~drp.formulation.MilpModel`.

Open nodes sit in a heap ordered by their parent's LP bound. Each popped node
is followed by a plunge: one child is solved immediately on the live
tableau while its sibling is queued with a basis snapshot, so the dual
simplex restarts close to optimal. ``threads > 1`` runs several workers over
the shared heap; each owns its own simplex engine.
"""

from __future__ import annotations

import heapq
import itertools
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..formulation import MilpModel
from .lp import LpProblem, SimplexEngine

INT_TOL = 1e-6


@dataclass(frozen=True)
class MilpParams:
    gap: float = 1e-4
    abs_gap: float = 1e-9
    time_limit: float = math.inf
    threads: int = 1
    branch_nu: bool = False
    int_tol: float = INT_TOL
    node_limit: int = 10**7


@dataclass
class MilpResult:
    status: str  # optimal | gap_limit | time_limit | infeasible
    objective: float  # incumbent value (UP), nan without incumbent
    bound: float  # LB
    x: Optional[np.ndarray]
    nodes: int
    seconds: float
    root_bound: float = math.nan
    rejected: int = 0
    history: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return relative_gap(self.objective, self.bound)

    @property
    def has_solution(self) -> bool:
        return self.x is not None


def relative_gap(up: float, lb: float) -> float:
    if not math.isfinite(up):
        return math.inf
    if not math.isfinite(lb):
        return math.inf
    return max(0.0, up - lb) / max(1e-9, abs(up))


def lp_problem(model: MilpModel, relax: bool = True) -> LpProblem:
    c, A, lo, hi, col_lo, col_hi = model.dense()
    return LpProblem(c, A, lo, hi, col_lo, col_hi, model.obj_const)


def lp_relaxation_bound(model: MilpModel) -> float:
    """Objective of the continuous relaxation (``inf`` when infeasible)."""
    from .lp import solve_lp

    res = solve_lp(lp_problem(model))
    return res.objective if res.optimal else math.inf


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lo: np.ndarray = field(compare=False)
    hi: np.ndarray = field(compare=False)
    snap: tuple = field(compare=False)
    depth: int = field(compare=False, default=0)


class _Search:
    def __init__(self, model: MilpModel, params: MilpParams,
                 accept: Optional[Callable[[np.ndarray], bool]]):
        self.model = model
        self.params = params
        self.accept = accept
        self.problem = lp_problem(model)
        self.ints = np.array(model.integer_indices(), dtype=np.int64)
        self.nu = model.roles.get(("nu",)) if params.branch_nu else None
        self.heap: List[_Node] = []
        self.seq = itertools.count()
        self.lock = threading.Condition()
        self.up = math.inf
        self.x_best: Optional[np.ndarray] = None
        self.floor = math.inf  # smallest bound discarded only because of the gap tolerance
        self.lb = -math.inf
        self.active: dict = {}
        self.nodes = 0
        self.rejected = 0
        self.history: List[Tuple[float, float]] = []
        self.t0 = time.perf_counter()
        self.timed_out = False

    # -- bookkeeping (callers hold the lock) -------------------------------------

    def _tolerance(self) -> float:
        return max(self.params.abs_gap, self.params.gap * abs(self.up)) if math.isfinite(self.up) else 0.0

    def _prunable(self, bound: float) -> bool:
        if not math.isfinite(self.up):
            return False
        if bound >= self.up - self.params.abs_gap:
            return True
        if bound >= self.up - self._tolerance():
            self.floor = min(self.floor, bound)
            return True
        return False

    def _record(self):
        cands = [self.up, self.floor]
        if self.heap:
            cands.append(self.heap[0].bound)
        cands.extend(self.active.values())
        lb = min(cands)
        if math.isfinite(lb):
            self.lb = max(self.lb, lb)
        self.history.append((self.up, self.lb))

    def _offer(self, x: np.ndarray, obj: float) -> None:
        if obj >= self.up:
            return
        if self.accept is not None and not self.accept(x):
            self.rejected += 1
            return
        self.up = obj
        self.x_best = x
        self.heap = [nd for nd in self.heap if not self._prunable(nd.bound)]
        heapq.heapify(self.heap)

    # -- LP side ------------------------------------------------------------------

    def _fractional(self, x: np.ndarray) -> int:
        tol = self.params.int_tol
        if self.nu is not None:
            v = x[self.nu]
            if abs(v - round(v)) > tol:
                return self.nu
        vals = x[self.ints]
        frac = np.abs(vals - np.round(vals))
        if not (frac > tol).any():
            return -1
        k = int(np.argmax(frac))  # first maximum: deterministic
        return int(self.ints[k])

    def _polish(self, eng: SimplexEngine, x: np.ndarray):
        """Fix integers to their rounded values and re-solve for the continuous part."""
        lo, hi = eng.col_lo[self.ints].copy(), eng.col_hi[self.ints].copy()
        r = np.round(x[self.ints])
        eng.set_col_bounds(self.ints, r, r)
        res = eng.resolve()
        eng.set_col_bounds(self.ints, lo, hi)
        if not res.optimal:
            return None
        xs = res.x.copy()
        xs[self.ints] = r
        return xs, res.objective

    def _cutoff(self) -> float:
        with self.lock:
            return self.up - self._tolerance() if math.isfinite(self.up) else math.inf

    def _process(self, eng: SimplexEngine, node: _Node) -> None:
        """Solve ``node`` and plunge down one branch, queueing siblings."""
        eng.set_col_bounds(self.ints, node.lo, node.hi)
        if node.snap is not None:
            eng.restore(node.snap)
        lo, hi, depth = node.lo.copy(), node.hi.copy(), node.depth
        while True:
            res = eng.resolve(self._cutoff())
            with self.lock:
                self.nodes += 1
            if not res.optimal:
                return
            with self.lock:
                if self._prunable(res.objective):
                    return
            j = self._fractional(res.x)
            if j < 0:
                pol = self._polish(eng, res.x)
                if pol is not None:
                    with self.lock:
                        self._offer(*pol)
                return
            v = res.x[j]
            k = self.ints.searchsorted(j)
            down_hi, up_lo = math.floor(v), math.ceil(v)
            go_up = v - down_hi >= 0.5
            sib_lo, sib_hi = lo.copy(), hi.copy()
            if go_up:
                sib_hi[k] = down_hi
                lo[k] = up_lo
            else:
                sib_lo[k] = up_lo
                hi[k] = down_hi
            snap = eng.snapshot()
            with self.lock:
                heapq.heappush(self.heap, _Node(res.objective, next(self.seq), sib_lo, sib_hi, snap, depth + 1))
                self.active[threading.get_ident()] = res.objective
                self.lock.notify()
            depth += 1
            eng.set_col_bounds(self.ints, lo, hi)
            if self._out_of_budget():
                with self.lock:
                    heapq.heappush(self.heap, _Node(res.objective, next(self.seq), lo, hi, snap, depth))
                return

    def _out_of_budget(self) -> bool:
        if time.perf_counter() - self.t0 > self.params.time_limit:
            self.timed_out = True
            return True
        return self.nodes >= self.params.node_limit

    # -- driver -------------------------------------------------------------------

    def _worker(self, eng: SimplexEngine) -> None:
        me = threading.get_ident()
        while True:
            with self.lock:
                while True:
                    if self.timed_out or self.nodes >= self.params.node_limit:
                        self.lock.notify_all()
                        return
                    while self.heap and self._prunable(self.heap[0].bound):
                        heapq.heappop(self.heap)
                    if self.heap:
                        node = heapq.heappop(self.heap)
                        self.active[me] = node.bound
                        break
                    if not self.active:
                        self.lock.notify_all()
                        return
                    self.lock.wait(0.05)
            try:
                self._process(eng, node)
            finally:
                with self.lock:
                    self.active.pop(me, None)
                    self._record()
                    self.lock.notify_all()
            if self._out_of_budget():
                with self.lock:
                    self.lock.notify_all()
                return

    def run(self) -> MilpResult:
        root = SimplexEngine(self.problem)
        res = root.solve()
        if not res.optimal:
            return self._result("infeasible", math.nan)
        root_bound = res.objective
        lo = self.problem.col_lo[self.ints].copy()
        hi = self.problem.col_hi[self.ints].copy()
        self.heap.append(_Node(root_bound, next(self.seq), lo, hi, root.snapshot(), 0))
        self.lb = root_bound
        self.history.append((self.up, self.lb))
        n_workers = max(1, int(self.params.threads))
        if n_workers == 1:
            self._worker(root)
        else:
            engines = [root]
            for _ in range(n_workers - 1):
                eng = SimplexEngine(self.problem)
                eng.solve()
                engines.append(eng)
            pool = [threading.Thread(target=self._worker, args=(e,), daemon=True) for e in engines]
            for t in pool:
                t.start()
            for t in pool:
                t.join()
        if self.timed_out or self.heap:
            return self._result("time_limit", root_bound)
        if self.x_best is None:
            return self._result("infeasible", root_bound)
        self.lb = max(self.lb, min(self.up, self.floor))
        self.lb = min(self.lb, self.up)
        self.history.append((self.up, self.lb))
        closed = relative_gap(self.up, self.lb) <= 1e-9 or self.up - self.lb <= self.params.abs_gap
        return self._result("optimal" if closed else "gap_limit", root_bound)

    def _result(self, status: str, root_bound: float) -> MilpResult:
        up = self.up if self.x_best is not None else math.nan
        lb = self.lb
        if status == "infeasible":
            lb = math.inf
        elif math.isfinite(self.up):
            lb = min(lb, self.up)
        return MilpResult(status, up, lb, self.x_best, self.nodes, time.perf_counter() - self.t0,
                          root_bound, self.rejected, self.history)


def branch_and_bound(model: MilpModel, params: Optional[MilpParams] = None,
                     accept: Optional[Callable[[np.ndarray], bool]] = None, **overrides) -> MilpResult:
    """Minimize ``model``; ``accept`` may veto incumbents (e.g. an independent validator)."""
    params = params or MilpParams()
    if overrides:
        params = MilpParams(**{**params.__dict__, **overrides})
    if params.gap < 0 or params.threads < 1:
        raise ValueError("gap must be >= 0 and threads >= 1")
    return _Search(model, params, accept).run()
