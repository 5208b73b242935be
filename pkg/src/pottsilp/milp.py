"""Best-bound branch-and-bound over binary variables with lazy constraints."""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .lp import INFEASIBLE, UNBOUNDED, Basis, SimplexEngine, model_arrays
from .model import LinearConstraint, MilpModel

INT_TOL = 1e-6
FEAS_TOL = 1e-7
# LP objectives are only trusted to this absolute accuracy; bounds closer
# than this to the incumbent count as equal
ABS_TOL = 1e-9

OPTIMAL_STATUS = "optimal"
FEASIBLE = "feasible"
NO_SOLUTION = "no_solution"
INFEASIBLE_STATUS = "infeasible"

# Given the current point and whether its binaries are integral, return the
# violated constraints (terms indexed by model column).
LazySeparator = Callable[[np.ndarray, bool], Sequence[LinearConstraint]]


@dataclass
class SolveOptions:
    time_limit: float = 100.0
    gap_tol: float = 1e-6
    node_limit: Optional[int] = None
    fractional_separation: bool = False


@dataclass
class SolveStats:
    nodes: int = 0
    simplex_iterations: int = 0
    lazy_cuts: int = 0
    wall_time: float = 0.0
    root_lp: float = math.nan
    bound_trace: list[float] = field(default_factory=list, repr=False)


@dataclass
class MilpResult:
    status: str
    objective: float
    bound: float
    gap: float
    values: Optional[np.ndarray]
    stats: SolveStats
    lazy_constraints: list[LinearConstraint] = field(default_factory=list, repr=False)

    @property
    def has_solution(self) -> bool:
        return self.values is not None


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return (incumbent - bound) / max(abs(incumbent), 1e-9)


@dataclass(order=True)
class _Node:
    bound: float
    neg_depth: int
    seq: int
    fixings: tuple = field(compare=False)
    basis: Optional[Basis] = field(compare=False)
    parent: int = field(compare=False, default=-1)


def solve_milp(model: MilpModel, options: SolveOptions | None = None,
               separator: LazySeparator | None = None) -> MilpResult:
    """Minimize ``model`` exactly (up to ``options.gap_tol``).

    Nodes are taken in best-bound order; among equal bounds the deepest node
    goes first, so the search dives.  Integral LP points are handed to
    ``separator``; any cuts it returns are added globally and the node is
    re-solved until the separator has nothing left to say.
    """
    options = options or SolveOptions()
    start = time.perf_counter()
    model.freeze()
    A, senses, b, c, lb0, ub0 = model_arrays(model)
    engine = SimplexEngine(A, senses, b, c, lb0, ub0)
    binaries = model.binary_indices()
    stats = SolveStats()
    lazy: list[LinearConstraint] = []
    seq = itertools.count()
    const = model.objective_constant

    incumbent = math.inf
    best_values: Optional[np.ndarray] = None
    fathomed_low = math.inf  # lowest bound among nodes closed only by tolerance

    def cutoff() -> float:
        if not math.isfinite(incumbent):
            return math.inf
        return incumbent - max(options.gap_tol * max(abs(incumbent), 1e-9), ABS_TOL * max(1.0, abs(incumbent)))

    def close(bound: float) -> None:
        nonlocal fathomed_low
        if bound < incumbent:
            fathomed_low = min(fathomed_low, bound)

    def point_feasible(values: np.ndarray) -> bool:
        slack = engine.b - engine.A[:, : engine.n] @ values
        lo = engine.lb[engine.n:]
        hi = engine.ub[engine.n:]
        rows_ok = np.all(slack >= lo - FEAS_TOL) and np.all(slack <= hi + FEAS_TOL)
        return bool(rows_ok and np.all(values >= lb0 - FEAS_TOL) and np.all(values <= ub0 + FEAS_TOL))

    def add_cuts(cuts: Sequence[LinearConstraint]) -> None:
        for cut in cuts:
            coefs = np.zeros(engine.n)
            for j, v in cut.terms:
                coefs[j] += v
            engine.add_row(coefs, cut.sense, cut.rhs)
            lazy.append(cut)
        stats.lazy_cuts += len(cuts)

    def try_incumbent(values: np.ndarray) -> None:
        nonlocal incumbent, best_values
        obj = float(c @ values) + const
        if obj < incumbent:
            incumbent, best_values = obj, values

    heap: list[_Node] = [_Node(-math.inf, 0, next(seq), (), None)]
    engine_holds = -2
    status = None
    while heap:
        if time.perf_counter() - start > options.time_limit:
            status = "time"
            break
        if options.node_limit is not None and stats.nodes >= options.node_limit:
            status = "nodes"
            break
        node = heapq.heappop(heap)
        if node.bound >= cutoff():
            close(node.bound)
            continue
        node_id = stats.nodes
        stats.nodes += 1

        lb, ub = lb0.copy(), ub0.copy()
        for j, v in node.fixings:
            lb[j] = ub[j] = v
        engine.set_bounds(lb, ub)
        if node.basis is not None and engine_holds != node.parent:
            engine.restore(node.basis)
        engine_holds = node_id

        while True:
            lp_status = engine.solve()
            if lp_status == UNBOUNDED:
                raise ValueError("LP relaxation is unbounded; bound every variable")
            if lp_status == INFEASIBLE:
                break
            obj = max(engine.objective + const, node.bound)
            if node_id == 0 and math.isnan(stats.root_lp):
                stats.root_lp = engine.objective + const
            if obj >= cutoff():
                close(obj)
                break
            values = engine.values
            frac = np.abs(values[binaries] - np.rint(values[binaries]))
            fractional = binaries[frac > INT_TOL]
            if fractional.size == 0:
                values[binaries] = np.rint(values[binaries])
                cuts = separator(values, True) if separator else ()
                if cuts:
                    add_cuts(cuts)
                    continue
                try_incumbent(values)
                break
            if separator and options.fractional_separation:
                cuts = separator(values, False)
                if cuts:
                    add_cuts(cuts)
                    continue
            # rounding fractional binaries up keeps big-M rows satisfied
            rounded = values.copy()
            rounded[fractional] = np.ceil(rounded[fractional] - INT_TOL)
            if float(c @ rounded) + const < incumbent and point_feasible(rounded):
                if not (separator and separator(rounded, True)):
                    try_incumbent(rounded)
            dist = np.abs(values[fractional] - np.floor(values[fractional]) - 0.5)
            j = int(fractional[np.argmin(dist)])
            basis = engine.snapshot()
            first, second = (1.0, 0.0) if values[j] - math.floor(values[j]) >= 0.5 else (0.0, 1.0)
            for v in (first, second):
                heapq.heappush(heap, _Node(obj, node.neg_depth - 1, next(seq),
                                           node.fixings + ((j, v),), basis, node_id))
            break
        open_low = heap[0].bound if heap else math.inf
        stats.bound_trace.append(min(open_low, incumbent, fathomed_low))

    stats.simplex_iterations = engine.iterations
    stats.wall_time = time.perf_counter() - start
    open_low = min((nd.bound for nd in heap), default=math.inf)
    if status is None and not math.isfinite(incumbent):
        return MilpResult(INFEASIBLE_STATUS, math.inf, math.inf, math.inf, None, stats, lazy)
    bound = min(open_low, incumbent, fathomed_low)
    if math.isfinite(incumbent) and incumbent - bound <= ABS_TOL * max(1.0, abs(incumbent)):
        bound = incumbent
    if math.isfinite(bound):
        stats.bound_trace.append(bound)
    gap = relative_gap(incumbent, bound)
    if status is None or (math.isfinite(incumbent) and gap <= options.gap_tol):
        result_status = OPTIMAL_STATUS
    elif math.isfinite(incumbent):
        result_status = FEASIBLE
    else:
        result_status = NO_SOLUTION
    return MilpResult(result_status, incumbent, bound, gap, best_values, stats, lazy)
