"""Piecewise-constant l1 fitting of 1D signals with a jump penalty.

Three routes to the same optimum: the big-M MIP solved by branch-and-bound,
an O(n^2 log n) dynamic program over segment boundaries, and exhaustive
enumeration of edge labelings for short signals.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import EdgeLabeling, as_signal, build_grid_graph, count_segments_1d
from .milp import MilpResult, SolveOptions, solve_milp
from .model import BINARY, MilpModel, add_abs_deviation, add_big_m_pair

BRUTE_FORCE_MAX_N = 16


@dataclass(frozen=True)
class Potts1DParams:
    lam: float
    big_m: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.big_m > 0:
            raise ValueError(f"big-M must be > 0, got {self.big_m}")


@dataclass
class Fit1D:
    w: np.ndarray
    x: EdgeLabeling
    objective: float
    segments: list[tuple[int, int, float]] = field(default_factory=list)
    result: Optional[MilpResult] = field(default=None, repr=False)


def exact_big_m(y) -> float:
    """Smallest big-M that never binds: the data range, or 1 for flat data."""
    y = np.asarray(y, dtype=float)
    rng = float(y.max() - y.min())
    return rng if rng > 0 else 1.0


def objective_1d(y, w, x, lam: float) -> float:
    return float(np.abs(np.asarray(w) - np.asarray(y)).sum() + lam * np.asarray(x).sum())


def median_fit(values) -> tuple[float, float]:
    """Lower median of ``values`` and the l1 cost of fitting it."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("median_fit needs at least one value")
    level = float(v[(v.size - 1) // 2])
    return level, float(np.abs(v - level).sum())


def build_potts1d_model(signal, params: Potts1DParams) -> MilpModel:
    y = as_signal(signal)
    n = y.size
    if n < 2:
        raise ValueError("the 1D model needs at least two samples")
    model = MilpModel(f"potts1d_n{n}")
    lo, hi = float(y.min()) - 1.0, float(y.max()) + 1.0
    w = [model.add_var(f"w_{i}", lb=lo, ub=hi) for i in range(n)]
    x = [model.add_var(f"x_{i}", BINARY, obj=params.lam) for i in range(n - 1)]
    for i in range(n - 1):
        add_big_m_pair(model, w[i], w[i + 1], x[i], params.big_m)
    for i in range(n):
        add_abs_deviation(model, w[i], y[i])
    model.add_group("w", w)
    model.add_group("x", x)
    return model


def _segment_costs(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``cost[j, i]`` and ``level[j, i]`` of the lower-median fit of ``y[j:i+1]``.

    Two heaps hold the lower and upper halves of the growing window so each
    extension costs O(log n).
    """
    n = y.size
    cost = np.zeros((n, n))
    level = np.zeros((n, n))
    for j in range(n):
        low: list[float] = []  # max-heap via negation, holds ceil(k/2) smallest
        high: list[float] = []
        s_low = s_high = 0.0
        for i in range(j, n):
            v = float(y[i])
            if low and v > -low[0]:
                heapq.heappush(high, v)
                s_high += v
            else:
                heapq.heappush(low, -v)
                s_low += v
            if len(low) > len(high) + 1:
                t = -heapq.heappop(low)
                s_low -= t
                heapq.heappush(high, t)
                s_high += t
            elif len(high) > len(low):
                t = heapq.heappop(high)
                s_high -= t
                heapq.heappush(low, -t)
                s_low += t
            med = -low[0]
            level[j, i] = med
            cost[j, i] = (med * len(low) - s_low) + (s_high - med * len(high))
    return cost, level


def _close(a: float, b: float) -> bool:
    if not (np.isfinite(a) and np.isfinite(b)):
        return a == b
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


def _fit_from_starts(y: np.ndarray, starts: list[int], lam: float) -> Fit1D:
    n = y.size
    w = np.empty(n)
    x = np.zeros(n - 1, dtype=np.int8)
    bounds = starts + [n]
    for a, b in zip(bounds[:-1], bounds[1:]):
        w[a:b] = median_fit(y[a:b])[0]
        if a > 0:
            x[a - 1] = 1
    labeling = EdgeLabeling(build_grid_graph(1, n), x)
    fit = Fit1D(w, labeling, objective_1d(y, w, x, lam))
    fit.segments = extract_segments_1d(fit)
    return fit


def solve_potts1d_dp(signal, lam: float) -> Fit1D:
    """Exact minimizer of sum |w - y| + lam * (#jumps).

    Ties go to fewer segments, then to the earliest possible last breakpoint.
    """
    if not lam >= 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    y = as_signal(signal)
    n = y.size
    cost, _ = _segment_costs(y)
    best = np.empty(n + 1)
    nseg = np.zeros(n + 1, dtype=np.int64)
    arg = np.zeros(n + 1, dtype=np.int64)
    best[0] = -lam
    for i in range(1, n + 1):
        b_val, b_seg, b_arg = np.inf, 0, 0
        for j in range(1, i + 1):
            val = best[j - 1] + cost[j - 1, i - 1] + lam
            seg = nseg[j - 1] + 1
            if val < b_val and not _close(val, b_val):
                b_val, b_seg, b_arg = val, seg, j
            elif _close(val, b_val) and seg < b_seg:
                b_val, b_seg, b_arg = val, seg, j
        best[i], nseg[i], arg[i] = b_val, b_seg, b_arg
    starts = []
    i = n
    while i > 0:
        j = int(arg[i])
        starts.append(j - 1)
        i = j - 1
    return _fit_from_starts(y, sorted(starts), lam)


def brute_force_potts1d(signal, lam: float) -> Fit1D:
    """Enumerate all 2^(n-1) edge labelings; same tie rule as the DP."""
    y = as_signal(signal)
    n = y.size
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    run_cost: dict[tuple[int, int], float] = {}
    best_key = None
    best_starts: list[int] = [0]
    for bits in itertools.product((0, 1), repeat=n - 1):
        starts = [0] + [k + 1 for k, b in enumerate(bits) if b]
        bounds = starts + [n]
        total = lam * sum(bits)
        for a, b in zip(bounds[:-1], bounds[1:]):
            if (a, b) not in run_cost:
                run_cost[a, b] = median_fit(y[a:b])[1]
            total += run_cost[a, b]
        tie_key = (len(starts), tuple(reversed(starts)))
        if best_key is None or (total < best_key[0] and not _close(total, best_key[0])):
            best_key, best_starts = (total, tie_key), starts
        elif _close(total, best_key[0]) and tie_key < best_key[1]:
            best_key, best_starts = (best_key[0], tie_key), starts
    return _fit_from_starts(y, best_starts, lam)


def extract_segments_1d(fit: Fit1D) -> list[tuple[int, int, float]]:
    """Maximal dormant runs as ``(start, end, level)`` with ``end`` inclusive."""
    x = fit.x.values
    segments = []
    start = 0
    for k, active in enumerate(x.tolist()):
        if active:
            segments.append((start, k, float(fit.w[start])))
            start = k + 1
    segments.append((start, len(fit.w) - 1, float(fit.w[start])))
    assert len(segments) == count_segments_1d(fit.x)
    return segments


def solve_potts1d_mip(signal, params: Potts1DParams, options: SolveOptions | None = None) -> Fit1D:
    y = as_signal(signal)
    if y.size == 1:
        return _fit_from_starts(y, [0], params.lam)
    model = build_potts1d_model(y, params)
    result = solve_milp(model, options)
    if not result.has_solution:
        raise RuntimeError(f"MIP solve ended without a solution ({result.status})")
    w = model.values_of(result.values, "w")
    x = model.values_of(result.values, "x")
    fit = Fit1D(w, EdgeLabeling(build_grid_graph(1, y.size), x), result.objective, result=result)
    fit.segments = extract_segments_1d(fit)
    return fit
