"""Multicut segmentation on grid graphs with lazily separated cycle inequalities."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import EdgeLabeling, GridGraph, Segmentation, connected_components
from .milp import MilpResult, SolveOptions, solve_milp
from .model import BINARY, GE, LinearConstraint, MilpModel

VIOLATION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class MulticutInstance:
    graph: GridGraph
    weights: np.ndarray
    lam: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.graph.num_edges,):
            raise ValueError(f"expected {self.graph.num_edges} weights, got shape {w.shape}")
        if np.any(w < 0):
            raise ValueError("edge weights must be nonnegative")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        object.__setattr__(self, "weights", w)

    def objective(self, labeling) -> float:
        x = np.asarray(getattr(labeling, "values", labeling), dtype=float)
        return float(((self.lam - self.weights) * x).sum())


@dataclass(frozen=True)
class CycleInequality:
    """``sum(x[e] for e in path) >= x[edge]`` for a cycle closed by ``edge``."""

    edge: int
    path: tuple[int, ...]

    def slack(self, x) -> float:
        return float(sum(x[e] for e in self.path) - x[self.edge])


@dataclass
class MulticutSolution:
    labeling: EdgeLabeling
    segmentation: Segmentation
    objective: float
    result: Optional[MilpResult] = field(default=None, repr=False)


def build_multicut_model(instance: MulticutInstance) -> MilpModel:
    g = instance.graph
    model = MilpModel(f"multicut_{g.m}x{g.n}")
    x = [
        model.add_var(f"x_{g.edge_name(e)}", BINARY, obj=instance.lam - instance.weights[e])
        for e in range(g.num_edges)
    ]
    model.add_group("x", x)
    model.comments.append("cycle inequalities are separated lazily and not listed here")
    return model


def _shortest_path(adj, source: int, target: int, skip: int, weight) -> tuple[float, list[int]]:
    """Dijkstra from ``source`` to ``target`` ignoring edge ``skip``.

    Returns the distance and the edge indices on the path.
    """
    dist = {source: 0.0}
    pred: dict[int, tuple[int, int]] = {}
    done = set()
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == target:
            break
        for v, e in adj[u]:
            if e == skip or v in done:
                continue
            nd = d + weight[e]
            if nd < dist.get(v, np.inf):
                dist[v] = nd
                pred[v] = (u, e)
                heapq.heappush(heap, (nd, v))
    if target not in done:
        return np.inf, []
    path = []
    node = target
    while node != source:
        node, e = pred[node]
        path.append(e)
    return dist[target], sorted(path)


def separate_cycles(graph: GridGraph, x) -> list[CycleInequality]:
    """Violated cycle inequalities at ``x`` (fractional or integral).

    For each edge ``uv`` with positive value, the cheapest ``u``-``v`` path
    avoiding ``uv`` under weights ``x`` closes a cycle; it is violated when
    the path is lighter than ``x[uv]``.
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    if x.shape != (graph.num_edges,):
        raise ValueError(f"expected {graph.num_edges} edge values, got shape {x.shape}")
    adj = graph.adjacency()
    u, v = graph.edge_endpoints()
    found: dict[tuple[int, tuple[int, ...]], CycleInequality] = {}
    for e in range(graph.num_edges):
        if x[e] <= VIOLATION_TOL:
            continue
        dist, path = _shortest_path(adj, int(u[e]), int(v[e]), e, x)
        if path and dist < x[e] - VIOLATION_TOL:
            cut = CycleInequality(e, tuple(path))
            found.setdefault((e, cut.path), cut)
    return list(found.values())


def is_valid_multicut(graph: GridGraph, labeling: EdgeLabeling) -> bool:
    """True iff every active edge joins two different dormant components."""
    seg = connected_components(graph, labeling)
    flat = seg.labels.ravel()
    u, v = graph.edge_endpoints()
    active = labeling.values == 1
    return bool(np.all(flat[u[active]] != flat[v[active]]))


def cycle_separator(model: MilpModel, graph: GridGraph, fractional: bool = False):
    """Adapter turning :func:`separate_cycles` into a solver callback."""
    cols = [r.index for r in model.groups["x"]]

    def separate(values: np.ndarray, integral: bool) -> list[LinearConstraint]:
        if not integral and not fractional:
            return []
        cuts = []
        for cyc in separate_cycles(graph, values[cols]):
            terms = tuple(sorted([(cols[e], 1.0) for e in cyc.path] + [(cols[cyc.edge], -1.0)]))
            cuts.append(LinearConstraint(terms, GE, 0.0, name=f"cyc_{cyc.edge}"))
        return cuts

    return separate


def cleanup_labeling(instance: MulticutInstance, labeling: EdgeLabeling) -> EdgeLabeling:
    """Deactivate active edges inside a component when that does not raise the objective."""
    g = instance.graph
    seg = connected_components(g, labeling)
    flat = seg.labels.ravel()
    u, v = g.edge_endpoints()
    x = labeling.values.copy()
    internal = (x == 1) & (flat[u] == flat[v]) & (instance.weights <= instance.lam)
    x[internal] = 0
    return EdgeLabeling(g, x)


def solve_multicut(instance: MulticutInstance, options: SolveOptions | None = None,
                   fractional_separation: bool = False) -> MulticutSolution:
    options = options or SolveOptions()
    if fractional_separation:
        options = SolveOptions(options.time_limit, options.gap_tol, options.node_limit, True)
    model = build_multicut_model(instance)
    result = solve_milp(model, options, cycle_separator(model, instance.graph, fractional_separation))
    if not result.has_solution:
        raise RuntimeError(f"multicut solve ended without a solution ({result.status})")
    labeling = EdgeLabeling(instance.graph, model.values_of(result.values, "x"))
    labeling = cleanup_labeling(instance, labeling)
    seg = connected_components(instance.graph, labeling)
    return MulticutSolution(labeling, seg, instance.objective(labeling), result)
