"""Joint segmentation and denoising of grayscale images with the 2D Potts MIP.

Each row and each column carries the 1D model: an l1 data term per pixel and
a big-M coupling per grid edge that forces equal values across dormant
edges.  Two families of redundant rows can be added: the four rotations of
the cycle inequality on every unit square, and per-line caps on the number
of active edges.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import (
    EdgeLabeling,
    GridGraph,
    Segmentation,
    as_image,
    build_grid_graph,
    connected_components,
    enumerate_four_cycles,
    global_contrast,
)
from .milp import MilpResult, SolveOptions, solve_milp
from .model import BINARY, GE, LE, MilpModel, add_abs_deviation, add_big_m_pair
from .potts1d import median_fit

BRUTE_FORCE_MAX_EDGES = 16
FLAT_CONTRAST = 1e-9


@dataclass(frozen=True)
class Potts2DParams:
    lam: float
    big_m: float
    sigma1: float = 1.0
    sigma2: float = 0.5
    use_four_cycle: bool = False
    use_cardinality: bool = False

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.big_m > 0:
            raise ValueError(f"big-M must be > 0, got {self.big_m}")


@dataclass(frozen=True, eq=False)
class CardinalityBounds:
    k_row: np.ndarray
    k_col: np.ndarray


@dataclass
class Fit2D:
    w: np.ndarray
    labeling: EdgeLabeling
    segmentation: Segmentation
    objective: float
    bound: float
    gap: float
    result: Optional[MilpResult] = field(default=None, repr=False)


def _check_sigmas(sigma1: float, sigma2: float) -> None:
    if not sigma1 > 0:
        raise ValueError(f"sigma1 must be > 0, got {sigma1}")
    if not 0 < sigma2 < 1:
        raise ValueError(f"sigma2 must lie in (0, 1), got {sigma2}")


def data_range(image) -> float:
    y = as_image(image)
    return float(y.max() - y.min())


def exact_big_m(image) -> float:
    r = data_range(image)
    return r if r > 0 else 1.0


def default_parameters(image, sigma1: float = 1.0, sigma2: float = 0.5, **flags) -> Potts2DParams:
    """big-M from the block contrast Y*, lambda = sigma1 * Y* / 4.

    Images whose 4x4 block means are all equal (Y* = 0) fall back to the
    plain intensity range, or 1 for a flat image.
    """
    _check_sigmas(sigma1, sigma2)
    y_star = global_contrast(image)
    big_m = y_star if y_star >= FLAT_CONTRAST else exact_big_m(image)
    return Potts2DParams(sigma1 * big_m / 4.0, big_m, sigma1, sigma2, **flags)


def cardinality_bounds(image, sigma2: float) -> CardinalityBounds:
    """Count jumps strictly larger than ``sigma2 * Y*`` along each row and column."""
    if not 0 < sigma2 < 1:
        raise ValueError(f"sigma2 must lie in (0, 1), got {sigma2}")
    y = as_image(image)
    threshold = sigma2 * global_contrast(y)
    k_row = (np.abs(np.diff(y, axis=1)) > threshold).sum(axis=1)
    k_col = (np.abs(np.diff(y, axis=0)) > threshold).sum(axis=0)
    return CardinalityBounds(k_row.astype(np.int64), k_col.astype(np.int64))


def build_potts2d_model(image, params: Potts2DParams,
                        bounds: CardinalityBounds | None = None) -> MilpModel:
    y = as_image(image)
    m, n = y.shape
    if m * n < 2:
        raise ValueError("the 2D model needs at least two pixels")
    if params.use_cardinality and bounds is None:
        raise ValueError("cardinality constraints requested without bounds")
    g = build_grid_graph(m, n)
    model = MilpModel(f"potts2d_{m}x{n}")
    lo, hi = float(y.min()) - 1.0, float(y.max()) + 1.0
    w = [model.add_var(f"w_{i}_{j}", lb=lo, ub=hi) for i in range(m) for j in range(n)]
    x = [model.add_var(f"x_{g.edge_name(e)}", BINARY, obj=params.lam) for e in range(g.num_edges)]
    u, v = g.edge_endpoints()
    for e in range(g.num_edges):
        add_big_m_pair(model, w[u[e]], w[v[e]], x[e], params.big_m)
    for p in range(m * n):
        add_abs_deviation(model, w[p], y.flat[p])
    if params.use_four_cycle:
        for cyc in enumerate_four_cycles(g):
            for e in cyc.edges:
                terms = [(x[f], 1.0) for f in cyc.edges if f != e] + [(x[e], -1.0)]
                model.add_constraint(terms, GE, 0.0, name=f"sq_{g.edge_name(e)}")
    if params.use_cardinality:
        rows, cols = g.line_edges()
        for i, edges in enumerate(rows):
            if edges:
                model.add_constraint([(x[e], 1.0) for e in edges], LE, float(bounds.k_row[i]), name=f"card_row_{i}")
        for j, edges in enumerate(cols):
            if edges:
                model.add_constraint([(x[e], 1.0) for e in edges], LE, float(bounds.k_col[j]), name=f"card_col_{j}")
    model.add_group("w", w)
    model.add_group("x", x)
    return model


def objective_2d(image, w, labeling: EdgeLabeling, lam: float) -> float:
    y = as_image(image)
    return float(np.abs(np.asarray(w).reshape(y.shape) - y).sum() + lam * labeling.num_active)


def extract_segmentation_2d(graph: GridGraph, w, labeling: EdgeLabeling) -> Segmentation:
    """Dormant-edge components.  Active edges always separate, even when
    the fitted values on both sides happen to coincide."""
    return connected_components(graph, labeling)


def _component_fit(y: np.ndarray, seg: Segmentation) -> tuple[np.ndarray, float]:
    w = np.empty(y.size)
    flat_labels = seg.labels.ravel()
    total = 0.0
    for k in range(seg.k):
        members = flat_labels == k
        level, cost = median_fit(y.ravel()[members])
        w[members] = level
        total += cost
    return w.reshape(y.shape), total


def brute_force_potts2d(image, lam: float) -> Fit2D:
    """Enumerate every edge labeling of a small grid.

    Each dormant component takes its lower median, which lies inside the data
    range, so a big-M of at least that range never binds.  Ties go to fewer
    active edges, then to the lexicographically smallest labeling.
    """
    y = as_image(image)
    g = build_grid_graph(*y.shape)
    if g.num_edges > BRUTE_FORCE_MAX_EDGES:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_EDGES} edges, grid has {g.num_edges}")
    data_cost: dict[bytes, float] = {}
    best = None
    for bits in itertools.product((0, 1), repeat=g.num_edges):
        labeling = EdgeLabeling(g, np.array(bits, dtype=np.int8))
        seg = connected_components(g, labeling)
        key = seg.labels.tobytes()
        if key not in data_cost:
            data_cost[key] = _component_fit(y, seg)[1]
        total = data_cost[key] + lam * labeling.num_active
        rank = (labeling.num_active, bits)
        if best is None or total < best[0] - 1e-9 * max(1.0, abs(best[0])) or (
            abs(total - best[0]) <= 1e-9 * max(1.0, abs(best[0])) and rank < best[1]
        ):
            best = (total, rank, labeling)
    labeling = best[2]
    seg = connected_components(g, labeling)
    w, _ = _component_fit(y, seg)
    obj = objective_2d(y, w, labeling, lam)
    return Fit2D(w, labeling, seg, obj, obj, 0.0)


def solve_potts2d(image, params: Potts2DParams, bounds: CardinalityBounds | None = None,
                  options: SolveOptions | None = None) -> Fit2D:
    y = as_image(image)
    g = build_grid_graph(*y.shape)
    if params.use_cardinality and bounds is None:
        bounds = cardinality_bounds(y, params.sigma2)
    if y.size == 1:
        labeling = EdgeLabeling(g, np.zeros(0))
        return Fit2D(y.copy(), labeling, connected_components(g, labeling), 0.0, 0.0, 0.0)
    model = build_potts2d_model(y, params, bounds)
    result = solve_milp(model, options)
    if not result.has_solution:
        raise RuntimeError(f"MIP solve ended without a solution ({result.status})")
    w = model.values_of(result.values, "w").reshape(y.shape)
    labeling = EdgeLabeling(g, model.values_of(result.values, "x"))
    seg = extract_segmentation_2d(g, w, labeling)
    return Fit2D(w, labeling, seg, result.objective, result.bound, result.gap, result)
