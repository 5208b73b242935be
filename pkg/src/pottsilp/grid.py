"""Grid graphs, edge labelings and image helpers shared by all models.

Edge order is fixed once and used everywhere (labeling vectors, LP variable
order, CSV files): first all row edges ``(i, j) -> (i, j+1)`` in row-major
order, then all column edges ``(i, j) -> (i+1, j)`` in row-major order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np


def as_image(pixels) -> np.ndarray:
    """Validate and copy an image into a read-only float64 ``(m, n)`` array.

    1D input is treated as a single-row image.
    """
    a = np.array(pixels, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"image must be 2D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"image must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("image contains non-finite intensities")
    a.setflags(write=False)
    return a


def as_signal(values) -> np.ndarray:
    a = np.array(values, dtype=np.float64).ravel()
    if a.size < 1:
        raise ValueError("signal must contain at least one value")
    if not np.all(np.isfinite(a)):
        raise ValueError("signal contains non-finite values")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridGraph:
    m: int
    n: int
    row_edges: tuple[tuple[int, int], ...] = field(repr=False)
    col_edges: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.m * self.n

    @property
    def num_edges(self) -> int:
        return len(self.row_edges) + len(self.col_edges)

    @property
    def is_chain(self) -> bool:
        return self.m == 1

    def node(self, i: int, j: int) -> int:
        return i * self.n + j

    def edge_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat pixel indices ``(u, v)`` of every edge in canonical order."""
        u = [self.node(i, j) for i, j in self.row_edges]
        v = [self.node(i, j + 1) for i, j in self.row_edges]
        u += [self.node(i, j) for i, j in self.col_edges]
        v += [self.node(i + 1, j) for i, j in self.col_edges]
        return np.array(u, dtype=np.intp), np.array(v, dtype=np.intp)

    def row_edge_index(self, i: int, j: int) -> int:
        return i * (self.n - 1) + j

    def col_edge_index(self, i: int, j: int) -> int:
        return len(self.row_edges) + i * self.n + j

    def edge_name(self, e: int) -> str:
        if e < len(self.row_edges):
            i, j = self.row_edges[e]
            return f"r_{i}_{j}"
        i, j = self.col_edges[e - len(self.row_edges)]
        return f"c_{i}_{j}"

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per node, the list of ``(neighbor, edge index)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.num_nodes)]
        u, v = self.edge_endpoints()
        for e, (a, b) in enumerate(zip(u.tolist(), v.tolist())):
            adj[a].append((b, e))
            adj[b].append((a, e))
        return adj

    def line_edges(self) -> tuple[list[list[int]], list[list[int]]]:
        """Edge indices grouped per image row and per image column."""
        rows = [[self.row_edge_index(i, j) for j in range(self.n - 1)] for i in range(self.m)]
        cols = [[self.col_edge_index(i, j) for i in range(self.m - 1)] for j in range(self.n)]
        return rows, cols


def build_grid_graph(m: int, n: int) -> GridGraph:
    if int(m) != m or int(n) != n or m < 1 or n < 1:
        raise ValueError(f"grid dimensions must be positive integers, got {m}x{n}")
    m, n = int(m), int(n)
    row_edges = tuple((i, j) for i in range(m) for j in range(n - 1))
    col_edges = tuple((i, j) for i in range(m - 1) for j in range(n))
    return GridGraph(m, n, row_edges, col_edges)


@dataclass(frozen=True, eq=False)
class EdgeLabeling:
    """Binary value per edge: 1 = active (boundary), 0 = dormant."""

    graph: GridGraph
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 1 or vals.size != self.graph.num_edges:
            raise ValueError(
                f"labeling has {vals.size} entries, graph has {self.graph.num_edges} edges"
            )
        rounded = np.rint(vals)
        if not np.all((rounded == 0) | (rounded == 1)) or not np.allclose(vals, rounded, atol=1e-6):
            raise ValueError("labeling entries must be 0 or 1")
        vals = rounded.astype(np.int8)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def num_active(self) -> int:
        return int(self.values.sum())

    def __eq__(self, other):
        if not isinstance(other, EdgeLabeling):
            return NotImplemented
        return self.graph == other.graph and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.graph.m, self.graph.n, self.values.tobytes()))


@dataclass(frozen=True, eq=False)
class Segmentation:
    labels: np.ndarray
    k: int

    def __eq__(self, other):
        if not isinstance(other, Segmentation):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class FourCycle:
    """Unit square with corner ``(i, j)``: two row edges, two column edges."""

    top: int
    bottom: int
    left: int
    right: int

    @property
    def edges(self) -> tuple[int, int, int, int]:
        return (self.top, self.right, self.bottom, self.left)


def connected_components(graph: GridGraph, labeling: EdgeLabeling) -> Segmentation:
    """Components of the subgraph of dormant edges.

    Labels are numbered in order of each component's first pixel (row-major).
    """
    if labeling.values.size != graph.num_edges:
        raise ValueError("labeling does not match graph")
    parent = list(range(graph.num_nodes))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    u, v = graph.edge_endpoints()
    for a, b, x in zip(u.tolist(), v.tolist(), labeling.values.tolist()):
        if x == 0:
            ra, rb = find(a), find(b)
            if ra != rb:
                if ra < rb:
                    parent[rb] = ra
                else:
                    parent[ra] = rb
    labels = np.empty(graph.num_nodes, dtype=np.int64)
    remap: dict[int, int] = {}
    for p in range(graph.num_nodes):
        r = find(p)
        if r not in remap:
            remap[r] = len(remap)
        labels[p] = remap[r]
    labels = labels.reshape(graph.m, graph.n)
    labels.setflags(write=False)
    return Segmentation(labels, len(remap))


def enumerate_four_cycles(graph: GridGraph) -> list[FourCycle]:
    cycles = []
    for i in range(graph.m - 1):
        for j in range(graph.n - 1):
            cycles.append(
                FourCycle(
                    top=graph.row_edge_index(i, j),
                    bottom=graph.row_edge_index(i + 1, j),
                    left=graph.col_edge_index(i, j),
                    right=graph.col_edge_index(i, j + 1),
                )
            )
    return cycles


def _check_dims(image: np.ndarray, graph: GridGraph) -> None:
    if image.shape != (graph.m, graph.n):
        raise ValueError(f"image shape {image.shape} does not match {graph.m}x{graph.n} grid")


def contrast_weights(image, graph: GridGraph) -> np.ndarray:
    """Absolute intensity difference across every edge."""
    y = as_image(image)
    _check_dims(y, graph)
    u, v = graph.edge_endpoints()
    flat = y.ravel()
    return np.abs(flat[u] - flat[v])


def global_contrast(image, block: int = 4) -> float:
    """Spread (max - min) of the mean intensities of ``block x block`` tiles.

    Tiles are anchored at the top-left corner; ragged tiles on the right and
    bottom border average whatever pixels they contain.
    """
    y = as_image(image)
    m, n = y.shape
    means = [
        y[i : i + block, j : j + block].mean()
        for i in range(0, m, block)
        for j in range(0, n, block)
    ]
    return float(max(means) - min(means))


@dataclass(frozen=True)
class NoiseSpec:
    kind: Literal["gaussian", "salt_pepper"]
    level: float

    def __post_init__(self):
        if self.kind == "gaussian":
            if not self.level >= 0:
                raise ValueError(f"gaussian sigma must be >= 0, got {self.level}")
        elif self.kind == "salt_pepper":
            if not 0.0 <= self.level <= 1.0:
                raise ValueError(f"salt-and-pepper probability must lie in [0, 1], got {self.level}")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")


def add_noise(image, spec: NoiseSpec, seed: int) -> np.ndarray:
    """Return a noisy copy of ``image``.

    Randomness comes from ``numpy.random.Generator(PCG64(seed))`` so a given
    seed reproduces the same bits on every platform numpy supports.
    """
    y = as_image(image)
    rng = np.random.Generator(np.random.PCG64(seed))
    if spec.kind == "gaussian":
        noise = rng.standard_normal(y.shape)
        if spec.level == 0:
            return y
        out = np.clip(y + spec.level * noise, 0.0, 255.0)
    else:
        hit = rng.random(y.shape) < spec.level
        salt = rng.random(y.shape) < 0.5
        out = np.where(hit, np.where(salt, 255.0, 0.0), y)
    return as_image(out)


def count_segments_1d(labeling: EdgeLabeling) -> int:
    if not labeling.graph.is_chain:
        raise ValueError("count_segments_1d expects a labeling on a 1 x n chain")
    return labeling.num_active + 1
