"""x-covariant networks and their directed sublevel persistence.

Nodes are kept in lexicographic ``(x, y)`` order; "to the right of" means
strictly later in that order.  Every edge is stored as an outgoing edge of
its left endpoint, so the left endpoint is the parent of the right one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InsufficientExtentError, ParameterError
from .point_process import PointPattern, Window

ESSENTIAL = math.inf


@dataclass(frozen=True, eq=False)
class DirectedNetwork:
    nodes: np.ndarray
    out_edges: tuple[tuple[int, ...], ...]
    rule: str
    window: Window
    radius: float | None = None

    def __len__(self) -> int:
        return self.nodes.shape[0]

    @property
    def roots(self) -> tuple[int, ...]:
        """Nodes without outgoing edge (the DSF's formal self-loops)."""
        return tuple(i for i, e in enumerate(self.out_edges) if not e)

    def parents(self) -> list[list[int]]:
        par: list[list[int]] = [[] for _ in range(len(self))]
        for i, targets in enumerate(self.out_edges):
            for j in targets:
                par[j].append(i)
        return par

    def edge_coordinates(self) -> set[tuple[tuple[float, float], tuple[float, float]]]:
        """Edges as coordinate pairs, independent of node numbering."""
        return {(tuple(self.nodes[i]), tuple(self.nodes[j]))
                for i, targets in enumerate(self.out_edges) for j in targets}


def _sorted_nodes(pattern: PointPattern) -> np.ndarray:
    pts = pattern.points
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return pts[order]


def build_dsf(pattern: PointPattern) -> DirectedNetwork:
    """Directed spanning forest: each node links to its closest node on the right."""
    if len(pattern) == 0:
        raise ParameterError("the directed spanning forest needs at least one point")
    nodes = _sorted_nodes(pattern)
    xs = nodes[:, 0].tolist()
    ys = nodes[:, 1].tolist()
    n = len(xs)
    out: list[tuple[int, ...]] = []
    for i in range(n):
        xi, yi = xs[i], ys[i]
        best, best_d2 = -1, math.inf
        for j in range(i + 1, n):
            dx = xs[j] - xi
            if dx * dx > best_d2:
                break
            dy = ys[j] - yi
            d2 = dx * dx + dy * dy
            # strict comparison keeps the earliest candidate on ties
            if d2 < best_d2:
                best, best_d2 = j, d2
        out.append((best,) if best >= 0 else ())
    return DirectedNetwork(nodes, tuple(out), "dsf", pattern.window)


def build_gilbert(pattern: PointPattern, radius: float) -> DirectedNetwork:
    """Gilbert graph: nodes strictly closer than ``radius`` are joined."""
    if not radius > 0:
        raise ParameterError("radius must be positive")
    nodes = _sorted_nodes(pattern)
    out: list[list[int]] = [[] for _ in range(len(nodes))]
    if len(nodes) > 1:
        pairs = cKDTree(nodes).query_pairs(radius, output_type="ndarray")
        for i, j in pairs.tolist():
            a, b = (i, j) if i < j else (j, i)
            if math.dist(nodes[a], nodes[b]) < radius:
                out[a].append(b)
    return DirectedNetwork(nodes, tuple(tuple(sorted(e)) for e in out), "gilbert",
                           pattern.window, radius)


@dataclass(frozen=True, eq=False)
class BranchDiagram:
    births: np.ndarray
    deaths: np.ndarray
    window: Window

    def __len__(self) -> int:
        return self.births.shape[0]

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.births.tolist(), self.deaths.tolist()))

    def translated(self, dx: float) -> "BranchDiagram":
        w = self.window
        return BranchDiagram(self.births + dx, self.deaths + dx,
                             Window(w.x_min + dx, w.x_max + dx, w.y_min, w.y_max))


def directed_persistence(network: DirectedNetwork) -> BranchDiagram:
    """Left-to-right sweep recording component births and elder-rule deaths."""
    xs = network.nodes[:, 0].tolist()
    n = len(xs)
    parents = network.parents()
    uf = list(range(n))

    def find(a: int) -> int:
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    comp_birth: dict[int, int] = {}  # root node -> index of pair
    births: list[float] = []
    deaths: list[float] = []
    for j in range(n):
        roots = {find(p) for p in parents[j]}
        if not roots:
            comp_birth[j] = len(births)
            births.append(xs[j])
            deaths.append(ESSENTIAL)
            continue
        # elder = earliest birth, ties by pair index (i.e. sweep order)
        ranked = sorted(roots, key=lambda r: (births[comp_birth[r]], comp_birth[r]))
        elder = ranked[0]
        for r in ranked[1:]:
            k = comp_birth.pop(r)
            assert births[comp_birth[elder]] <= births[k], "elder rule violated"
            deaths[k] = xs[j]
            uf[r] = elder
        uf[j] = elder
    return BranchDiagram(np.array(births, dtype=float), np.array(deaths, dtype=float),
                         network.window)


def beta_arrow(diagram: BranchDiagram, n: float, r: float, s: float) -> int:
    """Number of components born by ``r*n`` that live at least ``s``."""
    if not -0.5 <= r <= 0.5:
        raise ParameterError("r must lie in [-1/2, 1/2]")
    if s < 0:
        raise ParameterError("s must be non-negative")
    b, d = diagram.births, diagram.deaths
    return int(np.count_nonzero((b <= r * n) & (d - b >= s)))


def stabilization_radius_dsf(pattern: PointPattern) -> float:
    """``diam(A)`` plus the x-coordinate of the first point right of 1."""
    xs = pattern.points[:, 0]
    right = xs[xs >= 1.0]
    if right.size == 0:
        raise InsufficientExtentError("no point to the right of x = 1")
    return pattern.window.cross_section_diameter() + float(right.min())


def save_branch_diagram(diagram: BranchDiagram, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("birth,death\n")
        for b, d in diagram.pairs:
            fh.write(f"{b!r},{'inf' if math.isinf(d) else repr(d)}\n")


def load_branch_diagram(path: str | Path, window: Window) -> BranchDiagram:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.empty((0, 2))
    return BranchDiagram(data[:, 0].copy(), data[:, 1].copy(), window)
