"""Persistence diagrams of filtered 2-complexes over GF(2).

The reduction stores every column as a Python integer used as a bitset, so
a column addition is a single XOR.  Dimension two is reduced first; its
pivot edges are exactly the edge columns that would reduce to zero, which
are cleared instead of reduced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching, minimum_spanning_tree
from scipy.spatial import cKDTree

from .errors import ParameterError
from .filtration import FilteredComplex

ESSENTIAL = math.inf


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """Multiset of ``(dim, birth, death)`` points; ``death == inf`` is essential.

    Diagrams of 2-skeleta may also carry essential dimension-2 points: sets of
    triangles that close up into a sphere without a filling tetrahedron.  They
    only matter for Euler characteristics.
    """

    dims: np.ndarray
    births: np.ndarray
    deaths: np.ndarray

    def __post_init__(self):
        for name in ("dims", "births", "deaths"):
            a = np.asarray(getattr(self, name), dtype=np.int64 if name == "dims" else float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_points(cls, points) -> "PersistenceDiagram":
        pts = list(points)
        if not pts:
            return cls(np.empty(0, np.int64), np.empty(0), np.empty(0))
        d, b, e = zip(*pts)
        return cls(np.array(d), np.array(b, float), np.array(e, float))

    def __len__(self) -> int:
        return self.dims.shape[0]

    @property
    def points(self) -> list[tuple[int, float, float]]:
        return list(zip(self.dims.tolist(), self.births.tolist(), self.deaths.tolist()))

    def in_dim(self, q: int) -> "PersistenceDiagram":
        m = self.dims == q
        return PersistenceDiagram(self.dims[m], self.births[m], self.deaths[m])

    def sorted_points(self, q: int | None = None) -> list[tuple[int, float, float]]:
        d = self if q is None else self.in_dim(q)
        return sorted(d.points)

    def finite(self) -> "PersistenceDiagram":
        m = np.isfinite(self.deaths)
        return PersistenceDiagram(self.dims[m], self.births[m], self.deaths[m])


def _diagram(points: list[tuple[int, float, float]]) -> PersistenceDiagram:
    kept = [p for p in points if p[2] > p[1]]
    kept.sort()
    return PersistenceDiagram.from_points(kept)


def _edge_ranks(complex_: FilteredComplex):
    """Edge order and, for each triangle, the ranks of its three edges."""
    n = int(np.count_nonzero(complex_.dims == 0))
    emask = complex_.dims == 1
    tmask = complex_.dims == 2
    ev = complex_.vertices[emask][:, :2]
    tv = complex_.vertices[tmask]
    ekeys = ev[:, 0] * n + ev[:, 1]
    order = np.argsort(ekeys)
    sk = ekeys[order]

    def rank(a, b):
        return order[np.searchsorted(sk, a * n + b)]

    if len(tv):
        faces = np.column_stack([rank(tv[:, 0], tv[:, 1]), rank(tv[:, 0], tv[:, 2]),
                                 rank(tv[:, 1], tv[:, 2])])
    else:
        faces = np.empty((0, 3), dtype=np.int64)
    return n, ev, complex_.values[emask], faces, complex_.values[tmask]


def _reduce_triangles(faces: np.ndarray) -> tuple[dict[int, int], list[int]]:
    """Reduce triangle columns; returns ``{pivot edge: triangle}`` and the zero columns."""
    pivots: dict[int, int] = {}
    cols: dict[int, int] = {}
    zero: list[int] = []
    for t, (a, b, c) in enumerate(faces.tolist()):
        col = (1 << a) ^ (1 << b) ^ (1 << c)
        while col:
            p = col.bit_length() - 1
            other = cols.get(p)
            if other is None:
                cols[p] = col
                pivots[p] = t
                break
            col ^= other
        else:
            zero.append(t)
    return pivots, zero


def _reduce_edges(edge_verts: np.ndarray, cleared: set[int]) -> tuple[dict[int, int], list[int]]:
    """Boundary-matrix reduction of edge columns with clearing.

    Returns ``{edge: killed vertex}`` for negative edges and the list of
    positive edges (cleared ones included).
    """
    cols: dict[int, int] = {}
    deaths: dict[int, int] = {}
    positive: list[int] = []
    for e, (u, v) in enumerate(edge_verts.tolist()):
        if e in cleared:
            positive.append(e)
            continue
        col = (1 << u) ^ (1 << v)
        while col:
            p = col.bit_length() - 1
            other = cols.get(p)
            if other is None:
                cols[p] = col
                deaths[e] = p
                break
            col ^= other
        else:
            positive.append(e)
    return deaths, positive


def _union_find_edges(n: int, edge_verts: np.ndarray) -> tuple[list[int], list[int]]:
    """Kruskal sweep over edges in filtration order: (negative, positive) edges."""
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    neg: list[int] = []
    pos: list[int] = []
    for e, (u, v) in enumerate(edge_verts.tolist()):
        ru, rv = find(u), find(v)
        if ru == rv:
            pos.append(e)
        else:
            # the younger vertex (larger index, all born at 0) dies
            if ru > rv:
                ru, rv = rv, ru
            parent[rv] = ru
            neg.append(e)
    return neg, pos


def compute_persistence(complex_: FilteredComplex, h0: str = "union_find") -> PersistenceDiagram:
    """Persistence diagram in dimensions 0 and 1 (plus 2-skeleton voids).

    ``h0`` selects how dimension 0 is paired: ``"union_find"`` (default) or
    ``"reduction"`` (plain matrix reduction of the edge columns).
    """
    n, edge_verts, edge_vals, faces, tri_vals = _edge_ranks(complex_)
    pivots, zero_tris = _reduce_triangles(faces)
    ev = edge_vals.tolist()
    tv = tri_vals.tolist()

    if h0 == "union_find":
        negative, positive = _union_find_edges(n, edge_verts)
    elif h0 == "reduction":
        killed, positive = _reduce_edges(edge_verts, set(pivots))
        negative = list(killed)
    else:
        raise ParameterError(f"unknown h0 method {h0!r}")

    points: list[tuple[int, float, float]] = [(0, 0.0, ev[e]) for e in negative]
    points += [(0, 0.0, ESSENTIAL)] * (n - len(negative))
    for e in positive:
        t = pivots.get(e)
        points.append((1, ev[e], ESSENTIAL if t is None else tv[t]))
    points += [(2, tv[t], ESSENTIAL) for t in zero_tris]
    return _diagram(points)


def h0_diagram(points: np.ndarray, T: float) -> PersistenceDiagram:
    """Dimension-0 diagram of the Čech/VR filtration up to ``T``.

    Both filtrations share their 1-skeleton, and dimension-0 deaths are half
    the edge lengths of a minimum spanning forest.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return PersistenceDiagram.from_points([])
    deaths = np.empty(0)
    if n > 1:
        pairs = cKDTree(pts).query_pairs(2.0 * T + 1e-9, output_type="ndarray")
        diff = pts[pairs[:, 0]] - pts[pairs[:, 1]]
        dist = coo_matrix((np.hypot(diff[:, 0], diff[:, 1]), (pairs[:, 0], pairs[:, 1])),
                          shape=(n, n))
        mst = minimum_spanning_tree(dist.tocsr())
        deaths = np.sort(0.5 * mst.data)
        deaths = deaths[(deaths <= T) & (deaths > 0)]
    n_ess = n - len(deaths)
    return PersistenceDiagram(np.zeros(n, np.int64), np.zeros(n),
                              np.concatenate([deaths, np.full(n_ess, ESSENTIAL)]))


def persistent_betti(diagram: PersistenceDiagram, q: int, r: float, s: float) -> int:
    """Classes of dimension ``q`` born by ``r`` and still alive at ``s``."""
    if r > s:
        raise ParameterError("persistent Betti numbers need r <= s")
    m = (diagram.dims == q) & (diagram.births <= r) & (diagram.deaths > s)
    return int(np.count_nonzero(m))


def betti(diagram: PersistenceDiagram, q: int, t: float) -> int:
    return persistent_betti(diagram, q, t, t)


# --- rank oracle --------------------------------------------------------------

def gf2_rank(matrix: np.ndarray) -> int:
    """Rank over GF(2) by Gaussian elimination on a 0/1 matrix."""
    m = (np.asarray(matrix) % 2).astype(bool).copy()
    rows, cols = m.shape if m.ndim == 2 else (0, 0)
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        hit = np.flatnonzero(m[rank:, c])
        if hit.size == 0:
            continue
        piv = rank + hit[0]
        if piv != rank:
            m[[rank, piv]] = m[[piv, rank]]
        below = np.flatnonzero(m[:, c])
        below = below[below != rank]
        m[below] ^= m[rank]
        rank += 1
    return rank


def gf2_nullspace(matrix: np.ndarray) -> np.ndarray:
    """Basis of the kernel of a 0/1 matrix over GF(2), one vector per row."""
    m = (np.asarray(matrix) % 2).astype(bool).copy()
    rows, cols = m.shape
    pivot_cols: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hit = np.flatnonzero(m[r:, c])
        if hit.size == 0:
            continue
        piv = r + hit[0]
        if piv != r:
            m[[r, piv]] = m[[piv, r]]
        others = np.flatnonzero(m[:, c])
        others = others[others != r]
        m[others] ^= m[r]
        pivot_cols.append(c)
        r += 1
    free = [c for c in range(cols) if c not in set(pivot_cols)]
    basis = np.zeros((len(free), cols), dtype=bool)
    for k, f in enumerate(free):
        basis[k, f] = True
        for i, pc in enumerate(pivot_cols):
            if m[i, f]:
                basis[k, pc] = True
    return basis


def _boundary(complex_: FilteredComplex, q: int, level_hi: float, level_lo: float):
    """Boundary of ``q+1``-simplices up to ``level_hi`` and the ``q``-simplex index map."""
    lo_mask = (complex_.dims == q) & (complex_.values <= level_hi)
    face_rows = {tuple(v[: q + 1]): i for i, v in enumerate(complex_.vertices[lo_mask].tolist())}
    face_vals = complex_.values[lo_mask]
    hi_mask = (complex_.dims == q + 1) & (complex_.values <= level_lo)
    cofaces = complex_.vertices[hi_mask].tolist()
    mat = np.zeros((len(face_rows), len(cofaces)), dtype=np.uint8)
    for j, v in enumerate(cofaces):
        v = v[: q + 2]
        for k in range(len(v)):
            mat[face_rows[tuple(v[:k] + v[k + 1:])], j] = 1
    return mat, face_vals


def persistent_betti_oracle(complex_: FilteredComplex, q: int, r: float, s: float) -> int:
    """``dim Z_q(K_r) - dim(B_q(K_s) ∩ Z_q(K_r))`` from explicit GF(2) ranks."""
    if r > s:
        raise ParameterError("persistent Betti numbers need r <= s")
    if s > complex_.T:
        raise ParameterError("s beyond the truncation value of the complex")
    if q not in (0, 1):
        raise ParameterError("only q in {0, 1} is supported")
    # q-chains of K_s; K_r's chains are the coordinates with value <= r
    boundary_s, face_vals = _boundary(complex_, q, s, s)
    in_r = face_vals <= r
    n_faces = len(face_vals)
    if q == 0:
        cycles = np.eye(n_faces, dtype=bool)[in_r]
    else:
        # columns of d_r are the q-simplices of K_r in filtration order, i.e.
        # the in_r coordinates of K_s's q-chains
        d_r, _ = _boundary(complex_, q - 1, r, r)
        null = gf2_nullspace(d_r) if d_r.shape[1] else np.zeros((0, 0), bool)
        cycles = np.zeros((null.shape[0], n_faces), dtype=bool)
        cycles[:, np.flatnonzero(in_r)] = null
    dim_z = cycles.shape[0]
    if dim_z == 0:
        return 0
    bounds = boundary_s.T.astype(bool)
    rank_b = gf2_rank(bounds) if bounds.size else 0
    rank_z = gf2_rank(cycles)
    rank_sum = gf2_rank(np.vstack([bounds, cycles])) if bounds.size else rank_z
    return dim_z - (rank_b + rank_z - rank_sum)


# --- blocks -------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    """Half-open rectangle ``(b_minus, b_plus] x (d_minus, d_plus]``."""

    b_minus: float
    b_plus: float
    d_minus: float
    d_plus: float

    def __post_init__(self):
        if not (self.b_minus <= self.b_plus and self.d_minus <= self.d_plus):
            raise ParameterError(f"invalid block {self}")


def block_count(diagram: PersistenceDiagram, q: int, block: Block) -> int:
    b, d = diagram.births, diagram.deaths
    m = ((diagram.dims == q) & (b > block.b_minus) & (b <= block.b_plus)
         & (d > block.d_minus) & (d <= block.d_plus))
    return int(np.count_nonzero(m))


def alive_count(diagram: PersistenceDiagram, q: int, r: float, s: float) -> int:
    """``#{birth <= r, death > s}`` without the ``r <= s`` restriction."""
    m = (diagram.dims == q) & (diagram.births <= r) & (diagram.deaths > s)
    return int(np.count_nonzero(m))


def block_increment(diagram: PersistenceDiagram, q: int, block: Block) -> int:
    """Four-corner increment of the counting function over ``block``."""
    f = lambda r, s: alive_count(diagram, q, r, s)  # noqa: E731
    return (f(block.b_plus, block.d_minus) - f(block.b_plus, block.d_plus)
            - f(block.b_minus, block.d_minus) + f(block.b_minus, block.d_plus))


# --- distances (small instances only) -------------------------------------------

def bottleneck_distance(a: PersistenceDiagram, b: PersistenceDiagram, q: int) -> float:
    """Bottleneck distance between the finite parts of two diagrams in dimension ``q``.

    Brute force over candidate values with a bipartite matching per
    candidate; intended for diagrams with a few dozen points.
    """
    A = np.column_stack([a.in_dim(q).finite().births, a.in_dim(q).finite().deaths])
    B = np.column_stack([b.in_dim(q).finite().births, b.in_dim(q).finite().deaths])
    m, k = len(A), len(B)
    if m == 0 and k == 0:
        return 0.0
    cross = np.abs(A[:, None, :] - B[None, :, :]).max(axis=2) if m and k else np.zeros((m, k))
    ha = (A[:, 1] - A[:, 0]) / 2 if m else np.empty(0)
    hb = (B[:, 1] - B[:, 0]) / 2 if k else np.empty(0)
    cands = np.unique(np.concatenate([cross.ravel(), ha, hb, [0.0]]))

    def feasible(eps: float) -> bool:
        size = m + k
        rows, cols = [], []
        for i in range(m):
            for j in range(k):
                if cross[i, j] <= eps:
                    rows.append(i)
                    cols.append(j)
            if ha[i] <= eps:
                rows.append(i)
                cols.append(k + i)
        for j in range(k):
            if hb[j] <= eps:
                rows.append(m + j)
                cols.append(j)
            for i in range(m):
                rows.append(m + j)
                cols.append(k + i)
        g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size)).tocsr()
        match = maximum_bipartite_matching(g, perm_type="column")
        return bool((match >= 0).all())

    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])


# --- serialization --------------------------------------------------------------

def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else repr(float(v))


def save_diagram(diagram: PersistenceDiagram, path: str | Path, q: int | None = None) -> None:
    with open(path, "w") as fh:
        fh.write("dim,birth,death\n")
        for d, b, e in diagram.points:
            if q is None or d == q:
                fh.write(f"{d},{_fmt(b)},{_fmt(e)}\n")


def load_diagram(path: str | Path) -> PersistenceDiagram:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return PersistenceDiagram.from_points([])
    return PersistenceDiagram(data[:, 0].astype(np.int64), data[:, 1], data[:, 2])
