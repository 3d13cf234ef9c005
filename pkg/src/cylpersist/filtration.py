"""Čech and Vietoris-Rips filtrations truncated at dimension two."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Literal, NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ParameterError
from .point_process import PointPattern

Kind = Literal["cech", "vr"]
KINDS = ("cech", "vr")


class Simplex(NamedTuple):
    vertices: tuple[int, ...]
    value: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


def _check_kind(kind: str) -> None:
    if kind not in KINDS:
        raise ParameterError(f"unknown complex kind {kind!r}; expected one of {KINDS}")


def _meb_radii(points: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Smallest enclosing ball radius for each row of vertex triples."""
    a, b, c = points[tri[:, 0]], points[tri[:, 1]], points[tri[:, 2]]
    sides = np.stack([((b - c) ** 2).sum(1), ((a - c) ** 2).sum(1), ((a - b) ** 2).sum(1)], 1)
    sides.sort(axis=1)
    s0, s1, s2 = sides[:, 0], sides[:, 1], sides[:, 2]
    half_longest = 0.5 * np.sqrt(s2)
    k16 = 2.0 * (s0 * s1 + s1 * s2 + s2 * s0) - (s0 * s0 + s1 * s1 + s2 * s2)
    acute = (s2 < s0 + s1) & (k16 > 0)
    out = half_longest.copy()
    if acute.any():
        circ = np.sqrt(s0[acute] * s1[acute] * s2[acute] / k16[acute])
        out[acute] = np.maximum(circ, half_longest[acute])
    return out


def meb_radius(a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> float:
    """Radius of the smallest disk containing three points.

    The circumradius for acute triangles, otherwise half the longest side
    (which covers right, obtuse and collinear triples).
    """
    pts = np.array([a, b, c], dtype=float)
    return float(_meb_radii(pts, np.array([[0, 1, 2]]))[0])


def filtration_value(vertices: Sequence[int], pattern: PointPattern | np.ndarray,
                     kind: Kind) -> float:
    _check_kind(kind)
    pts = pattern.points if isinstance(pattern, PointPattern) else np.asarray(pattern, float)
    v = tuple(vertices)
    if not 1 <= len(v) <= 3:
        raise ParameterError("only vertices, edges and triangles are supported")
    if len(v) == 1:
        return 0.0
    if len(v) == 2:
        return 0.5 * math.dist(pts[v[0]], pts[v[1]])
    if kind == "vr":
        return 0.5 * max(math.dist(pts[v[0]], pts[v[1]]), math.dist(pts[v[0]], pts[v[2]]),
                         math.dist(pts[v[1]], pts[v[2]]))
    return meb_radius(pts[v[0]], pts[v[1]], pts[v[2]])


@dataclass(frozen=True, eq=False)
class FilteredComplex:
    """Simplices in filtration order, stored column-wise.

    ``vertices`` has one row per simplex padded with ``-1``; rows are sorted
    by ``(value, dim, vertex tuple)``.
    """

    points: np.ndarray
    values: np.ndarray
    dims: np.ndarray
    vertices: np.ndarray
    kind: str
    T: float

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def simplices(self) -> list[Simplex]:
        return list(self.iter_simplices())

    def iter_simplices(self) -> Iterator[Simplex]:
        for val, d, row in zip(self.values.tolist(), self.dims.tolist(), self.vertices.tolist()):
            yield Simplex(tuple(row[: d + 1]), val)

    def count(self, dim: int, level: float = math.inf) -> int:
        return int(np.count_nonzero((self.dims == dim) & (self.values <= level)))

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for val, d, row in zip(self.values.tolist(), self.dims.tolist(),
                                   self.vertices.tolist()):
                fh.write(" ".join([repr(val), str(d)] + [str(v) for v in row[: d + 1]]) + "\n")


def _triangles(n: int, edges: np.ndarray) -> np.ndarray:
    if len(edges) == 0:
        return np.empty((0, 3), dtype=np.int64)
    adj = np.zeros((n, n), dtype=bool)
    adj[edges[:, 0], edges[:, 1]] = True
    adj[edges[:, 1], edges[:, 0]] = True
    out = []
    for i in range(n):
        nb = np.flatnonzero(adj[i, i + 1:]) + i + 1
        if nb.size < 2:
            continue
        sub = np.triu(adj[np.ix_(nb, nb)], 1)
        a, b = np.nonzero(sub)
        if a.size:
            out.append(np.column_stack([np.full(a.size, i), nb[a], nb[b]]))
    if not out:
        return np.empty((0, 3), dtype=np.int64)
    return np.concatenate(out).astype(np.int64)


def build_complex(pattern: PointPattern | np.ndarray, kind: Kind, T: float) -> FilteredComplex:
    """Filtered 2-skeleton of the Čech or Vietoris-Rips filtration up to ``T``."""
    _check_kind(kind)
    if not T > 0:
        raise ParameterError("truncation value T must be positive")
    pts = pattern.points if isinstance(pattern, PointPattern) else np.asarray(pattern, float)
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    n = len(pts)

    if n > 1:
        cand = cKDTree(pts).query_pairs(2.0 * T + 1e-9, output_type="ndarray")
    else:
        cand = np.empty((0, 2), dtype=np.int64)
    cand = np.sort(cand.astype(np.int64), axis=1)
    diff = pts[cand[:, 0]] - pts[cand[:, 1]]
    ev = 0.5 * np.hypot(diff[:, 0], diff[:, 1])
    keep = ev <= T
    edges, ev = cand[keep], ev[keep]

    tri = _triangles(n, edges)
    if len(tri):
        a, b, c = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
        # same arithmetic as the edge values, so faces never exceed cofaces
        tv = 0.5 * np.maximum.reduce([np.hypot(*(a - b).T), np.hypot(*(a - c).T),
                                      np.hypot(*(b - c).T)])
        if kind == "cech":
            tv = np.maximum(tv, _meb_radii(pts, tri))
        keep = tv <= T
        tri, tv = tri[keep], tv[keep]
    else:
        tv = np.empty(0)

    values = np.concatenate([np.zeros(n), ev, tv])
    dims = np.concatenate([np.zeros(n, np.int8), np.ones(len(ev), np.int8),
                           np.full(len(tv), 2, np.int8)])
    verts = np.full((len(values), 3), -1, dtype=np.int64)
    verts[:n, 0] = np.arange(n)
    verts[n:n + len(ev), :2] = edges
    verts[n + len(ev):] = tri
    order = np.lexsort((verts[:, 2], verts[:, 1], verts[:, 0], dims, values))
    return FilteredComplex(pts, values[order], dims[order], verts[order], kind, float(T))
