"""Finite graphs with a Dirichlet boundary, lattice boxes and the overlay graph.

Vertices are dense integer ids ``0..n-1``.  Edges are stored once as pairs
``(u, v)`` with ``u < v`` in lexicographic order, so an edge is identified by
its row index in :attr:`Graph.edges`.  The boundary is the set of vertices
standing in for the complement of the domain; the field is pinned to zero and
spins to ``+1`` there.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_VERTEX_CAP = 10**6

MODES = ("dirichlet-halo", "torus", "free")

#: channel tags of the overlay graph, in storage order
CHANNEL_TAGS = ("plain", "bar", "right", "left")


class GraphError(ValueError):
    pass


class EdgeListError(GraphError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable finite graph with a designated boundary set.

    Parameters
    ----------
    n_vertices : int
    edges : ndarray of shape (m, 2)
        Each undirected edge once, ``u < v``, lexicographically sorted.
    boundary : ndarray
        Sorted vertex ids playing the role of the complement of the domain.
    labels : tuple, optional
        Cosmetic per-vertex tags (lattice coordinates for boxes).
    """

    n_vertices: int
    edges: np.ndarray
    boundary: np.ndarray
    labels: tuple | None = None
    indptr: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)
    edge_ids: np.ndarray = field(init=False, repr=False)
    degree: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n_vertices)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if n < 0:
            raise GraphError("negative vertex count")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise GraphError("self-loop")
        if np.any(edges[:, 0] > edges[:, 1]):
            raise GraphError("edges must be stored with u < v")
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
        if len(edges) > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
            raise GraphError("duplicate edge")
        boundary = np.unique(np.asarray(self.boundary, dtype=np.int64))
        if boundary.size and (boundary.min() < 0 or boundary.max() >= n):
            raise GraphError("boundary vertex out of range")
        if self.labels is not None and len(self.labels) != n:
            raise GraphError("labels must have one entry per vertex")

        # CSR adjacency with the id of the edge realising each neighbour
        m = len(edges)
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((dst, src))
        src, dst, eid = src[order], dst[order], eid[order]
        degree = np.bincount(src, minlength=n)
        indptr = np.concatenate([[0], np.cumsum(degree)])

        set_ = object.__setattr__
        set_(self, "n_vertices", n)
        set_(self, "edges", _frozen(edges))
        set_(self, "boundary", _frozen(boundary))
        set_(self, "indptr", _frozen(indptr))
        set_(self, "indices", _frozen(dst))
        set_(self, "edge_ids", _frozen(eid))
        set_(self, "degree", _frozen(degree))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def max_degree(self) -> int:
        return int(self.degree.max()) if self.n_vertices else 0

    def neighbors(self, x: int) -> np.ndarray:
        self._check_vertex(x)
        return self.indices[self.indptr[x] : self.indptr[x + 1]]

    def incident_edges(self, x: int) -> np.ndarray:
        self._check_vertex(x)
        return self.edge_ids[self.indptr[x] : self.indptr[x + 1]]

    @property
    def adjacency(self) -> list[np.ndarray]:
        return [self.neighbors(x) for x in range(self.n_vertices)]

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary] = True
        return mask

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    def adjacency_matrix(self):
        """Symmetric 0/1 adjacency as a scipy CSR matrix."""
        from scipy.sparse import csr_matrix

        data = np.ones(len(self.indices))
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n_vertices,) * 2)

    def vertex(self, label) -> int:
        """Vertex id carrying ``label``."""
        if self.labels is None:
            raise GraphError("graph has no labels")
        try:
            return self.labels.index(tuple(label) if not isinstance(label, tuple) else label)
        except ValueError:
            raise GraphError(f"no vertex labelled {label!r}") from None

    def _check_vertex(self, x):
        if not 0 <= int(x) < self.n_vertices:
            raise GraphError(f"invalid vertex {x}")

    def __repr__(self):
        return (
            f"Graph(n_vertices={self.n_vertices}, n_edges={self.n_edges}, "
            f"boundary={len(self.boundary)}, max_degree={self.max_degree})"
        )


def vertex_set(g: Graph, items: Iterable[int]) -> np.ndarray:
    """Validate a vertex subset and return it as a sorted id array."""
    arr = np.asarray(list(items) if not isinstance(items, np.ndarray) else items, dtype=np.int64)
    arr = arr.ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= g.n_vertices):
        raise GraphError("vertex out of range")
    out = np.unique(arr)
    if len(out) != len(arr):
        raise GraphError("duplicate vertices in set")
    return out


def _normalize_edges(pairs) -> np.ndarray:
    pairs = {(min(u, v), max(u, v)) for u, v in pairs if u != v}
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.array(sorted(pairs), dtype=np.int64)


def _check_box_args(dimension: int, sides: Sequence[int], mode: str, cap: int):
    if dimension < 1:
        raise GraphError("dimension must be >= 1")
    if len(sides) != dimension:
        raise GraphError(f"expected {dimension} sides, got {len(sides)}")
    if any(int(s) < 1 for s in sides):
        raise GraphError("every side must be >= 1 (empty interior)")
    if mode not in MODES:
        raise GraphError(f"unknown mode {mode!r}; expected one of {MODES}")
    pad = 2 if mode == "dirichlet-halo" else 0
    if int(np.prod([int(s) + pad for s in sides], dtype=object)) > cap:
        raise GraphError(f"box exceeds the vertex cap of {cap}")


def build_box(dimension: int, sides: Sequence[int], mode: str = "dirichlet-halo",
              max_vertices: int = DEFAULT_VERTEX_CAP) -> Graph:
    """Lattice box ``[0, side)^d`` as a graph.

    ``dirichlet-halo`` surrounds the box with a one-vertex-thick shell marked
    as boundary; only edges with an interior endpoint are kept, so every
    interior vertex has degree ``2 * dimension`` and shell corners are
    isolated.  ``torus`` wraps around (no boundary); ``free`` is the bare box
    (no boundary).  Labels are lattice coordinates, the shell sitting at
    ``-1`` and ``side``.
    """
    sides = [int(s) for s in sides]
    _check_box_args(dimension, sides, mode, max_vertices)

    if mode == "dirichlet-halo":
        ranges = [range(-1, s + 1) for s in sides]
    else:
        ranges = [range(s) for s in sides]
    coords = list(itertools.product(*ranges))
    index = {c: i for i, c in enumerate(coords)}

    def inside(c):
        return all(0 <= ci < s for ci, s in zip(c, sides))

    pairs = []
    for c in coords:
        if mode == "dirichlet-halo" and not inside(c):
            continue
        for axis in range(dimension):
            nb = list(c)
            nb[axis] += 1
            if mode == "torus":
                nb[axis] %= sides[axis]
            nb = tuple(nb)
            if nb in index:
                pairs.append((index[c], index[nb]))
        if mode == "dirichlet-halo":
            for axis in range(dimension):
                nb = list(c)
                nb[axis] -= 1
                nb = tuple(nb)
                if not inside(nb):
                    pairs.append((index[c], index[nb]))

    boundary = [i for i, c in enumerate(coords) if mode == "dirichlet-halo" and not inside(c)]
    return Graph(len(coords), _normalize_edges(pairs), boundary, labels=tuple(coords))


def build_glued_boxes(dimension: int, sides: Sequence[int], mode: str = "dirichlet-halo",
                      max_vertices: int = DEFAULT_VERTEX_CAP) -> Graph:
    """Two disjoint copies of :func:`build_box` joined by a single bridge.

    The bridge joins the interior corner (all coordinates 0) of each copy.
    Labels are ``(copy, *coords)``.
    """
    one = build_box(dimension, sides, mode, max_vertices=max_vertices // 2 or 1)
    n = one.n_vertices
    corner = one.vertex((0,) * dimension)
    edges = np.vstack([one.edges, one.edges + n, [[corner, corner + n]]])
    boundary = np.concatenate([one.boundary, one.boundary + n])
    labels = tuple((k, *c) for k in (0, 1) for c in one.labels)
    return Graph(2 * n, _normalize_edges(map(tuple, edges)), boundary, labels=labels)


def load_edge_list(text: str) -> Graph:
    """Parse the edge-list format.

    One edge ``u v`` per line with ``u < v``; ``#`` starts a comment line,
    except a line reading ``#boundary`` which opens the boundary section
    (one vertex id per line until end of input).
    """
    pairs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    boundary: list[int] = []
    in_boundary = False
    n = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().lower() == "boundary":
                in_boundary = True
            continue
        tokens = line.split()
        try:
            ids = [int(t) for t in tokens]
        except ValueError:
            raise EdgeListError(lineno, f"cannot parse {line!r}") from None
        if any(i < 0 for i in ids):
            raise EdgeListError(lineno, "negative vertex id")
        if in_boundary:
            if len(ids) != 1:
                raise EdgeListError(lineno, "expected one vertex id in #boundary section")
            boundary.append(ids[0])
            n = max(n, ids[0] + 1)
            continue
        if len(ids) != 2:
            raise EdgeListError(lineno, "expected two vertex ids")
        u, v = ids
        if u == v:
            raise EdgeListError(lineno, f"self-loop at vertex {u}")
        if u > v:
            raise EdgeListError(lineno, f"edge {u} {v} must be written with u < v")
        if (u, v) in seen:
            raise EdgeListError(lineno, f"duplicate edge {u} {v}")
        seen.add((u, v))
        pairs.append((u, v))
        n = max(n, v + 1)
    if len(set(boundary)) != len(boundary):
        raise GraphError("duplicate boundary vertex")
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return Graph(n, edges, boundary)


def to_edge_list(g: Graph) -> str:
    lines = [f"{u} {v}" for u, v in g.edges]
    if len(g.boundary):
        lines.append("#boundary")
        lines.extend(str(b) for b in g.boundary)
    return "\n".join(lines) + "\n"


def ball(g: Graph, x: int, r: int) -> np.ndarray:
    """Vertices at graph distance at most ``r`` from ``x``."""
    g._check_vertex(x)
    if r < 0:
        raise GraphError("radius must be >= 0")
    dist = {int(x): 0}
    queue = deque([int(x)])
    while queue:
        u = queue.popleft()
        if dist[u] == r:
            continue
        for v in g.neighbors(u):
            v = int(v)
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return np.array(sorted(dist), dtype=np.int64)


def distance_matrix(g: Graph) -> np.ndarray:
    """All-pairs graph distances (``inf`` between components)."""
    from scipy.sparse.csgraph import shortest_path

    return shortest_path(g.adjacency_matrix(), method="D", unweighted=True)


def edge_set(g: Graph, domain) -> np.ndarray:
    """Ids of edges with at least one endpoint in ``domain``."""
    mask = np.zeros(g.n_vertices, dtype=bool)
    mask[np.asarray(domain, dtype=np.int64)] = True
    return np.flatnonzero(mask[g.edges[:, 0]] | mask[g.edges[:, 1]])


@dataclass(frozen=True, eq=False)
class OverlayGraph:
    """Base graph with four parallel channels per edge.

    Channel ``4 * e + k`` is edge ``e`` with tag ``CHANNEL_TAGS[k]``.  For an
    edge stored as ``(u, v)``, the ``right`` channel is the one directed out of
    ``u`` and ``left`` the one directed out of ``v``.
    """

    base: Graph

    @property
    def n_channels(self) -> int:
        return 4 * self.base.n_edges

    @property
    def channels(self) -> list[tuple[int, str]]:
        return [(e, tag) for e in range(self.base.n_edges) for tag in CHANNEL_TAGS]

    @staticmethod
    def channel_id(edge: int, tag: str) -> int:
        return 4 * int(edge) + CHANNEL_TAGS.index(tag)


def directed_neighborhood(og: OverlayGraph, x: int) -> np.ndarray:
    """Channel ids of the directed edges leaving ``x``, one per incident edge."""
    g = og.base
    eids = g.incident_edges(x)
    tags = np.where(g.edges[eids, 0] == x, CHANNEL_TAGS.index("right"), CHANNEL_TAGS.index("left"))
    return np.sort(4 * eids + tags)
