"""Bernoulli percolation: sampling, clusters, connectivity events, exact enumeration.

Configurations are boolean arrays over edges, shape ``(..., m)``, or over
overlay channels, shape ``(..., m, 4)``, wrapped in :class:`PercConfig` so
the two cannot be confused.  Parallel channels of one base edge connect
exactly like a single edge that is open when any of them is.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .couplings import EdgeEnvironment, OverlayEnvironment
from .gff import make_rng
from .graph import Graph, vertex_set

MAX_EXACT_EDGES = 18

NOT_PIVOTAL = "not_pivotal"
OPEN_PIVOTAL = "open_pivotal"
CLOSED_PIVOTAL = "closed_pivotal"


@dataclass(frozen=True, eq=False)
class PercConfig:
    bits: np.ndarray
    overlay: bool = False

    @property
    def edges_open(self) -> np.ndarray:
        """Per base edge: open if any channel is open."""
        return self.bits.any(axis=-1) if self.overlay else self.bits


def _as_open(omega) -> np.ndarray:
    if isinstance(omega, PercConfig):
        return omega.edges_open
    return np.asarray(omega, dtype=bool)


def sample_perc(env, seed=None, size: int | None = None) -> PercConfig:
    """Independent Bernoulli draws ``U < p`` with one uniform per edge (channel).

    The same seed reuses the same uniforms, so samples from entrywise ordered
    environments are ordered too.
    """
    rng = make_rng(seed)
    if isinstance(env, OverlayEnvironment):
        p, overlay = env.channels, True
    elif isinstance(env, EdgeEnvironment):
        p, overlay = env.probs, False
    else:
        p, overlay = np.asarray(env, dtype=float), False
    shape = p.shape if size is None else (size,) + p.shape
    return PercConfig(rng.random(shape) < p, overlay)


def cluster_labels(g: Graph, omega, return_count: bool = False):
    """Component label per vertex for each configuration in the batch.

    Labels are distinct across the batch (one block-diagonal graph is
    labelled at once), so equality of labels means connection within the
    same sample.
    """
    open_ = _as_open(omega)
    batch_shape = open_.shape[:-1]
    flat = open_.reshape(-1, g.n_edges)
    B, n = flat.shape[0], g.n_vertices
    b, e = np.nonzero(flat)
    rows = g.edges[e, 0] + b * n
    cols = g.edges[e, 1] + b * n
    A = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(B * n, B * n))
    count, labels = connected_components(A, directed=False)
    labels = labels.reshape(batch_shape + (n,))
    return (labels, count) if return_count else labels


@dataclass(frozen=True)
class EventSpec:
    """Increasing connectivity event.

    ``connect``: an open path joins ``S`` and ``T``.  ``connect_boundary``:
    an open path joins ``S`` and the graph's boundary set.
    """

    kind: str
    S: tuple
    T: tuple = ()

    def __post_init__(self):
        if self.kind not in ("connect", "connect_boundary"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not self.S or (self.kind == "connect" and not self.T):
            raise ValueError("event sets must be nonempty")

    def targets(self, g: Graph) -> np.ndarray:
        if self.kind == "connect_boundary":
            return g.boundary
        return vertex_set(g, self.T)


def connect(S, T) -> EventSpec:
    return EventSpec("connect", tuple(int(s) for s in S), tuple(int(t) for t in T))


def connect_boundary(S) -> EventSpec:
    return EventSpec("connect_boundary", tuple(int(s) for s in S))


def holds(g: Graph, omega, ev: EventSpec, labels=None):
    """Event indicator (bool, or bool array over the batch)."""
    S = vertex_set(g, ev.S)
    T = ev.targets(g)
    if np.intersect1d(S, T).size:
        shape = _as_open(omega).shape[:-1]
        return True if shape == () else np.ones(shape, dtype=bool)
    if len(T) == 0:
        shape = _as_open(omega).shape[:-1]
        return False if shape == () else np.zeros(shape, dtype=bool)
    if labels is None:
        labels = cluster_labels(g, omega)
    ls = labels[..., S]
    lt = labels[..., T]
    out = (ls[..., :, None] == lt[..., None, :]).any(axis=(-2, -1))
    return bool(out) if np.ndim(out) == 0 else out


def all_configs(m: int) -> np.ndarray:
    """Boolean matrix of all ``2^m`` configurations; bit ``e`` of row ``c`` is edge ``e``."""
    codes = np.arange(2**m, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m)) & 1).astype(bool)


def enumerate_event(g: Graph, ev: EventSpec, max_edges: int = MAX_EXACT_EDGES,
                    chunk: int = 2**13) -> np.ndarray:
    """Indicator of ``ev`` on every configuration, indexed by bitmask."""
    m = g.n_edges
    if m > max_edges:
        raise ValueError(f"{m} edges exceed the enumeration cap of {max_edges}")
    out = np.empty(2**m, dtype=bool)
    codes = np.arange(2**m, dtype=np.int64)
    for start in range(0, 2**m, chunk):
        c = codes[start : start + chunk]
        bits = ((c[:, None] >> np.arange(m)) & 1).astype(bool)
        out[start : start + chunk] = holds(g, bits, ev)
    return out


def config_weights(p) -> np.ndarray:
    """Product-measure weight of every configuration, shape ``(..., 2^m)``."""
    p = np.asarray(p, dtype=float)
    w = np.ones(p.shape[:-1] + (1,))
    for e in range(p.shape[-1]):
        pe = p[..., e : e + 1]
        w = np.concatenate([w * (1.0 - pe), w * pe], axis=-1)
    return w


def pivotal_probabilities(indicator: np.ndarray, p) -> np.ndarray:
    """``P(e pivotal)`` per edge: ``sum_c w(c) (1{c + e in A} - 1{c - e in A})``."""
    p = np.asarray(p, dtype=float)
    m = p.shape[-1]
    w = config_weights(p)
    codes = np.arange(2**m, dtype=np.int64)
    ind = indicator.astype(float)
    out = np.empty(p.shape)
    for e in range(m):
        bit = 1 << e
        diff = ind[codes | bit] - ind[codes & ~bit]
        out[..., e] = w @ diff
    return out


@dataclass(frozen=True)
class ExactResult:
    """Exact event probability with Russo-formula ingredients.

    ``derivative_q`` is ``dP/dq`` for a constant environment (``None``
    otherwise); ``pivotal_sum`` is the sum over edges of ``P(e pivotal)``.
    """

    probability: float
    derivative_q: float | None
    pivotal_sum: float
    pivotal: np.ndarray


def _constant_derivative(indicator: np.ndarray, q: float, m: int) -> float:
    """Differentiate ``sum_k N_k q^k (1-q)^(m-k)`` term by term."""
    sizes = np.bitwise_count(np.arange(2**m, dtype=np.int64))
    counts = np.bincount(sizes[indicator], minlength=m + 1).astype(float)
    k = np.arange(m + 1)
    up = np.where(k >= 1, k * q ** np.maximum(k - 1, 0) * (1 - q) ** (m - k), 0.0)
    down = np.where(m - k >= 1, (m - k) * q**k * (1 - q) ** np.maximum(m - k - 1, 0), 0.0)
    return float(counts @ (up - down))


def exact_from_indicator(indicator: np.ndarray, p) -> ExactResult:
    p = np.asarray(p, dtype=float)
    m = len(p)
    prob = float(config_weights(p) @ indicator.astype(float))
    piv = pivotal_probabilities(indicator, p)
    deriv = None
    if m and np.all(p == p[0]):
        deriv = _constant_derivative(indicator, float(p[0]), m)
    return ExactResult(prob, deriv, float(piv.sum()), piv)


def exact_event(g: Graph, env, ev: EventSpec, max_edges: int = MAX_EXACT_EDGES) -> ExactResult:
    """Enumerate all ``2^m`` configurations.

    Overlay environments are reduced to their per-edge effective
    probabilities, which is exact for connectivity events.
    """
    if isinstance(env, (EdgeEnvironment, OverlayEnvironment)):
        p = env.effective
    else:
        p = np.asarray(env, dtype=float)
    if p.shape != (g.n_edges,):
        raise ValueError("exact_event takes a single environment")
    return exact_from_indicator(enumerate_event(g, ev, max_edges), p)


def pivotal(g: Graph, omega, ev: EventSpec, F) -> str:
    """Classify the edge (or channel) set ``F`` as pivotal for ``ev`` in ``omega``.

    ``F`` holds edge ids for plain configurations and channel ids
    (``4 * edge + tag``) for overlay ones.
    """
    if isinstance(omega, PercConfig) and omega.overlay:
        bits = np.array(omega.bits, copy=True).reshape(-1)
        wrap = lambda b: PercConfig(b.reshape(omega.bits.shape), True)  # noqa: E731
    else:
        bits = np.array(_as_open(omega), copy=True)
        wrap = lambda b: b  # noqa: E731
    F = np.asarray(list(F), dtype=np.int64)
    opened, closed = bits.copy(), bits.copy()
    opened[F] = True
    closed[F] = False
    if not (holds(g, wrap(opened), ev) and not holds(g, wrap(closed), ev)):
        return NOT_PIVOTAL
    return OPEN_PIVOTAL if holds(g, wrap(bits), ev) else CLOSED_PIVOTAL
