"""Random-walk heat kernels, Dirichlet Green matrices and capacity.

The Green matrix of a domain ``L`` is the inverse of the Dirichlet form
matrix ``diag(d) - A[L, L]`` where ``d`` is the full degree in the graph.
Equivalently it is the occupation sum of the walk killed on leaving ``L``,
normalised by ``1/d(y)``; :func:`green_walk_sum` computes that version and
serves as an independent oracle.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .graph import Graph, GraphError, vertex_set

JITTER = 1e-12


class SingularDomainError(np.linalg.LinAlgError):
    """The Dirichlet form of the domain is not positive definite."""


def transition_matrix(g: Graph, lazy: bool = False) -> sp.csr_matrix:
    """Simple (or lazy) random walk transition matrix.

    Isolated vertices hold their position.
    """
    deg = g.degree.astype(float)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    P = sp.diags(inv) @ g.adjacency_matrix()
    P = P + sp.diags((deg == 0).astype(float))
    if lazy:
        P = 0.5 * sp.identity(g.n_vertices) + 0.5 * P
    return sp.csr_matrix(P)


def heat_kernel(g: Graph, x: int, n_max: int, lazy: bool = False,
                killed_at_boundary: bool = False) -> np.ndarray:
    """Rows ``k_n(x, .)`` for ``n = 0..n_max`` as an array of shape ``(n_max+1, n)``.

    With ``killed_at_boundary`` the walk is absorbed (and its mass removed)
    the moment it steps onto a boundary vertex.
    """
    g._check_vertex(x)
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    PT = transition_matrix(g, lazy).T.tocsr()
    alive = np.ones(g.n_vertices)
    if killed_at_boundary:
        alive[g.boundary] = 0.0
    out = np.zeros((n_max + 1, g.n_vertices))
    row = np.zeros(g.n_vertices)
    row[x] = 1.0
    if killed_at_boundary and g.boundary_mask[x]:
        row[x] = 0.0
    out[0] = row
    for n in range(1, n_max + 1):
        row = (PT @ row) * alive
        out[n] = row
    return out


def dirichlet_matrix(g: Graph, domain=None) -> np.ndarray:
    """Dense ``diag(d) - A`` restricted to ``domain`` (default: the interior)."""
    dom = g.interior if domain is None else vertex_set(g, domain)
    A = g.adjacency_matrix()[dom][:, dom].toarray()
    return np.diag(g.degree[dom].astype(float)) - A


def _check_components(g: Graph, dom: np.ndarray):
    """Raise if some component of ``dom`` has no edge leaving ``dom``."""
    sub = g.adjacency_matrix()[dom][:, dom]
    internal_degree = np.asarray(sub.sum(axis=1)).ravel()
    leaks = g.degree[dom] > internal_degree
    ncomp, labels = connected_components(sub, directed=False)
    touched = np.zeros(ncomp, dtype=bool)
    touched[labels[leaks]] = True
    if not touched.all():
        bad = dom[labels == np.flatnonzero(~touched)[0]]
        raise SingularDomainError(
            f"domain component containing vertices {bad[:5].tolist()} has no edge leaving the domain"
        )


@dataclass(frozen=True, eq=False)
class GreenMatrix:
    """Dirichlet Green matrix on ``domain`` with its Cholesky factor.

    ``matrix[i, j]`` is ``G(domain[i], domain[j])``; ``factor`` is lower
    triangular with ``factor @ factor.T == matrix``.  ``jittered`` records
    that ``JITTER * I`` had to be added before factorising.
    """

    graph: Graph
    domain: np.ndarray
    matrix: np.ndarray
    factor: np.ndarray
    jittered: bool = False

    def index(self, vertices) -> np.ndarray:
        pos = np.searchsorted(self.domain, vertices)
        pos = np.clip(pos, 0, len(self.domain) - 1)
        if not np.all(self.domain[pos] == vertices):
            raise GraphError("vertex outside the Green matrix domain")
        return pos

    def __call__(self, x: int, y: int) -> float:
        i, j = self.index([x, y])
        return float(self.matrix[i, j])

    def submatrix(self, S) -> np.ndarray:
        idx = self.index(np.asarray(S, dtype=np.int64))
        return self.matrix[np.ix_(idx, idx)]


def cholesky_psd(C: np.ndarray) -> tuple[np.ndarray, bool]:
    """Lower Cholesky factor; on failure retries once with ``JITTER * I``."""
    try:
        return np.linalg.cholesky(C), False
    except np.linalg.LinAlgError:
        pass
    L = np.linalg.cholesky(C + JITTER * np.eye(len(C)))
    warnings.warn("Cholesky needed diagonal jitter", RuntimeWarning, stacklevel=3)
    return L, True


def green_dirichlet(g: Graph, domain=None) -> GreenMatrix:
    """Green matrix of the walk killed outside ``domain`` (default: interior).

    Raises
    ------
    SingularDomainError
        If a connected piece of the domain has no edge leaving it.
    """
    dom = g.interior if domain is None else vertex_set(g, domain)
    if len(dom) == 0:
        raise GraphError("empty domain")
    _check_components(g, dom)
    L = dirichlet_matrix(g, dom)
    cL = scipy.linalg.cho_factor(L, lower=True)
    G = scipy.linalg.cho_solve(cL, np.eye(len(dom)))
    G = 0.5 * (G + G.T)
    factor, jittered = cholesky_psd(G)
    return GreenMatrix(g, dom, G, factor, jittered)


def killed_spectral_radius(g: Graph, domain=None) -> float:
    """Spectral radius of the killed simple walk on ``domain``."""
    dom = g.interior if domain is None else vertex_set(g, domain)
    d = g.degree[dom].astype(float)
    A = g.adjacency_matrix()[dom][:, dom].toarray()
    S = A / np.sqrt(np.outer(d, d))
    return float(np.max(np.abs(np.linalg.eigvalsh(S))))


def green_walk_sum(g: Graph, domain=None, tol: float = 1e-8, max_steps: int = 10**6):
    """Truncated killed-walk occupation sum ``sum_n p_n(x, y) / d(y)``.

    Iterates until the analytic tail bound
    ``rho**(N+1) / ((1 - rho) * d_min)`` drops below ``tol``, where ``rho`` is
    the killed walk's spectral radius (the walk is reversible, so
    ``|p_n(x, y)| <= sqrt(d(y)/d(x)) rho**n``).

    Returns
    -------
    G : ndarray
    tail_bound : float
        Entrywise bound on the neglected tail.
    n_steps : int
    """
    dom = g.interior if domain is None else vertex_set(g, domain)
    _check_components(g, dom)
    rho = killed_spectral_radius(g, dom)
    d = g.degree[dom].astype(float)
    A = g.adjacency_matrix()[dom][:, dom].toarray()
    P = A / d[:, None]
    dmin = d.min()

    def bound(N):
        return rho ** (N + 1) / ((1.0 - rho) * dmin)

    total = np.eye(len(dom))
    power = np.eye(len(dom))
    n = 0
    while bound(n) > tol:
        if n >= max_steps:
            raise RuntimeError("walk sum did not reach the requested tolerance")
        power = power @ P
        total += power
        n += 1
    return total / d[None, :], bound(n), n


@dataclass(frozen=True)
class CapacityResult:
    """Equilibrium measure of ``S`` (aligned with ``S``) and its total mass."""

    S: np.ndarray
    eq_measure: np.ndarray
    cap: float


def capacity(g: Graph, domain, S) -> CapacityResult:
    """Capacity of ``S`` for the walk killed outside ``domain``.

    ``e_S(x) = d(x) P_x[no return to S]``.  The probability ``h`` of reaching
    ``S`` before being killed solves a linear system on ``domain \\ S``; the
    escape probability from ``x`` in ``S`` is one minus the average of ``h``
    over its neighbours (boundary neighbours count as escape).
    """
    dom = g.interior if domain is None else vertex_set(g, domain)
    S = vertex_set(g, S)
    if not np.all(np.isin(S, dom)):
        raise GraphError("S must be contained in the domain")
    if len(S) == 0:
        return CapacityResult(S, np.zeros(0), 0.0)
    _check_components(g, dom)
    rest = np.setdiff1d(dom, S)
    h = np.zeros(g.n_vertices)
    h[S] = 1.0
    if len(rest):
        Adj = g.adjacency_matrix()
        Lr = np.diag(g.degree[rest].astype(float)) - Adj[rest][:, rest].toarray()
        rhs = np.asarray(Adj[rest][:, S].sum(axis=1)).ravel()
        h[rest] = np.linalg.solve(Lr, rhs)
    Adj = g.adjacency_matrix()
    returning = np.asarray(Adj[S] @ h).ravel()
    e = g.degree[S] - returning
    e = np.maximum(e, 0.0)
    return CapacityResult(S, e, float(e.sum()))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    constant: float
    dimension: float
    window: tuple[int, int]


def estimate_decay(g: Graph, x: int, n_max: int, window: tuple[int, int] | None = None) -> DecayFit:
    """Least-squares fit of ``log p_n(x, x) = log c + slope * log n``.

    Steps with ``p_n(x, x) == 0`` (parity on bipartite graphs) are skipped.
    ``dimension`` is ``-2 * slope``.
    """
    if n_max < 8:
        raise ValueError("n_max must be >= 8")
    lo, hi = window if window is not None else (8, n_max)
    rows = heat_kernel(g, x, hi)
    n = np.arange(lo, hi + 1)
    p = rows[lo : hi + 1, x]
    keep = p > 0
    if keep.sum() < 2:
        raise ValueError("degenerate fit: return probabilities vanish on the window")
    slope, intercept = np.polyfit(np.log(n[keep]), np.log(p[keep]), 1)
    return DecayFit(float(slope), float(np.exp(intercept)), float(-2 * slope), (lo, hi))
