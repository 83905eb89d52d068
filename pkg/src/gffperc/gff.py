"""Zero-boundary Gaussian free field: sampling, energy, signs and Ising laws."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, edge_set, vertex_set
from .walk import GreenMatrix

MAX_ISING_SPINS = 20


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_gff(cov: GreenMatrix, seed=None, size: int | None = None) -> np.ndarray:
    """Draw the GFF with covariance ``cov`` as full-length vertex arrays.

    Entries outside ``cov.domain`` are exactly zero.  Returns shape
    ``(n_vertices,)`` or ``(size, n_vertices)``.
    """
    rng = make_rng(seed)
    k = len(cov.domain)
    z = rng.standard_normal((1 if size is None else size, k))
    out = np.zeros((z.shape[0], cov.graph.n_vertices))
    out[:, cov.domain] = z @ cov.factor.T
    return out[0] if size is None else out


def dirichlet_energy(g: Graph, domain, f: np.ndarray) -> float:
    """``1/2 * sum over E(domain) of (f_x - f_y)^2``; ``f`` is taken as 0 off ``domain``."""
    dom = vertex_set(g, domain)
    vals = np.zeros(g.n_vertices)
    vals[dom] = np.asarray(f, dtype=float)[dom]
    u, v = g.edges[edge_set(g, dom)].T
    return 0.5 * float(np.sum((vals[u] - vals[v]) ** 2))


@dataclass(frozen=True)
class SignModulus:
    sigma: np.ndarray
    modulus: np.ndarray
    couplings: np.ndarray


def sign_modulus(g: Graph, f: np.ndarray) -> SignModulus:
    """Split ``f + 1`` into signs, moduli and edge couplings.

    ``sigma = sgn(f + 1)`` with ``sgn(0) = +1``; ``couplings`` holds
    ``|f_u + 1| |f_v + 1|`` per edge.  Works on batches (leading axes).
    """
    u1 = np.asarray(f, dtype=float) + 1.0
    sigma = np.where(u1 >= 0, 1, -1).astype(np.int8)
    modulus = np.abs(u1)
    u, v = g.edges.T
    return SignModulus(sigma, modulus, modulus[..., u] * modulus[..., v])


@dataclass(frozen=True)
class IsingLaw:
    """Exact Ising law with plus boundary condition.

    ``configs[c]`` is the spin vector on ``domain`` (entries +-1) with
    probability ``probs[c]``.  Configuration ``c`` has spin ``-1`` at
    ``domain[i]`` iff bit ``i`` of ``c`` is set.
    """

    domain: np.ndarray
    couplings: np.ndarray
    configs: np.ndarray
    probs: np.ndarray

    def marginal_plus(self) -> np.ndarray:
        """``P(sigma_x = +1)`` for each domain vertex."""
        return self.probs @ (self.configs == 1)

    def config_index(self, spins: np.ndarray) -> np.ndarray:
        """Inverse of ``configs``: spin vectors on the domain to config indices."""
        spins = np.asarray(spins)
        bits = (spins == -1).astype(np.int64)
        return bits @ (1 << np.arange(len(self.domain), dtype=np.int64))


def ising_exact(g: Graph, domain, J, boundary: str = "plus") -> IsingLaw:
    """Enumerate ``mu(sigma) ~ exp(sum_{xy in E(domain)} J_xy sigma_x sigma_y)``.

    Spins off ``domain`` are ``+1``.  ``J`` is indexed by edge id.
    """
    if boundary != "plus":
        raise ValueError("only the plus boundary condition is supported")
    dom = vertex_set(g, domain)
    k = len(dom)
    if k > MAX_ISING_SPINS:
        raise ValueError(f"domain of {k} spins exceeds the enumeration cap of {MAX_ISING_SPINS}")
    J = np.asarray(J, dtype=float)
    if J.shape != (g.n_edges,):
        raise ValueError("J must have one entry per edge")
    codes = np.arange(2**k, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(k)) & 1
    configs = (1 - 2 * bits).astype(np.int8)
    full = np.ones((2**k, g.n_vertices), dtype=np.int8)
    full[:, dom] = configs
    eids = edge_set(g, dom)
    u, v = g.edges[eids].T
    energy = -(full[:, u] * full[:, v]) @ J[eids]
    logw = -energy
    w = np.exp(logw - logw.max())
    return IsingLaw(dom, J, configs, w / w.sum())


def xs_closed_form(S, t, cov: GreenMatrix) -> float:
    """``E[exp(-sum_S t_x (psi_x + 1))] = exp(-sum t + t^T G_SS t / 2)``."""
    S = np.asarray(S, dtype=np.int64)
    t = np.asarray(t, dtype=float)
    if len(S) == 0:
        return 1.0
    G = cov.submatrix(S)
    return float(np.exp(-t.sum() + 0.5 * t @ G @ t))
