"""Maps from fields to edge environments, the flow schedule and Edwards-Sokal steps."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc, polygamma

from .gff import SignModulus, make_rng
from .graph import Graph, edge_set
from .multiscale import ScaleFields
from .walk import GreenMatrix

PROVENANCE = ("shifted", "centered", "bridge", "constant", "overlay-channel")


@dataclass(frozen=True, eq=False)
class EdgeEnvironment:
    """Open probability per edge; leading axes (if any) index samples."""

    probs: np.ndarray
    kind: str = "constant"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ValueError("edge probabilities must lie in [0, 1]")
        if self.kind not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.kind!r}")
        object.__setattr__(self, "probs", p)

    @property
    def n_edges(self) -> int:
        return self.probs.shape[-1]

    @property
    def effective(self) -> np.ndarray:
        return self.probs


@dataclass(frozen=True, eq=False)
class OverlayEnvironment:
    """Four channel probabilities per base edge, ``channels[..., e, k]``.

    ``k`` follows :data:`gffperc.graph.CHANNEL_TAGS`.
    """

    channels: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.channels, dtype=float)
        if c.shape[-1] != 4:
            raise ValueError("overlay environments carry four channels per edge")
        if np.any(c < 0) or np.any(c > 1):
            raise ValueError("channel probabilities must lie in [0, 1]")
        object.__setattr__(self, "channels", c)

    kind = "overlay-channel"

    @property
    def n_edges(self) -> int:
        return self.channels.shape[-2]

    @property
    def effective(self) -> np.ndarray:
        """Probability that at least one channel of each base edge is open."""
        return 1.0 - np.prod(1.0 - self.channels, axis=-1)

    @property
    def plain(self) -> np.ndarray:
        return self.channels[..., 0]

    @property
    def bar(self) -> np.ndarray:
        return self.channels[..., 1]

    @property
    def right(self) -> np.ndarray:
        return self.channels[..., 2]

    @property
    def left(self) -> np.ndarray:
        return self.channels[..., 3]


def constant_env(g: Graph, p: float) -> EdgeEnvironment:
    return EdgeEnvironment(np.full(g.n_edges, float(p)), "constant")


def _pair_env(g: Graph, f, shift: float) -> np.ndarray:
    f = np.asarray(f, dtype=float) + shift
    u, v = g.edges.T
    a = np.clip(f[..., u], 0.0, None)
    b = np.clip(f[..., v], 0.0, None)
    return -np.expm1(-2.0 * a * b)


def env_shifted(g: Graph, f) -> EdgeEnvironment:
    """``1 - exp(-2 (f_x + 1)_+ (f_y + 1)_+)`` on every edge."""
    return EdgeEnvironment(_pair_env(g, f, 1.0), "shifted")


def env_centered(g: Graph, f) -> EdgeEnvironment:
    """``1 - exp(-2 (f_x)_+ (f_y)_+)``: the zero level set of the metric-graph field."""
    return EdgeEnvironment(_pair_env(g, f, 0.0), "centered")


def bridge_prob(a, b):
    """Probability that a unit Brownian bridge from ``a`` to ``b`` stays above ``-1``."""
    a = np.clip(np.asarray(a, dtype=float) + 1.0, 0.0, None)
    b = np.clip(np.asarray(b, dtype=float) + 1.0, 0.0, None)
    out = -np.expm1(-2.0 * a * b)
    return float(out) if out.ndim == 0 else out


def env_overlay(g: Graph, fields: ScaleFields, q: float, n: int, lam: float,
                h: float) -> OverlayEnvironment:
    """Channel probabilities of the overlay model at scale ``n`` and level ``lam``.

    plain: ``q``; bar: ``1 - exp(-h - sum_{n<k<=N} (phi^k_x)_+^2 + (phi^k_y)_+^2)``;
    right/left: ``1 - exp(-(phi^n_z)^2 1{phi^n_z >= lam})`` at ``z = x`` / ``z = y``.
    ``lam = inf`` switches the right/left channels off.
    """
    N = fields.stack.levels
    if not 0 <= n <= N:
        raise ValueError(f"scale {n} outside 0..{N}")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if h < 0:
        raise ValueError("h must be >= 0")
    phi = fields.phi
    u, v = g.edges.T
    coarse = np.clip(phi[n + 1 :], 0.0, None) ** 2
    tail = coarse[..., u].sum(axis=0) + coarse[..., v].sum(axis=0)
    bar = -np.expm1(-h - tail)

    def directed(z):
        val = phi[n][..., z]
        return -np.expm1(-(val**2) * (val >= lam))

    right, left = directed(u), directed(v)
    plain = np.full_like(bar, q)
    return OverlayEnvironment(np.stack([plain, bar, right, left], axis=-1))


class ScheduleOverflowError(ValueError):
    """The limit of the schedule is not below one."""


@dataclass(frozen=True)
class Schedule:
    """Piecewise schedule ``q_n(lam)`` used to absorb scale ``n``.

    ``q_n = 1/2`` for ``n <= n0``; for ``n >= n0``
    ``q_n(lam) = q_n + 2/n^2 + int_{1/n}^{max(lam, 1/n)} exp(-alpha 2^n t^2) dt``
    and ``q_{n+1} = q_n(inf)``.  ``alpha = inf`` makes the integral vanish.
    """

    alpha: float = 1.0
    n0: int = 8

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")

    def _integral(self, n: int, lo: float, hi: float) -> float:
        if math.isinf(self.alpha) or hi <= lo:
            return 0.0
        c = math.sqrt(self.alpha * 2.0**n)
        pref = math.sqrt(math.pi) / (2.0 * c)
        if math.isinf(hi):
            return pref * float(erfc(lo * c))
        return pref * float(erf(hi * c) - erf(lo * c))

    def step(self, n: int) -> float:
        """``q_{n+1} - q_n`` for ``n >= n0``."""
        return 2.0 / n**2 + self._integral(n, 1.0 / n, math.inf)

    def base(self, n: int) -> float:
        """``q_n`` (the value at ``lam = 0``, before the ``2/n^2`` kick)."""
        if n <= self.n0:
            return 0.5
        return 0.5 + math.fsum(self.step(k) for k in range(self.n0, n))

    def __call__(self, n: int, lam: float) -> float:
        if n < self.n0:
            return 0.5
        lo = 1.0 / n
        return self.base(n) + 2.0 / n**2 + self._integral(n, lo, max(lam, lo))

    def limit(self, tol: float = 1e-18) -> float:
        """``1/2 + sum_{n >= n0} step(n)``; the ``2/n^2`` part in closed form."""
        total = 0.5 + 2.0 * float(polygamma(1, self.n0))
        n = self.n0
        tails = []
        while True:
            t = self._integral(n, 1.0 / n, math.inf)
            tails.append(t)
            if t < tol or n > 4000:
                break
            n += 1
        return total + math.fsum(tails)

    def check(self) -> "Schedule":
        q = self.limit()
        if q >= 1.0:
            raise ScheduleOverflowError(f"schedule limit q = {q:.6g} >= 1 (alpha={self.alpha}, n0={self.n0})")
        return self


def schedule_q(n: int, lam: float, alpha: float = 1.0, n0: int = 8) -> float:
    """``q_n(lam)``; raises :class:`ScheduleOverflowError` if the limit is ``>= 1``."""
    return Schedule(alpha, n0).check()(n, lam)


def arcsin_prediction(cov: GreenMatrix, x: int, y: int) -> float:
    """``arcsin(G(x,y) / sqrt(G(x,x) G(y,y))) / pi``."""
    r = cov(x, y) / math.sqrt(cov(x, x) * cov(y, y))
    return math.asin(max(-1.0, min(1.0, r))) / math.pi


def edwards_sokal_forward(g: Graph, sm: SignModulus, seed=None, domain=None) -> np.ndarray:
    """Open each edge of ``E(domain)`` with probability ``1 - exp(-2 J 1{sigma_x = sigma_y})``.

    Spins off the domain are taken as ``+1``.  Returns a boolean array per
    edge (batched over leading axes of ``sm``).
    """
    rng = make_rng(seed)
    dom = g.interior if domain is None else np.asarray(domain)
    sigma = np.array(sm.sigma, copy=True)
    off = np.ones(g.n_vertices, dtype=bool)
    off[dom] = False
    sigma[..., off] = 1
    u, v = g.edges.T
    same = sigma[..., u] == sigma[..., v]
    p = -np.expm1(-2.0 * np.asarray(sm.couplings) * same)
    in_e = np.zeros(g.n_edges, dtype=bool)
    in_e[edge_set(g, dom)] = True
    return (rng.random(p.shape) < p) & in_e


def edwards_sokal_backward(g: Graph, omega, seed=None, domain=None) -> np.ndarray:
    """Resample spins given the edge configuration.

    Clusters meeting the complement of ``domain`` get ``+1``; every other
    cluster gets an independent fair sign, drawn in cluster-label order.
    """
    from .percolation import cluster_labels

    rng = make_rng(seed)
    dom = g.interior if domain is None else np.asarray(domain)
    omega = np.asarray(omega, dtype=bool)
    labels, n_labels = cluster_labels(g, omega, return_count=True)
    off = np.ones(g.n_vertices, dtype=bool)
    off[dom] = False
    coin = np.where(rng.random(n_labels) < 0.5, 1, -1).astype(np.int8)
    pinned = np.zeros(n_labels, dtype=bool)
    pinned[labels[..., off].ravel()] = True
    coin[pinned] = 1
    return coin[labels]
