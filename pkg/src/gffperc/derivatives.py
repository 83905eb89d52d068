"""Quadrature check of the level derivative of the overlay model.

For a domain with at most two interior vertices, the annealed connection
probability ``F(lam) = E[P_{q,n,lam}(A)]`` over the scale-``n`` field is a
low-dimensional Gaussian integral of a multilinear polynomial in the edge
probabilities.  Two independent routes are compared:

* ``lhs = -(F(lam + delta) - F(lam - delta)) / (2 delta)``;
* ``rhs = sum_x rho_x(lam) E[P(N_x open pivotal) | phi^n_x = lam]``.

The coarse scales ``k > n`` are held at a fixed realisation (or zero); the
identity holds conditionally on them because scales are independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, OverlayGraph, directed_neighborhood
from .multiscale import ScaleFields, ScaleStack, normalizer
from .percolation import EventSpec, config_weights, connect_boundary, enumerate_event

SPAN = 12.0


@dataclass(frozen=True)
class LambdaCheck:
    lhs: float
    rhs: float
    gap: float
    delta: float
    converged: bool


def _pieces(mu: float, sd: float, cut: float) -> list[tuple[float, float]]:
    lo, hi = mu - SPAN * sd, mu + SPAN * sd
    if cut <= lo or cut >= hi:
        return [(lo, hi)]
    return [(lo, cut), (cut, hi)]


def _gauss_expect(fn, mu: float, sd: float, cut: float, nodes: int) -> np.ndarray:
    """``E[fn(Z)]`` for ``Z ~ N(mu, sd^2)`` by Gauss-Legendre, split at ``cut``.

    ``fn`` maps an array of points to an array whose leading axis matches.
    """
    if sd <= 0:
        return fn(np.array([mu]))[0]
    t, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for a, b in _pieces(mu, sd, cut):
        x = 0.5 * (b - a) * t + 0.5 * (a + b)
        dens = np.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
        vals = fn(x)
        ww = 0.5 * (b - a) * w * dens
        total = total + np.tensordot(ww, vals, axes=(0, 0))
    return total


class _OverlayModel:
    """Effective edge probabilities of the overlay model on a tiny domain."""

    def __init__(self, g: Graph, stack: ScaleStack, q: float, n: int, h: float,
                 coarse: ScaleFields | None, ev: EventSpec, max_edges: int):
        self.g = g
        self.dom = stack.domain
        if len(self.dom) > 2:
            raise ValueError("the quadrature check needs at most two interior vertices")
        if not 0 <= n <= stack.levels:
            raise ValueError(f"scale {n} outside 0..{stack.levels}")
        self.q = q
        self.indicator = enumerate_event(g, ev, max_edges).astype(float)
        nu = float(normalizer(n))
        self.cov = nu**2 * stack.matrices[n]
        u, v = g.edges.T
        if coarse is None:
            tail = np.zeros(g.n_edges)
        else:
            phi = coarse.phi
            if phi.ndim != 2:
                raise ValueError("coarse fields must be a single realisation")
            sq = np.clip(phi[n + 1 :], 0.0, None) ** 2
            tail = sq[:, u].sum(axis=0) + sq[:, v].sum(axis=0)
        self.bar = -np.expm1(-h - tail)
        self.u, self.v = u, v

    def prob(self, phi_dom: np.ndarray, lam: float, closed_at=None) -> np.ndarray:
        """``P(A)`` for each row of ``phi_dom`` (values on the domain)."""
        B = phi_dom.shape[0]
        phi = np.zeros((B, self.g.n_vertices))
        phi[:, self.dom] = phi_dom
        right = -np.expm1(-phi[:, self.u] ** 2 * (phi[:, self.u] >= lam))
        left = -np.expm1(-phi[:, self.v] ** 2 * (phi[:, self.v] >= lam))
        if closed_at is not None:
            right[:, self.u == closed_at] = 0.0
            left[:, self.v == closed_at] = 0.0
        eff = 1.0 - (1.0 - self.q) * (1.0 - self.bar) * (1.0 - right) * (1.0 - left)
        return config_weights(eff) @ self.indicator

    def annealed(self, lam: float, nodes: int) -> float:
        C = self.cov
        if len(self.dom) == 1:
            sd = math.sqrt(C[0, 0])
            return float(_gauss_expect(lambda x: self.prob(x[:, None], lam), 0.0, sd, lam, nodes))
        s1 = math.sqrt(C[0, 0])
        beta = C[1, 0] / C[0, 0]
        s2 = math.sqrt(max(C[1, 1] - C[1, 0] ** 2 / C[0, 0], 0.0))

        def outer(x1):
            out = np.empty(len(x1))
            for i, a in enumerate(x1):
                inner = lambda x2: self.prob(np.column_stack([np.full(len(x2), a), x2]), lam)  # noqa: E731
                out[i] = _gauss_expect(inner, beta * a, s2, lam, nodes)
            return out

        return float(_gauss_expect(outer, 0.0, s1, lam, nodes))

    def pivotal_term(self, lam: float, nodes: int) -> float:
        C = self.cov
        total = 0.0
        for i, x in enumerate(self.dom):
            var = C[i, i]
            dens = math.exp(-0.5 * lam**2 / var) / math.sqrt(2 * math.pi * var)
            if len(self.dom) == 1:
                pt = np.array([[lam]])
                piv = self.prob(pt, lam) - self.prob(pt, lam, closed_at=x)
                total += dens * float(piv[0])
                continue
            j = 1 - i
            beta = C[j, i] / var
            s = math.sqrt(max(C[j, j] - C[j, i] ** 2 / var, 0.0))

            def fn(y, i=i, x=x):
                pts = np.empty((len(y), 2))
                pts[:, i] = lam
                pts[:, 1 - i] = y
                return self.prob(pts, lam) - self.prob(pts, lam, closed_at=x)

            total += dens * float(_gauss_expect(fn, beta * lam, s, lam, nodes))
        return total


def lambda_derivative_check(g: Graph, stack: ScaleStack, q: float, n: int, lam: float,
                            h: float = 0.0, coarse: ScaleFields | None = None,
                            event: EventSpec | None = None, delta: float = 1e-3,
                            nodes: int = 200, max_edges: int = 18,
                            conv_tol: float = 1e-9) -> LambdaCheck:
    """Compare both sides of the level-derivative identity by quadrature.

    The pivotal set ``N_x`` consists of the directed channels leaving ``x``
    (see :func:`gffperc.graph.directed_neighborhood`).  ``converged`` is
    ``False`` when halving the node count moves ``F`` by more than
    ``conv_tol``.
    """
    ev = event if event is not None else connect_boundary([int(stack.domain[0])])
    model = _OverlayModel(g, stack, q, n, h, coarse, ev, max_edges)
    f_plus = model.annealed(lam + delta, nodes)
    f_minus = model.annealed(lam - delta, nodes)
    lhs = -(f_plus - f_minus) / (2.0 * delta)
    rhs = model.pivotal_term(lam, nodes)
    coarse_f = model.annealed(lam + delta, max(nodes // 2, 2))
    converged = abs(coarse_f - f_plus) <= conv_tol
    return LambdaCheck(lhs, rhs, abs(lhs - rhs), delta, converged)


def pivotal_channels(g: Graph, x: int) -> np.ndarray:
    """Channel ids of ``N_x``; re-exported here for callers of the check."""
    return directed_neighborhood(OverlayGraph(g), x)
