"""Finite-range decomposition of the Green matrix by dyadic lazy-walk windows.

With ``Q`` the lazy walk killed outside the domain,
``G_0 = Q^0 / (2 d)`` and ``G_n = sum_{2^(n-1) <= k < 2^n} Q^k / (2 d)``.
Every ``G_n`` is a covariance, entrywise nonnegative and vanishes between
vertices at distance ``>= 2^n``; the scales sum to ``G`` and the remainder
after level ``N`` is exactly ``Q^(2^N) G``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, GraphError, distance_matrix, vertex_set
from .walk import GreenMatrix, JITTER, _check_components

TAIL_TOL = 1e-8
PSD_TOL = 1e-10
MAX_LEVELS = 40


def normalizer(n) -> np.ndarray | float:
    """Scale normaliser ``pi (n + 1) / sqrt(12)`` turning ``psi^n`` into ``phi^n``."""
    return np.pi * (np.asarray(n) + 1) / math.sqrt(12.0)


def _scale_factor(C: np.ndarray) -> tuple[np.ndarray, bool]:
    """Square-root factor ``F`` with ``F @ F.T ~= C`` for a PSD matrix.

    Cholesky, then Cholesky with ``JITTER * I``; scales far beyond the
    walk's relaxation time are numerically rank deficient, for those an
    eigen square root with negative round-off eigenvalues clipped is used.
    The flag is set whenever the plain Cholesky failed.
    """
    try:
        return np.linalg.cholesky(C), False
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(C + JITTER * np.eye(len(C))), True
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(C)
    return V * np.sqrt(np.clip(w, 0.0, None)), True


@dataclass(frozen=True, eq=False)
class ScaleStack:
    """Scale covariances ``G_n`` for ``n = 0..levels`` on ``domain``.

    ``tail`` is the exact remainder ``G - sum_n G_n`` (``None`` when the walk
    is not killed and ``G`` does not exist).
    """

    graph: Graph
    domain: np.ndarray
    matrices: np.ndarray
    factors: np.ndarray
    tail: np.ndarray | None
    killed: bool
    flagged: tuple = field(default=())

    @property
    def levels(self) -> int:
        return len(self.matrices) - 1

    @property
    def normalizers(self) -> np.ndarray:
        return normalizer(np.arange(self.levels + 1))

    @property
    def tail_mass(self) -> float:
        return float(np.abs(self.tail).max()) if self.tail is not None else math.inf

    def normalized_variances(self) -> np.ndarray:
        """Diagonal of the covariance of ``phi^n``, shape ``(levels+1, |domain|)``."""
        diag = np.diagonal(self.matrices, axis1=1, axis2=2)
        return self.normalizers[:, None] ** 2 * diag

    def index(self, vertices) -> np.ndarray:
        pos = np.searchsorted(self.domain, vertices)
        pos = np.clip(pos, 0, len(self.domain) - 1)
        if not np.all(self.domain[pos] == vertices):
            raise GraphError("vertex outside the scale-stack domain")
        return pos


def _lazy_symmetric(g: Graph, dom: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetrised killed lazy walk ``D^(1/2) Q D^(-1/2)`` and ``d``."""
    d = g.degree[dom].astype(float)
    A = g.adjacency_matrix()[dom][:, dom].toarray()
    M = 0.5 * np.eye(len(dom)) + 0.5 * A / np.sqrt(np.outer(d, d))
    return M, d


def build_scales(g: Graph, domain=None, levels: int | None = None, tol: float = TAIL_TOL,
                 killed: bool = True) -> ScaleStack:
    """Assemble ``G_0..G_N`` by repeated squaring of the lazy walk.

    With ``levels=None`` the truncation ``N`` is the smallest level whose
    remainder ``Q^(2^N) G`` is below ``tol`` entrywise.  ``killed=False``
    uses the whole vertex set with no killing (e.g. tori); ``levels`` is then
    required and no remainder is available.
    """
    if killed:
        dom = g.interior if domain is None else vertex_set(g, domain)
        _check_components(g, dom)
    else:
        dom = np.arange(g.n_vertices) if domain is None else vertex_set(g, domain)
        if levels is None:
            raise ValueError("levels must be given when the walk is not killed")
        if np.any(g.degree[dom] == 0):
            raise GraphError("isolated vertex in an unkilled domain")
    if len(dom) == 0:
        raise GraphError("empty domain")
    if levels is not None and levels < 0:
        raise ValueError("levels must be >= 0")

    M, d = _lazy_symmetric(g, dom)
    k = len(dom)
    scale = 1.0 / np.sqrt(np.outer(d, d)) / 2.0  # D^(-1/2) . D^(-1/2) / 2

    # D^(1/2) G D^(1/2) = (I - M)^(-1) / 2
    Gsym = None
    if killed:
        Gsym = np.linalg.inv(np.eye(k) - M)
        Gsym = 0.5 * (Gsym + Gsym.T)

    mats = [np.diag(1.0 / (2.0 * d))]
    power = M.copy()  # M^(2^(n-1)) at step n
    window = np.eye(k)  # sum_{j < 2^(n-1)} M^j
    tails = []
    n = 0
    while True:
        rem = None
        if killed:
            # remainder after level n: M^(2^n) (I - M)^(-1), i.e. Q^(2^n) G
            rem = (power @ Gsym) * scale
            rem = 0.5 * (rem + rem.T)
        if levels is None:
            if np.abs(rem).max() < tol:
                tails.append(rem)
                break
            if n >= MAX_LEVELS:
                raise RuntimeError("remainder did not fall below tolerance; domain too large")
        elif n == levels:
            tails.append(rem)
            break
        n += 1
        block = power @ window
        Gn = block * scale
        mats.append(0.5 * (Gn + Gn.T))
        window = window + block
        power = power @ power

    mats = np.array(mats)
    factors = []
    flagged = []
    for i, C in enumerate(mats):
        F, flag = _scale_factor(C)
        factors.append(F)
        if flag:
            flagged.append(i)
    if flagged:
        warnings.warn(f"scales {flagged} needed jitter or eigen factorisation", RuntimeWarning,
                      stacklevel=2)
    return ScaleStack(g, dom, mats, np.array(factors), tails[-1], killed, tuple(flagged))


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of :func:`check_properties`.

    ``deficit`` is ``max |G - sum G_n|``; ``residual`` is
    ``max |sum G_n + tail - G|``.  ``diag_exponent`` is the fitted ``beta``
    in ``max_x G_n(x, x) ~ c' 2^(-beta n)`` over ``fit_window``.
    """

    levels: int
    deficit: float
    residual: float
    min_eigenvalues: np.ndarray
    min_entries: np.ndarray
    range_violations: int
    diag_exponent: float
    diag_constant: float
    fit_window: tuple[int, int]

    @property
    def ok(self) -> bool:
        return (
            self.range_violations == 0
            and bool(np.all(self.min_entries >= 0))
            and bool(np.all(self.min_eigenvalues >= -PSD_TOL))
            and (math.isnan(self.residual) or self.residual <= TAIL_TOL)
        )

    def rows(self) -> list[tuple[str, float]]:
        out = [
            ("levels", self.levels),
            ("deficit", self.deficit),
            ("residual", self.residual),
            ("range_violations", self.range_violations),
            ("diag_exponent", self.diag_exponent),
            ("diag_constant", self.diag_constant),
        ]
        out += [(f"min_eigenvalue_{n}", v) for n, v in enumerate(self.min_eigenvalues)]
        out += [(f"min_entry_{n}", v) for n, v in enumerate(self.min_entries)]
        return out


def check_properties(stack: ScaleStack, green: GreenMatrix | None = None,
                     fit_window: tuple[int, int] | None = None) -> PropertyReport:
    """Check positivity, semi-definiteness, finite range and the partial sums."""
    mats = stack.matrices
    min_eig = np.array([np.linalg.eigvalsh(C).min() for C in mats])
    min_entry = mats.min(axis=(1, 2))

    dist = distance_matrix(stack.graph)[np.ix_(stack.domain, stack.domain)]
    violations = 0
    for n, C in enumerate(mats):
        violations += int(np.count_nonzero(C[dist >= 2**n]))

    deficit = residual = math.nan
    if green is not None:
        if not np.array_equal(green.domain, stack.domain):
            raise GraphError("Green matrix and scale stack live on different domains")
        partial = mats.sum(axis=0)
        deficit = float(np.abs(green.matrix - partial).max())
        if stack.tail is not None:
            residual = float(np.abs(partial + stack.tail - green.matrix).max())

    lo, hi = fit_window if fit_window is not None else (1, stack.levels)
    diag = np.diagonal(mats, axis1=1, axis2=2).max(axis=1)
    ns = np.arange(lo, hi + 1)
    vals = diag[lo : hi + 1]
    keep = vals > 0
    if keep.sum() >= 2:
        slope, intercept = np.polyfit(ns[keep], np.log2(vals[keep]), 1)
        exponent, const = float(-slope), float(2.0**intercept)
    else:
        exponent = const = math.nan
    return PropertyReport(stack.levels, deficit, residual, min_eig, min_entry, violations,
                          exponent, const, (lo, hi))


@dataclass(frozen=True, eq=False)
class ScaleFields:
    """Independent scale fields ``psi[n]`` over the full vertex set.

    ``psi`` has shape ``(levels+1, n_vertices)`` or
    ``(levels+1, size, n_vertices)``.
    """

    stack: ScaleStack
    psi: np.ndarray

    @property
    def phi(self) -> np.ndarray:
        nu = self.stack.normalizers.reshape((-1,) + (1,) * (self.psi.ndim - 1))
        return nu * self.psi

    @property
    def total(self) -> np.ndarray:
        return self.psi.sum(axis=0)


def scale_rng(seed: int, n: int) -> np.random.Generator:
    """Stream for scale ``n``; independent of how many scales are drawn."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n,)))


def sample_scale_fields(stack: ScaleStack, seed: int, size: int | None = None) -> ScaleFields:
    """Draw ``psi^n ~ N(0, G_n)`` independently, scale ``n`` from stream ``(seed, n)``."""
    k = len(stack.domain)
    shape = (1 if size is None else size, k)
    out = np.zeros((stack.levels + 1, shape[0], stack.graph.n_vertices))
    for n, F in enumerate(stack.factors):
        z = scale_rng(seed, n).standard_normal((shape[0], F.shape[1]))
        out[n][:, stack.domain] = z @ F.T
    if size is None:
        out = out[:, 0]
    return ScaleFields(stack, out)


def cs_bound_margin(fields: ScaleFields, u, v) -> np.ndarray:
    """``RHS - LHS`` of the edge inequality at edges ``(u, v)``.

    ``LHS = 2 (1 + psi_u)_+ (1 + psi_v)_+`` with ``psi`` the sum of all
    scales; ``RHS = 4 + sum_n (phi^n_u)_+^2 + (phi^n_v)_+^2``.
    """
    psi = fields.total
    phi_pos = np.clip(fields.phi, 0.0, None) ** 2
    lhs = 2.0 * np.clip(1.0 + psi[..., u], 0, None) * np.clip(1.0 + psi[..., v], 0, None)
    rhs = 4.0 + phi_pos[..., u].sum(axis=0) + phi_pos[..., v].sum(axis=0)
    return rhs - lhs


def cs_bound_check(fields: ScaleFields, edge) -> bool:
    """Whether the edge inequality holds at ``edge = (x, y)`` for this sample."""
    x, y = edge
    return bool(np.all(cs_bound_margin(fields, x, y) >= 0))
