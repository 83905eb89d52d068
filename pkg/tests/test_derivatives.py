import math

import numpy as np
import pytest
from scipy import integrate

from gffperc.derivatives import lambda_derivative_check, pivotal_channels
from gffperc.domains import parse_domain
from gffperc.multiscale import build_scales, normalizer, sample_scale_fields
from gffperc.percolation import connect
from oracles import normal_pdf

pytestmark = pytest.mark.filterwarnings("ignore:scales .* needed jitter:RuntimeWarning")


def edge_setup():
    g = parse_domain("edge")
    return g, build_scales(g)


def closed_form(stack, q, n, lam, h):
    """Single interior vertex joined to the boundary by one edge.

    Only the right channel depends on phi^n_x, so
    ``-dF/dlam = (1 - q) e^{-h} rho(lam) (1 - e^{-lam^2})``.
    """
    var = normalizer(n) ** 2 * stack.matrices[n][0, 0]
    return (1 - q) * math.exp(-h) * normal_pdf(lam, var) * (1 - math.exp(-lam * lam))


@pytest.mark.parametrize("lam", [-0.5, 0.0, 0.3, 1.0, 2.0])
@pytest.mark.parametrize("n", [0, 1, 3])
def test_single_vertex_closed_form(lam, n):
    g, stack = edge_setup()
    q, h = 0.4, 0.2
    res = lambda_derivative_check(g, stack, q, n, lam, h=h)
    want = closed_form(stack, q, n, lam, h)
    assert res.rhs == pytest.approx(want, abs=1e-14)
    assert res.lhs == pytest.approx(want, abs=1e-6)
    assert res.converged


def test_annealed_probability_by_scipy_quad():
    # -dF/dlam integrated from lam back to +inf recovers F(lam) - F(inf)
    g, stack = edge_setup()
    q, n, h, lam = 0.3, 1, 0.0, 0.5
    tail, _ = integrate.quad(lambda t: closed_form(stack, q, n, t, h), lam, np.inf)
    var = normalizer(n) ** 2 * stack.matrices[n][0, 0]
    direct, _ = integrate.quad(
        lambda x: (1 - q) * (1 - math.exp(-x * x)) * normal_pdf(x, var), lam, np.inf)
    assert tail == pytest.approx(direct, rel=1e-8)


def test_second_order_convergence():
    g, stack = edge_setup()
    gaps = [lambda_derivative_check(g, stack, 0.5, 0, 0.3, h=0.2, delta=d).gap
            for d in (8e-3, 4e-3, 2e-3)]
    rates = np.log2(np.array(gaps[:-1]) / np.array(gaps[1:]))
    assert np.all(np.abs(rates - 2) < 0.1)


def test_pair_domain_both_sides_agree():
    g = parse_domain("pair")
    stack = build_scales(g)
    res = lambda_derivative_check(g, stack, 0.5, 1, 0.4, h=0.1, nodes=60)
    assert res.gap < 1e-5
    assert res.rhs > 0


def test_pair_domain_with_coarse_fields_and_connect_event():
    g = parse_domain("pair")
    stack = build_scales(g)
    coarse = sample_scale_fields(stack, 3)
    a, b = (int(v) for v in g.interior)
    res = lambda_derivative_check(g, stack, 0.3, 0, 0.2, coarse=coarse,
                                  event=connect([a], [b]), nodes=60)
    assert res.gap < 1e-5


def test_far_level_is_flat():
    g, stack = edge_setup()
    res = lambda_derivative_check(g, stack, 0.5, 0, 30.0)
    assert abs(res.lhs) < 1e-12 and abs(res.rhs) < 1e-12


def test_rejects_large_domains():
    g = parse_domain("path3")
    with pytest.raises(ValueError):
        lambda_derivative_check(g, build_scales(g), 0.5, 0, 0.1)
    g, stack = edge_setup()
    with pytest.raises(ValueError):
        lambda_derivative_check(g, stack, 0.5, stack.levels + 1, 0.1)


def test_pivotal_channels_leave_vertex():
    g = parse_domain("pair")
    x = int(g.interior[0])
    ch = pivotal_channels(g, x)
    assert len(ch) == g.degree[x]
    for c in ch:
        e, k = divmod(int(c), 4)
        u, v = g.edges[e]
        assert (k == 2 and u == x) or (k == 3 and v == x)
