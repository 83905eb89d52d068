import math

import numpy as np
import pytest

from gffperc.domains import PRESETS, parse_domain
from gffperc.graph import build_box
from gffperc.multiscale import (
    ScaleFields,
    build_scales,
    check_properties,
    cs_bound_check,
    cs_bound_margin,
    normalizer,
    sample_scale_fields,
)
from gffperc.walk import green_dirichlet, heat_kernel
from oracles import random_domain

pytestmark = pytest.mark.filterwarnings("ignore:scales .* needed jitter:RuntimeWarning")


def kernel_window_oracle(g, levels):
    """``G_n`` from explicit lazy killed heat-kernel rows, ``n = 0..levels``."""
    dom = g.interior
    d = g.degree[dom].astype(float)
    rows = np.array([heat_kernel(g, x, 2**levels, lazy=True, killed_at_boundary=True)[:, dom]
                     for x in dom])  # (x, k, y)
    out = [np.diag(1 / (2 * d))]
    for n in range(1, levels + 1):
        window = rows[:, 2 ** (n - 1) : 2**n, :].sum(axis=1)
        out.append(window / (2 * d[None, :]))
    return np.array(out)


def test_first_scales():
    g = build_box(2, [3, 3])
    st = build_scales(g, levels=3)
    c = g.vertex((1, 1))
    i, j = st.index([c, g.vertex((1, 2))])
    assert st.matrices[0][i, i] == 1 / 8
    assert st.matrices[1][i, j] == pytest.approx(1 / 64, abs=1e-17)


@pytest.mark.parametrize("shape", [[3], [2, 3], [3, 3]])
def test_scales_match_kernel_iteration(shape):
    g = build_box(len(shape), shape)
    st = build_scales(g, levels=6)
    assert np.allclose(st.matrices, kernel_window_oracle(g, 6), atol=1e-15)


def test_path3_partial_sums_and_tail():
    g = build_box(1, [3])
    G = green_dirichlet(g)
    mu = 0.5 * (1 + math.cos(math.pi / 4))
    for levels in (2, 4, 6):
        st = build_scales(g, levels=levels)
        deficit = G.matrix - st.matrices.sum(axis=0)
        assert np.all(deficit >= -1e-15)
        # remaining lazy-walk mass after 2^N steps: at most mu^(2^N) / (1 - mu) / (2 d_min)
        bound = mu ** (2**levels) / (1 - mu) / 4
        assert deficit.max() <= bound + 1e-15
        assert deficit.max() > 0.01 * bound
        assert np.allclose(deficit, st.tail, atol=1e-15)


def test_adaptive_truncation():
    g = build_box(2, [4, 4])
    st = build_scales(g)
    assert st.tail_mass < 1e-8
    shorter = build_scales(g, levels=st.levels - 1)
    assert shorter.tail_mass >= 1e-8
    rep = check_properties(st, green_dirichlet(g))
    assert rep.deficit <= 1e-8
    assert rep.residual <= 1e-12


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_properties_on_presets(name):
    g = parse_domain(name)
    st = build_scales(g)
    rep = check_properties(st, green_dirichlet(g))
    assert rep.ok
    assert rep.range_violations == 0
    assert np.all(rep.min_entries >= 0)
    assert np.all(rep.min_eigenvalues >= -1e-10)
    assert rep.deficit <= 1e-8


@pytest.mark.parametrize("seed", range(20))
def test_psd_on_random_domains(seed):
    g, dom = random_domain(np.random.default_rng(seed), 30)
    st = build_scales(g, dom)
    rep = check_properties(st, green_dirichlet(g, dom))
    assert np.all(rep.min_eigenvalues >= -1e-10)
    assert rep.range_violations == 0
    assert np.all(rep.min_entries >= 0)


def test_torus_diagonal_fit_two_dimensions():
    g = build_box(2, [16, 16], "torus")
    st = build_scales(g, levels=7, killed=False)
    rep = check_properties(st, fit_window=(1, 5))
    # in two dimensions a dyadic window of the return probability is flat
    assert abs(rep.diag_exponent) < 0.15
    assert st.tail is None
    assert rep.range_violations == 0


def test_unkilled_requires_levels():
    with pytest.raises(ValueError):
        build_scales(build_box(1, [4], "torus"), killed=False)
    with pytest.raises(ValueError):
        build_scales(build_box(1, [4]), levels=-1)


def test_normalizer():
    assert normalizer(0) == pytest.approx(math.pi / math.sqrt(12))
    assert normalizer(3) == pytest.approx(4 * math.pi / math.sqrt(12))


def test_scale_sampling_covariances():
    g = build_box(2, [2, 3])
    st = build_scales(g)
    f = sample_scale_fields(st, 4, size=10**5)
    dom = st.domain
    for n in (0, 1):
        x = f.psi[n][:, dom]
        prods = x[:, :, None] * x[:, None, :]
        se = prods.std(axis=0, ddof=1) / math.sqrt(len(x))
        assert np.all(np.abs(prods.mean(axis=0) - st.matrices[n]) <= 5 * se + 1e-15)
    tot = f.total[:, dom]
    prods = tot[:, :, None] * tot[:, None, :]
    se = prods.std(axis=0, ddof=1) / math.sqrt(len(tot))
    assert np.all(np.abs(prods.mean(axis=0) - st.matrices.sum(axis=0)) <= 5 * se)
    # scales are independent
    cross = f.psi[0][:, dom][:, :, None] * f.psi[1][:, dom][:, None, :]
    se = cross.std(axis=0, ddof=1) / math.sqrt(len(tot))
    assert np.all(np.abs(cross.mean(axis=0)) <= 5 * se)


def test_scale_sampling_deterministic():
    g = build_box(2, [3, 3])
    st = build_scales(g)
    a, b = sample_scale_fields(st, 9, 5), sample_scale_fields(st, 9, 5)
    assert np.array_equal(a.psi, b.psi)
    assert np.all(a.psi[:, :, g.boundary] == 0)
    # scale n uses its own stream: fewer levels leave the shared scales intact
    short = sample_scale_fields(build_scales(g, levels=2), 9, 5)
    assert np.array_equal(short.psi, a.psi[:3])


def test_phi_normalisation():
    g = build_box(1, [2])
    st = build_scales(g)
    f = sample_scale_fields(st, 0, 3)
    assert np.allclose(f.phi, st.normalizers[:, None, None] * f.psi)
    assert np.allclose(st.normalized_variances(),
                       st.normalizers[:, None] ** 2 * np.diagonal(st.matrices, axis1=1, axis2=2))


def _fields_from(g, st, values):
    psi = np.zeros((st.levels + 1, g.n_vertices))
    for (n, v), val in values.items():
        psi[n, v] = val
    return ScaleFields(st, psi)


def test_cs_bound_trivial_cases():
    g = build_box(1, [2])
    st = build_scales(g)
    x, y = g.interior
    assert cs_bound_check(_fields_from(g, st, {}), (x, y))
    assert cs_bound_margin(_fields_from(g, st, {}), x, y) == 2.0
    for a in np.linspace(-3, 5, 81):
        assert cs_bound_check(_fields_from(g, st, {(0, x): a}), (x, y))


def test_cs_bound_fails_with_two_moderate_values():
    # (1 + a)(1 + b) <= 2 + a^2 + b^2 does not survive the normalisation:
    # psi^0 = 0.5 at both ends gives 2 * 1.5^2 = 4.5 > 4 + 2 * (pi^2 / 12) / 4
    g = build_box(1, [2])
    st = build_scales(g)
    x, y = g.interior
    f = _fields_from(g, st, {(0, x): 0.5, (0, y): 0.5})
    assert not cs_bound_check(f, (x, y))
    assert cs_bound_margin(f, x, y) == pytest.approx(4 + 2 * math.pi**2 / 48 - 4.5)


def test_cs_bound_with_cauchy_schwarz_constant():
    # Cauchy-Schwarz over the scales gives the factor 2 * sum_n 1 / nu_n^2 < 4
    g = build_box(2, [3, 3])
    st = build_scales(g)
    c = 2 * float(np.sum(1 / st.normalizers**2))
    assert c < 4
    f = sample_scale_fields(st, 1, size=20000)
    u, v = g.edges.T
    psi = f.total
    lhs = 2 * np.clip(1 + psi[:, u], 0, None) * np.clip(1 + psi[:, v], 0, None)
    sq = np.clip(f.phi, 0, None) ** 2
    rhs = 4 + c * (sq[:, :, u].sum(axis=0) + sq[:, :, v].sum(axis=0))
    assert np.all(lhs <= rhs)
