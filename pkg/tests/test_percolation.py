import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gffperc.couplings import EdgeEnvironment, OverlayEnvironment, constant_env
from gffperc.graph import Graph, build_box, load_edge_list
from gffperc.percolation import (
    CLOSED_PIVOTAL,
    NOT_PIVOTAL,
    OPEN_PIVOTAL,
    PercConfig,
    all_configs,
    cluster_labels,
    config_weights,
    connect,
    connect_boundary,
    enumerate_event,
    exact_event,
    holds,
    pivotal,
    sample_perc,
)
from oracles import bfs_connected, brute_probability


def test_edge_examples():
    g = load_edge_list("0 1\n#boundary\n1\n")
    ev = connect_boundary([0])
    res = exact_event(g, constant_env(g, 0.3), ev)
    assert res.probability == pytest.approx(0.3)
    assert res.derivative_q == pytest.approx(1.0)
    assert res.pivotal_sum == pytest.approx(1.0)


def test_series_and_parallel():
    path = load_edge_list("0 1\n1 2\n")
    res = exact_event(path, constant_env(path, 0.4), connect([0], [2]))
    assert res.probability == pytest.approx(0.16)
    assert res.derivative_q == pytest.approx(0.8)
    cycle = load_edge_list("0 1\n1 2\n2 3\n0 3\n")
    q = 0.6
    res = exact_event(cycle, constant_env(cycle, q), connect([0], [2]))
    assert res.probability == pytest.approx(1 - (1 - q * q) ** 2)
    assert res.derivative_q == pytest.approx(2 * (1 - q * q) * 2 * q)


def test_trivial_events():
    g = build_box(1, [2])
    omega = np.zeros(g.n_edges, dtype=bool)
    b = g.boundary[0]
    assert holds(g, omega, connect_boundary([b]))
    iso = Graph(2, np.zeros((0, 2), dtype=int), [])
    assert not holds(iso, np.zeros(0, dtype=bool), connect_boundary([0]))
    with pytest.raises(ValueError):
        connect([], [1])


def test_enumeration_cap():
    g = build_box(2, [3, 3])
    with pytest.raises(ValueError):
        enumerate_event(g, connect_boundary([g.interior[4]]))


def test_config_weights_sum_to_one():
    p = np.array([0.1, 0.5, 0.9, 0.3])
    w = config_weights(p)
    assert w.sum() == pytest.approx(1.0)
    bits = all_configs(4)
    direct = np.prod(np.where(bits, p, 1 - p), axis=1)
    assert np.allclose(w, direct)


@pytest.mark.parametrize("seed", range(15))
def test_exact_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    g = build_box(2, [2, 2]) if seed % 2 else build_box(1, [4])
    p = rng.random(g.n_edges)
    S = [int(g.interior[0])]
    T = [int(g.interior[-1])]
    for ev, targets in [(connect_boundary(S), g.boundary), (connect(S, T), T)]:
        got = exact_event(g, EdgeEnvironment(p, "bridge"), ev).probability
        want = brute_probability([tuple(e) for e in g.edges], p, g.n_vertices, S, targets)
        assert got == pytest.approx(want, abs=1e-13)


@pytest.mark.parametrize("seed", range(10))
def test_russo_constant_environment(seed):
    rng = np.random.default_rng(seed)
    g = build_box(2, [2, 2])
    ev = connect_boundary([int(g.interior[rng.integers(4)])])
    q = float(rng.uniform(0.05, 0.95))
    res = exact_event(g, constant_env(g, q), ev)
    h = 1e-5
    fd = (exact_event(g, constant_env(g, q + h), ev).probability
          - exact_event(g, constant_env(g, q - h), ev).probability) / (2 * h)
    assert res.derivative_q == pytest.approx(fd, abs=1e-8)
    assert res.derivative_q == pytest.approx(res.pivotal_sum, abs=1e-12)


def test_pivotal_probability_per_edge():
    g = load_edge_list("0 1\n1 2\n0 2\n")
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 2]]
    p = np.array([0.3, 0.6, 0.8])
    res = exact_event(g, EdgeEnvironment(p, "bridge"), connect([0], [2]))
    # (0,1) is pivotal iff (1,2) is open and (0,2) closed
    assert res.pivotal[0] == pytest.approx(0.8 * 0.4)
    # (0,2) is pivotal iff the two-step path is not open
    assert res.pivotal[1] == pytest.approx(1 - 0.3 * 0.8)


def test_overlay_reduces_to_effective():
    g = build_box(1, [2])
    rng = np.random.default_rng(0)
    c = rng.random((g.n_edges, 4)) * 0.5
    env = OverlayEnvironment(c)
    ev = connect_boundary([int(g.interior[0])])
    a = exact_event(g, env, ev).probability
    b = exact_event(g, EdgeEnvironment(env.effective, "bridge"), ev).probability
    assert a == b
    samples = sample_perc(env, seed=1, size=50000)
    assert samples.overlay and samples.bits.shape == (50000, g.n_edges, 4)
    mc = holds(g, samples, ev).mean()
    assert abs(mc - a) <= 4 * math.sqrt(a * (1 - a) / 50000)


def test_sampling_is_monotone_coupling():
    g = build_box(2, [3, 3])
    rng = np.random.default_rng(2)
    lo = rng.random(g.n_edges) * 0.5
    hi = lo + rng.random(g.n_edges) * 0.5
    a = sample_perc(EdgeEnvironment(lo, "bridge"), seed=7, size=200).bits
    b = sample_perc(EdgeEnvironment(hi, "bridge"), seed=7, size=200).bits
    assert np.all(a <= b)
    ev = connect_boundary([int(g.interior[4])])
    assert np.all(holds(g, a, ev) <= holds(g, b, ev))


def test_sampling_marginals():
    p = np.array([0.1, 0.4, 0.7, 0.95])
    s = sample_perc(p, seed=0, size=40000).bits
    assert np.all(np.abs(s.mean(axis=0) - p) <= 4 * np.sqrt(p * (1 - p) / 40000))


def test_monte_carlo_matches_exact():
    g = build_box(2, [2, 2])
    env = constant_env(g, 0.5)
    ev = connect([int(g.interior[0])], [int(g.interior[3])])
    exact = exact_event(g, env, ev).probability
    mc = holds(g, sample_perc(env, seed=3, size=10**5), ev).mean()
    assert abs(mc - exact) <= 4 * math.sqrt(exact * (1 - exact) / 1e5)


@st.composite
def configs(draw):
    n = draw(st.integers(2, 8))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, min_size=1, max_size=len(pairs)))
    g = Graph(n, np.array(sorted(edges)), [n - 1])
    bits = np.array(draw(st.lists(st.booleans(), min_size=len(edges), max_size=len(edges))))
    return g, bits


@settings(max_examples=150, deadline=None)
@given(configs())
def test_clusters_match_networkx(data):
    g, bits = data
    labels = cluster_labels(g, bits)
    G = nx.Graph()
    G.add_nodes_from(range(g.n_vertices))
    G.add_edges_from(map(tuple, g.edges[bits]))
    for comp in nx.connected_components(G):
        assert len({labels[v] for v in comp}) == 1
    assert len(set(labels.tolist())) == nx.number_connected_components(G)
    ev = connect_boundary([0])
    assert holds(g, bits, ev) == bfs_connected(g.n_vertices, g.edges[bits].tolist(), [0], g.boundary)


def test_batched_labels_do_not_mix_samples():
    g = build_box(1, [2])
    omega = np.array([[True, True, True], [False, False, False]])
    labels = cluster_labels(g, omega)
    assert len(set(labels[0])) == 1
    assert len(set(labels[1])) == g.n_vertices
    assert not set(labels[0]) & set(labels[1])


def test_pivotal_classification():
    g = load_edge_list("0 1\n1 2\n")
    ev = connect([0], [2])
    assert pivotal(g, np.array([True, True]), ev, [0]) == OPEN_PIVOTAL
    assert pivotal(g, np.array([False, True]), ev, [0]) == CLOSED_PIVOTAL
    assert pivotal(g, np.array([False, False]), ev, [0]) == NOT_PIVOTAL
    assert pivotal(g, np.array([False, False]), ev, [0, 1]) == CLOSED_PIVOTAL


def test_pivotal_channels():
    g = load_edge_list("0 1\n#boundary\n1\n")
    bits = np.zeros((1, 4), dtype=bool)
    bits[0, 2] = True
    omega = PercConfig(bits, overlay=True)
    ev = connect_boundary([0])
    # the channel is pivotal alone, but not while a parallel channel is open
    assert pivotal(g, omega, ev, [2]) == OPEN_PIVOTAL
    bits2 = bits.copy()
    bits2[0, 0] = True
    assert pivotal(g, PercConfig(bits2, True), ev, [2]) == NOT_PIVOTAL
    assert pivotal(g, PercConfig(bits2, True), ev, [0, 2]) == OPEN_PIVOTAL


@pytest.mark.parametrize("seed", range(5))
def test_pivotal_sum_matches_sampled_pivotality(seed):
    g = build_box(2, [2, 2])
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.2, 0.8, g.n_edges)
    ev = connect_boundary([int(g.interior[0])])
    res = exact_event(g, EdgeEnvironment(p, "bridge"), ev)
    cfg = sample_perc(p, seed=seed, size=1000).bits
    e = int(rng.integers(g.n_edges))
    hits = np.mean([pivotal(g, c, ev, [e]) != NOT_PIVOTAL for c in cfg])
    se = math.sqrt(max(res.pivotal[e] * (1 - res.pivotal[e]), 1e-4) / 1000)
    assert abs(hits - res.pivotal[e]) <= 4 * se
