import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import Graph, make_trace
from topicdiff import analysis as an
from topicdiff.engine import SimConfig, simulate
from topicdiff.netgen import build_ws, lattice_view

# five instances on a 6-ring: topic 0 born at 0, topic 1 at 1.5
HAND = [(1.0, 0, 0, 0.0, 1), (2.0, 1, 0, 0.4, 0), (2.5, 2, 1, 0.0, 1),
        (3.0, 0, 1, 0.3, 0), (4.0, 3, 0, 0.2, 0)]


@pytest.fixture
def hand():
    return make_trace(6, [0.0, 1.5], HAND, 6.0)


def test_speaking_set_matches_scan(hand):
    for t in np.arange(0, 6.01, 0.25):
        truth = oracles.speaking(HAND, 6, t)
        for topic in (0, 1):
            assert an.speaking_set(hand, topic, t) == {v for v, i in truth.items() if i == topic}


def test_speaking_set_examples(hand):
    assert an.speaking_set(hand, 0, 0.5) == set()
    assert an.speaking_set(hand, 0, 3.0) == {1}       # node 0 moved to topic 1 at t=3
    assert an.speaking_set(hand, 1, 3.0) == {0, 2}    # closed interval at t=3


def test_evolution_matches_recount(hand):
    ev0 = an.evolution(hand, 0).speakers
    ev1 = an.evolution(hand, 1).speakers
    grid = an.sample_grid(6.0, 1.0)
    for j, t in enumerate(grid):
        truth = oracles.speaking(HAND, 6, t)
        assert ev0[j] == sum(1 for i in truth.values() if i == 0)
        assert ev1[j] == sum(1 for i in truth.values() if i == 1)
    # most-recent rule partitions speakers among topics
    ever = [len({r[1] for r in HAND if r[0] <= t}) for t in grid]
    assert list(ev0 + ev1) == ever


def test_never_spoken_topic(make):
    tr = make(4, [0.0, 1.0], [(0.5, 0, 0)], 3.0)
    assert not an.evolution(tr, 1).speakers.any()
    stats = an.topic_stats(tr, 1)
    assert stats.lifetime == 0 and stats.peak == 0 and stats.max_spread == 0
    assert not an.speaker_delta(tr, 1).any()


def test_topic_stats_hand(hand):
    net = build_ws(6, 2, 0.0, 0)
    s0 = an.topic_stats(hand, 0, net)
    assert (s0.peak, s0.max_spread, s0.adopters, s0.adopter_degree_sum) == (2, 3, 1, 2)
    # topic 0 is spoken at samples 1..6
    assert s0.lifetime == 5.0
    s1 = an.topic_stats(hand, 1, net)
    assert (s1.peak, s1.max_spread, s1.adopters) == (2, 2, 1)
    assert an.all_topic_stats(hand, net) == [s0, s1]


def test_single_instance_topic(make):
    tr = make(3, [0.0], [(0.2, 1, 0)], 2.0)
    s = an.topic_stats(tr, 0)
    assert (s.peak, s.max_spread, s.adopters) == (1, 1, 1)


def test_speaker_delta_sums_to_spread(hand):
    d = an.speaker_delta(hand, 0)
    assert list(d) == [0, 1, 1, 0, 1, 0, 0]
    assert d.sum() == an.topic_stats(hand, 0).max_spread


def test_clusters_examples():
    ring8 = build_ws(8, 2, 0.0, 0)
    assert an.clusters(ring8, {0, 1, 4}) == [2, 1]
    assert an.clusters(ring8, set()) == []
    assert an.clusters(ring8, range(8)) == [8]


def test_lattice_clusters_examples():
    net = build_ws(30, 4, 0.0, 0)
    S = {0, 1, 2, 10, 11, 20}
    assert an.lattice_clusters(net, S) == an.clusters(net, S)
    rew = build_ws(40, 2, 0.5, 3)
    pair = next((int(a), int(b)) for a, b, t in zip(rew.src, rew.dst, rew.tag) if t == 1)
    assert an.clusters(rew, set(pair)) == [2]
    assert an.lattice_clusters(rew, set(pair)) == [1, 1]


def test_giant_ratio_conventions():
    assert an.giant_ratio([10, 5]) == 2
    assert an.giant_ratio([7]) == 7
    assert an.giant_ratio([]) == 0


def test_conductance_examples():
    ring6 = build_ws(6, 2, 0.0, 0)
    assert an.conductance(ring6, {0, 1, 2}) == pytest.approx(1 / 3)
    assert an.conductance(ring6, range(6)) == 0
    assert an.conductance(ring6, {4}) == 1
    with pytest.raises(ValueError):
        an.conductance(ring6, set())
    assert an.conductance(Graph(3, [(0, 1)]), {2}) == 0.0


def test_proximity_examples():
    g = Graph(5, [(0, 1), (0, 2), (3, 2), (3, 4)])
    # tau(0) = {1, 2}, tau(3) = {2, 4}
    assert an.proximity(g, 0, 3) == pytest.approx(1 / 3)
    same = Graph(4, [(0, 2), (0, 3), (1, 2), (1, 3)])
    assert an.proximity(same, 0, 1) == 1
    assert an.proximity(Graph(4, [(0, 1), (2, 3)]), 0, 2) == 0
    assert an.proximity(Graph(3, []), 0, 1) == 0


def test_proximity_cluster_examples():
    clique = Graph(5, [(a, b) for a in range(5) for b in range(a + 1, 5)])
    assert an.proximity_clusters(clique, range(5), 0.0) == [5]
    assert an.proximity_clusters(clique, range(5), 0.99) == [1] * 5
    with pytest.raises(ValueError):
        an.proximity_clusters(clique, range(5), 1.0)


def random_graph(rng, n):
    m = int(rng.integers(0, n * 3))
    pairs = {(int(min(a, b)), int(max(a, b))) for a, b in rng.integers(0, n, size=(m, 2)) if a != b}
    return sorted(pairs)


def test_graph_ops_match_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        edges = random_graph(rng, n)
        g = Graph(n, edges)
        S = set(np.flatnonzero(rng.random(n) < 0.5).tolist())
        assert an.component_sizes(g, S) == oracles.sizes(n, edges, S)
        if S:
            assert an.conductance(g, S) == pytest.approx(oracles.conductance(n, edges, S))
        T_p = float(rng.uniform(0, 0.9))
        assert an.proximity_clusters(g, S, T_p) == oracles.proximity_sizes(n, edges, S, T_p)
        u, v = rng.choice(n, 2, replace=False)
        assert an.proximity(g, int(u), int(v)) == pytest.approx(oracles.proximity(n, edges, int(u), int(v)))


def small_sim(seed=3, n=40, k=4, p=0.3, horizon=30.0):
    net = build_ws(n, k, p, seed)
    cfg = SimConfig(lambda1=0.5, lambda2=1.0, A=1.0, alpha=0.3, B=2.0, beta=0.5, horizon=horizon, seed=seed)
    return net, simulate(net, cfg)


def instances_of(tr):
    return [(float(t), int(v), int(i)) for t, v, i in zip(tr.inst_t, tr.inst_node, tr.inst_topic)]


def test_topic_series_matches_brute_force():
    net, tr = small_sim()
    rows = instances_of(tr)
    edges = list(zip(net.src.tolist(), net.dst.tolist()))
    lat = lattice_view(net)
    lat_edges = list(zip(lat.src.tolist(), lat.dst.tolist()))
    series = an.topic_series(tr, net, 1.0)
    seen = {i: set() for i in series}
    for j, t in enumerate(an.sample_grid(tr.horizon, 1.0)):
        truth = oracles.speaking(rows, net.n, t)
        for i, ts in series.items():
            S = {v for v, x in truth.items() if x == i}
            sz = oracles.sizes(net.n, edges, S)
            assert ts.speakers[j] == len(S)
            assert ts.largest_cluster[j] == (sz[0] if sz else 0)
            assert ts.second_cluster[j] == (sz[1] if len(sz) > 1 else 0)
            assert ts.cluster_count[j] == len(sz)
            lsz = oracles.sizes(net.n, lat_edges, S)
            assert ts.lattice_largest[j] == (lsz[0] if lsz else 0)
            assert ts.lattice_count[j] == len(lsz)
            seen[i] |= set(oracles.largest_component(net.n, edges, S))
            assert ts.cumulative_largest[j] == len(seen[i])
            if S:
                assert ts.conductance[j] == pytest.approx(oracles.conductance(net.n, edges, S))
            else:
                assert math.isnan(ts.conductance[j])


def test_series_invariants_on_simulation():
    net, tr = small_sim(seed=8, n=120, k=6, p=0.2, horizon=60.0)
    series = an.topic_series(tr, net, 0.5)
    total = sum(ts.speakers for ts in series.values())
    assert np.all(total <= net.n)
    for ts in series.values():
        assert np.all(ts.largest_cluster >= ts.second_cluster)
        assert np.all(np.diff(ts.cumulative_largest) >= 0)
        assert np.all(ts.speakers >= ts.largest_cluster)
        assert np.all(ts.lattice_count >= ts.cluster_count)
        assert np.all(ts.lattice_largest <= ts.largest_cluster)
        ok = ~np.isnan(ts.conductance)
        assert np.all((ts.conductance[ok] >= 0) & (ts.conductance[ok] <= 1))
        assert np.array_equal(ts.speakers, an.evolution(tr, ts.topic_id, 0.5).speakers)


def test_cumulative_largest_static_cluster(make):
    tr = make(10, [0.0], [(0.5, 2, 0), (0.6, 3, 0), (0.7, 4, 0)], 5.0)
    cum = an.cumulative_largest(tr, build_ws(10, 2, 0.0, 0), 0, 1.0)
    assert list(cum) == [0, 3, 3, 3, 3, 3]


def test_cut_identity():
    net = build_ws(50, 6, 0.3, 1)
    rng = np.random.default_rng(0)
    S = set(np.flatnonzero(rng.random(50) < 0.4).tolist())
    comp = set(range(50)) - S
    u, v = net.src, net.dst
    cut_from_s = sum(1 for a, b in zip(u, v) if (a in S) != (b in S))
    vol_s = sum(int(net.degree[x]) for x in S)
    vol_c = sum(int(net.degree[x]) for x in comp)
    assert an.conductance(net, S) * vol_s == pytest.approx(cut_from_s)
    assert an.conductance(net, comp) * vol_c == pytest.approx(cut_from_s)


def test_rank_plot():
    r = np.arange(1, 101)
    assert an.rank_plot(r ** -0.7).slope == pytest.approx(-0.7, abs=1e-9)
    assert an.rank_plot(np.full(10, 3.0)).slope == pytest.approx(0.0, abs=1e-12)
    rp = an.rank_plot([1.0, 5.0, 3.0])
    assert list(rp.values) == [5.0, 3.0, 1.0] and list(rp.ranks) == [1, 2, 3]
    with pytest.raises(ValueError):
        an.rank_plot([0, 0, 0])
    with pytest.raises(ValueError):
        an.rank_plot([])


def test_classify_regime():
    assert an.classify_regime([1000] + [10] * 30, 10000).label == an.VIRAL
    flat = an.classify_regime([50] * 30, 10000)
    assert flat.label == an.SUB_VIRAL and flat.R == 1
    assert an.classify_regime([900] * 30, 10000).label == an.SUPER_VIRAL
    assert an.classify_regime([50] * 30, 10000, m_thresh=0.001).label == an.SUPER_VIRAL
    with pytest.raises(ValueError):
        an.classify_regime([5] * 19 + [0] * 10, 100)


def test_local_weight_histogram(make):
    tr = make(4, [0.0], [(0.5, 0, 0, 0.0, 1)], 2.0)
    counts, edges = an.local_weight_histogram(tr, 0, 4)
    assert list(counts) == [1, 0, 0, 0] and edges[0] == 0 and edges[-1] == 1
    net, sim = small_sim()
    for topic in range(sim.num_topics):
        counts, _ = an.local_weight_histogram(sim, topic, 7)
        assert counts.sum() == np.count_nonzero(sim.inst_topic == topic)
    with pytest.raises(ValueError):
        an.local_weight_histogram(sim, 0, 1)


def test_merge_events(make):
    net = build_ws(20, 2, 0.0, 0)
    static = make(20, [0.0], [(0.1, 3, 0), (0.2, 4, 0)], 4.0)
    assert an.merge_events(static, net, 0) == []
    bridged = make(20, [0.0], [(0.1, 3, 0), (0.2, 4, 0), (0.3, 6, 0), (0.4, 7, 0), (1.5, 5, 0)], 4.0)
    ev = an.merge_events(bridged, net, 0)
    assert len(ev) == 1
    assert ev[0].time == 2.0 and ev[0].size == 5 and len(ev[0].merged) == 2


def test_aligned_evolution_matches_brute_force():
    net, tr = small_sim(seed=5)
    rows = instances_of(tr)
    topics = list(range(min(5, tr.num_topics)))
    ev = an.aligned_evolution(tr, topics, 8.0, 0.5)
    for r, i in enumerate(topics):
        for j in range(ev.shape[1]):
            t = tr.arr_t[i] + 0.5 * j
            if t > tr.horizon:
                assert math.isnan(ev[r, j])
                continue
            truth = oracles.speaking(rows, net.n, t)
            assert ev[r, j] == sum(1 for x in truth.values() if x == i)


def test_topic_window_and_summary():
    net, tr = small_sim(seed=2, n=80, horizon=80.0)
    win = an.topic_window(tr, 10.0, 20.0)
    assert np.all((tr.arr_t[win] >= 10) & (tr.arr_t[win] <= 60))
    stats = an.all_topic_stats(tr, net)
    summary = an.run_summary(tr, stats, net.n, 10.0, 20.0)
    assert summary["topics"] <= win.size
    assert summary["label"] in (an.SUB_VIRAL, an.VIRAL, an.SUPER_VIRAL, "undetermined")


@given(seed=st.integers(0, 1000))
def test_component_sizes_sum_to_speakers(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    edges = random_graph(rng, n)
    S = set(np.flatnonzero(rng.random(n) < 0.6).tolist())
    assert sum(an.component_sizes(Graph(n, edges), S)) == len(S)
