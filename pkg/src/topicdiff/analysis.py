"""Observables computed from an :class:`~topicdiff.engine.EventTrace`.

A node *speaks* on topic ``i`` at time ``t`` when its latest instance created
at or before ``t`` is of topic ``i``. Every time series is sampled on the grid
``0, dt, 2*dt, ...`` up to the first point at or past the horizon.

Graph arguments only need ``n`` and ``undirected_pairs()``, so both
:class:`~topicdiff.netgen.Network` and
:class:`~topicdiff.ingest.TopicSubgraph` work.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .engine import EventTrace
from .netgen import Network, lattice_view

log = logging.getLogger(__name__)

SUB_VIRAL = "sub_viral"
VIRAL = "viral"
SUPER_VIRAL = "super_viral"


@dataclass
class TopicTimeSeries:
    topic_id: int
    dt: float
    grid: np.ndarray
    speakers: np.ndarray
    largest_cluster: np.ndarray | None = None
    second_cluster: np.ndarray | None = None
    cluster_count: np.ndarray | None = None
    cumulative_largest: np.ndarray | None = None
    conductance: np.ndarray | None = None
    lattice_largest: np.ndarray | None = None
    lattice_second: np.ndarray | None = None
    lattice_count: np.ndarray | None = None

    def giant_ratio(self) -> np.ndarray:
        return _ratio(self.largest_cluster, self.second_cluster)

    def channels(self) -> dict[str, np.ndarray]:
        out = {}
        for name in ("speakers", "largest_cluster", "second_cluster", "cluster_count",
                     "cumulative_largest", "conductance", "lattice_largest", "lattice_second",
                     "lattice_count"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.largest_cluster is not None:
            out["giant_ratio"] = self.giant_ratio()
        return out


@dataclass(frozen=True)
class TopicStats:
    topic_id: int
    peak: int
    lifetime: float
    max_spread: int
    adopters: int
    adopter_degree_sum: int


@dataclass(frozen=True)
class Regime:
    label: str
    R: float
    M: float
    n_topics: int


@dataclass(frozen=True)
class MergeEvent:
    time: float
    merged: tuple[int, ...]
    size: int


@dataclass
class RankPlot:
    ranks: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float = field(default=0.0)


# ---------------------------------------------------------------------------
# sampling


def sample_grid(horizon: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    steps = int(math.ceil(horizon / dt - 1e-9))
    return np.arange(steps + 1, dtype=np.float64) * dt


def iter_speaking(trace: EventTrace, grid: np.ndarray):
    """Yield ``(j, speak)`` where ``speak[v]`` is v's topic at ``grid[j]`` (-1 if silent).

    The same array is updated in place and yielded each time.
    """
    speak = np.full(trace.n, -1, dtype=np.int32)
    cuts = np.searchsorted(trace.inst_t, grid, side="right")
    prev = 0
    for j, cut in enumerate(cuts):
        if cut > prev:
            nodes = trace.inst_node[prev:cut][::-1]
            topics = trace.inst_topic[prev:cut][::-1]
            uniq, first = np.unique(nodes, return_index=True)
            speak[uniq] = topics[first]
            prev = cut
        yield j, speak


def speaking_set(trace: EventTrace, topic_id: int, t: float) -> set[int]:
    cut = np.searchsorted(trace.inst_t, t, side="right")
    nodes = trace.inst_node[:cut][::-1]
    topics = trace.inst_topic[:cut][::-1]
    uniq, first = np.unique(nodes, return_index=True)
    return set(uniq[topics[first] == topic_id].tolist())


# ---------------------------------------------------------------------------
# components on a node subset


def _pairs(graph) -> tuple[np.ndarray, np.ndarray]:
    u, v = graph.undirected_pairs()
    return np.asarray(u, dtype=np.int64), np.asarray(v, dtype=np.int64)


def _labels(n: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    adj = sparse.coo_matrix((np.ones(u.size, dtype=np.int8), (u, v)), shape=(n, n)).tocsr()
    return connected_components(adj, directed=False)[1]


def _mask(n: int, S) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    idx = np.fromiter(S, dtype=np.int64) if not isinstance(S, np.ndarray) else S
    if idx.dtype == bool:
        return idx.copy()
    mask[idx] = True
    return mask


def component_sizes(graph, S, pairs=None) -> list[int]:
    mask = _mask(graph.n, S)
    if not mask.any():
        return []
    u, v = pairs if pairs is not None else _pairs(graph)
    keep = mask[u] & mask[v]
    labels = _labels(graph.n, u[keep], v[keep])
    sizes = np.bincount(labels[mask])
    return sorted(sizes[sizes > 0].tolist(), reverse=True)


def clusters(net, S) -> list[int]:
    """Component sizes, descending, of the subgraph induced by ``S`` on all edges."""
    return component_sizes(net, S)


def lattice_clusters(net: Network, S) -> list[int]:
    """Component sizes of the subgraph induced by ``S`` on lattice edges only."""
    return component_sizes(lattice_view(net), S)


def giant_ratio(sizes) -> float:
    """Largest over second-largest size; ``largest/1`` for one cluster, 0 for none."""
    sizes = sorted(sizes, reverse=True)
    if not sizes:
        return 0.0
    if len(sizes) == 1:
        return float(sizes[0])
    return sizes[0] / sizes[1]


def _ratio(largest, second) -> np.ndarray:
    largest = np.asarray(largest, dtype=np.float64)
    second = np.asarray(second, dtype=np.float64)
    return largest / np.maximum(second, 1.0)


def conductance(graph, S) -> float:
    """cut(S)/vol(S), counting each undirected edge as two arcs."""
    mask = _mask(graph.n, S)
    if not mask.any():
        raise ValueError("conductance of an empty set is undefined")
    u, v = _pairs(graph)
    vol = int(np.count_nonzero(mask[u])) + int(np.count_nonzero(mask[v]))
    if vol == 0:
        log.warning("conductance: every node of S is isolated, returning 0")
        return 0.0
    cut = int(np.count_nonzero(mask[u] != mask[v]))
    return cut / vol


def _neighbor_sets(graph) -> list[set[int]]:
    u, v = _pairs(graph)
    nbrs: list[set[int]] = [set() for _ in range(graph.n)]
    for a, b in zip(u.tolist(), v.tolist()):
        if a != b:
            nbrs[a].add(b)
            nbrs[b].add(a)
    return nbrs


def proximity(graph, u: int, v: int, nbrs=None) -> float:
    """Jaccard similarity of the neighbor sets of ``u`` and ``v``."""
    if u == v:
        raise ValueError("proximity needs two distinct nodes")
    nbrs = nbrs if nbrs is not None else _neighbor_sets(graph)
    a, b = nbrs[u], nbrs[v]
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def proximity_clusters(graph, S, T_p: float, nbrs=None) -> list[int]:
    """Components of ``S`` joined by graph edges whose endpoints have proximity > ``T_p``."""
    if not 0.0 <= T_p < 1.0:
        raise ValueError(f"T_p must lie in [0, 1), got {T_p}")
    mask = _mask(graph.n, S)
    if not mask.any():
        return []
    nbrs = nbrs if nbrs is not None else _neighbor_sets(graph)
    u, v = _pairs(graph)
    keep = mask[u] & mask[v]
    su, sv = u[keep], v[keep]
    strong = np.array([proximity(graph, a, b, nbrs) > T_p for a, b in zip(su.tolist(), sv.tolist())],
                      dtype=bool)
    labels = _labels(graph.n, su[strong] if strong.size else su[:0], sv[strong] if strong.size else sv[:0])
    sizes = np.bincount(labels[mask])
    return sorted(sizes[sizes > 0].tolist(), reverse=True)


# ---------------------------------------------------------------------------
# per-topic time series


def _per_topic_components(speak, labels, n_topics):
    """Largest, second-largest, count and largest-label per topic for one sample."""
    on = speak >= 0
    lab = labels[on]
    top = speak[on]
    largest = np.zeros(n_topics, dtype=np.int64)
    second = np.zeros(n_topics, dtype=np.int64)
    count = np.zeros(n_topics, dtype=np.int64)
    big_label = np.full(n_topics, -1, dtype=np.int64)
    if lab.size == 0:
        return largest, second, count, big_label
    sizes = np.bincount(lab)
    comp, first = np.unique(lab, return_index=True)
    comp_topic = top[first]
    comp_size = sizes[comp]
    # nodes are visited in ascending order, so `first` points at each smallest member
    comp_min = np.flatnonzero(on)[first]
    order = np.lexsort((comp_min, -comp_size, comp_topic))
    comp_topic, comp_size, comp = comp_topic[order], comp_size[order], comp[order]
    starts = np.flatnonzero(np.r_[True, comp_topic[1:] != comp_topic[:-1]])
    counts = np.diff(np.r_[starts, comp_topic.size])
    tp = comp_topic[starts]
    largest[tp] = comp_size[starts]
    big_label[tp] = comp[starts]
    has2 = counts > 1
    second[tp[has2]] = comp_size[starts[has2] + 1]
    count[tp] = counts
    return largest, second, count, big_label


def topic_series(trace: EventTrace, net=None, dt: float = 1.0, topics=None,
                 lattice: bool = True) -> dict[int, TopicTimeSeries]:
    """Every per-sample channel for the requested topics in one sweep over the trace.

    Without ``net`` only the speaker counts are filled in.
    """
    grid = sample_grid(trace.horizon, dt)
    n_topics = max(trace.num_topics, int(trace.inst_topic.max()) + 1 if trace.num_instances else 0)
    wanted = np.arange(n_topics) if topics is None else np.asarray(sorted(set(topics)), dtype=np.int64)
    S = grid.size
    W = wanted.size
    speakers = np.zeros((W, S), dtype=np.int64)
    full = net is not None
    if full:
        u, v = _pairs(net)
        deg = np.bincount(np.r_[u, v], minlength=net.n).astype(np.float64)
        if lattice and isinstance(net, Network):
            lv = lattice_view(net)
            lu, lv_ = _pairs(lv)
        else:
            lu = lv_ = None
        largest = np.zeros((W, S), dtype=np.int64)
        second = np.zeros((W, S), dtype=np.int64)
        count = np.zeros((W, S), dtype=np.int64)
        cond = np.full((W, S), np.nan)
        cum = np.zeros((W, S), dtype=np.int64)
        lat_largest = np.zeros((W, S), dtype=np.int64)
        lat_second = np.zeros((W, S), dtype=np.int64)
        lat_count = np.zeros((W, S), dtype=np.int64)
        seen: dict[int, np.ndarray] = {}
        seen_count = np.zeros(W, dtype=np.int64)
    pos = np.full(n_topics, -1, dtype=np.int64)
    pos[wanted] = np.arange(W)

    for j, speak in iter_speaking(trace, grid):
        counts = np.bincount(speak[speak >= 0], minlength=n_topics)
        speakers[:, j] = counts[wanted]
        if not full:
            continue
        same = (speak[u] == speak[v]) & (speak[u] >= 0)
        labels = _labels(net.n, u[same], v[same])
        lg, sc, ct, big = _per_topic_components(speak, labels, n_topics)
        largest[:, j], second[:, j], count[:, j] = lg[wanted], sc[wanted], ct[wanted]
        vol = np.bincount(speak[speak >= 0], weights=deg[speak >= 0], minlength=n_topics)
        internal = np.bincount(speak[u][same], minlength=n_topics)
        with np.errstate(invalid="ignore", divide="ignore"):
            phi = np.where(vol > 0, (vol - 2 * internal) / np.where(vol > 0, vol, 1), np.nan)
        phi[(counts > 0) & (vol == 0)] = 0.0
        cond[:, j] = phi[wanted]
        # union of largest-cluster members per topic
        on = speak >= 0
        nodes = np.flatnonzero(on)
        in_big = big[speak[nodes]] == labels[nodes]
        nodes = nodes[in_big]
        owners = pos[speak[nodes]]
        sel = owners >= 0
        nodes, owners = nodes[sel], owners[sel]
        if nodes.size:
            order = np.argsort(owners, kind="stable")
            nodes, owners = nodes[order], owners[order]
            bounds = np.flatnonzero(np.r_[True, owners[1:] != owners[:-1], True])
            for a, b in zip(bounds[:-1], bounds[1:]):
                w = int(owners[a])
                arr = seen.get(w)
                if arr is None:
                    arr = seen[w] = np.zeros(net.n, dtype=bool)
                fresh = ~arr[nodes[a:b]]
                seen_count[w] += int(np.count_nonzero(fresh))
                arr[nodes[a:b]] = True
        cum[:, j] = seen_count
        if lu is not None:
            lsame = (speak[lu] == speak[lv_]) & (speak[lu] >= 0)
            llabels = _labels(net.n, lu[lsame], lv_[lsame])
            llg, lsc, lct, _ = _per_topic_components(speak, llabels, n_topics)
            lat_largest[:, j], lat_second[:, j], lat_count[:, j] = llg[wanted], lsc[wanted], lct[wanted]

    out = {}
    for w, tid in enumerate(wanted.tolist()):
        ts = TopicTimeSeries(tid, dt, grid, speakers[w])
        if full:
            ts.largest_cluster = largest[w]
            ts.second_cluster = second[w]
            ts.cluster_count = count[w]
            ts.conductance = cond[w]
            ts.cumulative_largest = cum[w]
            if lu is not None:
                ts.lattice_largest = lat_largest[w]
                ts.lattice_second = lat_second[w]
                ts.lattice_count = lat_count[w]
        out[tid] = ts
    return out


def evolution(trace: EventTrace, topic_id: int, dt: float = 1.0) -> TopicTimeSeries:
    """Speaker counts of one topic on the sampling grid."""
    return topic_series(trace, None, dt, [topic_id])[topic_id]


def cumulative_largest(trace: EventTrace, net, topic_id: int, dt: float = 1.0) -> np.ndarray:
    """Distinct nodes ever inside the topic's instantaneous largest cluster, per sample."""
    return topic_series(trace, net, dt, [topic_id], lattice=False)[topic_id].cumulative_largest


def all_speakers(trace: EventTrace, dt: float = 1.0) -> np.ndarray:
    """Speaker counts of every topic, shape ``(num_topics, samples)``."""
    series = topic_series(trace, None, dt)
    if not series:
        return np.zeros((0, sample_grid(trace.horizon, dt).size), dtype=np.int64)
    return np.vstack([series[i].speakers for i in sorted(series)])


def speaking_intervals(trace: EventTrace) -> np.ndarray:
    """End time of every instance's speaking interval (inf for a node's last)."""
    order, offsets = trace.node_order
    end = np.full(trace.num_instances, np.inf)
    if order.size > 1:
        same = trace.inst_node[order[1:]] == trace.inst_node[order[:-1]]
        end[order[:-1][same]] = trace.inst_t[order[1:][same]]
    return end


def aligned_evolution(trace: EventTrace, topics, window: float, dt: float = 1.0) -> np.ndarray:
    """Speaker counts sampled at ``birth + j*dt`` for ``j = 0..window/dt``.

    Returns an array of shape ``(len(topics), samples)``; samples past the
    horizon are NaN.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    offs = np.arange(int(math.floor(window / dt + 1e-9)) + 1) * dt
    topics = np.asarray(topics, dtype=np.int64)
    out = np.full((topics.size, offs.size), np.nan)
    end = speaking_intervals(trace)
    order = np.argsort(trace.inst_topic, kind="stable")
    bounds = np.searchsorted(trace.inst_topic[order], np.r_[topics, topics + 1])
    for row, tid in enumerate(topics):
        idx = order[bounds[row]:bounds[row + topics.size]]
        starts = np.sort(trace.inst_t[idx])
        stops = np.sort(end[idx])
        t = trace.arr_t[tid] + offs
        ok = t <= trace.horizon
        cnt = (np.searchsorted(starts, t[ok], side="right")
               - np.searchsorted(stops, t[ok], side="right"))
        out[row, ok] = cnt
    return out


def _first_speak(trace: EventTrace, topic_id: int):
    sel = trace.inst_topic == topic_id
    nodes = trace.inst_node[sel]
    times = trace.inst_t[sel]
    uniq, first = np.unique(nodes, return_index=True)
    return uniq, times[first]


def speaker_delta(trace: EventTrace, topic_id: int, dt: float = 1.0) -> np.ndarray:
    """New distinct speakers of the topic gained at each sample."""
    grid = sample_grid(trace.horizon, dt)
    _, first_t = _first_speak(trace, topic_id)
    cum = np.searchsorted(np.sort(first_t), grid, side="right")
    return np.diff(np.r_[0, cum])


def topic_stats(trace: EventTrace, topic_id: int, net=None, dt: float = 1.0,
                speakers: np.ndarray | None = None) -> TopicStats:
    if speakers is None:
        speakers = evolution(trace, topic_id, dt).speakers
    nz = np.flatnonzero(speakers)
    lifetime = float((nz[-1] - nz[0]) * dt) if nz.size else 0.0
    sel = trace.inst_topic == topic_id
    spread = int(np.unique(trace.inst_node[sel]).size)
    adopter_nodes = np.unique(trace.inst_node[sel & (trace.inst_adopt != 0)])
    deg_sum = 0
    if net is not None and adopter_nodes.size:
        u, v = _pairs(net)
        deg = np.bincount(np.r_[u, v], minlength=net.n)
        deg_sum = int(deg[adopter_nodes].sum())
    return TopicStats(topic_id, int(speakers.max()) if speakers.size else 0, lifetime, spread,
                      int(adopter_nodes.size), deg_sum)


def all_topic_stats(trace: EventTrace, net=None, dt: float = 1.0,
                    series: dict[int, TopicTimeSeries] | None = None) -> list[TopicStats]:
    if series is None:
        series = topic_series(trace, None, dt)
    if not series:
        return []
    n_topics = max(series) + 1
    spread = np.zeros(n_topics, dtype=np.int64)
    adopters = np.zeros(n_topics, dtype=np.int64)
    deg_sum = np.zeros(n_topics, dtype=np.int64)
    if trace.num_instances:
        pair = np.unique(trace.inst_topic.astype(np.int64) * trace.n + trace.inst_node)
        np.add.at(spread, pair // trace.n, 1)
        ad = trace.inst_adopt != 0
        apair = np.unique(trace.inst_topic[ad].astype(np.int64) * trace.n + trace.inst_node[ad])
        np.add.at(adopters, apair // trace.n, 1)
        if net is not None:
            u, v = _pairs(net)
            deg = np.bincount(np.r_[u, v], minlength=net.n)
            np.add.at(deg_sum, apair // trace.n, deg[apair % trace.n])
    out = []
    for tid in sorted(series):
        sp = series[tid].speakers
        nz = np.flatnonzero(sp)
        lifetime = float((nz[-1] - nz[0]) * series[tid].dt) if nz.size else 0.0
        out.append(TopicStats(tid, int(sp.max()) if sp.size else 0, lifetime, int(spread[tid]),
                              int(adopters[tid]), int(deg_sum[tid])))
    return out


# ---------------------------------------------------------------------------
# distributions and regime


def rank_plot(values) -> RankPlot:
    """Rank-ordered values (descending) and the least-squares slope of log value vs log rank."""
    vals = np.sort(np.asarray(values, dtype=np.float64))[::-1]
    if vals.size == 0:
        raise ValueError("rank_plot needs at least one value")
    if not np.any(vals > 0):
        raise ValueError("rank_plot needs at least one positive value")
    ranks = np.arange(1, vals.size + 1, dtype=np.float64)
    pos = vals > 0
    x, y = np.log(ranks[pos]), np.log(vals[pos])
    if x.size < 2:
        return RankPlot(ranks, vals, 0.0, float(y[0]) if y.size else 0.0)
    slope, intercept = np.polyfit(x, y, 1)
    return RankPlot(ranks, vals, float(slope), float(intercept))


def classify_regime(peaks, n: int, r_thresh: float = 10.0, m_thresh: float = 0.05) -> Regime:
    """Label a run from its per-topic peaks.

    ``R`` is max/median peak and ``M`` is median peak over ``n``. A high
    ``R`` with a small ``M`` is viral; a low ``R`` splits into sub-viral and
    super-viral on ``M``. A high ``R`` together with a large ``M`` is also
    reported as super-viral.
    """
    peaks = np.asarray(peaks, dtype=np.float64)
    peaks = peaks[peaks > 0]
    if peaks.size < 20:
        raise ValueError(f"need at least 20 topics with a nonzero peak, got {peaks.size}")
    med = float(np.median(peaks))
    R = float(peaks.max()) / med
    M = med / n
    if M > m_thresh:
        label = SUPER_VIRAL
    elif R >= r_thresh:
        label = VIRAL
    else:
        label = SUB_VIRAL
    return Regime(label, R, M, int(peaks.size))


def local_weight_histogram(trace: EventTrace, topic_id: int, bins: int = 10):
    """Histogram over [0, 1] of the normalized copy weight at each instance of the topic."""
    if bins < 2:
        raise ValueError("need at least two bins")
    w = trace.inst_w[trace.inst_topic == topic_id]
    counts, edges = np.histogram(np.clip(w, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    return counts, edges


def median_giant_ratio(ts: TopicTimeSeries) -> float:
    """Median of the largest/second ratio over the samples where the topic is alive."""
    alive = ts.speakers > 0
    if not alive.any():
        return 0.0
    return float(np.median(ts.giant_ratio()[alive]))


# ---------------------------------------------------------------------------
# lattice-cluster merging


def merge_events(trace: EventTrace, net: Network, topic_id: int, dt: float = 1.0) -> list[MergeEvent]:
    """Moments where two or more tracked lattice clusters become one.

    Clusters at consecutive samples are linked by member overlap: each old
    cluster maps to the new cluster holding most of its surviving members.
    A new cluster inherits the id of its largest-overlap predecessor, or gets
    a fresh id. Two or more predecessors landing on one cluster is a merge.
    """
    grid = sample_grid(trace.horizon, dt)
    lat = lattice_view(net)
    u, v = _pairs(lat)
    events: list[MergeEvent] = []
    prev_members: dict[int, np.ndarray] = {}
    next_id = 0
    for j, speak in iter_speaking(trace, grid):
        mask = speak == topic_id
        if not mask.any():
            prev_members = {}
            continue
        keep = mask[u] & mask[v]
        labels = _labels(net.n, u[keep], v[keep])
        nodes = np.flatnonzero(mask)
        lab = labels[nodes]
        # map each previous cluster to the current label it overlaps most
        votes: dict[int, list[tuple[int, int]]] = {}
        for cid, members in prev_members.items():
            here = members[mask[members]]
            if here.size == 0:
                continue
            tgt, cnt = np.unique(labels[here], return_counts=True)
            best = int(tgt[np.argmax(cnt)])
            votes.setdefault(best, []).append((int(cnt.max()), cid))
        current: dict[int, np.ndarray] = {}
        for lbl in np.unique(lab).tolist():
            members = nodes[lab == lbl]
            preds = votes.get(lbl, [])
            if preds:
                preds.sort(key=lambda p: (-p[0], p[1]))
                cid = preds[0][1]
                if len(preds) > 1:
                    events.append(MergeEvent(float(grid[j]), tuple(sorted(p[1] for p in preds)),
                                             int(members.size)))
            else:
                cid = next_id
                next_id += 1
            current[cid] = members
        prev_members = current
    return events


# ---------------------------------------------------------------------------
# run-level summary


def topic_window(trace: EventTrace, burn_in: float = 0.0, cooldown: float = 0.0) -> np.ndarray:
    """Ids of topics born in ``[burn_in, horizon - cooldown]``.

    Early topics spread over an empty network and late ones are cut off by
    the horizon, so both are usually left out of run-level statistics.
    """
    born = trace.arr_t
    return np.flatnonzero((born >= burn_in) & (born <= trace.horizon - cooldown))


def _slope(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if not np.any(values > 0):
        return float("nan")
    return rank_plot(values).slope


def run_summary(trace: EventTrace, stats: list[TopicStats], n: int, burn_in: float = 0.0,
                cooldown: float = 0.0, r_thresh: float = 10.0, m_thresh: float = 0.05) -> dict:
    """Regime label, rank slopes and adopter correlations over the topic window.

    The label is ``"undetermined"`` when fewer than 20 windowed topics have a
    nonzero peak.
    """
    from scipy.stats import spearmanr

    window = set(topic_window(trace, burn_in, cooldown).tolist())
    keep = [s for s in stats if s.topic_id in window and s.peak > 0]
    peaks = np.array([s.peak for s in keep], dtype=np.float64)
    out = {"topics": len(keep), "label": "undetermined", "R": float("nan"), "M": float("nan"),
           "top_peak": int(peaks.max()) if peaks.size else 0}
    if peaks.size >= 20:
        reg = classify_regime(peaks, n, r_thresh, m_thresh)
        out.update(label=reg.label, R=reg.R, M=reg.M)
    out["slope_peak"] = _slope(peaks)
    out["slope_lifetime"] = _slope([s.lifetime for s in keep])
    out["slope_spread"] = _slope([s.max_spread for s in keep])
    spread = np.array([s.max_spread for s in keep])
    for name in ("adopters", "adopter_degree_sum"):
        other = np.array([getattr(s, name) for s in keep])
        if len(keep) >= 3 and np.ptp(spread) > 0 and np.ptp(other) > 0:
            res = spearmanr(spread, other)
            rho, pval = float(res.statistic), float(res.pvalue)
        else:
            rho = pval = float("nan")
        out[f"rho_{name}"] = rho
        out[f"p_{name}"] = pval
    return out
