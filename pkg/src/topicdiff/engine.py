"""Event-driven simulation of competing topics on a network.

Topics arrive on a global list as a Poisson stream. Every node acts at the
ticks of its own Poisson clock and, when it acts, speaks on one topic: either
one taken from the global list (an *adoption*) or one found in its
neighbors' local lists (a *copy*). Global weights decay as
``A*exp(-alpha*age)``, instance weights as ``B*exp(-beta*age)``, and the
topic is drawn with probability proportional to its total weight.

:func:`simulate` runs the compiled loop. :class:`DiffusionState`,
:func:`copy_weight`, :func:`choose_topic` and :func:`simulate_reference`
spell out the same rules in plain Python, one instance at a time; they are
slow and exist for checking the compiled loop on small cases.
"""

from __future__ import annotations

import bisect
import hashlib
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import _kernel
from .netgen import RNG_NAME, Network


class ResourceCapError(RuntimeError):
    """Live state outgrew the configured memory cap."""


@dataclass(frozen=True)
class SimConfig:
    lambda1: float
    lambda2: float
    A: float
    alpha: float
    B: float
    beta: float
    horizon: float
    prune_eps: float = 1e-12
    seed: int = 0
    preseed_topics: int = 0
    max_live: int = 50_000_000

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "A", "B"):
            val = getattr(self, name)
            if not val >= 0 or not math.isfinite(val):
                raise ValueError(f"{name} must be a non-negative finite number, got {val}")
        for name in ("alpha", "beta"):
            val = getattr(self, name)
            if not val > 0 or not math.isfinite(val):
                raise ValueError(f"{name} must be a positive finite number, got {val}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.prune_eps < 0:
            raise ValueError("prune_eps must be non-negative")
        if self.preseed_topics < 0:
            raise ValueError("preseed_topics must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GlobalTopic:
    topic_id: int
    birth_time: float


class Instance(NamedTuple):
    topic_id: int
    node: int
    create_time: float
    seq: int
    w_norm: float = 0.0
    adopted: bool = False


class Choice(NamedTuple):
    topic_id: int
    w_norm: float
    adopted: bool


@dataclass(frozen=True, eq=False)
class EventTrace:
    """Immutable output of one run.

    Instances are stored column-wise, already in event order. Arrival ``j``
    was processed after ``arr_before[j]`` instances had been created, which
    is enough to recover the global sequence number of every event.
    """

    config: SimConfig | None
    network: dict
    n: int
    arr_t: np.ndarray
    arr_before: np.ndarray
    inst_t: np.ndarray
    inst_node: np.ndarray
    inst_topic: np.ndarray
    inst_w: np.ndarray
    inst_adopt: np.ndarray
    horizon: float
    stats: dict = field(default_factory=dict)

    @property
    def num_topics(self) -> int:
        return int(self.arr_t.size)

    @property
    def num_instances(self) -> int:
        return int(self.inst_t.size)

    @cached_property
    def arr_seq(self) -> np.ndarray:
        return self.arr_before + np.arange(self.arr_t.size, dtype=np.int64)

    @cached_property
    def inst_seq(self) -> np.ndarray:
        idx = np.arange(self.inst_t.size, dtype=np.int64)
        return idx + np.searchsorted(self.arr_before, idx, side="right")

    @property
    def arrivals(self) -> list[GlobalTopic]:
        return [GlobalTopic(i, float(t)) for i, t in enumerate(self.arr_t)]

    def instances(self):
        seq = self.inst_seq
        for i in range(self.inst_t.size):
            yield Instance(int(self.inst_topic[i]), int(self.inst_node[i]), float(self.inst_t[i]),
                           int(seq[i]), float(self.inst_w[i]), bool(self.inst_adopt[i]))

    @cached_property
    def node_order(self) -> tuple[np.ndarray, np.ndarray]:
        """Instance indices grouped by node (stable in time) plus CSR offsets."""
        order = np.argsort(self.inst_node, kind="stable")
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.inst_node, minlength=self.n), out=offsets[1:])
        return order, offsets

    def checksum(self) -> str:
        h = hashlib.sha256()
        for arr in (self.arr_t, self.arr_before, self.inst_t, self.inst_node,
                    self.inst_topic, self.inst_w, self.inst_adopt):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def network_ref(net: Network) -> dict:
    return {"n": net.n, "k": net.k, "p_rewire": net.p_rewire, "seed": net.seed, "rng": net.rng}


# ---------------------------------------------------------------------------
# weights and choice, instance by instance


def adoption_weight(topic: GlobalTopic, t: float, cfg: SimConfig) -> float:
    """Weight of a global-list topic at time ``t`` (0 once below prune_eps)."""
    age = t - topic.birth_time
    if age < 0:
        raise ValueError(f"t={t} precedes the birth of topic {topic.topic_id}")
    w = cfg.A * math.exp(-cfg.alpha * age)
    return w if w >= cfg.prune_eps else 0.0


class DiffusionState:
    """Global list plus every node's local list, kept as individual instances."""

    def __init__(self, net: Network, cfg: SimConfig):
        self.net = net
        self.cfg = cfg
        self.topics: list[GlobalTopic] = []
        self.local: list[list[Instance]] = [[] for _ in range(net.n)]
        self.seq = 0

    def add_topic(self, t: float) -> GlobalTopic:
        topic = GlobalTopic(len(self.topics), t)
        self.topics.append(topic)
        self.seq += 1
        return topic

    def add_instance(self, node: int, topic_id: int, t: float, w_norm=0.0, adopted=False) -> Instance:
        inst = Instance(topic_id, node, t, self.seq, w_norm, adopted)
        self.local[node].append(inst)
        self.seq += 1
        return inst

    def instance_weight(self, inst: Instance, t: float) -> float:
        w = self.cfg.B * math.exp(-self.cfg.beta * (t - inst.create_time))
        return w if w >= self.cfg.prune_eps else 0.0


def copy_weight(node: int, topic_id: int, t: float, state: DiffusionState) -> float:
    """Summed live weight of ``topic_id`` instances held by the neighbors of ``node``."""
    total = 0.0
    for v in state.net.neighbors(node):
        for inst in state.local[v]:
            if inst.topic_id == topic_id:
                total += state.instance_weight(inst, t)
    return total


def topic_weights(node: int, t: float, state: DiffusionState) -> tuple[dict, dict]:
    """Adoption and copy weights of every topic with a positive weight for ``node``."""
    adopt = {}
    for topic in state.topics:
        w = adoption_weight(topic, t, state.cfg)
        if w > 0:
            adopt[topic.topic_id] = w
    copy: dict[int, float] = {}
    for v in state.net.neighbors(node):
        for inst in state.local[v]:
            w = state.instance_weight(inst, t)
            if w > 0:
                copy[inst.topic_id] = copy.get(inst.topic_id, 0.0) + w
    return adopt, copy


def choice_probabilities(node: int, t: float, state: DiffusionState) -> dict[int, float]:
    adopt, copy = topic_weights(node, t, state)
    c = sum(adopt.values()) + sum(copy.values())
    if c <= 0:
        return {}
    keys = sorted(set(adopt) | set(copy))
    return {i: (adopt.get(i, 0.0) + copy.get(i, 0.0)) / c for i in keys}


def choose_topic(node: int, t: float, state: DiffusionState, rng: np.random.Generator) -> Choice | None:
    """Draw the topic ``node`` speaks on at ``t``; ``None`` when every weight is zero.

    One uniform draw on ``[0, c)`` decides source and topic together. The
    global list fills ``[0, G)`` in arrival order; the rest is laid out
    neighbor by neighbor (ascending id), and within a neighbor topic by
    topic (ascending id), each segment as wide as that neighbor's live
    weight on the topic. Marginally topic ``i`` is drawn with probability
    ``(adoption_i + copy_i) / c``.
    """
    adopt = {}
    for topic in state.topics:
        w = adoption_weight(topic, t, state.cfg)
        if w > 0:
            adopt[topic.topic_id] = w
    segments = []
    copy: dict[int, float] = {}
    for v in state.net.neighbors(node):
        per_topic: dict[int, float] = {}
        for inst in state.local[v]:
            w = state.instance_weight(inst, t)
            if w > 0:
                per_topic[inst.topic_id] = per_topic.get(inst.topic_id, 0.0) + w
        for i in sorted(per_topic):
            segments.append((i, per_topic[i]))
            copy[i] = copy.get(i, 0.0) + per_topic[i]
    g_total = sum(adopt.values())
    c = g_total + sum(w for _, w in segments)
    if c <= 0:
        return None
    r = rng.random() * c
    if r < g_total:
        chosen = max(adopt)
        for i in sorted(adopt):
            if r < adopt[i]:
                chosen = i
                break
            r -= adopt[i]
        return Choice(chosen, copy.get(chosen, 0.0) / c, True)
    r -= g_total
    chosen = segments[-1][0]
    for i, w in segments:
        if r < w:
            chosen = i
            break
        r -= w
    return Choice(chosen, copy[chosen] / c, False)


def _gap(rng: np.random.Generator, rate: float) -> float:
    """Exponential waiting time; a zero rate never fires and draws nothing."""
    return rng.exponential(1.0 / rate) if rate > 0 else math.inf


def _streams(seed: int) -> tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(s)) for s in children)


def simulate_reference(net: Network, cfg: SimConfig) -> EventTrace:
    """Plain-Python twin of :func:`simulate` drawing from the same random streams."""
    import heapq

    rng_arrival, rng_activity, rng_choice = _streams(cfg.seed)
    state = DiffusionState(net, cfg)
    arr_t, arr_before = [], []
    rows = []
    heap = [(_gap(rng_activity, cfg.lambda2), v) for v in range(net.n)]
    heapq.heapify(heap)
    for _ in range(cfg.preseed_topics):
        state.add_topic(0.0)
        arr_t.append(0.0)
        arr_before.append(0)
    next_arrival = _gap(rng_arrival, cfg.lambda1)
    while True:
        t_act, u = heap[0]
        if next_arrival <= t_act:
            if next_arrival > cfg.horizon:
                break
            state.add_topic(next_arrival)
            arr_t.append(next_arrival)
            arr_before.append(len(rows))
            next_arrival += _gap(rng_arrival, cfg.lambda1)
            continue
        if t_act > cfg.horizon:
            break
        pick = choose_topic(u, t_act, state, rng_choice)
        if pick is not None:
            state.add_instance(u, pick.topic_id, t_act, pick.w_norm, pick.adopted)
            rows.append((t_act, u, pick.topic_id, pick.w_norm, pick.adopted))
        heapq.heapreplace(heap, (t_act + _gap(rng_activity, cfg.lambda2), u))
    cols = list(zip(*rows)) if rows else [[], [], [], [], []]
    return EventTrace(
        config=cfg, network=network_ref(net), n=net.n,
        arr_t=np.array(arr_t, dtype=np.float64), arr_before=np.array(arr_before, dtype=np.int64),
        inst_t=np.array(cols[0], dtype=np.float64), inst_node=np.array(cols[1], dtype=np.int32),
        inst_topic=np.array(cols[2], dtype=np.int32), inst_w=np.array(cols[3], dtype=np.float64),
        inst_adopt=np.array(cols[4], dtype=np.int8), horizon=cfg.horizon,
    )


# ---------------------------------------------------------------------------
# compiled run


def _initial_slots(cfg: SimConfig) -> int:
    if cfg.prune_eps > 0:
        life = math.log(max(cfg.B / cfg.prune_eps, 1.0)) / cfg.beta
    else:
        life = cfg.horizon
    mean = cfg.lambda2 * min(life, cfg.horizon)
    return int(min(mean + 6 * math.sqrt(mean) + 8, 1 << 16))


def simulate(net: Network, cfg: SimConfig, n_cbins: int = 100) -> EventTrace:
    """Run the diffusion on ``net`` up to ``cfg.horizon``.

    Deterministic for a fixed ``(net, cfg)``: arrivals, activity clocks and
    topic choices each use their own PCG64 stream spawned from ``cfg.seed``.
    Buffers are sized from the expected event counts and regrown (by
    re-running from scratch) in the rare case the guess was too small.

    Raises:
        ResourceCapError: when the live local-list entries exceed ``cfg.max_live``.
    """
    n = net.n
    exp_inst = n * cfg.lambda2 * cfg.horizon
    exp_top = cfg.lambda1 * cfg.horizon
    cap_inst = int(exp_inst + 8 * math.sqrt(exp_inst) + 1024)
    cap_top = int(exp_top + 8 * math.sqrt(exp_top) + 64) + cfg.preseed_topics
    slots = _initial_slots(cfg)
    indptr = net.indptr.astype(np.int64)
    indices = net.indices.astype(np.int32)

    while True:
        if n * slots > cfg.max_live:
            raise ResourceCapError(f"local lists need {n}x{slots} slots, over the cap of {cfg.max_live}")
        streams = _streams(cfg.seed)
        inst_t = np.empty(cap_inst, dtype=np.float64)
        inst_node = np.empty(cap_inst, dtype=np.int32)
        inst_topic = np.empty(cap_inst, dtype=np.int32)
        inst_w = np.empty(cap_inst, dtype=np.float64)
        inst_adopt = np.empty(cap_inst, dtype=np.int8)
        arr_t = np.empty(cap_top, dtype=np.float64)
        arr_before = np.empty(cap_top, dtype=np.int64)
        status, n_inst, n_top, n_noaction, peak_live, c_sum, c_cnt = _kernel.run(
            indptr, indices, cfg.lambda1, cfg.lambda2, cfg.A, cfg.alpha, cfg.B, cfg.beta,
            cfg.horizon, cfg.prune_eps, *streams, cfg.preseed_topics, slots, cfg.max_live,
            n_cbins, inst_t, inst_node, inst_topic, inst_w, inst_adopt, arr_t, arr_before)
        if status == _kernel.OK:
            break
        if status == _kernel.OVERFLOW_LIVE:
            raise ResourceCapError(f"live instances exceeded max_live={cfg.max_live}")
        if status == _kernel.OVERFLOW_INSTANCES:
            cap_inst *= 2
        elif status == _kernel.OVERFLOW_TOPICS:
            cap_top *= 2
        elif status == _kernel.OVERFLOW_SLOTS:
            slots *= 2

    with np.errstate(invalid="ignore", divide="ignore"):
        c_mean = np.where(c_cnt > 0, c_sum / np.maximum(c_cnt, 1), np.nan)
    stats = {
        "noaction": int(n_noaction),
        "peak_live": int(peak_live),
        "c_bin_mean": c_mean,
        "c_bin_count": c_cnt,
        "rng": RNG_NAME,
    }
    return EventTrace(
        config=cfg, network=network_ref(net), n=n,
        arr_t=arr_t[:n_top], arr_before=arr_before[:n_top],
        inst_t=inst_t[:n_inst], inst_node=inst_node[:n_inst],
        inst_topic=inst_topic[:n_inst], inst_w=inst_w[:n_inst],
        inst_adopt=inst_adopt[:n_inst], horizon=cfg.horizon, stats=stats,
    )


def speaking_topic(node: int, t: float, trace: EventTrace) -> int | None:
    """Topic of ``node``'s latest instance created at or before ``t``."""
    order, offsets = trace.node_order
    idx = order[offsets[node]:offsets[node + 1]]
    if idx.size == 0:
        return None
    pos = bisect.bisect_right(trace.inst_t[idx].tolist(), t) - 1
    if pos < 0:
        return None
    return int(trace.inst_topic[idx[pos]])
