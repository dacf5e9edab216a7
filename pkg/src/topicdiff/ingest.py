"""Load real event logs and follower graphs and build per-topic subgraphs.

Events are CSV rows ``user,unix_time,topic``; follower edges are CSV rows
``follower,followee``. Either file may be gzip, bz2 or xz compressed, which
is detected from the extension. User ids and topic labels are interned to
dense integers in order of first appearance (events first, then edges).
"""

from __future__ import annotations

import bz2
import csv
import gzip
import io
import logging
import lzma
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

_OPENERS = {".gz": gzip.open, ".bz2": bz2.open, ".xz": lzma.open}


class IngestError(ValueError):
    """Input could be read but is too malformed to use."""


def _open_text(path) -> io.TextIOBase:
    path = Path(path)
    opener = _OPENERS.get(path.suffix.lower())
    if opener is None:
        return open(path, newline="", encoding="utf-8")
    return opener(path, "rt", newline="", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class ExternalTrace:
    """Interned events sorted by time, plus directed follower edges.

    ``follow_src[i] -> follow_dst[i]`` records follower ``->`` followee and is
    read as the direction of influence.
    """

    users: list[str]
    topics: list[str]
    ev_user: np.ndarray
    ev_time: np.ndarray
    ev_topic: np.ndarray
    follow_src: np.ndarray
    follow_dst: np.ndarray
    skipped_events: int = 0
    skipped_edges: int = 0
    _topic_index: dict = field(default_factory=dict, repr=False)

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_events(self) -> int:
        return int(self.ev_user.size)

    def topic_id(self, label: str) -> int:
        try:
            return self._topic_index[label]
        except KeyError:
            raise KeyError(f"unknown topic {label!r}") from None

    @property
    def n(self) -> int:
        return self.num_users

    def undirected_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Follower graph with direction dropped, each pair once."""
        return _undirected(self.follow_src, self.follow_dst)


def _undirected(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    keep = lo != hi
    if not keep.any():
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    pairs = np.unique(np.stack([lo[keep], hi[keep]], axis=1).astype(np.int64), axis=0)
    return pairs[:, 0], pairs[:, 1]


class _Interner(dict):
    def __init__(self):
        super().__init__()
        self.items_ = []

    def get_id(self, key: str) -> int:
        idx = self.get(key)
        if idx is None:
            idx = self[key] = len(self.items_)
            self.items_.append(key)
        return idx


def _check_rate(bad: int, total: int, cap: float, what: str) -> None:
    if bad:
        log.warning("skipped %d malformed %s line(s) of %d", bad, what, total)
    if total and bad / total > cap:
        raise IngestError(f"{bad} of {total} {what} lines malformed, above the {cap:.1%} cap")


def _parse_time(text: str) -> float:
    t = float(text)
    if not math.isfinite(t):
        raise ValueError("non-finite time")
    return t


def load(events_path, edges_path=None, max_error_rate: float = 0.05) -> ExternalTrace:
    """Read and intern an event log and (optionally) a follower edge list.

    Malformed lines are skipped and counted. A leading header row
    (``user,unix_time,topic`` or ``follower,followee``) is recognized and
    not counted.

    Raises:
        OSError: a file cannot be read.
        IngestError: the malformed fraction of a file exceeds ``max_error_rate``.
    """
    users = _Interner()
    topics = _Interner()
    ev_user, ev_time, ev_topic = [], [], []
    bad = total = 0
    with _open_text(events_path) as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 0 and [c.strip().lower() for c in row] == ["user", "unix_time", "topic"]:
                continue
            total += 1
            try:
                user, t, topic = row
                user, topic = user.strip(), topic.strip()
                if not user or not topic:
                    raise ValueError("empty field")
                tv = _parse_time(t)
            except ValueError:
                bad += 1
                continue
            ev_user.append(users.get_id(user))
            ev_time.append(tv)
            ev_topic.append(topics.get_id(topic))
    _check_rate(bad, total, max_error_rate, "event")
    skipped_events = bad

    src, dst = [], []
    bad = total = 0
    if edges_path is not None:
        with _open_text(edges_path) as fh:
            for lineno, row in enumerate(csv.reader(fh)):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if lineno == 0 and [c.strip().lower() for c in row] == ["follower", "followee"]:
                    continue
                total += 1
                if len(row) != 2 or not row[0].strip() or not row[1].strip():
                    bad += 1
                    continue
                src.append(users.get_id(row[0].strip()))
                dst.append(users.get_id(row[1].strip()))
        _check_rate(bad, total, max_error_rate, "edge")

    time = np.asarray(ev_time, dtype=np.float64)
    order = np.argsort(time, kind="stable")
    return ExternalTrace(
        users=users.items_, topics=topics.items_,
        ev_user=np.asarray(ev_user, dtype=np.int64)[order], ev_time=time[order],
        ev_topic=np.asarray(ev_topic, dtype=np.int64)[order],
        follow_src=np.asarray(src, dtype=np.int64), follow_dst=np.asarray(dst, dtype=np.int64),
        skipped_events=skipped_events, skipped_edges=bad, _topic_index=dict(topics),
    )


@dataclass(frozen=True, eq=False)
class TopicSubgraph:
    """Speakers of one topic and the influence edges among them.

    Nodes are re-indexed ``0..n-1`` in ascending interned user id, so the
    analysis functions can take this object as a graph; ``nodes[i]`` maps
    back to the interned user id.
    """

    topic: str
    nodes: np.ndarray
    first_time: np.ndarray
    last_time: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    tied_pairs: int
    rule: str = "first"

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def undirected_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return _undirected(self.src, self.dst)

    def local(self, users) -> np.ndarray:
        """Local indices of interned user ids (all must be speakers)."""
        users = np.asarray(users, dtype=np.int64)
        idx = np.searchsorted(self.nodes, users)
        if users.size and (np.any(idx >= self.nodes.size) or np.any(self.nodes[np.minimum(idx, self.nodes.size - 1)] != users)):
            raise KeyError("user did not speak on this topic")
        return idx

    def edge_set(self) -> set[tuple[int, int]]:
        """Edges as pairs of interned user ids."""
        return set(zip(self.nodes[self.src].tolist(), self.nodes[self.dst].tolist()))


def topic_subgraph(ext: ExternalTrace, topic: str, rule: str = "first") -> TopicSubgraph:
    """Influence subgraph of one topic.

    With ``rule="first"`` an edge ``u -> v`` is kept when ``(u, v)`` is a
    follower edge and v's first event on the topic is strictly later than
    u's. ``rule="any"`` keeps it when some event of v is later than some
    event of u.
    """
    if rule not in ("first", "any"):
        raise ValueError(f"rule must be 'first' or 'any', got {rule!r}")
    tid = ext.topic_id(topic)
    sel = ext.ev_topic == tid
    users = ext.ev_user[sel]
    times = ext.ev_time[sel]
    nodes = np.unique(users)
    first = np.full(ext.num_users, np.inf)
    last = np.full(ext.num_users, -np.inf)
    np.minimum.at(first, users, times)
    np.maximum.at(last, users, times)

    local = np.full(ext.num_users, -1, dtype=np.int64)
    local[nodes] = np.arange(nodes.size)
    u, v = ext.follow_src, ext.follow_dst
    both = (local[u] >= 0) & (local[v] >= 0) & (u != v) if u.size else np.zeros(0, dtype=bool)
    u, v = u[both], v[both]
    if u.size:
        pairs = np.unique(np.stack([u, v], axis=1), axis=0)
        u, v = pairs[:, 0], pairs[:, 1]
    tied = int(np.count_nonzero(first[u] == first[v]))
    if rule == "first":
        keep = first[v] > first[u]
    else:
        keep = last[v] > first[u]
    return TopicSubgraph(
        topic=topic, nodes=nodes, first_time=first[nodes], last_time=last[nodes],
        src=local[u[keep]], dst=local[v[keep]], tied_pairs=tied, rule=rule,
    )


def strongly_connected_components(n: int, src: np.ndarray, dst: np.ndarray) -> list[list[int]]:
    """Tarjan's algorithm, iterative so deep graphs do not hit the recursion limit."""
    order = np.argsort(src, kind="stable")
    heads = np.asarray(dst)[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(np.asarray(src, dtype=np.int64), minlength=n), out=indptr[1:])
    heads = heads.tolist()
    indptr = indptr.tolist()

    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, indptr[root])]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            node, pos = work[-1]
            if pos < indptr[node + 1]:
                work[-1] = (node, pos + 1)
                nxt = heads[pos]
                if index[nxt] < 0:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack[nxt] = True
                    work.append((nxt, indptr[nxt]))
                elif on_stack[nxt]:
                    low[node] = min(low[node], index[nxt])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == node:
                        break
                comps.append(sorted(comp))
    return comps


def largest_scc(g: TopicSubgraph) -> set[int]:
    """Largest strongly connected component as interned user ids.

    Ties go to the component with the smallest member id. Empty graphs give
    an empty set.
    """
    if g.n == 0:
        return set()
    comps = strongly_connected_components(g.n, g.src, g.dst)
    best = min(comps, key=lambda c: (-len(c), c[0]))
    return set(g.nodes[best].tolist())


def new_speakers(g: TopicSubgraph, bin_width: float, start: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Users speaking on the topic for the first time, per time bin.

    Returns ``(bin_starts, counts)``; counts sum to the number of speakers.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    if g.n == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    t0 = float(g.first_time.min()) if start is None else float(start)
    idx = np.floor((g.first_time - t0) / bin_width).astype(np.int64)
    if np.any(idx < 0):
        raise ValueError("start is after the first event")
    counts = np.bincount(idx)
    return t0 + bin_width * np.arange(counts.size), counts
