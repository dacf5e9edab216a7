"""Watts-Strogatz ring graphs that remember which edges were rewired.

Nodes are the integers ``0..n-1`` placed on a ring. Every edge carries a tag,
``LATTICE`` for an original ring edge that survived rewiring and ``REWIRED``
for an edge produced by moving an endpoint to a random node.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

LATTICE = 0
REWIRED = 1

RNG_NAME = "pcg64"


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable undirected graph with per-edge lattice/rewired provenance.

    ``src``/``dst``/``tag`` are parallel arrays with ``src < dst`` for every
    edge. Adjacency is exposed in CSR form (``indptr``, ``indices``) and is
    built lazily.
    """

    n: int
    k: int
    p_rewire: float
    seed: int
    src: np.ndarray
    dst: np.ndarray
    tag: np.ndarray
    rng: str = RNG_NAME

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    @property
    def num_rewired(self) -> int:
        return int(np.count_nonzero(self.tag == REWIRED))

    def undirected_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return self.src, self.dst

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        return csr_adjacency(self.n, self.src, self.dst)

    @property
    def indptr(self) -> np.ndarray:
        return self._csr[0]

    @property
    def indices(self) -> np.ndarray:
        return self._csr[1]

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def header(self) -> str:
        return f"# ws n={self.n} k={self.k} p={self.p_rewire!r} seed={self.seed} rng={self.rng}"

    def to_edgelist(self) -> str:
        """Render as edge-list text: header line, then ``u v tag`` per edge."""
        buf = io.StringIO()
        buf.write(self.header() + "\n")
        buf.write(self.edge_body())
        return buf.getvalue()

    def edge_body(self) -> str:
        tags = np.where(self.tag == LATTICE, "L", "R")
        return "".join(f"{u} {v} {t}\n" for u, v, t in zip(self.src.tolist(), self.dst.tolist(), tags))

    def checksum(self) -> str:
        return hashlib.sha256(self.edge_body().encode()).hexdigest()


def csr_adjacency(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric CSR adjacency with neighbor lists sorted ascending."""
    heads = np.concatenate([src, dst]).astype(np.int64)
    tails = np.concatenate([dst, src]).astype(np.int64)
    order = np.lexsort((tails, heads))
    heads, tails = heads[order], tails[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(heads, minlength=n), out=indptr[1:])
    return indptr, tails.astype(np.int32)


def ring_distance(u, v, n):
    d = np.abs(np.asarray(u) - np.asarray(v))
    return np.minimum(d, n - d)


def _validate(n: int, k: int, p_rewire: float) -> None:
    if k < 2 or k % 2:
        raise ValueError(f"k must be an even integer >= 2, got {k}")
    if k >= n:
        raise ValueError(f"k must be smaller than n (k={k}, n={n})")
    if not 0.0 <= p_rewire <= 1.0:
        raise ValueError(f"rewiring probability must lie in [0, 1], got {p_rewire}")


def build_ws(n: int, k: int, p_rewire: float, seed: int) -> Network:
    """Build a Watts-Strogatz graph.

    Edges ``(u, u+j mod n)`` for ``j = 1..k/2`` are visited in ascending
    ``(u, j)`` order. Each is rewired with probability ``p_rewire`` to
    ``(u, w)``, ``w`` uniform over nodes that are neither ``u`` nor already
    adjacent to ``u``. If no such ``w`` exists the edge is left alone.

    Raises:
        ValueError: for odd ``k``, ``k >= n`` or a probability outside [0, 1].
    """
    _validate(n, k, p_rewire)
    half = k // 2
    rng = np.random.default_rng(seed)

    if p_rewire == 0.0:
        u = np.repeat(np.arange(n, dtype=np.int64), half)
        v = (u + np.tile(np.arange(1, half + 1), n)) % n
        return _finish(n, k, p_rewire, seed, u, v, np.zeros(u.size, dtype=np.int8))

    adj: list[set[int]] = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, half + 1):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)

    # one coin per lattice edge, drawn up front in (u, j) order
    coins = rng.random(n * half) < p_rewire
    edges: list[tuple[int, int, int]] = []
    idx = 0
    for u in range(n):
        nbrs = adj[u]
        for j in range(1, half + 1):
            v = (u + j) % n
            flip = coins[idx]
            idx += 1
            if not flip:
                edges.append((u, v, LATTICE))
                continue
            w = _draw_target(u, nbrs, n, rng)
            if w is None:
                edges.append((u, v, LATTICE))
                continue
            nbrs.discard(v)
            adj[v].discard(u)
            nbrs.add(w)
            adj[w].add(u)
            edges.append((u, w, REWIRED))

    arr = np.array(edges, dtype=np.int64).reshape(-1, 3)
    return _finish(n, k, p_rewire, seed, arr[:, 0], arr[:, 1], arr[:, 2].astype(np.int8))


def _draw_target(u: int, nbrs: set[int], n: int, rng: np.random.Generator) -> int | None:
    free = n - 1 - len(nbrs)
    if free <= 0:
        return None
    if free * 4 >= n:
        while True:
            w = int(rng.integers(n))
            if w != u and w not in nbrs:
                return w
    candidates = [w for w in range(n) if w != u and w not in nbrs]
    return candidates[int(rng.integers(len(candidates)))]


def _finish(n, k, p_rewire, seed, u, v, tag) -> Network:
    lo = np.minimum(u, v).astype(np.int32)
    hi = np.maximum(u, v).astype(np.int32)
    order = np.lexsort((hi, lo))
    return Network(n=n, k=k, p_rewire=float(p_rewire), seed=int(seed),
                   src=lo[order], dst=hi[order], tag=np.asarray(tag, dtype=np.int8)[order])


def lattice_view(net: Network) -> Network:
    """Same nodes, lattice-tagged edges only."""
    keep = net.tag == LATTICE
    return Network(n=net.n, k=net.k, p_rewire=net.p_rewire, seed=net.seed,
                   src=net.src[keep], dst=net.dst[keep], tag=net.tag[keep], rng=net.rng)


def parse_edgelist(text: str) -> Network:
    """Inverse of :meth:`Network.to_edgelist`. Extra ``#`` lines are ignored."""
    meta: dict[str, str] = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("# ws"):
            for part in line[4:].split():
                key, _, val = part.partition("=")
                meta[key] = val
            continue
        if line.startswith("#"):
            continue
        u, v, t = line.split()
        if t not in ("L", "R"):
            raise ValueError(f"unknown edge tag {t!r}")
        rows.append((int(u), int(v), LATTICE if t == "L" else REWIRED))
    if "n" not in meta:
        raise ValueError("missing '# ws' header line")
    arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
    net = _finish(int(meta["n"]), int(meta["k"]), float(meta["p"]), int(meta["seed"]),
                  arr[:, 0], arr[:, 1], arr[:, 2])
    if meta.get("rng", RNG_NAME) != RNG_NAME:
        object.__setattr__(net, "rng", meta["rng"])
    return net


def read_edgelist(path) -> Network:
    return parse_edgelist(Path(path).read_text())
