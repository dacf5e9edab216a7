from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from topicdiff.engine import EventTrace

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# criterion number -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def make_trace(n, arrivals, instances, horizon):
    """EventTrace from ``arrivals`` (birth times) and ``(t, node, topic[, w, adopt])`` rows.

    Arrivals are placed before any instance with the same or a later time.
    """
    arr_t = np.asarray(arrivals, dtype=np.float64)
    rows = sorted(instances, key=lambda r: r[0])
    inst_t = np.array([r[0] for r in rows], dtype=np.float64)
    return EventTrace(
        config=None, network={}, n=n,
        arr_t=arr_t,
        arr_before=np.searchsorted(inst_t, arr_t, side="left").astype(np.int64),
        inst_t=inst_t,
        inst_node=np.array([r[1] for r in rows], dtype=np.int32),
        inst_topic=np.array([r[2] for r in rows], dtype=np.int32),
        inst_w=np.array([r[3] if len(r) > 3 else 0.0 for r in rows], dtype=np.float64),
        inst_adopt=np.array([r[4] if len(r) > 4 else 1 for r in rows], dtype=np.int8),
        horizon=float(horizon),
    )


class Graph:
    """Minimal graph object: ``n`` plus an undirected edge list."""

    def __init__(self, n, edges):
        self.n = n
        self.edges = [(min(a, b), max(a, b)) for a, b in edges if a != b]

    def undirected_pairs(self):
        if not self.edges:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        e = np.array(sorted(set(self.edges)), dtype=np.int64)
        return e[:, 0], e[:, 1]


@pytest.fixture
def make():
    return make_trace


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
