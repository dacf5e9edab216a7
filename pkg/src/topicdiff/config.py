"""Run configuration as flat ``block.key=value`` text.

Every key has a typed default. A config file lists overrides one per line
(``#`` starts a comment); the canonical form written into output headers
lists every key, sorted, so equal configs render to identical text.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from .engine import SimConfig


@dataclass
class NetworkBlock:
    n: int = 1000
    k: int = 10
    p_rewire: float = 0.1
    seed: int = 0


@dataclass
class DynamicsBlock:
    lambda1: float = 1.0
    lambda2: float = 1.0
    A: float = 1.0
    alpha: float = 0.1
    B: float = 600.0
    beta: float = 2.0
    horizon: float = 1000.0
    prune_eps: float = 1e-12
    seed: int = 0
    preseed_topics: int = 0
    max_live: int = 50_000_000


@dataclass
class AnalysisBlock:
    dt: float = 1.0
    T_p: float = 0.3
    bins: int = 20
    r_thresh: float = 10.0
    m_thresh: float = 0.05
    # topics born before burn_in or after horizon - cooldown are left out of
    # rank statistics and the regime label
    burn_in: float = 0.0
    cooldown: float = 0.0
    # topics (by peak) that get the full cluster/lattice/merge treatment
    detail_topics: int = 5


@dataclass
class MeanfieldBlock:
    t_max: float = 100.0
    step: float = 0.01


@dataclass
class IngestBlock:
    events: str = ""
    edges: str = ""
    rule: str = "first"
    bin: float = 3600.0
    max_error_rate: float = 0.05


@dataclass
class SweepBlock:
    # ';'-separated ``block.key=v1,v2,...`` ranges, e.g. "dynamics.B=300,600;network.p_rewire=0.1"
    ranges: str = ""
    seeds: int = 1
    workers: int = 0


@dataclass
class OutputBlock:
    dir: str = "out"


BLOCKS = {
    "network": NetworkBlock,
    "dynamics": DynamicsBlock,
    "analysis": AnalysisBlock,
    "meanfield": MeanfieldBlock,
    "ingest": IngestBlock,
    "sweep": SweepBlock,
    "output": OutputBlock,
}


@dataclass
class RunConfig:
    """Everything needed to reproduce a command's output."""

    network: NetworkBlock = field(default_factory=NetworkBlock)
    dynamics: DynamicsBlock = field(default_factory=DynamicsBlock)
    analysis: AnalysisBlock = field(default_factory=AnalysisBlock)
    meanfield: MeanfieldBlock = field(default_factory=MeanfieldBlock)
    ingest: IngestBlock = field(default_factory=IngestBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    @staticmethod
    def keys() -> list[str]:
        return [f"{b}.{f.name}" for b, cls in BLOCKS.items() for f in fields(cls)]

    def get(self, key: str):
        block, name = _split(key)
        return getattr(getattr(self, block), name)

    def set(self, key: str, value) -> None:
        """Set one key, converting strings to the field's type."""
        block, name = _split(key)
        obj = getattr(self, block)
        typ = type(getattr(BLOCKS[block](), name))
        setattr(obj, name, _convert(value, typ, key))

    def updated(self, pairs: dict) -> "RunConfig":
        out = dataclasses.replace(self, **{b: dataclasses.replace(getattr(self, b)) for b in BLOCKS})
        for key, value in pairs.items():
            out.set(key, value)
        return out

    def to_lines(self) -> list[str]:
        return [f"{key}={_render(self.get(key))}" for key in sorted(self.keys())]

    def to_text(self) -> str:
        return "".join(line + "\n" for line in self.to_lines())

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def sim_config(self) -> SimConfig:
        d = self.dynamics
        return SimConfig(lambda1=d.lambda1, lambda2=d.lambda2, A=d.A, alpha=d.alpha, B=d.B,
                         beta=d.beta, horizon=d.horizon, prune_eps=d.prune_eps, seed=d.seed,
                         preseed_topics=d.preseed_topics, max_live=d.max_live)


def _split(key: str) -> tuple[str, str]:
    block, _, name = key.partition(".")
    if block not in BLOCKS or name not in {f.name for f in fields(BLOCKS[block])}:
        raise KeyError(f"unknown config key {key!r}")
    return block, name


def _convert(value, typ, key):
    if not isinstance(value, str):
        return typ(value)
    text = value.strip()
    try:
        if typ is int:
            as_float = float(text)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        if typ is float:
            return float(text)
    except ValueError:
        raise ValueError(f"{key}: cannot read {value!r} as {typ.__name__}") from None
    return text


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_lines(text: str) -> dict[str, str]:
    """``block.key=value`` lines to a dict; blank lines and ``#`` comments ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key = key.strip()
        _split(key)
        out[key] = value.strip()
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides``."""
    cfg = RunConfig()
    if path:
        cfg = cfg.updated(parse_lines(Path(path).read_text()))
    if overrides:
        cfg = cfg.updated(overrides)
    return cfg
