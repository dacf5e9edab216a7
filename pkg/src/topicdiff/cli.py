"""``topicdiff`` command line: generate, simulate, meanfield, analyze, ingest, sweep.

Every command reads a :class:`~topicdiff.config.RunConfig` (defaults, then
``--config FILE``, then ``--block.key=value`` flags) and writes its outputs
under ``output.dir``. Each output starts with a header holding the full
config and a sha256 of the content.

Exit codes: 0 success, 1 validation error, 2 resource cap hit, 3 I/O error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis as an
from . import ingest as ing
from .config import RunConfig, load_config
from .engine import ResourceCapError, simulate
from .meanfield import MeanFieldParams, p_closed_form, p_numeric
from .netgen import Network, build_ws
from .traceio import fmt, read_header, read_trace, write_csv, write_trace

log = logging.getLogger("topicdiff")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RESOURCE = 2
EXIT_IO = 3

CHANNELS = ("speakers", "largest_cluster", "second_cluster", "cluster_count", "giant_ratio",
            "cumulative_largest", "conductance", "lattice_largest", "lattice_second", "lattice_count")


def _out(cfg: RunConfig) -> Path:
    path = Path(cfg.output.dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _network(cfg: RunConfig) -> Network:
    b = cfg.network
    return build_ws(b.n, b.k, b.p_rewire, b.seed)


def _nan_blank(x):
    if isinstance(x, (float, np.floating)) and not math.isfinite(x):
        return ""
    return x


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: RunConfig) -> Path:
    """Write the configured network as an edge list."""
    net = _network(cfg)
    path = _out(cfg) / "network.edges"
    head = [net.header()] + [f"# config {line}" for line in cfg.to_lines()]
    head.append(f"# checksum sha256={net.checksum()}")
    path.write_text("\n".join(head) + "\n" + net.edge_body(), encoding="utf-8")
    print(f"wrote {path}: n={net.n} edges={net.num_edges} rewired={net.num_rewired}")
    return path


def cmd_simulate(cfg: RunConfig) -> Path:
    """Run the engine on the configured network and write a JSONL trace."""
    net = _network(cfg)
    sim = cfg.sim_config()
    t0 = time.perf_counter()
    trace = simulate(net, sim)
    wall = time.perf_counter() - t0
    path = _out(cfg) / "trace.jsonl"
    digest = write_trace(trace, path, dict(line.split("=", 1) for line in cfg.to_lines()))
    print(f"topics arrived: {trace.num_topics}")
    print(f"instances created: {trace.num_instances}")
    print(f"no-action events: {trace.stats.get('noaction', 0)}")
    print(f"wall time: {wall:.2f}s")
    print(f"wrote {path} sha256={digest}")
    return path


def cmd_meanfield(cfg: RunConfig) -> Path:
    """Closed-form and numerical mean-field curves on ``[0, t_max]``."""
    mf = cfg.meanfield
    if not mf.step > 0 or not mf.t_max >= 0:
        raise ValueError("meanfield grid needs step > 0 and t_max >= 0")
    steps = int(round(mf.t_max / mf.step))
    grid = np.arange(steps + 1) * mf.step
    d = cfg.dynamics
    params = MeanFieldParams(d.lambda1, d.lambda2, d.A, d.alpha, d.B, d.beta, float(cfg.network.k))
    closed = np.atleast_1d(p_closed_form(grid, params))
    numeric = p_numeric(grid, params)
    n = cfg.network.n
    rows = [(float(t), float(a), float(b), float(n * a)) for t, a, b in zip(grid, closed, numeric)]
    path = _out(cfg) / "meanfield.csv"
    extra = {"c": fmt(params.c), "D1": fmt(params.D1), "D2": fmt(params.D2)}
    write_csv(path, "meanfield", cfg.to_lines(), ["t", "P_closed", "P_numeric", "nP_closed"], rows, extra)
    print(f"c={params.c:.6g} D1={params.D1:.6g} D2={params.D2:.6g}; wrote {path}")
    return path


def _trace_network(header: dict, cfg: RunConfig) -> Network:
    ref = header.get("network") or {}
    if not ref:
        return _network(cfg)
    return build_ws(int(ref["n"]), int(ref["k"]), float(ref["p_rewire"]), int(ref["seed"]))


def analyze_bundle(trace, net: Network, cfg: RunConfig, out_dir: Path, trace_sum: str) -> dict[str, str]:
    """Write every per-topic series and statistic plus the run summary.

    Returns ``{file name: checksum}``.
    """
    a = cfg.analysis
    lines = cfg.to_lines()
    extra = {"trace_sha256": trace_sum, "dt": fmt(a.dt)}
    series = an.topic_series(trace, net, a.dt) if trace.num_topics else {}
    stats = an.all_topic_stats(trace, net, a.dt, series) if series else []
    window = set(an.topic_window(trace, a.burn_in, a.cooldown).tolist())
    sums = {}

    rows = [(s.topic_id, float(trace.arr_t[s.topic_id]), s.peak, float(s.lifetime), s.max_spread,
             s.adopters, s.adopter_degree_sum, float(an.median_giant_ratio(series[s.topic_id])),
             int(s.topic_id in window)) for s in stats]
    sums["stats.csv"] = write_csv(out_dir / "stats.csv", "topic_stats", lines,
                                  ["topic", "birth", "peak", "lifetime", "max_spread", "adopters",
                                   "adopter_degree_sum", "median_giant_ratio", "in_window"], rows, extra)

    grid = an.sample_grid(trace.horizon, a.dt)
    srows = []
    for tid in sorted(series):
        ch = series[tid].channels()
        for name in CHANNELS:
            srows.append([tid, name] + [_nan_blank(float(x)) for x in ch[name]])
    sums["series.csv"] = write_csv(out_dir / "series.csv", "topic_series", lines,
                                   ["topic", "channel"] + [fmt(t) for t in grid], srows, extra)

    hrows = []
    for s in stats:
        counts, edges = an.local_weight_histogram(trace, s.topic_id, a.bins)
        hrows.extend((s.topic_id, float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts))
    sums["histograms.csv"] = write_csv(out_dir / "histograms.csv", "local_weight_histogram", lines,
                                       ["topic", "bin_low", "bin_high", "count"], hrows, extra)

    keep = [s for s in stats if s.topic_id in window and s.peak > 0]
    rrows = []
    for name in ("peak", "lifetime", "max_spread"):
        vals = [getattr(s, name) for s in keep]
        if any(v > 0 for v in vals):
            rp = an.rank_plot(vals)
            rrows.extend((name, int(r), float(v)) for r, v in zip(rp.ranks, rp.values))
    sums["ranks.csv"] = write_csv(out_dir / "ranks.csv", "rank_plot", lines, ["quantity", "rank", "value"],
                                  rrows, extra)

    detail = sorted(keep, key=lambda s: (-s.peak, s.topic_id))[:a.detail_topics]
    mrows = []
    for s in detail:
        for ev in an.merge_events(trace, net, s.topic_id, a.dt):
            mrows.append((s.topic_id, float(ev.time), " ".join(map(str, ev.merged)), ev.size))
    sums["merges.csv"] = write_csv(out_dir / "merges.csv", "merge_events", lines,
                                   ["topic", "time", "merged", "size"], mrows, extra)

    summary = an.run_summary(trace, stats, trace.n, a.burn_in, a.cooldown, a.r_thresh, a.m_thresh)
    sums["regime.csv"] = write_csv(out_dir / "regime.csv", "regime", lines, ["key", "value"],
                                   [(k, _nan_blank(v)) for k, v in summary.items()], extra)
    return sums


def cmd_analyze(cfg: RunConfig, trace_path=None) -> Path:
    """Analyze a trace file (default ``output.dir/trace.jsonl``) into a CSV bundle."""
    path = Path(trace_path) if trace_path else Path(cfg.output.dir) / "trace.jsonl"
    header = read_header(path)
    trace = read_trace(path)
    net = _trace_network(header, cfg)
    if net.n != trace.n:
        raise ValueError(f"network has {net.n} nodes but the trace has {trace.n}")
    out_dir = _out(cfg) / "analysis"
    out_dir.mkdir(parents=True, exist_ok=True)
    sums = analyze_bundle(trace, net, cfg, out_dir, header["checksum"])
    for name, digest in sums.items():
        print(f"{name} sha256={digest}")
    return out_dir


def cmd_ingest(cfg: RunConfig) -> Path:
    """Per-topic influence subgraphs of a real event log."""
    b = cfg.ingest
    if not b.events:
        raise ValueError("ingest.events is required")
    ext = ing.load(b.events, b.edges or None, b.max_error_rate)
    lines = cfg.to_lines()
    rows, srows = [], []
    for label in ext.topics:
        g = ing.topic_subgraph(ext, label, b.rule)
        scc = ing.largest_scc(g)
        phi = an.conductance(ext, sorted(scc)) if scc else float("nan")
        prox = an.proximity_clusters(g, range(g.n), cfg.analysis.T_p) if g.n else []
        rows.append((label, g.n, g.num_edges, len(scc), g.tied_pairs, float(phi), prox[0] if prox else 0))
        starts, counts = ing.new_speakers(g, b.bin)
        srows.extend((label, float(t), int(c)) for t, c in zip(starts, counts))
    out = _out(cfg)
    extra = {"skipped_events": ext.skipped_events, "skipped_edges": ext.skipped_edges}
    path = out / "ingest_topics.csv"
    write_csv(path, "ingest", lines, ["topic", "speakers", "edges", "largest_scc", "tied_pairs",
                                      "scc_conductance", "largest_proximity_cluster"], rows, extra)
    write_csv(out / "ingest_series.csv", "speaker_delta", lines, ["topic", "bin_start", "new_speakers"],
              srows, extra)
    print(f"{ext.num_events} events, {len(ext.topics)} topics, {ext.num_users} users "
          f"(skipped {ext.skipped_events} event and {ext.skipped_edges} edge lines); wrote {path}")
    return path


def parse_ranges(text: str) -> list[tuple[str, list[str]]]:
    """``"dynamics.B=300,600;network.p_rewire=0.1"`` to ``[(key, values), ...]``."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(";"))):
        key, sep, vals = part.partition("=")
        if not sep:
            raise ValueError(f"bad sweep range {part!r}")
        values = [v.strip() for v in vals.split(",") if v.strip()]
        if not values:
            raise ValueError(f"empty sweep range for {key.strip()}")
        RunConfig().set(key.strip(), values[0])
        out.append((key.strip(), values))
    return out


def sweep_runs(cfg: RunConfig) -> list[RunConfig]:
    """Cartesian product of the ranges times ``sweep.seeds``; run ``i`` adds ``i`` to both seeds."""
    ranges = parse_ranges(cfg.sweep.ranges)
    if cfg.sweep.seeds < 1:
        raise ValueError("sweep.seeds must be at least 1")
    keys = [k for k, _ in ranges]
    runs = []
    for combo in itertools.product(*(v for _, v in ranges)):
        for _ in range(cfg.sweep.seeds):
            i = len(runs)
            run = cfg.updated(dict(zip(keys, combo)))
            run.network.seed = cfg.network.seed + i
            run.dynamics.seed = cfg.dynamics.seed + i
            runs.append(run)
    return runs


def _sweep_one(run: RunConfig) -> dict:
    net = _network(run)
    trace = simulate(net, run.sim_config())
    a = run.analysis
    series = an.topic_series(trace, None, a.dt)
    stats = an.all_topic_stats(trace, net, a.dt, series)
    return an.run_summary(trace, stats, net.n, a.burn_in, a.cooldown, a.r_thresh, a.m_thresh)


def cmd_sweep(cfg: RunConfig) -> Path:
    """Simulate and classify every point of the sweep; one summary row per run."""
    runs = sweep_runs(cfg)
    keys = [k for k, _ in parse_ranges(cfg.sweep.ranges)]
    workers = cfg.sweep.workers or os.cpu_count() or 1
    if workers == 1 or len(runs) == 1:
        results = [_sweep_one(r) for r in runs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(runs))) as pool:
            results = list(pool.map(_sweep_one, runs))
    cols = ["run"] + keys + ["seed", "topics", "label", "R", "M", "top_peak", "slope_peak",
                             "slope_lifetime", "slope_spread", "rho_adopters", "p_adopters"]
    rows = []
    for i, (run, res) in enumerate(zip(runs, results)):
        rows.append([i] + [run.get(k) for k in keys] + [run.dynamics.seed] +
                    [_nan_blank(res[c]) for c in cols[len(keys) + 2:]])
    path = _out(cfg) / "sweep.csv"
    write_csv(path, "sweep", cfg.to_lines(), cols, rows)
    labels = sorted({r["label"] for r in results})
    print(f"{len(runs)} runs, labels: {', '.join(labels)}; wrote {path}")
    return path


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topicdiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "simulate", "meanfield", "analyze", "ingest", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="file of block.key=value lines")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "analyze":
            p.add_argument("trace", nargs="?", help="trace file (default: output.dir/trace.jsonl)")
        for key in RunConfig.keys():
            p.add_argument(f"--{key}", dest=key, metavar="VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items() if "." in k and v is not None}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "generate":
            cmd_generate(cfg)
        elif args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "meanfield":
            cmd_meanfield(cfg)
        elif args.command == "analyze":
            cmd_analyze(cfg, args.trace)
        elif args.command == "ingest":
            cmd_ingest(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg)
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
