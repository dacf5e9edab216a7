"""Line-delimited JSON traces and checksummed CSV outputs.

A trace file starts with one header record carrying the run configuration
and the sha256 of everything after the header line. Then comes one record
per event in sequence order::

    {"t": 1.5, "seq": 0, "kind": "arrival", "topic": 0, "node": null, "w_norm": null}
    {"t": 2.25, "seq": 1, "kind": "instance", "topic": 0, "node": 7, "w_norm": 0, "adopt": true}

Floats are written with 17 significant digits so they read back exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .engine import EventTrace, SimConfig

_CHUNK = 1 << 16


def fmt(x: float) -> str:
    """17-significant-digit float text, valid as JSON."""
    x = float(x)
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError(f"cannot serialize non-finite float {x}")
    return "%.17g" % x


def _event_lines(trace: EventTrace):
    n_arr, n_inst = trace.num_topics, trace.num_instances
    arr_seq, inst_seq = trace.arr_seq, trace.inst_seq
    i = j = 0
    seq = 0
    while i < n_arr or j < n_inst:
        if i < n_arr and arr_seq[i] == seq:
            yield ('{"t": %s, "seq": %d, "kind": "arrival", "topic": %d, "node": null, "w_norm": null}\n'
                   % (fmt(trace.arr_t[i]), seq, i))
            i += 1
        else:
            assert inst_seq[j] == seq
            yield ('{"t": %s, "seq": %d, "kind": "instance", "topic": %d, "node": %d, "w_norm": %s, "adopt": %s}\n'
                   % (fmt(trace.inst_t[j]), seq, trace.inst_topic[j], trace.inst_node[j],
                      fmt(trace.inst_w[j]), "true" if trace.inst_adopt[j] else "false"))
            j += 1
        seq += 1


def _write_with_header(path, make_header, chunks) -> str:
    """Stream ``chunks`` to a temp file while hashing, then prepend the header.

    ``make_header(checksum)`` returns the header text. Returns the checksum.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h = hashlib.sha256()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".body")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as body:
            buf = []
            size = 0
            for chunk in chunks:
                buf.append(chunk)
                size += len(chunk)
                if size > _CHUNK:
                    text = "".join(buf)
                    h.update(text.encode())
                    body.write(text)
                    buf, size = [], 0
            text = "".join(buf)
            h.update(text.encode())
            body.write(text)
        digest = h.hexdigest()
        with open(path, "w", encoding="utf-8", newline="") as out, open(tmp, encoding="utf-8", newline="") as body:
            out.write(make_header(digest))
            while True:
                block = body.read(1 << 20)
                if not block:
                    break
                out.write(block)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return digest


def write_trace(trace: EventTrace, path, run_config: dict | None = None) -> str:
    """Write ``trace`` as JSONL; returns the body checksum."""
    def header(digest):
        rec = {
            "kind": "header",
            "config": run_config or {},
            "sim": trace.config.to_dict() if trace.config is not None else None,
            "network": trace.network,
            "n": trace.n,
            "horizon": trace.horizon,
            "num_topics": trace.num_topics,
            "num_instances": trace.num_instances,
            "checksum": digest,
        }
        return json.dumps(rec, sort_keys=True) + "\n"

    return _write_with_header(path, header, _event_lines(trace))


def read_header(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        rec = json.loads(fh.readline())
    if rec.get("kind") != "header":
        raise ValueError(f"{path}: first record is not a trace header")
    return rec


def read_trace(path, verify: bool = True) -> EventTrace:
    """Inverse of :func:`write_trace`.

    Raises:
        ValueError: malformed file, or a checksum mismatch when ``verify``.
    """
    h = hashlib.sha256()
    arr_t, arr_before = [], []
    inst_t, inst_node, inst_topic, inst_w, inst_adopt = [], [], [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        head = json.loads(fh.readline())
        if head.get("kind") != "header":
            raise ValueError(f"{path}: first record is not a trace header")
        for line in fh:
            h.update(line.encode())
            rec = json.loads(line)
            if rec["kind"] == "arrival":
                if rec["topic"] != len(arr_t):
                    raise ValueError(f"{path}: arrivals out of order at seq {rec['seq']}")
                arr_t.append(rec["t"])
                arr_before.append(len(inst_t))
            elif rec["kind"] == "instance":
                inst_t.append(rec["t"])
                inst_node.append(rec["node"])
                inst_topic.append(rec["topic"])
                inst_w.append(rec["w_norm"])
                inst_adopt.append(1 if rec.get("adopt") else 0)
            else:
                raise ValueError(f"{path}: unknown record kind {rec['kind']!r}")
    if verify and h.hexdigest() != head["checksum"]:
        raise ValueError(f"{path}: checksum mismatch")
    sim = head.get("sim")
    return EventTrace(
        config=SimConfig(**sim) if sim else None,
        network=head.get("network") or {},
        n=int(head["n"]),
        arr_t=np.asarray(arr_t, dtype=np.float64),
        arr_before=np.asarray(arr_before, dtype=np.int64),
        inst_t=np.asarray(inst_t, dtype=np.float64),
        inst_node=np.asarray(inst_node, dtype=np.int32),
        inst_topic=np.asarray(inst_topic, dtype=np.int32),
        inst_w=np.asarray(inst_w, dtype=np.float64),
        inst_adopt=np.asarray(inst_adopt, dtype=np.int8),
        horizon=float(head["horizon"]),
        stats={},
    )


# ---------------------------------------------------------------------------
# CSV outputs


def _csv_body(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def header_lines(op: str, config_lines, extra: dict | None = None) -> list[str]:
    out = [f"# topicdiff {op}"]
    for key, value in (extra or {}).items():
        out.append(f"# {key}={value}")
    out.extend(f"# config {line}" for line in config_lines)
    return out


def write_csv(path, op: str, config_lines, columns, rows, extra: dict | None = None) -> str:
    """CSV with a ``#`` header (op, extras, config, checksum). Returns the checksum."""
    body = _csv_body(columns, rows)
    digest = hashlib.sha256(body.encode()).hexdigest()
    head = header_lines(op, config_lines, extra) + [f"# checksum sha256={digest}"]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(head) + "\n" + body, encoding="utf-8")
    return digest


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Return ``(header_fields, columns, rows)`` of a file written by :func:`write_csv`."""
    meta: dict = {"config": []}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        text = line[1:].strip()
        if text.startswith("config "):
            meta["config"].append(text[len("config "):])
        elif text.startswith("checksum sha256="):
            meta["checksum"] = text.split("=", 1)[1]
        elif text.startswith("topicdiff "):
            meta["op"] = text[len("topicdiff "):]
        elif "=" in text:
            key, value = text.split("=", 1)
            meta[key] = value
    else:
        body_start = len(lines)
    reader = list(csv.reader(lines[body_start:]))
    if not reader:
        return meta, [], []
    return meta, reader[0], reader[1:]
