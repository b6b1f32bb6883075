"""Plain-text schedule, CSV and JSON sidecar formats.

Floats are written with 17 significant digits, which round-trips float64
exactly.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

from .errors import DomainError
from .sequences import PulseSequence, SuppressionReport

CSV_FORMAT_VERSION = 1


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".16e")
    return str(x)


def schedule_text(seq: PulseSequence, report: SuppressionReport | None = None) -> str:
    lines = [f"# total_time_s = {fmt(seq.total_time)}", f"# label = {seq.label}"]
    if report is not None:
        lines.append(f"# suppression_order = {report.order}")
        lines += [f"# residual_{m} = {fmt(r)}" for m, r in enumerate(report.residuals)]
        lines += [f"# lambda_{j} = {fmt(v)}" for j, v in enumerate(report.lam)]
    lines.append("index,time_s")
    lines += [f"{k},{fmt(t)}" for k, t in enumerate(seq.pulse_times, start=1)]
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> PulseSequence:
    header = {}
    times = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
            continue
        if line == "index,time_s":
            continue
        idx, t = line.split(",")
        if int(idx) != len(times) + 1:
            raise DomainError(f"schedule indices must be consecutive from 1, got {idx}")
        times.append(float(t))
    if "total_time_s" not in header:
        raise DomainError("schedule is missing the total_time_s header")
    return PulseSequence(float(header["total_time_s"]), tuple(times), header.get("label", "custom"))


def write_schedule(seq: PulseSequence, path, report: SuppressionReport | None = None) -> None:
    Path(path).write_text(schedule_text(seq, report), encoding="utf-8")


def read_schedule(path) -> PulseSequence:
    return parse_schedule(Path(path).read_text(encoding="utf-8"))


def table_text(table: str, columns, rows, fmt_name: str = "csv") -> str:
    """Render rows as versioned CSV (comment line, header, data) or as JSON."""
    columns = list(columns)
    if fmt_name == "json":
        payload = {"table": table, "version": CSV_FORMAT_VERSION, "rows": [dict(zip(columns, r)) for r in rows]}
        return json.dumps(payload, indent=2) + "\n"
    if fmt_name != "csv":
        raise DomainError(f"unknown output format {fmt_name!r}")
    buf = _io.StringIO()
    buf.write(f"# uddmag.{table} v{CSV_FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def sidecar_text(seed: int, n_traj: int, kind: str, parameters: dict, tool_version: str) -> str:
    payload = {
        "seed": seed,
        "n_traj": n_traj,
        "kind": kind,
        "parameters": parameters,
        "tool_version": tool_version,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
