"""Flatten metric records into a stable CSV and a plain-text table."""

from __future__ import annotations

import csv
import io
from typing import List, Sequence

from .types import SimMetrics

TAG_COLUMNS = ("preset", "scheduler", "planner", "seed", "devices")
METRIC_COLUMNS = (
    "num_requests",
    "mean_latency",
    "p95_latency",
    "throughput",
    "slo_violation_rate",
    "makespan",
    "total_generated_tokens",
)


def columns(records: Sequence[SimMetrics]) -> List[str]:
    extra_tags = sorted({k for r in records for k in r.tags} - set(TAG_COLUMNS))
    devices = sorted({d for r in records for d in r.utilization})
    return list(TAG_COLUMNS) + extra_tags + list(METRIC_COLUMNS) + [f"util_{d}" for d in devices]


def flatten(record: SimMetrics, cols: Sequence[str]) -> dict:
    row = {}
    for c in cols:
        if c in record.tags:
            row[c] = record.tags[c]
        elif c == "num_requests":
            row[c] = record.num_requests
        elif c == "total_generated_tokens":
            row[c] = record.total_generated_tokens
        elif c.startswith("util_"):
            u = record.utilization.get(int(c[5:]))
            row[c] = "" if u is None else repr(float(u))
        elif c in METRIC_COLUMNS:
            row[c] = repr(float(getattr(record, c)))
        else:
            row[c] = ""
    return row


def to_csv(records: Sequence[SimMetrics]) -> str:
    cols = columns(records)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(flatten(r, cols))
    return buf.getvalue()


def to_table(records: Sequence[SimMetrics]) -> str:
    cols = [c for c in TAG_COLUMNS if any(c in r.tags for r in records)]
    cols += ["mean_latency", "p95_latency", "throughput", "slo_violation_rate"]
    rows = []
    for r in records:
        row = []
        for c in cols:
            if c in TAG_COLUMNS:
                row.append(r.tags.get(c, ""))
            elif c == "slo_violation_rate":
                row.append(f"{float(r.slo_violation_rate):.3f}")
            else:
                row.append(f"{float(getattr(r, c)):.2f}")
        rows.append(row)
    widths = [max(len(c), *(len(row[i]) for row in rows)) if rows else len(c) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in rows]
    return "\n".join(lines) + "\n"
