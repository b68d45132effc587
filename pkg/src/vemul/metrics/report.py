"""CSV output for sweeps and fidelity runs, with the published figures alongside."""

from __future__ import annotations

import csv
import os
from pathlib import Path

from ..errors import PreconditionError
from .reference import REFERENCE

SWEEP_HEADER = (
    "family",
    "switch_count",
    "rep",
    "cpu_percent",
    "memory_mb",
    "first_ping_ms",
    "throughput_mbps",
    "ref_cpu_percent",
    "ref_memory_mb",
    "ref_first_ping_ms",
)
FIDELITY_HEADER = ("flow", "role", "requested_mbps", "second", "measured_mbps")
COMPARISON_HEADER = (
    "family",
    "switch_count",
    "metric",
    "measured_mean",
    "completed",
    "incomplete",
    "vsdnemul",
    "mininet",
    "note",
)
# (SweepResult attribute, reference metric)
_MEANS = (
    ("cpu_percent_mean", "cpu_percent"),
    ("memory_mb_mean", "memory_mb"),
    ("latency_ms_mean", "first_ping_ms"),
)


def fmt(value):
    return "" if value is None else f"{value:.2f}"


def comparison_path(out_path):
    p = Path(out_path)
    return p.with_name(f"{p.stem}.comparison{p.suffix or '.csv'}")


def _writer(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return open(path, "w", newline="")


def emit_report(results, reference=REFERENCE, out_path="sweep.csv"):
    """Write one row per completed repetition, then a per-size comparison file.

    Reference columns carry the vSDNEmul figure for the same family, size and
    metric, and stay empty where none was published.  Returns ``out_path``.
    """
    results = list(results)
    if not results:
        raise PreconditionError("no sweep results to report")
    with _writer(out_path) as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for res in results:
            refs = [reference.get("vsdnemul", res.family, res.switch_count, m) for _, m in _MEANS]
            for run in res.runs:
                w.writerow(
                    [
                        res.family,
                        res.switch_count,
                        run.rep,
                        fmt(run.cpu_percent),
                        fmt(run.memory_mb),
                        fmt(run.first_ping_ms),
                        fmt(run.throughput_mbps),
                        *map(fmt, refs),
                    ]
                )
    with _writer(comparison_path(out_path)) as fh:
        w = csv.writer(fh)
        w.writerow(COMPARISON_HEADER)
        for res in results:
            note = res.flagged or ""
            for attr, metric in _MEANS:
                w.writerow(
                    [
                        res.family,
                        res.switch_count,
                        metric,
                        fmt(getattr(res, attr)),
                        res.completed,
                        res.incomplete,
                        fmt(reference.get("vsdnemul", res.family, res.switch_count, metric)),
                        fmt(reference.get("mininet", res.family, res.switch_count, metric)),
                        note,
                    ]
                )
            w.writerow(
                [res.family, res.switch_count, "throughput_mbps", fmt(res.throughput_mbps_mean),
                 res.completed, res.incomplete, "", "", note]
            )
    return out_path


def emit_fidelity_csv(result, out_path="fidelity.csv"):
    """One row per (flow, second) for the foreground and every background flow."""
    with _writer(out_path) as fh:
        w = csv.writer(fh)
        w.writerow(FIDELITY_HEADER)
        for series in result.series:
            for second, mbps in series.samples:
                w.writerow([series.flow, series.role, fmt(series.requested_mbps), second, fmt(mbps)])
    return out_path


def read_sweep_csv(path):
    """Rows of a sweep CSV as dicts with numeric cells converted (empty cells become ``None``)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            conv = {}
            for k, v in row.items():
                if k == "family":
                    conv[k] = v
                elif k in ("switch_count", "rep"):
                    conv[k] = int(v)
                else:
                    conv[k] = float(v) if v != "" else None
            out.append(conv)
    return out
