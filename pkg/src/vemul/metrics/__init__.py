"""Measurement harness: latency, throughput, resource sweeps and reports."""

from .fidelity import (
    BACKGROUND_PAIRS,
    FOREGROUND,
    FidelityResult,
    fidelity_topology,
    measure_switching_capacity,
    run_fidelity_scenario,
)
from .measure import (
    Flow,
    LatencyRecord,
    ThroughputSeries,
    measure_first_ping,
    run_flows,
    run_udp_flow,
    sample_steady_state,
)
from .reference import REFERENCE, ReferenceTable
from .report import FIDELITY_HEADER, SWEEP_HEADER, emit_fidelity_csv, emit_report, read_sweep_csv
from .sweep import MESH_CAP, RunRecord, SweepResult, run_scalability_sweep
from .tools import IPERF3, TrafficTool

__all__ = [
    "BACKGROUND_PAIRS",
    "FIDELITY_HEADER",
    "FOREGROUND",
    "FidelityResult",
    "Flow",
    "IPERF3",
    "LatencyRecord",
    "MESH_CAP",
    "REFERENCE",
    "ReferenceTable",
    "RunRecord",
    "SWEEP_HEADER",
    "SweepResult",
    "ThroughputSeries",
    "TrafficTool",
    "emit_fidelity_csv",
    "emit_report",
    "fidelity_topology",
    "measure_first_ping",
    "measure_switching_capacity",
    "read_sweep_csv",
    "run_fidelity_scenario",
    "run_flows",
    "run_scalability_sweep",
    "run_udp_flow",
    "sample_steady_state",
]
