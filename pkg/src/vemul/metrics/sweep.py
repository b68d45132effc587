"""Scalability sweep: resource use and probe latency against switch count."""

from __future__ import annotations

import errno
import logging
import math
from dataclasses import dataclass, field

from .. import topology as topo_mod
from ..errors import OutOfResources, PreconditionError, VemulError
from . import tools
from .measure import measure_first_ping, run_udp_flow, sample_steady_state

log = logging.getLogger(__name__)

MESH_CAP = 65
FAMILIES = ("star", "mesh", "tree")
FIELDS = ("cpu_percent", "memory_mb", "first_ping_ms", "throughput_mbps")

_RESOURCE_ERRNOS = {errno.ENOMEM, errno.ENOSPC, errno.EMFILE, errno.ENFILE, errno.EAGAIN, errno.ENOBUFS}
_RESOURCE_TEXT = (
    "cannot allocate memory",
    "out of memory",
    "no space left",
    "too many open files",
    "resource temporarily unavailable",
    "no buffer space",
)


@dataclass
class RunRecord:
    """One repetition; ``None`` marks a metric that was not measured."""

    family: str
    switch_count: int
    rep: int
    cpu_percent: float | None = None
    memory_mb: float | None = None
    first_ping_ms: float | None = None
    throughput_mbps: float | None = None

    def __post_init__(self):
        # values are kept at the precision they are reported with, so a mean
        # recomputed from the CSV rows agrees with the stored mean
        for name in FIELDS:
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, round(float(value), 2))


@dataclass
class SweepResult:
    family: str
    switch_count: int
    repetitions: int
    cpu_percent_mean: float | None = None
    memory_mb_mean: float | None = None
    latency_ms_mean: float | None = None
    throughput_mbps_mean: float | None = None
    runs: list[RunRecord] = field(default_factory=list)
    incomplete: int = 0
    flagged: str | None = None

    @classmethod
    def from_runs(cls, family, switch_count, repetitions, runs, incomplete=0, flagged=None):
        def mean(name):
            values = [getattr(r, name) for r in runs if getattr(r, name) is not None]
            return math.fsum(values) / len(values) if values else None

        return cls(
            family,
            switch_count,
            repetitions,
            mean("cpu_percent"),
            mean("memory_mb"),
            mean("first_ping_ms"),
            mean("throughput_mbps"),
            list(runs),
            incomplete,
            flagged,
        )

    @property
    def completed(self):
        return len(self.runs)


def is_resource_exhaustion(exc):
    """Whether ``exc`` (or anything in its cause chain) means the host ran out of something."""
    seen = set()
    while exc is not None and id(exc) not in seen:
        seen.add(id(exc))
        if isinstance(exc, (OutOfResources, MemoryError)):
            return True
        if isinstance(exc, OSError) and exc.errno in _RESOURCE_ERRNOS:
            return True
        if any(t in str(exc).lower() for t in _RESOURCE_TEXT):
            return True
        exc = getattr(exc, "cause", None) or exc.__cause__ or exc.__context__
    return False


def check_sizes(family, sizes, allow_large=False):
    if family not in FAMILIES:
        raise PreconditionError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    sizes = list(sizes)
    if not sizes:
        raise PreconditionError("no sizes given")
    for s in sizes:
        if not isinstance(s, int) or s < 2:
            raise PreconditionError(f"switch count must be an integer >= 2, got {s!r}")
    if family == "mesh" and not allow_large:
        big = [s for s in sizes if s > MESH_CAP]
        if big:
            raise PreconditionError(
                f"mesh sizes above {MESH_CAP} need the large-size override: {', '.join(map(str, big))}"
            )
    return sizes


def _resources(orch, family, size, window_s, hz):
    emu = orch.up(topo_mod.switches_only(topo_mod.generate(family, size)))
    try:
        return sample_steady_state(emu, window_s=window_s, hz=hz)
    finally:
        orch.down(emu)


def _probes(orch, family, size, echo_count, throughput, rate_mbps, duration_s, ping_command, traffic):
    full = topo_mod.with_controller(topo_mod.generate(family, size))
    emu = orch.up(full)
    try:
        orch.connect_switches(emu)
        src, dst = topo_mod.probe_hosts(full)
        latency = measure_first_ping(emu, src, dst, echo_count, command=ping_command)
        mbps = None
        if throughput:
            mbps = run_udp_flow(emu, src, dst, rate_mbps, duration_s, tool=traffic).mean_mbps
        return latency.first_ping_ms, mbps
    finally:
        orch.down(emu)


def run_scalability_sweep(
    family,
    sizes,
    reps,
    orchestrator=None,
    *,
    window_s=30,
    hz=1.0,
    echo_count=11,
    measure_throughput=True,
    rate_mbps=100.0,
    duration_s=10,
    allow_large=False,
    ping_command=None,
    traffic=tools.IPERF3,
    progress=None,
) -> list[SweepResult]:
    """One :class:`SweepResult` per size, in the order given.

    Each repetition builds the switches and their links alone and samples
    aggregate CPU and memory, tears down, then rebuilds with the probe hosts
    and a controller to take the first-ping latency and a UDP throughput
    sample between the two probes.  A repetition that fails is counted as
    incomplete; exhausting host resources flags the size and moves on to the
    next one.
    """
    from ..orchestrator import default_orchestrator

    sizes = check_sizes(family, sizes, allow_large)
    if not isinstance(reps, int) or reps < 1:
        raise PreconditionError(f"repetitions must be >= 1, got {reps!r}")
    orch = orchestrator or default_orchestrator()
    results = []
    for size in sizes:
        runs, incomplete, flagged = [], 0, None
        for rep in range(1, reps + 1):
            try:
                cpu, mem = _resources(orch, family, size, window_s, hz)
                latency, mbps = _probes(
                    orch, family, size, echo_count, measure_throughput, rate_mbps, duration_s, ping_command, traffic
                )
            except (VemulError, OSError, MemoryError) as exc:
                incomplete += 1
                if is_resource_exhaustion(exc):
                    flagged = f"out of resources at {size} switches: {exc}"
                    log.error("%s %d: %s; skipping remaining repetitions", family, size, flagged)
                    incomplete += reps - rep
                    break
                log.warning("%s %d rep %d incomplete: %s", family, size, rep, exc)
                continue
            record = RunRecord(family, size, rep, cpu, mem, latency, mbps)
            runs.append(record)
            if progress:
                progress(record)
        results.append(SweepResult.from_runs(family, size, reps, runs, incomplete, flagged))
    return results
