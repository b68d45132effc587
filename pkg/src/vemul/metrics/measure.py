"""Latency, throughput and resource measurements on a running emulation."""

from __future__ import annotations

import logging
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..errors import MeasurementError, NoSuchHost, PreconditionError, Unreachable
from ..runtime import NodeState
from ..topology import NodeKind
from . import tools

log = logging.getLogger(__name__)

IPERF_BASE_PORT = 5201


@dataclass
class LatencyRecord:
    src: str
    dst: str
    first_ping_ms: float
    subsequent_ms: list[float]
    sent: int = 0
    received: int = 0

    def __post_init__(self):
        if self.first_ping_ms <= 0 or any(x <= 0 for x in self.subsequent_ms):
            raise ValueError("round-trip times must be positive")

    @property
    def loss_percent(self):
        if not self.sent:
            return 0.0
        return 100.0 * (self.sent - self.received) / self.sent

    @property
    def median_subsequent_ms(self):
        return statistics.median(self.subsequent_ms) if self.subsequent_ms else None

    @property
    def first_ping_penalty(self):
        """True when the first echo was at least as slow as the median of the rest."""
        med = self.median_subsequent_ms
        return med is not None and self.first_ping_ms >= med


@dataclass
class ThroughputSeries:
    flow: str
    requested_mbps: float
    samples: list[tuple[int, float]] = field(default_factory=list)
    role: str = "foreground"

    def __post_init__(self):
        self.samples = sorted(self.samples)
        if any(mbps < 0 for _, mbps in self.samples):
            raise ValueError("measured throughput cannot be negative")

    @property
    def mean_mbps(self):
        if not self.samples:
            return None
        return math.fsum(m for _, m in self.samples) / len(self.samples)

    def fraction_within(self, tolerance, target=None):
        """Share of samples within ``tolerance`` (relative) of ``target``."""
        target = self.requested_mbps if target is None else target
        if not self.samples:
            return 0.0
        ok = sum(1 for _, m in self.samples if abs(m - target) <= tolerance * target)
        return ok / len(self.samples)


def _host(emu, name):
    topo = emu.topology
    if not topo.has_node(name) or topo.node(name).kind is not NodeKind.HOST:
        raise NoSuchHost(f"no host named {name!r}")
    return topo.node(name), emu.handle(name)


def _address(spec):
    if spec.ip_config is None:
        raise PreconditionError(f"{spec.name} has no data-plane address")
    return spec.ip_config.address


def measure_first_ping(emu, src, dst, echo_count=11, command=None, timeout_ms=None) -> LatencyRecord:
    """Ping ``dst`` from ``src`` and split the first RTT from the rest.

    ``command(addr, count)`` builds the ping argv; the default is iputils
    ping with a 200 ms interval.
    """
    if src == dst:
        raise PreconditionError(f"no-such-pair: source and destination are both {src!r}")
    if echo_count < 2:
        raise PreconditionError("echo_count must be at least 2 to separate the first ping")
    _, src_handle = _host(emu, src)
    dst_spec, _ = _host(emu, dst)
    argv = (command or tools.ping_command)(_address(dst_spec), echo_count)
    timeout_ms = timeout_ms or (echo_count * 1000 + 10_000)
    result = emu.runtime.exec_in_node(src_handle, argv, timeout_ms=timeout_ms)
    tools.check_tool(result, argv[0])
    rtts, sent = tools.parse_ping(result.stdout)
    answered = [r for r in rtts if r is not None]
    if not answered:
        raise Unreachable(f"{src} -> {dst}: no echo answered ({result.stdout.strip()[-200:]})")
    # a reactive controller may swallow the very first echo; the first answer
    # then carries the flow-setup cost
    return LatencyRecord(src, dst, answered[0], answered[1:], sent=sent or echo_count, received=len(answered))


@dataclass
class Flow:
    flow: str
    src: str
    dst: str
    rate_mbps: float
    role: str = "foreground"


def run_flows(emu, flows, duration_s, base_port=IPERF_BASE_PORT, tool=tools.IPERF3) -> list[ThroughputSeries]:
    """Run UDP flows concurrently and return receiver-side series in input order."""
    if duration_s <= 0:
        raise PreconditionError("duration must be positive")
    for f in flows:
        if f.rate_mbps <= 0:
            raise PreconditionError(f"flow {f.flow}: rate must be positive, got {f.rate_mbps}")
    resolved = []
    for i, f in enumerate(flows):
        _, src_handle = _host(emu, f.src)
        dst_spec, dst_handle = _host(emu, f.dst)
        resolved.append((f, src_handle, dst_handle, _address(dst_spec), base_port + i))

    run = emu.runtime.exec_in_node
    # servers exit after one test; the timeout only matters if a client never comes
    server_timeout_ms = int((duration_s + 15) * 1000)

    def client(item):
        f, src_handle, _, addr, port = item
        argv = tool.client(addr, f.rate_mbps, duration_s, port)
        last = None
        for _ in range(10):  # the server may still be binding
            last = run(src_handle, argv, timeout_ms=server_timeout_ms)
            tools.check_tool(last, tool.name)
            if last.ok:
                return last
            time.sleep(0.3)
        raise MeasurementError(f"flow {f.flow}: {tool.name} client failed: {last.stderr.strip() or last.stdout[-300:]}")

    with ThreadPoolExecutor(max_workers=2 * len(resolved)) as pool:
        servers = [
            pool.submit(run, dst_handle, tool.server(port), timeout_ms=server_timeout_ms)
            for _, _, dst_handle, _, port in resolved
        ]
        time.sleep(0.5)
        for fut in servers:  # a missing binary makes the server return at once
            if fut.done():
                tools.check_tool(fut.result(), tool.name)
        clients = [pool.submit(client, item) for item in resolved]
        for fut in clients:
            fut.result()
        reports = [fut.result() for fut in servers]

    out = []
    for (f, *_), res in zip(resolved, reports):
        tools.check_tool(res, tool.name)
        samples = tool.parse(res.stdout, duration_s)
        out.append(ThroughputSeries(f.flow, f.rate_mbps, samples, f.role))
    return out


def run_udp_flow(emu, src, dst, rate_mbps, duration_s, tool=tools.IPERF3) -> ThroughputSeries:
    return run_flows(emu, [Flow(f"{src}->{dst}", src, dst, rate_mbps)], duration_s, tool=tool)[0]


def sample_steady_state(emu, window_s=30, hz=1.0, node_names=None, workers=16):
    """Aggregate CPU% and memory (MB) over the emulation's containers.

    Raw counters are read from every container once per tick; CPU% for a
    tick is the summed CPU time over the tick's wall time.  Returns the mean
    over all ticks as ``(cpu_percent, memory_mb)``.
    """
    if window_s <= 0 or hz <= 0:
        raise PreconditionError("sampling window and rate must be positive")
    names = list(node_names) if node_names is not None else list(emu.handles)
    handles = [emu.handles[n] for n in names if emu.handles[n].state is NodeState.RUNNING]
    if not handles:
        raise MeasurementError("no running containers to sample")
    ticks = max(1, int(round(window_s * hz)))
    period = 1.0 / hz

    def read_all(pool):
        return list(pool.map(emu.runtime.counters, handles))

    cpu, mem = [], []
    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(handles)))) as pool:
        prev = read_all(pool)
        next_tick = time.monotonic()
        for _ in range(ticks):
            next_tick += period
            time.sleep(max(0.0, next_tick - time.monotonic()))
            cur = read_all(pool)
            used = math.fsum(max(b[1] - a[1], 0) for a, b in zip(prev, cur))
            # each container's reading has its own timestamp; use the mean span
            span = math.fsum(b[0] - a[0] for a, b in zip(prev, cur)) / len(cur)
            cpu.append(used * 100.0 / span if span > 0 else 0.0)
            mem.append(math.fsum(r[2] for r in cur) / (1024 * 1024))
            prev = cur
    return math.fsum(cpu) / len(cpu), math.fsum(mem) / len(mem)
