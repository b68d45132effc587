"""Foreground throughput under background load on the 5-switch, 16-host tree."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from ..errors import PreconditionError
from ..topology import generate_fidelity_tree, with_controller
from . import tools
from .measure import Flow, ThroughputSeries, measure_first_ping, run_flows, run_udp_flow

log = logging.getLogger(__name__)

FOREGROUND = ("h1", "h16")
# each pair crosses the core switch: h2..h4 sit under s2, h9..h11 under s4, and so on
BACKGROUND_PAIRS = tuple((f"h{i}", f"h{i + 7}") for i in range(2, 9))
SATURATING_MBPS = 100_000.0


@dataclass
class FidelityResult:
    foreground: ThroughputSeries
    background: list[ThroughputSeries] = field(default_factory=list)
    scale: float = 1.0
    requested_total_mbps: float = 0.0
    capacity_mbps: float | None = None

    @property
    def series(self):
        return [self.foreground, *self.background]

    @property
    def load_fraction(self):
        """Requested load over measured capacity, when capacity was measured."""
        if not self.capacity_mbps:
            return None
        return self.requested_total_mbps / self.capacity_mbps


def fidelity_topology():
    return with_controller(generate_fidelity_tree())


def fidelity_flows(fg_rate_mbps, bg_rate_mbps, scale):
    src, dst = FOREGROUND
    flows = [Flow(f"{src}->{dst}", src, dst, fg_rate_mbps * scale, "foreground")]
    flows += [Flow(f"{a}->{b}", a, b, bg_rate_mbps * scale, "background") for a, b in BACKGROUND_PAIRS]
    return flows


def measure_switching_capacity(emu, src=FOREGROUND[0], dst=FOREGROUND[1], duration_s=10, tool=tools.IPERF3):
    """Mean receiver throughput of one flow offered far more than any link carries."""
    return run_udp_flow(emu, src, dst, SATURATING_MBPS, duration_s, tool=tool).mean_mbps


def _warm_paths(emu, flows, ping_command):
    # a reactive controller installs rules on the first packets; do that
    # before the clock starts so second 0 is not a flow-setup artefact
    for f in flows:
        measure_first_ping(emu, f.src, f.dst, 2, command=ping_command)


def run_fidelity_scenario(
    fg_rate_mbps,
    bg_rate_mbps,
    duration_s,
    scale=1.0,
    *,
    orchestrator=None,
    emulation=None,
    measure_capacity=False,
    capacity_duration_s=10,
    traffic=tools.IPERF3,
    ping_command=None,
) -> FidelityResult:
    """Run the foreground flow and the seven background pairs concurrently.

    Rates are multiplied by ``scale`` before use.  Pass ``emulation`` to reuse
    a running fidelity tree (with its switches already on a controller);
    otherwise one is built and torn down here.
    """
    if not 0 < scale <= 1:
        raise PreconditionError(f"scale must be in (0, 1], got {scale}")
    if fg_rate_mbps <= 0 or bg_rate_mbps <= 0:
        raise PreconditionError("foreground and background rates must be positive")
    if duration_s <= 0:
        raise PreconditionError("duration must be positive")
    flows = fidelity_flows(fg_rate_mbps, bg_rate_mbps, scale)

    own = emulation is None
    if own:
        from ..orchestrator import default_orchestrator

        orch = orchestrator or default_orchestrator()
        emulation = orch.up(fidelity_topology())
    try:
        if own:
            emulation.orchestrator.connect_switches(emulation)
        _warm_paths(emulation, flows, ping_command)
        capacity = None
        if measure_capacity:
            capacity = measure_switching_capacity(emulation, duration_s=capacity_duration_s, tool=traffic)
            log.info("measured switching capacity: %.1f Mbps", capacity)
        series = run_flows(emulation, flows, duration_s, tool=traffic)
    finally:
        if own:
            emulation.orchestrator.down(emulation)
    requested = math.fsum(f.rate_mbps for f in flows)
    if capacity:
        log.info("requested %.1f Mbps against %.1f Mbps capacity", requested, capacity)
    return FidelityResult(series[0], series[1:], scale, requested, capacity)
