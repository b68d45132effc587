"""Command lines for the in-node measurement tools and parsers for their output."""

import json
import re
from dataclasses import dataclass
from typing import Callable

from ..errors import MeasurementError, ToolMissing

_PING_REPLY = re.compile(r"icmp_seq=(\d+)\b.*?\btime[=<]+\s*([\d.]+)\s*ms")
_PING_SUMMARY = re.compile(r"(\d+) packets transmitted, (\d+) (?:packets )?received")

# exit codes and messages engines and shells use for a missing executable
_MISSING = ("executable file not found", "no such file or directory", "command not found", "not found in $path")


def ping_command(addr, count, interval_s=0.2, wait_s=2):
    return ["ping", "-n", "-c", str(count), "-i", str(interval_s), "-W", str(wait_s), addr]


def iperf3_server_command(port):
    return ["iperf3", "-s", "-1", "-J", "-p", str(port)]


def iperf3_client_command(addr, rate_mbps, duration_s, port):
    return [
        "iperf3", "-c", addr, "-u",
        "-b", f"{rate_mbps:g}M",
        "-t", str(int(duration_s)),
        "-p", str(port),
        "-J",
    ]


def check_tool(result, tool):
    """Raise :class:`ToolMissing` when ``result`` says the binary is absent."""
    if result.ok:
        return
    text = (result.stderr + result.stdout).lower()
    if result.exit_code in (126, 127) or any(m in text for m in _MISSING):
        detail = result.stderr.strip() or result.stdout.strip()
        raise ToolMissing(f"{tool} is not available in the node image: {detail}")


def parse_ping(text):
    """Per-echo RTTs in sequence order, ``None`` for echoes never answered.

    Returns ``(rtts, transmitted)``; ``transmitted`` comes from the summary
    line when present.
    """
    replies = {}
    for m in _PING_REPLY.finditer(text):
        seq = int(m.group(1))
        replies.setdefault(seq, float(m.group(2)))
    summary = _PING_SUMMARY.search(text)
    transmitted = int(summary.group(1)) if summary else (max(replies) if replies else 0)
    first = 0 if 0 in replies else 1  # BSD-style pings count from zero
    rtts = [replies.get(seq) for seq in range(first, first + transmitted)]
    return rtts, transmitted


def parse_iperf3_receiver(text, duration_s=None):
    """Per-second received Mbps from an ``iperf3 -s -J`` report.

    The server is the receiving side of a UDP test, so its interval sums are
    receiver throughput.  Intervals shorter than half a second (the tail an
    iperf3 server often reports after the sender stops) are dropped.
    """
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise MeasurementError(f"iperf3 output is not JSON: {text[:200]!r}") from exc
    if "server_output_json" in doc:
        doc = doc["server_output_json"]
    if doc.get("error") and not doc.get("intervals"):
        raise MeasurementError(f"iperf3: {doc['error']}")
    samples = []
    for interval in doc.get("intervals", []):
        s = interval.get("sum", {})
        length = s.get("seconds", s.get("end", 0) - s.get("start", 0))
        if length < 0.5:
            continue
        second = int(round(s.get("start", 0)))
        samples.append((second, max(s.get("bits_per_second", 0.0), 0.0) / 1e6))
    samples.sort()
    if duration_s is not None:
        samples = [x for x in samples if x[0] < duration_s]
    return samples


@dataclass(frozen=True)
class TrafficTool:
    """How to start a receiver and a constant-rate UDP sender inside nodes.

    ``server(port)`` and ``client(addr, rate_mbps, duration_s, port)`` return
    argv lists; ``parse(stdout, duration_s)`` turns the receiver's output
    into ``(second, mbps)`` samples.
    """

    name: str
    server: Callable
    client: Callable
    parse: Callable = parse_iperf3_receiver


IPERF3 = TrafficTool("iperf3", iperf3_server_command, iperf3_client_command)
