"""Container lifecycle on the local engine: one container per emulated node."""

from __future__ import annotations

import logging
import threading
import time
import uuid
from dataclasses import dataclass
from enum import Enum

from . import config
from .engine import EngineClient
from .errors import (
    EngineError,
    ImageNotFound,
    InvalidState,
    LimitRejected,
    NameConflict,
    NodeNotRunning,
)
from .topology import NodeKind, NodeSpec

log = logging.getLogger(__name__)

CPU_PERIOD_US = 100_000


class NodeState(str, Enum):
    CREATED = "created"
    RUNNING = "running"
    PAUSED = "paused"
    REMOVED = "removed"


_ENGINE_STATES = {
    "created": NodeState.CREATED,
    "running": NodeState.RUNNING,
    "paused": NodeState.PAUSED,
    "restarting": NodeState.RUNNING,
    "exited": NodeState.CREATED,
    "dead": NodeState.CREATED,
    "removing": NodeState.REMOVED,
}


@dataclass
class NodeHandle:
    node_name: str
    container_id: str
    kind: NodeKind = NodeKind.HOST
    run_id: str = ""
    mgmt_ip: str | None = None
    state: NodeState = NodeState.CREATED


@dataclass(frozen=True)
class StatSnapshot:
    timestamp: float  # monotonic milliseconds
    cpu_percent: float
    memory_bytes: int


@dataclass(frozen=True)
class ExecResult:
    exit_code: int
    stdout: str
    stderr: str

    @property
    def ok(self):
        return self.exit_code == 0


def new_run_id():
    return uuid.uuid4().hex[:10]


def container_name(run_id, node_name):
    return f"vemul-{run_id}-{node_name}"


def resident_memory(stats):
    """Memory usage minus reclaimable page cache, as ``docker stats`` shows it."""
    mem = stats.get("memory_stats") or {}
    usage = mem.get("usage", 0)
    detail = mem.get("stats") or {}
    for key in ("inactive_file", "total_inactive_file", "cache"):
        if key in detail:
            return max(usage - detail[key], 0)
    return usage


def cpu_usage_ns(stats):
    return ((stats.get("cpu_stats") or {}).get("cpu_usage") or {}).get("total_usage", 0)


def cpu_percent(usage_a_ns, usage_b_ns, wall_a_ns, wall_b_ns):
    """CPU time consumed over wall time, as a percent of one core."""
    wall = wall_b_ns - wall_a_ns
    if wall <= 0:
        raise ValueError("sampling window must be positive")
    return max(usage_b_ns - usage_a_ns, 0) * 100.0 / wall


class Runtime:
    """Adapter over :class:`EngineClient` that speaks in :class:`NodeHandle`.

    Every container gets the ``vemul.owner`` label set to the run id so that
    :meth:`list_managed` can find strays from crashed runs.
    """

    def __init__(self, run_id=None, engine=None, defaults=None, pull=True):
        self.run_id = run_id or new_run_id()
        self.engine = engine or EngineClient()
        self.defaults = defaults or config.kind_defaults()
        self.pull = pull
        self._last_ts = {}
        self._ts_lock = threading.Lock()

    def _body(self, spec: NodeSpec):
        d = self.defaults[spec.kind]
        host_config = {
            "NetworkMode": "none",
            "Privileged": d.privileged,
            "CapAdd": list(d.cap_add),
        }
        limits = spec.limits
        if limits is not None:
            if limits.cpu_quota is not None:
                host_config["CpuPeriod"] = CPU_PERIOD_US
                host_config["CpuQuota"] = int(round(limits.cpu_quota * CPU_PERIOD_US))
            if limits.memory_bytes is not None:
                host_config["Memory"] = int(limits.memory_bytes)
        body = {
            "Image": spec.image or d.image,
            "Hostname": spec.name,
            "Labels": {
                config.OWNER_LABEL: self.run_id,
                config.NODE_LABEL: spec.name,
                config.KIND_LABEL: spec.kind.value,
            },
            "Env": list(d.env),
            "HostConfig": host_config,
        }
        if d.command:
            body["Cmd"] = list(d.command)
        return body

    def create_container(self, spec: NodeSpec) -> NodeHandle:
        body = self._body(spec)
        name = container_name(self.run_id, spec.name)
        try:
            cid = self._create(name, body)
        except EngineError as exc:
            if exc.status == 409:
                raise NameConflict(f"container {name} already exists") from exc
            if spec.limits is not None and exc.status in (400, 500) and _mentions_limits(str(exc)):
                raise LimitRejected(f"{spec.name}: {exc}") from exc
            raise
        handle = NodeHandle(spec.name, cid, spec.kind, self.run_id)
        try:
            self.engine.start(cid)
        except Exception:
            self._force_remove(cid)
            raise
        handle.state = NodeState.RUNNING
        log.debug("started %s as %s", spec.name, cid[:12])
        return handle

    def _create(self, name, body):
        image = body["Image"]
        try:
            return self.engine.create_container(name, body)
        except EngineError as exc:
            if exc.status != 404:
                raise
            if not self.pull:
                raise ImageNotFound(image) from exc
        try:
            self.engine.pull(image)
        except EngineError as exc:
            raise ImageNotFound(f"{image}: {exc}") from exc
        try:
            return self.engine.create_container(name, body)
        except EngineError as exc:
            if exc.status == 404:
                raise ImageNotFound(image) from exc
            raise

    def _force_remove(self, cid):
        try:
            self.engine.remove(cid, force=True)
        except EngineError as exc:
            if exc.status != 404:
                log.warning("could not remove %s: %s", cid[:12], exc)

    def destroy_container(self, handle: NodeHandle):
        if handle.state is NodeState.REMOVED:
            return
        try:
            self.engine.remove(handle.container_id, force=True)
        except EngineError as exc:
            if exc.status != 404:
                raise
        handle.state = NodeState.REMOVED
        self._last_ts.pop(handle.container_id, None)

    def _require_running(self, handle):
        if handle.state is not NodeState.RUNNING:
            raise NodeNotRunning(f"{handle.node_name} is {handle.state.value}")

    def exec_in_node(self, handle: NodeHandle, argv, timeout_ms=30_000) -> ExecResult:
        self._require_running(handle)
        try:
            exec_id = self.engine.exec_create(handle.container_id, argv)
        except EngineError as exc:
            if exc.status in (404, 409):
                raise NodeNotRunning(f"{handle.node_name}: {exc}") from exc
            raise
        timeout_s = None if timeout_ms is None else timeout_ms / 1000.0
        out, err = self.engine.exec_start(exec_id, timeout_s, argv=list(argv))
        code = self.engine.exec_inspect(exec_id).get("ExitCode")
        return ExecResult(
            code if code is not None else -1,
            out.decode("utf-8", "replace"),
            err.decode("utf-8", "replace"),
        )

    def pause_node(self, handle: NodeHandle):
        if handle.state is not NodeState.RUNNING:
            raise InvalidState(f"cannot pause {handle.node_name} in state {handle.state.value}")
        self.engine.pause(handle.container_id)
        handle.state = NodeState.PAUSED

    def resume_node(self, handle: NodeHandle):
        if handle.state is not NodeState.PAUSED:
            raise InvalidState(f"cannot resume {handle.node_name} in state {handle.state.value}")
        self.engine.unpause(handle.container_id)
        handle.state = NodeState.RUNNING

    def _stats(self, handle):
        try:
            return self.engine.stats(handle.container_id)
        except EngineError as exc:
            if exc.status in (404, 409):
                raise NodeNotRunning(f"{handle.node_name}: {exc}") from exc
            raise

    def counters(self, handle: NodeHandle):
        """One raw reading: ``(monotonic_ns, cpu_usage_ns, memory_bytes)``."""
        self._require_running(handle)
        stats = self._stats(handle)
        return time.monotonic_ns(), cpu_usage_ns(stats), resident_memory(stats)

    def sample_stats(self, handle: NodeHandle, window_ms=100) -> StatSnapshot:
        """Two counter readings ``window_ms`` apart (at least 100 ms)."""
        self._require_running(handle)
        window_ms = max(window_ms, 100)
        first = self._stats(handle)
        t0 = time.monotonic_ns()
        time.sleep(window_ms / 1000.0)
        second = self._stats(handle)
        t1 = time.monotonic_ns()
        pct = cpu_percent(cpu_usage_ns(first), cpu_usage_ns(second), t0, t1)
        return StatSnapshot(self._stamp(handle, t1), pct, resident_memory(second))

    def _stamp(self, handle, now_ns):
        ts = now_ns / 1e6
        with self._ts_lock:
            last = self._last_ts.get(handle.container_id)
            if last is not None and ts <= last:
                ts = last + 0.001
            self._last_ts[handle.container_id] = ts
        return ts

    def list_managed(self, run_id=None) -> list[NodeHandle]:
        """Containers carrying the ownership label; all runs unless ``run_id``."""
        label = config.OWNER_LABEL if run_id is None else f"{config.OWNER_LABEL}={run_id}"
        out = []
        for c in self.engine.list(labels=[label]) or []:
            labels = c.get("Labels") or {}
            if config.OWNER_LABEL not in labels:
                continue
            try:
                kind = NodeKind(labels.get(config.KIND_LABEL, "host"))
            except ValueError:
                kind = NodeKind.HOST
            out.append(
                NodeHandle(
                    node_name=labels.get(config.NODE_LABEL, c["Id"][:12]),
                    container_id=c["Id"],
                    kind=kind,
                    run_id=labels[config.OWNER_LABEL],
                    state=_ENGINE_STATES.get(c.get("State", ""), NodeState.CREATED),
                )
            )
        return out

    def inspect(self, handle: NodeHandle):
        try:
            return self.engine.inspect(handle.container_id)
        except EngineError as exc:
            if exc.status == 404:
                raise NodeNotRunning(f"{handle.node_name}: container is gone") from exc
            raise

    def pid(self, handle: NodeHandle) -> int:
        return int(self.inspect(handle)["State"]["Pid"])

    def update_limits(self, handle: NodeHandle, limits):
        body = {}
        if limits.cpu_quota is not None:
            body["CpuPeriod"] = CPU_PERIOD_US
            body["CpuQuota"] = int(round(limits.cpu_quota * CPU_PERIOD_US))
        if limits.memory_bytes is not None:
            body["Memory"] = int(limits.memory_bytes)
            body["MemorySwap"] = -1
        try:
            self.engine.update(handle.container_id, body)
        except EngineError as exc:
            raise LimitRejected(f"{handle.node_name}: {exc}") from exc

    def sweep(self, run_id=None):
        """Remove every managed container (optionally one run); returns names."""
        removed = []
        for h in self.list_managed(run_id):
            self._force_remove(h.container_id)
            removed.append(f"{h.run_id}/{h.node_name}")
        return removed


def _mentions_limits(message):
    message = message.lower()
    return any(word in message for word in ("memory", "cpu", "quota", "nanocpus"))
