"""Turns a validated topology into running containers and links.

:class:`Orchestrator` owns the bring-up order (containers, management bus,
data links, per-kind node setup) and the rollback that undoes a partial
bring-up.  The runtime, fabric and switch-management pieces are injected so
the sequencing can be exercised without a kernel or an engine.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from . import config
from .errors import (
    ControllerConnectTimeout,
    InvalidState,
    NodeNotRunning,
    NoSuchHost,
    NoSuchNode,
    NoSuchSwitch,
    NotAController,
    OrchestrationError,
    PreconditionError,
    RollbackFailed,
    VemulError,
)
from .fabric import Fabric, LinkHandle, check_privileges
from .ovsdb import OvsdbClient
from .runtime import NodeHandle, NodeState, Runtime, new_run_id
from .topology import LinkClass, LinkModel, LinkSpec, NodeKind, NodeSpec, Topology, natural_key, validate

log = logging.getLogger(__name__)


class Phase(str, Enum):
    BUILDING = "building"
    UP = "up"
    TEARING_DOWN = "tearing-down"
    DOWN = "down"


@dataclass(frozen=True)
class ControllerTarget:
    ip: str
    port: int = config.OPENFLOW_PORT
    transport: str = "tcp"

    def __str__(self):
        return f"{self.transport}:{self.ip}:{self.port}"

    @classmethod
    def parse(cls, text):
        transport, ip, port = text.split(":")
        if transport != "tcp":
            raise ValueError(f"unsupported controller transport {transport!r}")
        return cls(ip, int(port))


@dataclass(eq=False)
class Emulation:
    run_id: str
    topology: Topology
    handles: dict[str, NodeHandle] = field(default_factory=dict)
    links: dict[str, LinkHandle] = field(default_factory=dict)
    bus: LinkHandle | None = None
    phase: Phase = Phase.BUILDING
    history: list[Phase] = field(default_factory=list)
    runtime: object = field(default=None, repr=False)
    fabric: object = field(default=None, repr=False)
    orchestrator: Orchestrator | None = field(default=None, repr=False)
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    def __post_init__(self):
        self.history.append(self.phase)

    def _enter(self, phase):
        self.phase = phase
        self.history.append(phase)

    def handle(self, name) -> NodeHandle:
        try:
            return self.handles[name]
        except KeyError:
            raise NoSuchNode(f"no node named {name!r}") from None

    def mgmt_address(self, name):
        return self.fabric.mgmt_address(name)

    def down(self):
        return self.orchestrator.down(self)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.down()


def wait_tcp(ip, port, timeout):
    """True once something accepts on ``ip:port``, False after ``timeout`` s."""
    deadline = time.monotonic() + timeout
    while True:
        try:
            socket.create_connection((ip, port), timeout=min(2.0, max(timeout, 0.1))).close()
            return True
        except OSError:
            if time.monotonic() >= deadline:
                return False
            time.sleep(0.5)


class Orchestrator:
    def __init__(
        self,
        engine=None,
        *,
        runtime_factory=None,
        fabric_factory=None,
        ovsdb_connect=None,
        controller_ready=None,
        mgmt_subnet=None,
        datapath=config.OVS_DATAPATH,
        workers=8,
        ready_timeout=config.CONTROLLER_READY_TIMEOUT_S,
        connect_timeout=config.CONTROLLER_CONNECT_TIMEOUT_S,
        check_privileges=True,
    ):
        self.engine = engine
        self.runtime_factory = runtime_factory or (lambda run_id: Runtime(run_id, engine=self.engine))
        self.fabric_factory = fabric_factory or (
            lambda run_id, runtime: Fabric(run_id, runtime.pid, mgmt_subnet=mgmt_subnet)
        )
        self.ovsdb_connect = ovsdb_connect or (lambda ip: OvsdbClient.wait(ip, timeout=connect_timeout))
        self.controller_ready = controller_ready or (
            lambda ip: wait_tcp(ip, config.OPENFLOW_PORT, self.ready_timeout)
        )
        self.datapath = None if datapath in (None, "", "system") else datapath
        self.workers = workers
        self.ready_timeout = ready_timeout
        self.connect_timeout = connect_timeout
        self.check_privileges = check_privileges

    # bring-up

    def up(self, topology: Topology, run_id=None) -> Emulation:
        problems = validate(topology)
        if problems:
            raise PreconditionError("invalid topology: " + "; ".join(map(str, problems)))
        if self.check_privileges:
            check_privileges()
        run_id = run_id or new_run_id()
        runtime = self.runtime_factory(run_id)
        emu = Emulation(run_id, topology.copy(), runtime=runtime, orchestrator=self)
        emu.fabric = self.fabric_factory(run_id, runtime)
        with emu.lock:
            try:
                self._create_containers(emu, emu.topology.nodes)
                self._build_bus(emu)
                for spec in emu.topology.links:
                    self._create_link(emu, spec)
                self._bring_up(emu)
            except BaseException as exc:
                self._rollback(emu, exc)
                raise  # _rollback raises; this keeps linters quiet
            emu._enter(Phase.UP)
        log.info("run %s up: %d nodes, %d links", run_id, len(emu.handles), len(emu.links))
        return emu

    def _create_containers(self, emu, specs):
        def create(spec):
            try:
                return spec.name, emu.runtime.create_container(spec), None
            except Exception as exc:
                return spec.name, None, exc

        workers = max(1, min(self.workers, len(specs)))
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="vemul-create") as pool:
            results = list(pool.map(create, specs))
        failed = None
        for name, handle, exc in results:  # topology order
            if handle is not None:
                emu.handles[name] = handle
            elif failed is None:
                failed = (name, exc)
        if failed:
            raise OrchestrationError(failed[0], failed[1]) from failed[1]

    def _build_bus(self, emu):
        members = [emu.handles[n.name] for n in emu.topology.nodes]
        if len(members) < 2:
            return
        try:
            emu.bus = emu.fabric.create_bus("mgmt", members, mgmt=True)
        except VemulError as exc:
            raise OrchestrationError("mgmt", exc) from exc
        for h in members:
            h.mgmt_ip = emu.fabric.mgmt_address(h.node_name)

    def _create_link(self, emu, spec: LinkSpec):
        fab = emu.fabric
        try:
            if spec.topology_class is LinkClass.BUS:
                members = [emu.handles[m] for m in spec.members]
                handle = fab.create_bus(spec.name, members, mgmt=False)
            elif spec.model is LinkModel.VETH:
                handle = fab.create_veth_link(spec.name, emu.handles[spec.endpoint_a], emu.handles[spec.endpoint_b])
            else:
                handle = fab.create_tunnel_link(
                    spec.name,
                    emu.handles[spec.endpoint_a],
                    emu.handles[spec.endpoint_b],
                    spec.model,
                    spec.tunnel_key,
                )
        except VemulError as exc:
            raise OrchestrationError(spec.name, exc) from exc
        emu.links[spec.name] = handle
        return handle

    def _bring_up(self, emu):
        topo = emu.topology
        for spec in topo.controllers:
            self._await_controller(emu, spec.name)
        for spec in topo.switches:
            self._setup_switch(emu, spec.name)
        for spec in topo.hosts:
            self._setup_host(emu, spec)

    def _await_controller(self, emu, name):
        ip = emu.fabric.mgmt_address(name)
        if ip is None:
            raise OrchestrationError(name, NodeNotRunning("controller has no management address"))
        if not self.controller_ready(ip):
            raise OrchestrationError(
                name, ControllerConnectTimeout(f"nothing accepted on {ip}:{config.OPENFLOW_PORT} within {self.ready_timeout:.0f} s")
            )

    def _switch_client(self, emu, name):
        ip = emu.fabric.mgmt_address(name)
        if ip is None:
            raise NodeNotRunning(f"{name} has no management address")
        return self.ovsdb_connect(ip)

    def _data_ports(self, emu, name):
        ports = [b.ifname for h in emu.links.values() for b in h.bindings if b.node_name == name]
        return sorted(ports, key=natural_key)

    def _setup_switch(self, emu, name):
        try:
            client = self._switch_client(emu, name)
            try:
                client.ensure_bridge(config.OPER_BRIDGE, self.datapath)
                for ifname in self._data_ports(emu, name):
                    client.add_port(config.OPER_BRIDGE, ifname)
            finally:
                client.close()
        except VemulError as exc:
            raise OrchestrationError(name, exc) from exc

    def _setup_host(self, emu, spec: NodeSpec):
        if spec.ip_config is None:
            return
        if "data0" not in self._data_ports(emu, spec.name):
            return
        try:
            emu.fabric.assign_address(emu.handles[spec.name], "data0", spec.ip_config.cidr)
        except VemulError as exc:
            raise OrchestrationError(spec.name, exc) from exc

    # teardown

    def _teardown(self, emu):
        """Destroy links then containers; returns identifiers of any residue."""
        for name, handle in reversed(list(emu.links.items())):
            try:
                emu.fabric.destroy_link(handle)
            except Exception as exc:
                log.warning("destroying link %s: %s", name, exc)
        if emu.bus is not None:
            try:
                emu.fabric.destroy_link(emu.bus)
            except Exception as exc:
                log.warning("destroying management bus: %s", exc)
        errors = {}

        def destroy(handle):
            try:
                emu.runtime.destroy_container(handle)
            except Exception as exc:
                errors[handle.node_name] = exc

        handles = list(emu.handles.values())
        if handles:
            with ThreadPoolExecutor(max_workers=max(1, min(self.workers, len(handles)))) as pool:
                list(pool.map(destroy, handles))
        try:
            emu.fabric.close()
        except Exception as exc:
            log.warning("closing fabric: %s", exc)
        residue = []
        try:
            for h in emu.runtime.list_managed(emu.run_id):
                residue.append(f"container {h.node_name} ({h.container_id[:12]})")
        except Exception as exc:
            residue.extend(f"container {n}: {e}" for n, e in errors.items())
            log.warning("could not list residue of run %s: %s", emu.run_id, exc)
        return residue

    def _rollback(self, emu, cause):
        log.warning("bring-up of run %s failed (%s); rolling back", emu.run_id, cause)
        emu._enter(Phase.TEARING_DOWN)
        residue = self._teardown(emu)
        emu._enter(Phase.DOWN)
        if residue:
            raise RollbackFailed(residue, cause) from cause
        if isinstance(cause, VemulError) or not isinstance(cause, Exception):
            raise cause
        raise OrchestrationError("up", cause) from cause

    def down(self, emu: Emulation):
        """Tear everything down; safe to call more than once."""
        with emu.lock:
            if emu.phase is Phase.DOWN:
                return []
            emu._enter(Phase.TEARING_DOWN)
            residue = self._teardown(emu)
            emu.links.clear()
            emu.bus = None
            emu._enter(Phase.DOWN)
        if residue:
            log.error("run %s left residue: %s", emu.run_id, ", ".join(residue))
        return residue

    # controller attachment

    def set_controller(self, emu, switch_name, target, bridge=config.OPER_BRIDGE, timeout=None):
        timeout = self.connect_timeout if timeout is None else timeout
        if isinstance(target, str):
            target = ControllerTarget.parse(target)
        with emu.lock:
            self._require_up(emu)
            handle = self._switch(emu, switch_name)
            if handle.state is not NodeState.RUNNING:
                raise NodeNotRunning(f"{switch_name} is {handle.state.value}")
            client = self._switch_client(emu, switch_name)
            try:
                client.set_controller(bridge, str(target))
                deadline = time.monotonic() + timeout
                while True:
                    if any(ok for t, ok in client.controller_status(bridge) if t == str(target)):
                        return
                    if time.monotonic() >= deadline:
                        raise ControllerConnectTimeout(f"{switch_name} did not connect to {target} within {timeout:g} s")
                    time.sleep(0.25)
            finally:
                client.close()

    def connect_switches(self, emu, controller_name=None, bridge=config.OPER_BRIDGE, timeout=None):
        """Point every switch at one controller; with no name the run must have exactly one."""
        if controller_name is None:
            names = [n.name for n in emu.topology.controllers]
            if len(names) != 1:
                raise PreconditionError(f"expected exactly one controller, found {len(names)}")
            controller_name = names[0]
        target = self.get_controller_endpoint(emu, controller_name)
        for spec in sorted(emu.topology.switches, key=lambda n: natural_key(n.name)):
            self.set_controller(emu, spec.name, target, bridge, timeout)
        return target

    def controller_status(self, emu, switch_name, bridge=config.OPER_BRIDGE):
        self._switch(emu, switch_name)
        client = self._switch_client(emu, switch_name)
        try:
            return client.controller_status(bridge)
        finally:
            client.close()

    def get_controller_endpoint(self, emu, controller_name) -> ControllerTarget:
        spec = self._spec(emu, controller_name)
        if spec.kind is not NodeKind.CONTROLLER:
            raise NotAController(f"{controller_name} is a {spec.kind.value}, not a controller")
        ip = emu.fabric.mgmt_address(controller_name)
        if ip is None:
            raise NodeNotRunning(f"{controller_name} has no management address")
        return ControllerTarget(ip)

    # live changes

    def add_node_live(self, emu, spec: NodeSpec) -> NodeHandle:
        with emu.lock:
            self._require_up(emu)
            emu.topology.add_node(spec)
            spec = emu.topology.node(spec.name)
            try:
                handle = emu.runtime.create_container(spec)
            except BaseException:
                emu.topology.remove_node(spec.name)
                raise
            emu.handles[spec.name] = handle
            try:
                if emu.bus is None:
                    self._build_bus(emu)
                else:
                    emu.fabric.attach_to_bus(emu.bus, handle)
                    handle.mgmt_ip = emu.fabric.mgmt_address(spec.name)
                if spec.kind is NodeKind.SWITCH:
                    self._setup_switch(emu, spec.name)
                elif spec.kind is NodeKind.CONTROLLER:
                    self._await_controller(emu, spec.name)
            except BaseException:
                self._drop_node(emu, spec.name)
                raise
            return handle

    def remove_node_live(self, emu, name):
        with emu.lock:
            self._require_up(emu)
            self._spec(emu, name)
            self._drop_node(emu, name)

    def _drop_node(self, emu, name):
        for spec in list(emu.topology.links_of(name)):
            handle = emu.links.pop(spec.name, None)
            if handle is not None:
                emu.fabric.destroy_link(handle)
        if emu.bus is not None and name in emu.bus.root_legs:
            emu.fabric.detach_from_bus(emu.bus, name)
        handle = emu.handles.pop(name, None)
        if handle is not None:
            emu.runtime.destroy_container(handle)
        emu.fabric.forget_node(name)
        emu.topology.remove_node(name)

    def add_link_live(self, emu, spec: LinkSpec) -> LinkHandle:
        with emu.lock:
            self._require_up(emu)
            emu.topology.add_link(spec)
            spec = emu.topology.get_link(spec.name)
            try:
                handle = self._create_link(emu, spec)
                for node in spec.nodes:
                    kind = emu.topology.node(node).kind
                    if kind is NodeKind.SWITCH:
                        self._setup_switch(emu, node)
                    elif kind is NodeKind.HOST:
                        self._setup_host(emu, emu.topology.node(node))
            except BaseException:
                dead = emu.links.pop(spec.name, None)
                if dead is not None:
                    emu.fabric.destroy_link(dead)
                emu.topology.remove_link(spec.name)
                raise
            return handle

    def remove_link_live(self, emu, name):
        with emu.lock:
            self._require_up(emu)
            handle = self._link(emu, name)
            emu.fabric.destroy_link(handle)
            emu.links.pop(name, None)
            emu.topology.remove_link(name)

    def set_link_state(self, emu, name, desired):
        with emu.lock:
            self._require_up(emu)
            emu.fabric.set_link_state(self._link(emu, name), desired)

    def pause(self, emu, name):
        with emu.lock:
            emu.runtime.pause_node(emu.handle(name))

    def resume(self, emu, name):
        with emu.lock:
            emu.runtime.resume_node(emu.handle(name))

    def update_limits(self, emu, name, limits):
        with emu.lock:
            emu.runtime.update_limits(emu.handle(name), limits)

    def exec(self, emu, name, argv, timeout_ms=30_000):
        return emu.runtime.exec_in_node(emu.handle(name), argv, timeout_ms=timeout_ms)

    def host(self, emu, name) -> NodeHandle:
        spec = emu.topology.node(name) if emu.topology.has_node(name) else None
        if spec is None or spec.kind is not NodeKind.HOST:
            raise NoSuchHost(f"no host named {name!r}")
        return emu.handle(name)

    # lookups

    def _require_up(self, emu):
        if emu.phase is not Phase.UP:
            raise InvalidState(f"run {emu.run_id} is {emu.phase.value}")

    def _spec(self, emu, name):
        try:
            return emu.topology.node(name)
        except KeyError:
            raise NoSuchNode(f"no node named {name!r}") from None

    def _switch(self, emu, name):
        spec = emu.topology.node(name) if emu.topology.has_node(name) else None
        if spec is None or spec.kind is not NodeKind.SWITCH:
            raise NoSuchSwitch(f"no switch named {name!r}")
        return emu.handle(name)

    def _link(self, emu, name):
        try:
            return emu.links[name]
        except KeyError:
            raise NoSuchNode(f"no link named {name!r}") from None


_default = None


def default_orchestrator():
    global _default
    if _default is None:
        _default = Orchestrator()
    return _default


def up(topology, **kwargs) -> Emulation:
    return (Orchestrator(**kwargs) if kwargs else default_orchestrator()).up(topology)


def down(emulation):
    return emulation.orchestrator.down(emulation)


def set_controller(emulation, switch_name, target, bridge=config.OPER_BRIDGE):
    return emulation.orchestrator.set_controller(emulation, switch_name, target, bridge)


def get_controller_endpoint(emulation, controller_name):
    return emulation.orchestrator.get_controller_endpoint(emulation, controller_name)


def add_node_live(emulation, spec):
    return emulation.orchestrator.add_node_live(emulation, spec)


def remove_node_live(emulation, name):
    return emulation.orchestrator.remove_node_live(emulation, name)
