"""Virtual ports and links between container network namespaces.

Every namespace mutation goes through netlink (pyroute2) and is serialized
behind one process-wide lock: concurrent interface renames are the classic
way to corrupt a half-built topology.

Interfaces are born in the root namespace under throwaway names, moved into
the container namespace, and only then renamed to ``data<N>`` or ``mgmt0``.
Root-namespace names are derived from a hash of the run id so two runs on
the same host never collide.
"""

from __future__ import annotations

import errno
import hashlib
import ipaddress
import itertools
import logging
import os
import re
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum

from pyroute2 import IPRoute
from pyroute2.netlink.exceptions import NetlinkError

from . import config
from .errors import (
    AlreadyDestroyed,
    FabricError,
    IfnameCollision,
    KeyInUse,
    NamespaceUnresolvable,
    NodeNotRunning,
    PeerUnreachable,
    PreconditionError,
    PrivilegeDenied,
    SubnetExhausted,
)
from .topology import LinkModel

log = logging.getLogger(__name__)

MGMT_IFNAME = "mgmt0"
BUS = "bus"
VXLAN_PORT = 4789
GRE_KEY_FLAG = 0x2000
CAP_NET_ADMIN = 12

# one lock for every Fabric in the process: the kernel namespace is shared
_FABRIC_LOCK = threading.RLock()


class LinkState(str, Enum):
    UP = "up"
    DOWN = "down"
    DESTROYED = "destroyed"


@dataclass(frozen=True)
class PortBinding:
    node_name: str
    ifname: str
    mac: str
    addr: str | None = None  # "ip/prefix"


@dataclass
class LinkHandle:
    link_name: str
    model: str  # veth, gre-tunnel, vxlan-tunnel or bus
    bindings: list[PortBinding]
    state: LinkState = LinkState.UP
    key: int | None = None
    bridge: str | None = None  # root-namespace bridge of a bus
    root_legs: dict[str, str] = field(default_factory=dict)  # bus member -> root veth end
    mgmt: bool = False

    def binding(self, node_name):
        for b in self.bindings:
            if b.node_name == node_name:
                return b
        raise KeyError(node_name)


def mac_for(run_id, node_name, ifname):
    """Deterministic, locally administered unicast MAC."""
    digest = bytearray(hashlib.sha256(f"{run_id}/{node_name}/{ifname}".encode()).digest()[:6])
    digest[0] = (digest[0] | 0x02) & 0xFE
    return ":".join(f"{b:02x}" for b in digest)


def has_net_admin():
    if os.geteuid() == 0:
        return True
    try:
        with open("/proc/self/status") as fh:
            for line in fh:
                if line.startswith("CapEff:"):
                    return bool(int(line.split()[1], 16) >> CAP_NET_ADMIN & 1)
    except OSError:
        pass
    return False


def check_privileges():
    """Fail early, before any container exists, if netlink writes would be refused."""
    if not has_net_admin():
        raise PrivilegeDenied("CAP_NET_ADMIN is required to build links (run as root)")


def root_interfaces():
    """Names of every interface in the root namespace, sorted."""
    with IPRoute() as ipr:
        return sorted(l.get("ifname") for l in ipr.get_links())


def run_tag(run_id):
    """The 4 hex digits that prefix-tag a run's root-namespace interfaces."""
    return hashlib.sha256(run_id.encode()).hexdigest()[:4]


# bus bridges, bus legs and veth halves still waiting to be moved
_ROOT_NAME = re.compile(r"^[bmv]([0-9a-f]{4})[0-9a-f]{6}[ab]?$")


def sweep_root(run_ids=None):
    """Delete root-namespace interfaces left behind by crashed runs.

    Only names following this module's scheme are considered; with
    ``run_ids`` only those runs' tags are swept.  Returns the deleted names.
    """
    tags = None if run_ids is None else {run_tag(r) for r in run_ids}
    removed = []
    with _FABRIC_LOCK, IPRoute() as ipr:
        for link in ipr.get_links():
            name = link.get("ifname")
            m = _ROOT_NAME.match(name or "")
            if not m or (tags is not None and m.group(1) not in tags):
                continue
            try:
                with _netlink(name):
                    ipr.link("del", index=link["index"])
                removed.append(name)
            except FabricError as exc:
                # the peer of an already deleted veth vanishes with it
                log.debug("sweep %s: %s", name, exc)
    return removed


@contextmanager
def _netlink(subject):
    try:
        yield
    except NetlinkError as exc:
        if exc.code == errno.EPERM:
            raise PrivilegeDenied(f"{subject}: {exc}") from exc
        if exc.code == errno.EEXIST:
            raise IfnameCollision(f"{subject}: {exc}") from exc
        if exc.code == errno.EOPNOTSUPP:
            raise FabricError(f"{subject}: kernel does not support this link type ({exc})") from exc
        raise FabricError(f"{subject}: {exc}") from exc


class _Netns:
    """An open handle on a container's network namespace.

    Holding the fd keeps the namespace alive even if the container dies, so
    teardown never races the engine.
    """

    def __init__(self, node_name, pid):
        self.node_name = node_name
        try:
            self.fd = os.open(f"/proc/{pid}/ns/net", os.O_RDONLY)
        except OSError as exc:
            raise NamespaceUnresolvable(f"{node_name}: pid {pid}: {exc}") from exc
        try:
            self.ipr = IPRoute(netns=f"/proc/self/fd/{self.fd}")
        except Exception:
            os.close(self.fd)
            raise

    def index(self, ifname):
        found = self.ipr.link_lookup(ifname=ifname)
        return found[0] if found else None

    def interfaces(self):
        return {l.get("ifname"): l.get("address") for l in self.ipr.get_links()}

    def close(self):
        try:
            self.ipr.close()
        finally:
            os.close(self.fd)


class Fabric:
    """Creates veth pairs, tunnels and buses for one run.

    ``pid_of`` maps a node handle to the pid whose network namespace the
    node lives in (normally :meth:`Runtime.pid`).
    """

    def __init__(self, run_id, pid_of, mgmt_subnet=None):
        self.run_id = run_id
        self.pid_of = pid_of
        self.subnet = ipaddress.ip_network(mgmt_subnet or config.MGMT_SUBNET)
        self._hosts = self.subnet.hosts()
        self.gateway = next(self._hosts)
        self._tag = run_tag(run_id)
        self._seq = itertools.count()
        self._ns: dict[str, _Netns] = {}
        self._ports: dict[str, set[str]] = {}
        self._keys: set[int] = set()
        self._mgmt: dict[str, str] = {}
        self._root = None

    # bookkeeping

    @property
    def root(self):
        if self._root is None:
            self._root = IPRoute()
        return self._root

    def _tmpname(self, prefix):
        return f"{prefix}{self._tag}{next(self._seq):06x}"

    def _netns(self, handle):
        ns = self._ns.get(handle.node_name)
        if ns is None:
            try:
                pid = self.pid_of(handle)
            except NodeNotRunning as exc:
                raise NamespaceUnresolvable(f"{handle.node_name}: {exc}") from exc
            if not pid:
                raise NamespaceUnresolvable(f"{handle.node_name}: container has no process")
            ns = self._ns[handle.node_name] = _Netns(handle.node_name, pid)
        return ns

    def _claim_data(self, node_name):
        used = self._ports.setdefault(node_name, set())
        n = 0
        while f"data{n}" in used:
            n += 1
        used.add(f"data{n}")
        return f"data{n}"

    def _claim(self, node_name, ifname):
        used = self._ports.setdefault(node_name, set())
        if ifname in used:
            raise IfnameCollision(f"{node_name} already has {ifname}")
        used.add(ifname)
        return ifname

    def _release(self, node_name, ifname):
        self._ports.get(node_name, set()).discard(ifname)

    def _next_mgmt_address(self):
        try:
            return str(next(self._hosts))
        except StopIteration:
            raise SubnetExhausted(f"no addresses left in {self.subnet}") from None

    def mgmt_address(self, node_name):
        return self._mgmt.get(node_name)

    def ports(self, node_name):
        return sorted(self._ports.get(node_name, ()))

    def _port(self, node_name, ifname, addr=None):
        return PortBinding(node_name, ifname, mac_for(self.run_id, node_name, ifname), addr)

    def _move_in(self, tmp, ns, binding):
        """Move root-namespace ``tmp`` into ``ns`` as ``binding`` and bring it up."""
        idx = self.root.link_lookup(ifname=tmp)[0]
        self.root.link("set", index=idx, net_ns_fd=ns.fd)
        if ns.index(binding.ifname) is not None:
            raise IfnameCollision(f"{ns.node_name} already has {binding.ifname}")
        i = ns.index(tmp)
        ns.ipr.link("set", index=i, ifname=binding.ifname, address=binding.mac)
        if binding.addr:
            ip, prefix = binding.addr.split("/")
            ns.ipr.addr("add", index=i, address=ip, prefixlen=int(prefix))
        ns.ipr.link("set", index=i, state="up")

    def _delete_root(self, ifname):
        idx = self.root.link_lookup(ifname=ifname)
        if idx:
            self.root.link("del", index=idx[0])

    def _delete_in(self, node_name, *ifnames):
        ns = self._ns.get(node_name)
        if ns is None:
            return
        for ifname in ifnames:
            idx = ns.index(ifname)
            if idx is not None:
                ns.ipr.link("del", index=idx)

    def _quietly(self, what, fn, *args):
        try:
            fn(*args)
        except Exception as exc:  # cleanup must keep going
            log.warning("cleanup of %s failed: %s", what, exc)

    # veth

    def create_veth_link(self, name, node_a, node_b) -> LinkHandle:
        if node_a.node_name == node_b.node_name:
            raise IfnameCollision(f"{name}: both ends on {node_a.node_name}")
        with _FABRIC_LOCK:
            ns_a, ns_b = self._netns(node_a), self._netns(node_b)
            pa = self._port(node_a.node_name, self._claim_data(node_a.node_name))
            pb = self._port(node_b.node_name, self._claim_data(node_b.node_name))
            tmp_a, tmp_b = self._tmpname("v") + "a", self._tmpname("v") + "b"
            try:
                with _netlink(name):
                    self.root.link("add", ifname=tmp_a, kind="veth", peer={"ifname": tmp_b})
                    self._move_in(tmp_a, ns_a, pa)
                    self._move_in(tmp_b, ns_b, pb)
            except BaseException:
                self._quietly(tmp_a, self._delete_root, tmp_a)
                self._quietly(tmp_b, self._delete_root, tmp_b)
                self._quietly(name, self._delete_in, pa.node_name, tmp_a, pa.ifname)
                self._quietly(name, self._delete_in, pb.node_name, tmp_b, pb.ifname)
                self._release(pa.node_name, pa.ifname)
                self._release(pb.node_name, pb.ifname)
                raise
        log.debug("veth %s: %s/%s <-> %s/%s", name, pa.node_name, pa.ifname, pb.node_name, pb.ifname)
        return LinkHandle(name, LinkModel.VETH.value, [pa, pb])

    # tunnels

    def create_tunnel_link(self, name, node_a, node_b, kind, key) -> LinkHandle:
        kind = _tunnel_kind(kind)
        if node_a.node_name == node_b.node_name:
            raise IfnameCollision(f"{name}: both ends on {node_a.node_name}")
        with _FABRIC_LOCK:
            if key in self._keys:
                raise KeyInUse(f"{name}: tunnel key {key} already used in this run")
            addrs = {}
            for h in (node_a, node_b):
                addrs[h.node_name] = self._mgmt.get(h.node_name)
                if addrs[h.node_name] is None:
                    raise PeerUnreachable(f"{name}: {h.node_name} is not on the management bus")
            ends = [(node_a, node_b), (node_b, node_a)]
            made = []
            try:
                with _netlink(name):
                    for me, peer in ends:
                        ns = self._netns(me)
                        port = self._port(me.node_name, self._claim_data(me.node_name))
                        made.append(port)
                        attrs = _tunnel_attrs(
                            kind, key, addrs[me.node_name], addrs[peer.node_name], ns.index(MGMT_IFNAME)
                        )
                        ns.ipr.link("add", ifname=port.ifname, address=port.mac, **attrs)
                        ns.ipr.link("set", index=ns.index(port.ifname), state="up")
            except BaseException:
                for port in made:
                    self._quietly(name, self._delete_in, port.node_name, port.ifname)
                    self._release(port.node_name, port.ifname)
                raise
            self._keys.add(key)
        model = LinkModel.GRE.value if kind == "gre" else LinkModel.VXLAN.value
        return LinkHandle(name, model, made, key=key)

    # buses

    def create_bus(self, name, members, mgmt=True) -> LinkHandle:
        """A root-namespace bridge with one veth leg into every member.

        With ``mgmt`` the legs are named ``mgmt0`` and numbered from the
        management subnet; otherwise they are ordinary data ports.
        """
        if len(members) < 2:
            raise PreconditionError(f"bus {name} needs at least 2 members, got {len(members)}")
        with _FABRIC_LOCK:
            bridge = self._tmpname("b")
            handle = LinkHandle(name, BUS, [], bridge=bridge, mgmt=mgmt)
            try:
                with _netlink(name):
                    if mgmt:
                        self._check_gateway_free()
                    self.root.link("add", ifname=bridge, kind="bridge")
                    idx = self.root.link_lookup(ifname=bridge)[0]
                    self._bridge_no_netfilter(idx)
                    if mgmt:
                        self.root.addr(
                            "add", index=idx, address=str(self.gateway), prefixlen=self.subnet.prefixlen
                        )
                    self.root.link("set", index=idx, state="up")
                for m in members:
                    self._attach(handle, m)
            except BaseException:
                self._destroy_bus(handle)
                raise
        return handle

    def _check_gateway_free(self):
        gw = str(self.gateway)
        for a in self.root.get_addr(family=2):
            if a.get("IFA_ADDRESS") == gw:
                raise SubnetExhausted(
                    f"management gateway {gw} is already in use; set VEMUL_MGMT_SUBNET for this run"
                )

    def _bridge_no_netfilter(self, idx):
        # with br_netfilter loaded, a DROP forward policy would eat bridged frames
        try:
            self.root.link("set", index=idx, kind="bridge", br_nf_call_iptables=0)
        except (NetlinkError, ValueError, KeyError) as exc:
            log.debug("could not disable netfilter on bridge: %s", exc)

    def attach_to_bus(self, handle, node) -> PortBinding:
        """Add a live node to an existing bus."""
        if handle.state is LinkState.DESTROYED:
            raise AlreadyDestroyed(handle.link_name)
        with _FABRIC_LOCK:
            return self._attach(handle, node)

    def _attach(self, handle, node):
        ns = self._netns(node)
        name = node.node_name
        ifname = self._claim(name, MGMT_IFNAME) if handle.mgmt else self._claim_data(name)
        addr = None
        if handle.mgmt:
            addr = f"{self._next_mgmt_address()}/{self.subnet.prefixlen}"
        port = self._port(name, ifname, addr)
        leg = self._tmpname("m")
        peer = leg + "p"
        try:
            with _netlink(f"{handle.link_name}/{name}"):
                self.root.link("add", ifname=leg, kind="veth", peer={"ifname": peer})
                bridge_idx = self.root.link_lookup(ifname=handle.bridge)[0]
                leg_idx = self.root.link_lookup(ifname=leg)[0]
                self.root.link("set", index=leg_idx, master=bridge_idx, state="up")
                self._move_in(peer, ns, port)
        except BaseException:
            self._quietly(leg, self._delete_root, leg)
            self._quietly(name, self._delete_in, name, peer, ifname)
            self._release(name, ifname)
            raise
        handle.bindings.append(port)
        handle.root_legs[name] = leg
        if handle.mgmt:
            self._mgmt[name] = addr.split("/")[0]
        return port

    def detach_from_bus(self, handle, node_name):
        with _FABRIC_LOCK:
            leg = handle.root_legs.pop(node_name, None)
            if leg is None:
                return
            port = handle.binding(node_name)
            handle.bindings.remove(port)
            self._quietly(leg, self._delete_root, leg)
            self._release(node_name, port.ifname)
            if handle.mgmt:
                self._mgmt.pop(node_name, None)

    # addresses and state

    def assign_address(self, node, ifname, cidr):
        """Add ``cidr`` (e.g. ``10.0.0.1/24``) to ``ifname`` inside ``node``."""
        ip, prefix = cidr.split("/")
        with _FABRIC_LOCK, _netlink(f"{node.node_name}/{ifname}"):
            ns = self._netns(node)
            idx = ns.index(ifname)
            if idx is None:
                raise FabricError(f"{node.node_name} has no interface {ifname}")
            ns.ipr.addr("add", index=idx, address=ip, prefixlen=int(prefix))

    def set_link_state(self, handle, desired):
        desired = LinkState(desired)
        if handle.state is LinkState.DESTROYED:
            raise AlreadyDestroyed(f"link {handle.link_name} was destroyed")
        if desired is LinkState.DESTROYED:
            raise ValueError("use destroy_link to destroy a link")
        with _FABRIC_LOCK, _netlink(handle.link_name):
            for b in handle.bindings:
                ns = self._ns.get(b.node_name)
                if ns is None:
                    raise NamespaceUnresolvable(f"{b.node_name}: namespace not open")
                idx = ns.index(b.ifname)
                if idx is None:
                    raise FabricError(f"{b.node_name} lost {b.ifname}")
                ns.ipr.link("set", index=idx, state=desired.value)
            handle.state = desired

    # teardown

    def destroy_link(self, handle):
        """Remove every interface of ``handle``; safe to call repeatedly."""
        if handle.state is LinkState.DESTROYED:
            return
        with _FABRIC_LOCK:
            if handle.model == BUS:
                self._destroy_bus(handle)
            else:
                for b in handle.bindings:
                    self._quietly(f"{handle.link_name}/{b.node_name}", self._delete_in, b.node_name, b.ifname)
                    self._release(b.node_name, b.ifname)
                if handle.key is not None:
                    self._keys.discard(handle.key)
            handle.state = LinkState.DESTROYED

    def _destroy_bus(self, handle):
        for node_name, leg in list(handle.root_legs.items()):
            self._quietly(leg, self._delete_root, leg)
            port = handle.binding(node_name)
            self._release(node_name, port.ifname)
            if handle.mgmt:
                self._mgmt.pop(node_name, None)
        handle.root_legs.clear()
        if handle.bridge:
            self._quietly(handle.bridge, self._delete_root, handle.bridge)
        handle.state = LinkState.DESTROYED

    def forget_node(self, node_name):
        """Drop the namespace handle of a node that is being removed."""
        with _FABRIC_LOCK:
            ns = self._ns.pop(node_name, None)
            self._ports.pop(node_name, None)
            self._mgmt.pop(node_name, None)
            if ns is not None:
                self._quietly(node_name, ns.close)

    def close(self):
        with _FABRIC_LOCK:
            for name in list(self._ns):
                self.forget_node(name)
            if self._root is not None:
                self._quietly("root netlink socket", self._root.close)
                self._root = None

    # queries

    def interfaces(self, node):
        """``{ifname: mac}`` as the kernel reports it inside ``node``."""
        with _FABRIC_LOCK:
            return self._netns(node).interfaces()

    def verify(self, handle):
        """Problems with an up link: missing interfaces or wrong MACs."""
        problems = []
        if handle.state is not LinkState.UP:
            return problems
        with _FABRIC_LOCK:
            for b in handle.bindings:
                ns = self._ns.get(b.node_name)
                seen = ns.interfaces() if ns else {}
                if b.ifname not in seen:
                    problems.append(f"{b.node_name}: {b.ifname} missing")
                elif seen[b.ifname] != b.mac:
                    problems.append(f"{b.node_name}: {b.ifname} has {seen[b.ifname]}, expected {b.mac}")
        return problems


def _tunnel_kind(kind):
    value = getattr(kind, "value", kind)
    if value in ("gre", LinkModel.GRE.value):
        return "gre"
    if value in ("vxlan", LinkModel.VXLAN.value):
        return "vxlan"
    raise PreconditionError(f"unknown tunnel kind {kind!r}")


def _tunnel_attrs(kind, key, local, remote, underlay_index):
    if kind == "vxlan":
        attrs = {
            "kind": "vxlan",
            "vxlan_id": key,
            "vxlan_local": local,
            "vxlan_group": remote,  # a unicast group is the single remote end
            "vxlan_port": VXLAN_PORT,
        }
        if underlay_index is not None:
            attrs["vxlan_link"] = underlay_index
        return attrs
    # gretap rather than gre so the tunnel carries Ethernet frames like a veth
    return {
        "kind": "gretap",
        "gre_local": local,
        "gre_remote": remote,
        "gre_ikey": key,
        "gre_okey": key,
        "gre_iflags": GRE_KEY_FLAG,
        "gre_oflags": GRE_KEY_FLAG,
    }
