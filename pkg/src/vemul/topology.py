"""In-memory network model and the topology families used by the sweeps.

Everything here is side-effect free.  A :class:`Topology` is a blueprint:
node specs plus link specs.  Nothing is created until the orchestrator binds
it to containers.
"""

from __future__ import annotations

import dataclasses
import ipaddress
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from . import docfile
from .errors import (
    DuplicateName,
    DuplicateTunnelKey,
    InvalidSpec,
    SchemaViolation,
    SelfLoop,
    SizeTooSmall,
    UnknownEndpoint,
)


class NodeKind(str, Enum):
    HOST = "host"
    SWITCH = "whitebox-switch"
    CONTROLLER = "controller"


class Role(str, Enum):
    CLIENT = "client"
    SERVER = "server"
    NONE = "none"


class LinkModel(str, Enum):
    VETH = "veth"
    GRE = "gre-tunnel"
    VXLAN = "vxlan-tunnel"

    @property
    def is_tunnel(self):
        return self is not LinkModel.VETH


class LinkClass(str, Enum):
    P2P = "point-to-point"
    BUS = "bus"


def _coerce(enum, value, fieldname):
    if value.__class__ is enum:
        return value
    try:
        return enum(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum)
        raise InvalidSpec(fieldname, f"{value!r} is not one of {allowed}") from None


@dataclass(frozen=True)
class ResourceLimits:
    cpu_quota: float | None = None  # fraction of one core
    memory_bytes: int | None = None

    def violations(self):
        out = []
        if self.cpu_quota is not None and not self.cpu_quota > 0:
            out.append(("limits.cpu_quota", "must be > 0"))
        if self.memory_bytes is not None and not self.memory_bytes > 0:
            out.append(("limits.memory_bytes", "must be > 0"))
        return out


@dataclass(frozen=True)
class IpConfig:
    address: str
    prefix_len: int

    @classmethod
    def parse(cls, ip, mask=None):
        """Accept ``"10.0.0.1/24"`` or ``("10.0.0.1", "24")``."""
        text = str(ip) if mask is None else f"{ip}/{mask}"
        try:
            iface = ipaddress.IPv4Interface(text)
        except ValueError as exc:
            raise InvalidSpec("ip_config", str(exc)) from None
        if "/" not in text:
            raise InvalidSpec("ip_config", f"{text!r} lacks a prefix length")
        return cls(str(iface.ip), iface.network.prefixlen)

    @property
    def cidr(self):
        return f"{self.address}/{self.prefix_len}"

    def __str__(self):
        return self.cidr


@dataclass(frozen=True, slots=True)
class NodeSpec:
    name: str
    kind: NodeKind = NodeKind.HOST
    image: str = ""  # empty: per-kind default from config
    role: Role = Role.NONE
    ip_config: IpConfig | None = None
    limits: ResourceLimits | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", _coerce(NodeKind, self.kind, "kind"))
        object.__setattr__(self, "role", _coerce(Role, self.role, "role"))
        if isinstance(self.ip_config, str):
            object.__setattr__(self, "ip_config", IpConfig.parse(self.ip_config))

    def violations(self):
        out = []
        if not isinstance(self.name, str) or not self.name.strip():
            out.append(("name", "must be a non-empty string"))
        if self.ip_config is not None and self.kind is not NodeKind.HOST:
            out.append(("ip_config", f"only hosts carry an address, not {self.kind.value}"))
        if self.role is not Role.NONE and self.kind is not NodeKind.HOST:
            out.append(("role", f"only hosts have a role, not {self.kind.value}"))
        if self.limits is not None:
            out.extend(self.limits.violations())
        return out


def host(name, ip=None, mask=None, role=Role.NONE, image="", limits=None):
    ip_config = IpConfig.parse(ip, mask) if ip is not None else None
    return NodeSpec(name, NodeKind.HOST, image, role, ip_config, limits)


def whitebox(name, image="", limits=None):
    return NodeSpec(name, NodeKind.SWITCH, image, limits=limits)


def controller(name, image="", limits=None):
    return NodeSpec(name, NodeKind.CONTROLLER, image, limits=limits)


@dataclass(slots=True)  # not frozen: a 513-switch mesh builds 131k of these
class LinkSpec:
    name: str
    endpoint_a: str | None = None
    endpoint_b: str | None = None
    model: LinkModel = LinkModel.VETH
    topology_class: LinkClass = LinkClass.P2P
    members: tuple[str, ...] = ()
    tunnel_key: int | None = None

    def __post_init__(self):
        if self.model.__class__ is not LinkModel:
            self.model = _coerce(LinkModel, self.model, "model")
        if self.topology_class.__class__ is not LinkClass:
            self.topology_class = _coerce(LinkClass, self.topology_class, "class")
        if self.members.__class__ is not tuple:
            self.members = tuple(self.members or ())

    @property
    def nodes(self) -> tuple[str, ...]:
        if self.topology_class is LinkClass.BUS:
            return self.members
        return (self.endpoint_a, self.endpoint_b)

    def violations(self):
        out = []
        if not isinstance(self.name, str) or not self.name.strip():
            out.append(("name", "must be a non-empty string"))
        if self.topology_class is LinkClass.P2P:
            if not self.endpoint_a or not self.endpoint_b:
                out.append(("endpoints", "point-to-point links need endpoint_a and endpoint_b"))
            elif self.endpoint_a == self.endpoint_b:
                out.append(("endpoints", f"self-loop on {self.endpoint_a!r}"))
        else:
            if len(set(self.members)) < 2:
                out.append(("members", "bus links need at least 2 distinct members"))
            if self.model is not LinkModel.VETH:
                out.append(("model", "bus links are built from veth legs"))
        if self.model is LinkModel.VETH:
            if self.tunnel_key is not None:
                out.append(("tunnel_key", "only tunnel links carry a key"))
        else:
            if self.tunnel_key is None:
                out.append(("tunnel_key", "tunnel links require a key"))
            elif not isinstance(self.tunnel_key, int) or self.tunnel_key < 0:
                out.append(("tunnel_key", "must be a non-negative integer"))
        return out


def link(name, a, b, model=LinkModel.VETH, tunnel_key=None):
    return LinkSpec(name, a, b, model, LinkClass.P2P, (), tunnel_key)


def bus(name, members):
    return LinkSpec(name, model=LinkModel.VETH, topology_class=LinkClass.BUS, members=tuple(members))


@dataclass(frozen=True)
class Violation:
    subject: str  # node or link name, or "<topology>"
    message: str

    def __str__(self):
        return f"{self.subject}: {self.message}"


DEFAULT_HOST_NETWORK = ipaddress.IPv4Network("10.0.0.0/24")


@dataclass
class Topology:
    nodes: list[NodeSpec] = field(default_factory=list)
    links: list[LinkSpec] = field(default_factory=list)
    runnable: bool = False

    def __post_init__(self):
        self.nodes = list(self.nodes)
        self.links = list(self.links)
        self._rebuild_index()

    def _rebuild_index(self):
        self._nodes = {}
        for n in self.nodes:
            self._nodes.setdefault(n.name, n)
        self._links = {}
        self._keys = set()
        for l in self.links:
            self._links.setdefault(l.name, l)
            if l.tunnel_key is not None:
                self._keys.add(l.tunnel_key)

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.nodes, self.links, self.runnable) == (
            other.nodes,
            other.links,
            other.runnable,
        )

    # lookup

    def node(self, name) -> NodeSpec:
        return self._nodes[name]

    def get_link(self, name) -> LinkSpec:
        return self._links[name]

    def has_node(self, name):
        return name in self._nodes

    def has_link(self, name):
        return name in self._links

    def nodes_of(self, kind):
        kind = NodeKind(kind)
        return [n for n in self.nodes if n.kind is kind]

    @property
    def switches(self):
        return self.nodes_of(NodeKind.SWITCH)

    @property
    def hosts(self):
        return self.nodes_of(NodeKind.HOST)

    @property
    def controllers(self):
        return self.nodes_of(NodeKind.CONTROLLER)

    def links_of(self, node_name):
        return [l for l in self.links if node_name in l.nodes]

    def link_facing(self, link_name):
        """``"host"`` if the link touches a host, else ``"switch"``; display only."""
        l = self._links[link_name]
        touches_host = any(
            n in self._nodes and self._nodes[n].kind is NodeKind.HOST for n in l.nodes
        )
        return "host" if touches_host else "switch"

    # mutation

    def add_node(self, spec: NodeSpec) -> str:
        problems = spec.violations()
        if problems:
            raise InvalidSpec(*problems[0])
        if spec.name in self._nodes:
            raise DuplicateName(spec.name, "node")
        if spec.kind is NodeKind.HOST and spec.ip_config is None:
            spec = dataclasses.replace(spec, ip_config=self._next_host_address())
        self.nodes.append(spec)
        self._nodes[spec.name] = spec
        return spec.name

    def _next_host_address(self):
        used = {n.ip_config.address for n in self.nodes if n.ip_config is not None}
        for addr in DEFAULT_HOST_NETWORK.hosts():
            if str(addr) not in used:
                return IpConfig(str(addr), DEFAULT_HOST_NETWORK.prefixlen)
        raise InvalidSpec("ip_config", "default host network 10.0.0.0/24 is exhausted")

    def add_link(self, spec: LinkSpec) -> str:
        if spec.topology_class is LinkClass.P2P and spec.endpoint_a and spec.endpoint_a == spec.endpoint_b:
            raise SelfLoop(spec.name, spec.endpoint_a)
        problems = spec.violations()
        if problems:
            raise InvalidSpec(*problems[0])
        for endpoint in spec.nodes:
            if endpoint not in self._nodes:
                raise UnknownEndpoint(spec.name, endpoint)
        if spec.name in self._links:
            raise DuplicateName(spec.name, "link")
        if spec.tunnel_key is not None and spec.tunnel_key in self._keys:
            raise DuplicateTunnelKey(spec.name, spec.tunnel_key)
        self.links.append(spec)
        self._links[spec.name] = spec
        if spec.tunnel_key is not None:
            self._keys.add(spec.tunnel_key)
        return spec.name

    def _extend_trusted(self, specs):
        # generators build links that are valid by construction
        specs = list(specs)
        self.links.extend(specs)
        self._links.update((l.name, l) for l in specs)

    def remove_node(self, name):
        """Drop a node and every link touching it."""
        if name not in self._nodes:
            raise KeyError(name)
        self.nodes = [n for n in self.nodes if n.name != name]
        self.links = [l for l in self.links if name not in l.nodes]
        self._rebuild_index()

    def remove_link(self, name):
        if name not in self._links:
            raise KeyError(name)
        self.links = [l for l in self.links if l.name != name]
        self._rebuild_index()

    def copy(self):
        return Topology(list(self.nodes), list(self.links), self.runnable)

    # serialization

    def to_dict(self):
        nodes = []
        for n in self.nodes:
            d = {"name": n.name, "kind": n.kind.value}
            if n.image:
                d["image"] = n.image
            if n.ip_config is not None:
                d["ip"] = n.ip_config.address
                d["mask"] = n.ip_config.prefix_len
            if n.role is not Role.NONE:
                d["role"] = n.role.value
            if n.limits is not None:
                if n.limits.cpu_quota is not None:
                    d["cpu_quota"] = n.limits.cpu_quota
                if n.limits.memory_bytes is not None:
                    d["memory_bytes"] = n.limits.memory_bytes
            nodes.append(d)
        links = []
        for l in self.links:
            d = {"name": l.name, "model": l.model.value, "class": l.topology_class.value}
            if l.topology_class is LinkClass.BUS:
                d["members"] = list(l.members)
            else:
                d["a"], d["b"] = l.endpoint_a, l.endpoint_b
            if l.tunnel_key is not None:
                d["tunnel_key"] = l.tunnel_key
            links.append(d)
        return {"nodes": nodes, "links": links}


NODE_KEYS = ("name", "kind", "image", "ip", "mask", "role", "cpu_quota", "memory_bytes")
LINK_KEYS = ("name", "a", "b", "model", "class", "members", "tunnel_key")


def from_dict(data, lines=None, path=(), runnable=True) -> Topology:
    """Build a topology from the declarative document layout.

    Unknown keys and invariant violations raise :class:`SchemaViolation`
    naming the offending field.
    """
    lines = lines or {}
    docfile.check_keys(data, ("nodes", "links"), path, lines)
    topo = Topology(runnable=runnable)

    def fail(sub, exc):
        fieldpath = sub + (getattr(exc, "field", None) or "name",)
        line = lines.get(fieldpath) or lines.get(sub)
        raise SchemaViolation(docfile.dotted(fieldpath), str(exc), line) from None

    for i, raw in enumerate(data.get("nodes") or []):
        sub = path + ("nodes", i)
        docfile.check_keys(raw, NODE_KEYS, sub, lines, required=("name",))
        try:
            ip_config = None
            if raw.get("ip") is not None:
                ip_config = IpConfig.parse(raw["ip"], raw.get("mask", 24))
            limits = None
            if raw.get("cpu_quota") is not None or raw.get("memory_bytes") is not None:
                limits = ResourceLimits(raw.get("cpu_quota"), raw.get("memory_bytes"))
            spec = NodeSpec(
                name=raw["name"],
                kind=raw.get("kind", "host"),
                image=raw.get("image") or "",
                role=raw.get("role", "none"),
                ip_config=ip_config,
                limits=limits,
            )
            topo.add_node(spec)
        except (InvalidSpec, DuplicateName) as exc:
            fail(sub, exc)

    for i, raw in enumerate(data.get("links") or []):
        sub = path + ("links", i)
        docfile.check_keys(raw, LINK_KEYS, sub, lines, required=("name",))
        try:
            spec = LinkSpec(
                name=raw["name"],
                endpoint_a=raw.get("a"),
                endpoint_b=raw.get("b"),
                model=raw.get("model", "veth"),
                topology_class=raw.get("class", "point-to-point"),
                members=tuple(raw.get("members") or ()),
                tunnel_key=raw.get("tunnel_key"),
            )
            topo.add_link(spec)
        except (InvalidSpec, DuplicateName) as exc:
            fail(sub, exc)
        except UnknownEndpoint as exc:
            raise SchemaViolation(docfile.dotted(sub), str(exc), lines.get(sub)) from None
        except (DuplicateTunnelKey, SelfLoop) as exc:
            raise SchemaViolation(docfile.dotted(sub), str(exc), lines.get(sub)) from None

    problems = validate(topo)
    if problems:
        raise SchemaViolation(docfile.dotted(path) if path else "<topology>", "; ".join(map(str, problems)))
    return topo


def loads(text, source="<topology>", runnable=True) -> Topology:
    data, lines = docfile.load(text, source)
    return from_dict(data, lines, runnable=runnable)


def load(path, runnable=True) -> Topology:
    with open(path) as fh:
        return loads(fh.read(), str(path), runnable)


def dumps(topology) -> str:
    import yaml

    return yaml.safe_dump(topology.to_dict(), sort_keys=False)


# module-level API mirroring the methods


def add_node(topology, spec):
    return topology.add_node(spec)


def add_link(topology, spec):
    return topology.add_link(spec)


def validate(topology) -> list[Violation]:
    """Every invariant violation in ``topology``; an empty list means ok."""
    out = []
    seen = set()
    for n in topology.nodes:
        if n.name in seen:
            out.append(Violation(n.name, "duplicate node name"))
        seen.add(n.name)
        out.extend(Violation(n.name or "<unnamed>", f"{f}: {msg}") for f, msg in n.violations())

    addresses = {}
    for n in topology.nodes:
        if n.ip_config is not None:
            other = addresses.setdefault(n.ip_config.address, n.name)
            if other != n.name:
                out.append(Violation(n.name, f"address {n.ip_config.address} also used by {other}"))

    names = {n.name for n in topology.nodes}
    seen = set()
    keys = {}
    veth, p2p = LinkModel.VETH, LinkClass.P2P
    for l in topology.links:
        if l.name in seen:
            out.append(Violation(l.name, "duplicate link name"))
        seen.add(l.name)
        a, b = l.endpoint_a, l.endpoint_b
        if (
            l.model is veth
            and l.topology_class is p2p
            and l.tunnel_key is None
            and a in names
            and b in names
            and a != b
            and l.name
            and isinstance(l.name, str)
        ):
            continue  # plain veth link with both endpoints present
        out.extend(Violation(l.name or "<unnamed>", f"{f}: {msg}") for f, msg in l.violations())
        for endpoint in l.nodes:
            if endpoint and endpoint not in names:
                out.append(Violation(l.name, f"unknown endpoint {endpoint!r}"))
        if l.tunnel_key is not None:
            other = keys.setdefault(l.tunnel_key, l.name)
            if other != l.name:
                out.append(Violation(l.name, f"tunnel key {l.tunnel_key} also used by {other}"))

    if topology.runnable and not out and not _data_plane_connected(topology):
        components = data_plane_components(topology)
        if len(components) > 1:
            parts = " | ".join(",".join(sorted(c, key=natural_key)) for c in components)
            out.append(Violation("<topology>", f"data plane is disconnected: {parts}"))
    return out


def is_valid(topology):
    return not validate(topology)


def natural_key(name):
    """Sort key so that ``s2`` < ``s10``."""
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", name)]


def data_plane_adjacency(topology, kinds=(NodeKind.HOST, NodeKind.SWITCH)):
    members = {n.name for n in topology.nodes if n.kind in kinds}
    adj = {name: set() for name in members}
    for l in topology.links:
        if l.topology_class is not LinkClass.P2P:
            continue
        a, b = l.endpoint_a, l.endpoint_b
        if a in members and b in members:
            adj[a].add(b)
            adj[b].add(a)
    return adj


def _data_plane_connected(topology, kinds=(NodeKind.HOST, NodeKind.SWITCH)):
    """Union-find over point-to-point links, stopping as soon as one set remains."""
    parent = {n.name: n.name for n in topology.nodes if n.kind in kinds}
    remaining = len(parent)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    p2p = LinkClass.P2P
    for l in topology.links:
        if remaining <= 1:
            break
        a, b = l.endpoint_a, l.endpoint_b
        if l.topology_class is not p2p or a not in parent or b not in parent:
            continue
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            remaining -= 1
    return remaining <= 1


def data_plane_components(topology):
    adj = data_plane_adjacency(topology)
    seen = set()
    components = []
    for start in sorted(adj, key=natural_key):
        if start in seen:
            continue
        comp = set(_bfs(adj, start))
        seen |= comp
        components.append(comp)
    return components


def _bfs(adj, start):
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def farthest_pair(adj):
    """Pair of nodes at maximum hop distance; ties go to the lowest names.

    Pairs are compared as ``(lower, higher)`` under :func:`natural_key`.
    """
    order = sorted(adj, key=natural_key)
    rank = {name: i for i, name in enumerate(order)}
    best = None
    for u in order:
        dist = _bfs(adj, u)
        for v, d in dist.items():
            if rank[v] <= rank[u]:
                continue
            cand = (-d, rank[u], rank[v])
            if best is None or cand < best:
                best = cand
    if best is None:
        raise ValueError("need at least two connected nodes")
    return order[best[1]], order[best[2]]


# generators

SWEEP_SIZES = (9, 17, 33, 65, 129, 257, 513)


def _switches(topo, count):
    names = [f"s{i}" for i in range(1, count + 1)]
    for name in names:
        topo.add_node(NodeSpec(name, NodeKind.SWITCH))
    return names


def _attach_probes(topo, sw_a, sw_b):
    topo.add_node(NodeSpec("h1", NodeKind.HOST))
    topo.add_node(NodeSpec("h2", NodeKind.HOST))
    n = len(topo.links)
    topo.add_link(LinkSpec(f"l{n + 1}", "h1", sw_a))
    topo.add_link(LinkSpec(f"l{n + 2}", "h2", sw_b))


def _check_size(switch_count):
    if not isinstance(switch_count, int) or switch_count < 2:
        raise SizeTooSmall(switch_count)


def generate_star(switch_count: int) -> Topology:
    """Hub ``s1`` with ``switch_count - 1`` leaf switches and two probe hosts."""
    _check_size(switch_count)
    topo = Topology(runnable=True)
    names = _switches(topo, switch_count)
    topo._extend_trusted(
        LinkSpec(f"l{i}", names[0], leaf) for i, leaf in enumerate(names[1:], start=1)
    )
    # every leaf pair sits two hops apart; the lowest two leaves win the tie
    if switch_count >= 3:
        _attach_probes(topo, names[1], names[2])
    else:
        _attach_probes(topo, names[0], names[1])
    return topo


def tree_parent(index):
    """Parent of 1-based switch ``index`` in a breadth-first binary tree."""
    return index // 2


def _tree_hops(i, j):
    """Hop count between heap-numbered nodes ``i`` and ``j`` of a binary tree."""
    di, dj = i.bit_length() - 1, j.bit_length() - 1
    if di > dj:
        i >>= di - dj
    else:
        j >>= dj - di
    shallow = min(di, dj)
    lca_depth = shallow - (i ^ j).bit_length()
    return di + dj - 2 * lca_depth


def tree_farthest_pair(switch_count):
    """Same answer as :func:`farthest_pair` on a breadth-first binary tree.

    Both ends of a longest path are leaves (nodes past ``switch_count // 2``),
    so only leaf pairs are compared, lowest indices first.
    """
    if switch_count < 3:
        return 1, 2
    leaves = range(switch_count // 2 + 1, switch_count + 1)
    best = None
    for u in leaves:
        for v in range(u + 1, switch_count + 1):
            cand = (-_tree_hops(u, v), u, v)
            if best is None or cand < best:
                best = cand
    return best[1], best[2]


def generate_tree(switch_count: int) -> Topology:
    """Binary tree filled breadth first: ``s{i}`` has children ``s{2i}``, ``s{2i+1}``."""
    _check_size(switch_count)
    topo = Topology(runnable=True)
    names = _switches(topo, switch_count)
    topo._extend_trusted(
        LinkSpec(f"l{i - 1}", names[tree_parent(i) - 1], names[i - 1])
        for i in range(2, switch_count + 1)
    )
    a, b = tree_farthest_pair(switch_count)
    _attach_probes(topo, names[a - 1], names[b - 1])
    return topo


def generate_mesh(switch_count: int) -> Topology:
    """Complete graph over the switches plus two probe hosts on ``s1``/``s2``."""
    _check_size(switch_count)
    topo = Topology(runnable=True)
    names = _switches(topo, switch_count)
    pairs = ((a, b) for i, a in enumerate(names) for b in names[i + 1 :])
    topo._extend_trusted(LinkSpec(f"l{n}", a, b) for n, (a, b) in enumerate(pairs, start=1))
    _attach_probes(topo, names[0], names[1])
    return topo


def generate_chain(switch_count: int) -> Topology:
    """Switches in a line, probe hosts on both ends."""
    _check_size(switch_count)
    topo = Topology(runnable=True)
    names = _switches(topo, switch_count)
    for i in range(1, switch_count):
        topo.add_link(LinkSpec(f"l{i}", names[i - 1], names[i]))
    _attach_probes(topo, names[0], names[-1])
    return topo


GENERATORS = {
    "star": generate_star,
    "tree": generate_tree,
    "mesh": generate_mesh,
    "chain": generate_chain,
}


def generate(family, switch_count):
    try:
        gen = GENERATORS[family]
    except KeyError:
        raise ValueError(f"unknown topology family {family!r}") from None
    return gen(switch_count)


def generate_fidelity_tree() -> Topology:
    """Core switch, four edge switches, four hosts per edge switch.

    Hosts ``h1``..``h16`` are numbered left to right, so ``h1`` hangs off
    ``s2`` and ``h16`` off ``s5``.
    """
    topo = Topology(runnable=True)
    _switches(topo, 5)
    n = 0
    for edge in range(2, 6):
        n += 1
        topo.add_link(LinkSpec(f"l{n}", "s1", f"s{edge}"))
    for h in range(1, 17):
        edge = 2 + (h - 1) // 4
        topo.add_node(NodeSpec(f"h{h}", NodeKind.HOST))
        n += 1
        topo.add_link(LinkSpec(f"l{n}", f"h{h}", f"s{edge}"))
    return topo


def minimal_topology() -> Topology:
    """Two hosts on one whitebox switch, plus a controller on the bus."""
    topo = Topology(runnable=True)
    topo.add_node(whitebox("sw1"))
    topo.add_node(host("h1", ip="10.0.0.1", mask="24"))
    topo.add_node(host("h2", ip="10.0.0.2", mask="24"))
    topo.add_link(link("l1", "sw1", "h1"))
    topo.add_link(link("l2", "sw1", "h2"))
    topo.add_node(controller("ctl1"))
    return topo


def switches_only(topology) -> Topology:
    """Copy without hosts or controllers, and without links touching them."""
    keep = {n.name for n in topology.switches}
    return Topology(
        [n for n in topology.nodes if n.name in keep],
        [l for l in topology.links if all(x in keep for x in l.nodes)],
        topology.runnable,
    )


def with_controller(topology, name="c0", image="") -> Topology:
    out = topology.copy()
    out.add_node(controller(name, image))
    return out


def probe_hosts(topology) -> tuple[str, str]:
    hosts = sorted((n.name for n in topology.hosts), key=natural_key)
    if len(hosts) < 2:
        raise ValueError("topology has fewer than two hosts")
    return hosts[0], hosts[1]


def switch_count(topology):
    return len(topology.switches)


def inter_switch_links(topology) -> Iterable[LinkSpec]:
    sw = {n.name for n in topology.switches}
    p2p = LinkClass.P2P
    out = []
    for l in topology.links:
        if l.topology_class is p2p:
            if l.endpoint_a in sw and l.endpoint_b in sw:
                out.append(l)
        elif all(x in sw for x in l.members):
            out.append(l)
    return out
