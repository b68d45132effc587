import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from vemul import topology as T
from vemul.errors import (
    DuplicateName,
    DuplicateTunnelKey,
    InvalidSpec,
    SchemaViolation,
    SelfLoop,
    SizeTooSmall,
    UnknownEndpoint,
)


def sample_topology():
    """Two hosts on sw1 plus a controller, built through the public API."""
    topo = T.Topology(runnable=True)
    T.add_node(topo, T.whitebox("sw1"))
    T.add_node(topo, T.host("h1", ip="10.0.0.1", mask="24"))
    T.add_node(topo, T.host("h2", ip="10.0.0.2", mask="24"))
    T.add_link(topo, T.link("l1", "sw1", "h1"))
    T.add_link(topo, T.link("l2", "sw1", "h2"))
    T.add_node(topo, T.controller("ctl1"))
    return topo


# --- oracles -----------------------------------------------------------------


def bfs_fill_level_sizes(switch_count):
    """Level sizes of a binary tree filled level by level."""
    sizes, left, width = [], switch_count, 1
    while left > 0:
        sizes.append(min(width, left))
        left -= width
        width *= 2
    return sizes


def floyd_warshall(names, edges):
    inf = math.inf
    d = {(u, v): (0 if u == v else inf) for u in names for v in names}
    for u, v in edges:
        d[u, v] = d[v, u] = 1
    for k in names:
        for i in names:
            for j in names:
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


def switch_of(topo, host_name):
    sw = {n.name for n in topo.switches}
    (l,) = topo.links_of(host_name)
    (other,) = [x for x in l.nodes if x in sw]
    return other


def expected_probe_pair(topo):
    sw = sorted((n.name for n in topo.switches), key=T.natural_key)
    edges = [(l.endpoint_a, l.endpoint_b) for l in T.inter_switch_links(topo)]
    d = floyd_warshall(sw, edges)
    best = max(d[u, v] for u, v in itertools.combinations(sw, 2))
    return min(
        (p for p in itertools.combinations(sw, 2) if d[p] == best),
        key=lambda p: (T.natural_key(p[0]), T.natural_key(p[1])),
    )


# --- add_node / add_link -----------------------------------------------------


def test_add_whitebox_to_empty():
    topo = T.Topology()
    assert T.add_node(topo, T.whitebox("sw1")) == "sw1"
    assert len(topo.nodes) == 1 and len(topo.links) == 0


def test_add_host_parses_ip():
    topo = T.Topology()
    T.add_node(topo, T.host("h1", ip="10.0.0.1", mask="24"))
    cfg = topo.node("h1").ip_config
    assert (cfg.address, cfg.prefix_len) == ("10.0.0.1", 24)
    assert cfg.cidr == "10.0.0.1/24"


def test_duplicate_node_rejected_and_unchanged():
    topo = T.Topology()
    T.add_node(topo, T.whitebox("sw1"))
    before = topo.copy()
    with pytest.raises(DuplicateName):
        T.add_node(topo, T.whitebox("sw1"))
    assert topo == before


@pytest.mark.parametrize(
    "spec, field",
    [
        (T.NodeSpec("", T.NodeKind.SWITCH), "name"),
        (T.NodeSpec("sw1", T.NodeKind.SWITCH, ip_config=T.IpConfig("10.0.0.9", 24)), "ip_config"),
        (T.NodeSpec("ctl", T.NodeKind.CONTROLLER, role=T.Role.SERVER), "role"),
        (T.NodeSpec("h", limits=T.ResourceLimits(cpu_quota=0)), "limits.cpu_quota"),
        (T.NodeSpec("h", limits=T.ResourceLimits(memory_bytes=-1)), "limits.memory_bytes"),
    ],
)
def test_invalid_node_spec_names_field(spec, field):
    topo = T.Topology()
    with pytest.raises(InvalidSpec) as exc:
        T.add_node(topo, spec)
    assert exc.value.field == field
    assert topo.nodes == []


def test_bad_enum_value_names_field():
    with pytest.raises(InvalidSpec) as exc:
        T.NodeSpec("x", kind="router")
    assert exc.value.field == "kind"


def test_hosts_get_default_addresses_in_creation_order():
    topo = T.Topology()
    for name in ("a", "b", "c"):
        T.add_node(topo, T.NodeSpec(name))
    assert [n.ip_config.cidr for n in topo.hosts] == ["10.0.0.1/24", "10.0.0.2/24", "10.0.0.3/24"]


def test_default_address_skips_taken():
    topo = T.Topology()
    T.add_node(topo, T.host("a", ip="10.0.0.1/24"))
    T.add_node(topo, T.NodeSpec("b"))
    assert topo.node("b").ip_config.address == "10.0.0.2"


def test_link_between_switch_and_host():
    topo = sample_topology()
    assert topo.get_link("l1").nodes == ("sw1", "h1")
    assert topo.link_facing("l1") == "host"


def test_link_unknown_endpoint():
    topo = sample_topology()
    before = topo.copy()
    with pytest.raises(UnknownEndpoint):
        T.add_link(topo, T.link("l9", "sw1", "ghost"))
    assert topo == before


def test_duplicate_tunnel_key():
    topo = sample_topology()
    T.add_link(topo, T.link("t1", "h1", "h2", T.LinkModel.VXLAN, tunnel_key=42))
    with pytest.raises(DuplicateTunnelKey):
        T.add_link(topo, T.link("t2", "h2", "h1", T.LinkModel.VXLAN, tunnel_key=42))
    assert not topo.has_link("t2")


def test_self_loop():
    topo = sample_topology()
    with pytest.raises(SelfLoop):
        T.add_link(topo, T.link("lx", "h1", "h1"))


def test_duplicate_link_name():
    topo = sample_topology()
    with pytest.raises(DuplicateName):
        T.add_link(topo, T.link("l1", "h1", "h2"))


def test_tunnel_key_only_on_tunnels():
    topo = sample_topology()
    with pytest.raises(InvalidSpec) as exc:
        T.add_link(topo, T.link("lx", "h1", "h2", tunnel_key=3))
    assert exc.value.field == "tunnel_key"
    with pytest.raises(InvalidSpec):
        T.add_link(topo, T.link("lx", "h1", "h2", T.LinkModel.GRE))


def test_bus_link_needs_two_members():
    topo = sample_topology()
    with pytest.raises(InvalidSpec) as exc:
        T.add_link(topo, T.bus("b0", ["h1", "h1"]))
    assert exc.value.field == "members"
    T.add_link(topo, T.bus("b1", ["h1", "h2", "sw1"]))
    assert topo.get_link("b1").nodes == ("h1", "h2", "sw1")


# --- validate -----------------------------------------------------------------


def test_validate_sample_ok():
    assert T.validate(sample_topology()) == []


def test_validate_empty_ok():
    assert T.validate(T.Topology()) == []
    assert T.validate(T.Topology(runnable=True)) == []


def test_validate_disconnected_runnable():
    topo = T.Topology(runnable=True)
    T.add_node(topo, T.whitebox("s1"))
    T.add_node(topo, T.whitebox("s2"))
    problems = T.validate(topo)
    assert len(problems) == 1 and "disconnected" in problems[0].message
    topo.runnable = False
    assert T.validate(topo) == []


def test_validate_collects_every_violation():
    topo = T.Topology(
        nodes=[T.NodeSpec("a"), T.NodeSpec("a"), T.NodeSpec("c", T.NodeKind.SWITCH, role="client")],
        links=[T.LinkSpec("x", "a", "zz"), T.LinkSpec("x", "a", "c")],
    )
    subjects = sorted(v.subject for v in T.validate(topo))
    assert subjects == ["a", "c", "x", "x"]


# --- generators ---------------------------------------------------------------


@pytest.mark.parametrize("size, links", [(9, 8), (17, 16)])
def test_star_counts(size, links):
    topo = T.generate_star(size)
    assert T.switch_count(topo) == size
    assert len(T.inter_switch_links(topo)) == links
    assert len(topo.hosts) == 2
    assert len(topo.links) == links + 2


def test_star_probes_on_distinct_leaves():
    topo = T.generate_star(9)
    a, b = (switch_of(topo, h) for h in ("h1", "h2"))
    assert a != b and "s1" not in (a, b)


@pytest.mark.parametrize("gen", [T.generate_star, T.generate_tree, T.generate_mesh])
def test_size_too_small(gen):
    with pytest.raises(SizeTooSmall):
        gen(1)


@pytest.mark.parametrize("size", [2, 3, 9, 17, 33, 65, 129])
def test_tree_levels_match_fill_oracle(size):
    topo = T.generate_tree(size)
    adj = T.data_plane_adjacency(topo, kinds=(T.NodeKind.SWITCH,))
    depth = T._bfs(adj, "s1")
    levels = [0] * (max(depth.values()) + 1)
    for d in depth.values():
        levels[d] += 1
    assert levels == bfs_fill_level_sizes(size)
    assert len(T.inter_switch_links(topo)) == size - 1


def test_tree_frozen_examples():
    # values from bfs_fill_level_sizes, checked by hand: 1+2+4+2 = 9
    assert bfs_fill_level_sizes(9) == [1, 2, 4, 2]
    assert bfs_fill_level_sizes(33) == [1, 2, 4, 8, 16, 2]  # depth 5
    topo = T.generate_tree(2)
    assert [(l.endpoint_a, l.endpoint_b) for l in T.inter_switch_links(topo)] == [("s1", "s2")]


@given(st.integers(min_value=2, max_value=300))
@settings(max_examples=60, deadline=None)
def test_tree_farthest_pair_matches_bfs(size):
    topo = T.Topology(runnable=True)
    names = T._switches(topo, size)
    for i in range(2, size + 1):
        topo.add_link(T.link(f"l{i - 1}", names[T.tree_parent(i) - 1], names[i - 1]))
    a, b = T.tree_farthest_pair(size)
    assert (f"s{a}", f"s{b}") == T.farthest_pair(T.data_plane_adjacency(topo))


@pytest.mark.parametrize("size, links", [(3, 3), (9, 36), (17, 136)])
def test_mesh_counts(size, links):
    topo = T.generate_mesh(size)
    assert len(T.inter_switch_links(topo)) == links == math.comb(size, 2)


@pytest.mark.parametrize("family", ["star", "tree", "mesh", "chain"])
@pytest.mark.parametrize("size", [2, 3, 5, 9, 12, 17])
def test_probe_placement_matches_floyd_warshall(family, size):
    topo = T.generate(family, size)
    got = tuple(sorted((switch_of(topo, h) for h in ("h1", "h2")), key=T.natural_key))
    assert got == expected_probe_pair(topo)


@pytest.mark.parametrize("size", T.SWEEP_SIZES)
def test_sweep_sizes_arithmetic(size):
    assert len(T.inter_switch_links(T.generate_star(size))) == size - 1
    assert len(T.inter_switch_links(T.generate_tree(size))) == size - 1
    if size <= 129:
        assert len(T.inter_switch_links(T.generate_mesh(size))) == size * (size - 1) // 2


@pytest.mark.parametrize("family", ["star", "tree", "mesh"])
def test_generators_deterministic(family):
    assert T.generate(family, 17) == T.generate(family, 17)


def test_fidelity_tree_shape():
    topo = T.generate_fidelity_tree()
    assert len(topo.switches) == 5
    assert len(topo.hosts) == 16
    assert len(topo.links) == 20
    assert switch_of(topo, "h1") != switch_of(topo, "h16")
    assert [switch_of(topo, f"h{i}") for i in (1, 4, 5, 16)] == ["s2", "s2", "s3", "s5"]
    assert T.validate(topo) == []


def test_switches_only_strips_hosts():
    topo = T.switches_only(T.generate_star(9))
    assert topo.hosts == [] and len(topo.links) == 8
    assert T.validate(topo) == []


def test_with_controller():
    topo = T.with_controller(T.generate_tree(5), "c0")
    assert [n.name for n in topo.controllers] == ["c0"]
    assert T.validate(topo) == []


# --- properties --------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["star", "tree", "mesh", "chain"]), st.integers(2, 40))
def test_generated_topologies_validate(family, size):
    topo = T.generate(family, size)
    assert T.validate(topo) == []
    assert T.switch_count(topo) == size


names = st.sampled_from(["a", "b", "c", "d", "", "sw1"])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.one_of(
            st.tuples(st.just("node"), names, st.sampled_from(list(T.NodeKind))),
            st.tuples(
                st.just("link"),
                names,
                st.tuples(names, names, st.sampled_from(list(T.LinkModel)), st.one_of(st.none(), st.integers(0, 3))),
            ),
        ),
        max_size=25,
    )
)
def test_mutations_are_all_or_nothing(ops):
    topo = T.Topology()
    for op, name, arg in ops:
        before = topo.copy()
        try:
            if op == "node":
                topo.add_node(T.NodeSpec(name, arg))
            else:
                a, b, model, key = arg
                topo.add_link(T.LinkSpec(name, a, b, model, tunnel_key=key))
        except (InvalidSpec, DuplicateName, UnknownEndpoint, DuplicateTunnelKey, SelfLoop):
            assert topo == before
        assert T.validate(topo) == []


# --- file format -------------------------------------------------------------

SAMPLE_FILE = """\
nodes:
  - {name: sw1, kind: whitebox-switch}
  - {name: h1, kind: host, ip: 10.0.0.1, mask: 24, role: client}
  - {name: h2, kind: host, ip: 10.0.0.2, mask: 24, role: server, cpu_quota: 0.5, memory_bytes: 67108864}
  - {name: ctl1, kind: controller, image: onosproject/onos:2.7-latest}
links:
  - {name: l1, a: sw1, b: h1, model: veth}
  - {name: l2, a: sw1, b: h2}
  - {name: t1, a: h1, b: h2, model: vxlan-tunnel, tunnel_key: 42}
"""


def test_file_round_trip():
    topo = T.loads(SAMPLE_FILE)
    assert topo.node("h2").limits == T.ResourceLimits(0.5, 67108864)
    assert topo.node("h1").role is T.Role.CLIENT
    assert topo.get_link("t1").tunnel_key == 42
    again = T.loads(T.dumps(topo))
    assert again == topo


def test_file_unknown_key_rejected_with_line():
    text = SAMPLE_FILE.replace("{name: l2, a: sw1, b: h2}", "{name: l2, a: sw1, b: h2, speed: 10}")
    with pytest.raises(SchemaViolation) as exc:
        T.loads(text)
    assert exc.value.field == "links[1].speed"
    assert exc.value.line == 8


def test_file_unknown_top_level_key():
    with pytest.raises(SchemaViolation) as exc:
        T.loads("nodes: []\nswitches: []\n")
    assert exc.value.field == "switches"


def test_file_invalid_field_named():
    with pytest.raises(SchemaViolation) as exc:
        T.loads("nodes:\n  - {name: s, kind: whitebox-switch, role: client}\n")
    assert exc.value.field == "nodes[0].role"
    assert exc.value.line == 2


def test_file_disconnected_rejected():
    with pytest.raises(SchemaViolation, match="disconnected"):
        T.loads("nodes:\n  - {name: s1, kind: whitebox-switch}\n  - {name: s2, kind: whitebox-switch}\n")
