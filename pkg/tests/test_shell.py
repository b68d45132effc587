import io
import json
import os
import textwrap

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from vemul import cli, shell
from vemul.engine import EngineClient
from vemul.errors import CommandSyntaxError, SchemaViolation
from vemul.metrics import measure
from vemul.metrics.measure import LatencyRecord
from vemul.orchestrator import Orchestrator
from vemul.runtime import NodeState, Runtime
from vemul.shell import Command, Verb, parse_command, parse_experiment
from vemul.topology import minimal_topology

from .fakes import FakeFabric, FakeRuntime, Faults, fake_orchestrator

PROBE = os.path.join(os.path.dirname(__file__), "netprobe.py")

FIG6 = """\
nodes:
  - {name: sw1, kind: whitebox-switch}
  - {name: h1, kind: host, ip: 10.0.0.1, mask: 24}
  - {name: h2, kind: host, ip: 10.0.0.2, mask: 24}
  - {name: ctl1, kind: controller}
links:
  - {name: l1, a: sw1, b: h1}
  - {name: l2, a: sw1, b: h2}
"""


@pytest.fixture(autouse=True)
def _clean_fakes():
    FakeRuntime.containers.clear()
    FakeFabric.root.clear()
    yield


@pytest.fixture
def fake():
    orch = fake_orchestrator()
    emu = orch.up(minimal_topology())
    yield orch, emu
    orch.down(emu)


def run_repl(emu, text):
    out = io.StringIO()
    status = shell.repl(emu, io.StringIO(text), out)
    return status, out.getvalue()


def status_lines(output):
    return [l for l in output.splitlines() if not l.startswith("  ")]


# --- parsing -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "line, expected",
    [
        ("list", Command(Verb.LIST, "nodes")),
        ("list links", Command(Verb.LIST, "links")),
        ("create host h3 ip=10.0.0.3/24", Command(Verb.CREATE, "h3", {"ip": "10.0.0.3/24", "kind": "host", "type": "node"})),
        ("create link l9 sw1 h3 model=veth", Command(Verb.CREATE, "l9", {"model": "veth", "type": "link", "a": "sw1", "b": "h3"})),
        ("update h1 cpu_quota=0.5", Command(Verb.UPDATE, "h1", {"cpu_quota": "0.5"})),
        ("delete link l1", Command(Verb.DELETE, "l1", {"type": "link"})),
        ("delete h2", Command(Verb.DELETE, "h2")),
        ("exec h1 ping -c1 10.0.0.2", Command(Verb.EXEC, "h1", {"argv": ["ping", "-c1", "10.0.0.2"]})),
        ("exec h1 sh -c 'echo a b'", Command(Verb.EXEC, "h1", {"argv": ["sh", "-c", "echo a b"]})),
        ("link-down l2", Command(Verb.LINK_DOWN, "l2")),
        ("pause h1", Command(Verb.PAUSE, "h1")),
        ("quit", Command(Verb.QUIT)),
        ("   # just a comment", None),
        ("", None),
    ],
)
def test_parse(line, expected):
    assert parse_command(line) == expected


@pytest.mark.parametrize(
    "line",
    ["frobnicate x", "create", "create gadget g1", "create host h3 colour=red", "update h1", "update h1 speed=9",
     "exec h1", "pause", "pause a b", "quit now", "list everything", "exec h1 'unterminated", "create host h3 ip",
     "delete node", "delete a b"],
)
def test_parse_rejects(line):
    with pytest.raises(CommandSyntaxError):
        parse_command(line)


def test_every_verb_has_usage():
    assert set(shell.USAGE) == set(Verb)


# --- REPL over the in-memory doubles --------------------------------------------------


def test_list_nodes_on_fig6(fake):
    _, emu = fake
    status, out = run_repl(emu, "list nodes\n")
    lines = out.splitlines()
    assert status == 0
    assert lines[0] == "ok 4 nodes"
    assert sorted(l.split()[0] for l in lines[1:]) == ["ctl1", "h1", "h2", "sw1"]


def test_parse_error_does_not_stop_the_loop(fake):
    _, emu = fake
    status, out = run_repl(emu, "frobnicate x\nlist links\nquit\nlist\n")
    heads = status_lines(out)
    assert heads[0].startswith("err CommandSyntaxError: unknown verb 'frobnicate'")
    assert heads[1] == "ok 2 links"
    assert heads[2] == "ok bye"
    assert len(heads) == 3  # nothing after quit
    assert status == 0


def test_verbs_reach_the_orchestrator(fake):
    orch, emu = fake
    script = "\n".join(
        [
            "create host h3",
            "create link l3 sw1 h3",
            "link-down l3",
            "link-up l3",
            "pause h3",
            "resume h3",
            "update h3 cpu_quota=0.5",
            "update sw1 controller=tcp:172.31.0.5:6653",
            "exec h3 echo hi",
            "delete link l3",
            "delete h3",
            "delete h3",
            "pause ghost",
        ]
    ) + "\n"
    _, out = run_repl(emu, script)
    heads = status_lines(out)
    assert all(h.startswith("ok") for h in heads[:11]), heads
    assert heads[11].startswith("err NoSuchNode")
    assert heads[12].startswith("err NoSuchNode")
    assert "  echo hi" in out.splitlines()
    assert not emu.topology.has_node("h3")
    assert ("sw1" in [n for n, _ in emu.runtime.execs]) is False
    assert any(t == "tcp:172.31.0.5:6653" for t in orch.switch_db.controllers.values())


def test_attach_runs_lines_in_the_node(fake):
    _, emu = fake
    _, out = run_repl(emu, "attach h1\nls /\n\ndetach\nlist links\n")
    heads = status_lines(out)
    assert heads == ["ok attached to h1; 'detach' returns", "ok exit 0", "ok", "ok detached", "ok 2 links"]
    assert emu.runtime.execs[-1] == ("h1", ["sh", "-c", "ls /"])


def test_broken_output_stream_ends_the_loop(fake):
    _, emu = fake

    class Broken(io.StringIO):
        def write(self, s):
            raise BrokenPipeError("gone")

    assert shell.repl(emu, io.StringIO("list\n"), Broken()) == 1


def test_binary_input_is_decoded(fake):
    _, emu = fake
    out = io.StringIO()
    assert shell.repl(emu, io.BytesIO(b"\xff\xfe bogus\nlist\n"), out) == 0
    assert [h.split()[0] for h in status_lines(out.getvalue())] == ["err", "ok"]


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(st.text(st.characters(blacklist_characters="\n", blacklist_categories=("Cs",)), max_size=60), max_size=25))
def test_repl_is_total(fake, lines):
    _, emu = fake
    lines = [l for l in lines if l.strip() not in ("quit",) and not l.strip().startswith("attach")]
    status, out = run_repl(emu, "".join(l + "\n" for l in lines))
    heads = status_lines(out)
    assert status == 0
    assert len(heads) == len(lines)
    assert all(h.split(" ", 1)[0] in ("ok", "err") for h in heads)


# --- experiment files ------------------------------------------------------------------


def experiment(body, topology=FIG6):
    return "topology:\n" + textwrap.indent(topology, "  ") + textwrap.dedent(body)


def test_experiment_parses():
    exp = parse_experiment(
        experiment(
            """
            name: fig6
            repetitions: 3
            events:
              - at: 2
                measure: {kind: ping, src: h1, dst: h2, count: 10}
              - at: 0
                command: "exec h1 true"
              - at: 2
                parallel: true
                measure:
                  - {kind: udp, src: h1, dst: h2, rate_mbps: 10, duration_s: 2, name: a}
                  - {kind: resources, window_s: 1}
            """
        )
    )
    assert exp.name == "fig6" and exp.repetitions == 3
    assert [e.index for e in exp.events] == [1, 0, 2]  # ordered by time, stable
    assert exp.events[2].parallel and [m.name for m in exp.events[2].measures] == ["a", "resources #2"]
    assert exp.events[1].measures[0].params == {"src": "h1", "dst": "h2", "count": 10}


@pytest.mark.parametrize(
    "body, field, line",
    [
        ("events:\n  - command: frobnicate x\n", "events[0].command", 11),
        ("events:\n  - at: -1\n    command: list\n", "events[0].at", 11),
        ("events:\n  - measure: {kind: teleport}\n", "events[0].measure.kind", 11),
        ("events:\n  - measure: {kind: ping, src: h1}\n", "events[0].measure.dst", 11),
        ("events:\n  - command: list\n    measure: {kind: resources}\n", "events[0]", 11),
        ("repetitions: 0\n", "repetitions", 10),
        ("colour: blue\n", "colour", 10),
        ("events:\n  - command: attach h1\n", "events[0].command", 11),
    ],
)
def test_experiment_schema_errors_name_the_field(body, field, line):
    with pytest.raises(SchemaViolation) as exc:
        parse_experiment(experiment(body))
    assert exc.value.field == field
    assert exc.value.line == line


def test_experiment_needs_one_topology_source():
    with pytest.raises(SchemaViolation):
        parse_experiment("events: []\n")
    with pytest.raises(SchemaViolation):
        parse_experiment(experiment("generate: {family: star, switches: 3}\n"))
    exp = parse_experiment("generate: {family: star, switches: 3}\n")
    assert len(exp.topology.switches) == 3 and len(exp.topology.controllers) == 1


def test_topology_file_relative_to_experiment(tmp_path):
    (tmp_path / "fig6.yaml").write_text(FIG6)
    (tmp_path / "exp.yaml").write_text("topology_file: fig6.yaml\n")
    assert len(shell.load_experiment(tmp_path / "exp.yaml").topology.nodes) == 4


@pytest.fixture
def fake_ping(monkeypatch):
    rtts = iter(range(1, 10_000))

    def ping(emu, src, dst, count, command=None):
        base = float(next(rtts))
        return LatencyRecord(src, dst, base + 1, [base] * (count - 1), sent=count, received=count)

    monkeypatch.setattr(measure, "measure_first_ping", ping)


def test_fifteen_repetitions_and_their_mean(tmp_path, fake_ping):
    orch = fake_orchestrator()
    path = tmp_path / "exp.yaml"
    path.write_text(experiment("repetitions: 15\nevents:\n  - measure: {kind: ping, src: h1, dst: h2, count: 10}\n"))
    report = json.loads(open(shell.run_experiment_file(path, orch)).read())
    assert report["repetitions"] == 15 and len(report["runs"]) == 15
    firsts = [r["events"][0]["result"]["first_ping_ms"] for r in report["runs"]]
    assert firsts == [float(i + 1) for i in range(1, 16)]
    assert report["means"]["ping h1->h2"]["first_ping_ms"] == pytest.approx(sum(firsts) / 15, rel=1e-12)
    assert report["means"]["ping h1->h2"]["loss_percent"] == 0.0
    assert FakeRuntime.containers == {}
    assert (tmp_path / "exp.report.json").exists()


def test_replay_keeps_topology_and_schema(tmp_path, fake_ping):
    path = tmp_path / "exp.yaml"
    path.write_text(experiment("events:\n  - command: list\n  - measure: {kind: ping, src: h1, dst: h2}\n"))
    a = json.loads(open(shell.run_experiment_file(path, fake_orchestrator(), str(tmp_path / "a.json"))).read())
    b = json.loads(open(shell.run_experiment_file(path, fake_orchestrator(), str(tmp_path / "b.json"))).read())
    assert a["topology"] == b["topology"]

    def shape(x):
        if isinstance(x, dict):
            return {k: shape(v) for k, v in x.items()}
        if isinstance(x, list):
            return [shape(v) for v in x[:1]]
        return type(x).__name__

    for doc in (a, b):
        for run in doc["runs"]:
            run.pop("run_id")
    assert shape(a["runs"]) == shape(b["runs"]) and shape(a["means"]) == shape(b["means"])


def test_failing_event_still_tears_down(tmp_path):
    orch = fake_orchestrator()
    path = tmp_path / "exp.yaml"
    path.write_text(experiment("events:\n  - command: list\n  - command: pause ghost\n  - command: list\n"))
    with pytest.raises(Exception, match="ghost"):
        shell.run_experiment_file(path, orch)
    assert FakeRuntime.containers == {}
    assert FakeFabric.root == set()


def test_events_wait_for_their_offsets(fake_ping):
    exp = parse_experiment(experiment("events:\n  - at: 5\n    command: list\n  - at: 1.5\n    command: list\n"))
    now = [100.0]
    slept = []

    def sleep(d):
        slept.append(d)
        now[0] += d

    shell.run_experiment(exp, fake_orchestrator(), os.devnull, clock=lambda: now[0], sleep=sleep)
    assert slept == [1.5, 3.5]


# --- CLI -------------------------------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys, fake_ping):
    good = tmp_path / "good.yaml"
    good.write_text(experiment("events:\n  - measure: {kind: ping, src: h1, dst: h2}\n"))
    bad = tmp_path / "bad.yaml"
    bad.write_text(experiment("events:\n  - command: frobnicate\n"))
    failing = tmp_path / "failing.yaml"
    failing.write_text(experiment("events:\n  - command: resume nobody\n"))

    assert cli.main(["run", str(good), "-o", str(tmp_path / "r.json")], fake_orchestrator()) == 0
    assert cli.main(["run", str(bad)], fake_orchestrator()) == 2
    assert "events[0].command" in capsys.readouterr().err
    assert cli.main(["run", str(failing)], fake_orchestrator()) == 3
    assert cli.main(["sweep", "mesh", "--sizes", "129", "--reps", "1"], fake_orchestrator()) == 2
    topo = tmp_path / "topo.yaml"
    topo.write_text("nodes: [{name: a, kind: gizmo}]\n")
    assert cli.main(["up", str(topo)], fake_orchestrator()) == 2
    broken = fake_orchestrator(Faults(bad_images={"host"}))
    topo.write_text(FIG6)
    assert cli.main(["up", str(topo)], broken) == 3
    assert FakeRuntime.containers == {}


def test_cli_repl_on_stdin(tmp_path, monkeypatch, capsys):
    topo = tmp_path / "topo.yaml"
    topo.write_text(FIG6)
    monkeypatch.setattr("sys.stdin", io.StringIO("list\nquit\n"))
    orch = fake_orchestrator()
    assert cli.main(["repl", str(topo)], orch) == 0
    out = capsys.readouterr().out
    assert "switches connected to tcp:" in out
    assert "ok 4 nodes" in out and "ok bye" in out
    assert FakeRuntime.containers == {}


def test_cli_sweep_writes_csv(tmp_path, monkeypatch, capsys):
    from vemul.metrics import sweep

    monkeypatch.setattr(sweep, "sample_steady_state", lambda emu, window_s, hz: (1.0, 2.0))
    monkeypatch.setattr(
        sweep, "measure_first_ping", lambda emu, s, d, n, command=None: LatencyRecord(s, d, 3.0, [1.0])
    )
    out = tmp_path / "s.csv"
    rc = cli.main(["sweep", "star", "--sizes", "3,4", "--reps", "2", "--no-throughput", "-o", str(out)], fake_orchestrator())
    assert rc == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "family,switch_count,rep,cpu_percent,memory_mb,first_ping_ms,throughput_mbps,ref_cpu_percent,ref_memory_mb,ref_first_ping_ms"
    assert rows[1] == "star,3,1,1.00,2.00,3.00,,,,"
    assert len(rows) == 5


# --- on the namespace-backed stand-in ----------------------------------------------------


@pytest.fixture
def orch(standin):
    engine = EngineClient(standin.socket_path)
    o = Orchestrator(engine, ready_timeout=20, connect_timeout=10)
    yield o
    Runtime(engine=engine).sweep()


@pytest.mark.integration
def test_repl_exec_on_standin(orch):
    emu = orch.up(minimal_topology())
    try:
        orch.connect_switches(emu)
        _, out = run_repl(emu, f"exec h1 python3 {PROBE} ping 10.0.0.2 1\npause h2\nlist\nresume h2\n")
        lines = out.splitlines()
        assert lines[0] == "ok exit 0"
        assert lines[2] == "  1 packets transmitted, 1 received"
        assert "h2 host paused" in out
        assert emu.handles["h2"].state is NodeState.RUNNING
    finally:
        orch.down(emu)


@pytest.mark.integration
def test_experiment_file_on_standin(orch, tmp_path):
    path = tmp_path / "fig6.yaml"
    path.write_text(
        experiment(
            f"""
            events:
              - command: "exec h1 python3 {PROBE} ping 10.0.0.2 1"
              - measure:
                  kind: ping
                  src: h1
                  dst: h2
                  count: 10
                  command: [python3, {PROBE}, ping, "{{addr}}", "{{count}}"]
            """
        )
    )
    report = json.loads(open(shell.run_experiment_file(path, orch)).read())
    result = report["runs"][0]["events"][1]["result"]
    assert result["loss_percent"] == 0.0 and result["received"] == 10
    assert Runtime(engine=orch.engine).list_managed() == []
