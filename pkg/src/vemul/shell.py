"""Interactive steering of a running emulation and a runner for experiment files.

Every REPL command answers with a status line whose first token is ``ok`` or
``err``; any further output follows on lines indented by two spaces, so the
stream stays easy to script against.
"""

from __future__ import annotations

import json
import logging
import math
import os
import shlex
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import docfile, topology as topo_mod
from .errors import CommandSyntaxError, SchemaViolation, Unreachable, VemulError
from .metrics import measure, tools
from .topology import LinkSpec, NodeKind, NodeSpec, ResourceLimits

log = logging.getLogger(__name__)

PROMPT = "vemul> "


class Verb(str, Enum):
    CREATE = "create"
    LIST = "list"
    UPDATE = "update"
    DELETE = "delete"
    EXEC = "exec"
    ATTACH = "attach"
    LINK_UP = "link-up"
    LINK_DOWN = "link-down"
    PAUSE = "pause"
    RESUME = "resume"
    QUIT = "quit"


USAGE = {
    Verb.CREATE: "create node|host|switch|controller NAME [key=value ...] | create link NAME A B [model=M key=K]",
    Verb.LIST: "list [nodes|links]",
    Verb.UPDATE: "update NAME cpu_quota=F memory_bytes=N | update SWITCH controller=tcp:IP:PORT",
    Verb.DELETE: "delete [node|link] NAME",
    Verb.EXEC: "exec NAME COMMAND [ARG ...]",
    Verb.ATTACH: "attach NAME (then one shell command per line; 'detach' to return)",
    Verb.LINK_UP: "link-up LINK",
    Verb.LINK_DOWN: "link-down LINK",
    Verb.PAUSE: "pause NAME",
    Verb.RESUME: "resume NAME",
    Verb.QUIT: "quit",
}

_NODE_KINDS = {"node": None, "host": NodeKind.HOST, "switch": NodeKind.SWITCH, "controller": NodeKind.CONTROLLER}
_NODE_ARGS = {"kind", "ip", "image", "role", "cpu_quota", "memory_bytes"}
_LINK_ARGS = {"model", "key"}
_UPDATE_ARGS = {"cpu_quota", "memory_bytes", "controller"}


@dataclass
class Command:
    verb: Verb
    target: str | None = None
    args: dict = field(default_factory=dict)

    def __str__(self):
        parts = [self.verb.value]
        if self.target:
            parts.append(self.target)
        parts += [f"{k}={v}" for k, v in self.args.items()]
        return " ".join(parts)


def _kv(tokens, allowed, verb):
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise CommandSyntaxError(f"{verb}: expected key=value, got {tok!r}")
        if key not in allowed:
            raise CommandSyntaxError(f"{verb}: unknown argument {key!r} (allowed: {', '.join(sorted(allowed))})")
        out[key] = value
    return out


def _need(tokens, n, verb):
    if len(tokens) < n:
        raise CommandSyntaxError(f"usage: {USAGE[verb]}")


def parse_command(line) -> Command | None:
    """Parse one line; ``None`` for a blank line or a comment."""
    try:
        tokens = shlex.split(line, comments=True)
    except ValueError as exc:
        raise CommandSyntaxError(f"cannot split line: {exc}") from None
    if not tokens:
        return None
    try:
        verb = Verb(tokens[0])
    except ValueError:
        raise CommandSyntaxError(
            f"unknown verb {tokens[0]!r}; expected one of {', '.join(v.value for v in Verb)}"
        ) from None
    rest = tokens[1:]

    if verb is Verb.QUIT:
        if rest:
            raise CommandSyntaxError("quit takes no arguments")
        return Command(verb)
    if verb is Verb.LIST:
        what = rest[0] if rest else "nodes"
        if what not in ("nodes", "links") or len(rest) > 1:
            raise CommandSyntaxError(f"usage: {USAGE[verb]}")
        return Command(verb, what)
    if verb is Verb.CREATE:
        _need(rest, 2, verb)
        what, name = rest[0], rest[1]
        if what == "link":
            _need(rest, 4, verb)
            args = _kv(rest[4:], _LINK_ARGS, "create link")
            args.update(type="link", a=rest[2], b=rest[3])
            return Command(verb, name, args)
        if what not in _NODE_KINDS:
            raise CommandSyntaxError(f"usage: {USAGE[verb]}")
        args = _kv(rest[2:], _NODE_ARGS, "create")
        kind = _NODE_KINDS[what]
        if kind is not None:
            if "kind" in args and args["kind"] != kind.value:
                raise CommandSyntaxError(f"create {what}: conflicting kind={args['kind']}")
            args["kind"] = kind.value
        args["type"] = "node"
        return Command(verb, name, args)
    if verb is Verb.UPDATE:
        _need(rest, 2, verb)
        return Command(verb, rest[0], _kv(rest[1:], _UPDATE_ARGS, "update"))
    if verb is Verb.DELETE:
        _need(rest, 1, verb)
        if rest[0] in ("node", "link"):
            _need(rest, 2, verb)
            if len(rest) > 2:
                raise CommandSyntaxError(f"usage: {USAGE[verb]}")
            return Command(verb, rest[1], {"type": rest[0]})
        if len(rest) > 1:
            raise CommandSyntaxError(f"usage: {USAGE[verb]}")
        return Command(verb, rest[0])
    if verb is Verb.EXEC:
        _need(rest, 2, verb)
        return Command(verb, rest[0], {"argv": rest[1:]})
    # single-target verbs
    if len(rest) != 1:
        raise CommandSyntaxError(f"usage: {USAGE[verb]}")
    return Command(verb, rest[0])


def _number(value, name, cast=float):
    try:
        out = cast(value)
    except (TypeError, ValueError):
        raise CommandSyntaxError(f"{name} must be a number, got {value!r}") from None
    if isinstance(out, float) and not math.isfinite(out):
        raise CommandSyntaxError(f"{name} must be finite")
    return out


def _limits(args):
    if "cpu_quota" not in args and "memory_bytes" not in args:
        return None
    cpu = _number(args["cpu_quota"], "cpu_quota") if "cpu_quota" in args else None
    mem = _number(args["memory_bytes"], "memory_bytes", int) if "memory_bytes" in args else None
    return ResourceLimits(cpu, mem)


@dataclass
class Reply:
    ok: bool
    status: str = ""
    lines: list[str] = field(default_factory=list)

    def render(self):
        # echoed user text may hold \r, \x1c or U+2028; keep one status line
        # and keep every payload fragment indented, however it gets split
        head = ("ok" if self.ok else "err") + (f" {self.status}" if self.status else "")
        head = " ".join(head.splitlines())
        body = [f"  {part}" for l in self.lines for part in (l.splitlines() or [""])]
        return "\n".join([head, *body]) + "\n"


def _output_lines(result):
    text = result.stdout + (result.stderr if result.stderr else "")
    return text.splitlines()


def _list(emu, what):
    if what == "links":
        rows = []
        for spec in emu.topology.links:
            handle = emu.links.get(spec.name)
            ends = ",".join(spec.nodes)
            state = handle.state.value if handle is not None else "absent"
            rows.append(f"{spec.name} {spec.model.value} {ends} {state}")
        return Reply(True, f"{len(rows)} links", rows)
    rows = []
    for spec in emu.topology.nodes:
        handle = emu.handles.get(spec.name)
        state = handle.state.value if handle is not None else "absent"
        mgmt = (handle.mgmt_ip if handle is not None else None) or "-"
        data = spec.ip_config.cidr if spec.ip_config else "-"
        rows.append(f"{spec.name} {spec.kind.value} {state} mgmt={mgmt} data={data}")
    return Reply(True, f"{len(rows)} nodes", rows)


def dispatch(emu, cmd: Command) -> Reply:
    """Carry out ``cmd`` against ``emu``; errors from the layers below propagate."""
    orch = emu.orchestrator
    v, target, args = cmd.verb, cmd.target, cmd.args
    if v is Verb.LIST:
        return _list(emu, target)
    if v is Verb.CREATE:
        if args["type"] == "link":
            key = _number(args["key"], "key", int) if "key" in args else None
            spec = LinkSpec(target, args["a"], args["b"], model=args.get("model", "veth"), tunnel_key=key)
            orch.add_link_live(emu, spec)
            return Reply(True, f"created link {target}")
        ip = topo_mod.IpConfig.parse(args["ip"]) if "ip" in args else None
        spec = NodeSpec(
            target,
            kind=args.get("kind", "host"),
            image=args.get("image", ""),
            role=args.get("role", "none"),
            ip_config=ip,
            limits=_limits(args),
        )
        handle = orch.add_node_live(emu, spec)
        return Reply(True, f"created {spec.kind.value} {target}", [f"mgmt={handle.mgmt_ip or '-'}"])
    if v is Verb.UPDATE:
        done = []
        if "controller" in args:
            orch.set_controller(emu, target, args["controller"])
            done.append(f"controller={args['controller']}")
        limits = _limits(args)
        if limits is not None:
            orch.update_limits(emu, target, limits)
            done.append("limits")
        return Reply(True, f"updated {target} " + " ".join(done))
    if v is Verb.DELETE:
        kind = args.get("type")
        if kind is None:
            kind = "link" if emu.topology.has_link(target) and not emu.topology.has_node(target) else "node"
        if kind == "link":
            orch.remove_link_live(emu, target)
        else:
            orch.remove_node_live(emu, target)
        return Reply(True, f"deleted {kind} {target}")
    if v is Verb.EXEC:
        result = orch.exec(emu, target, args["argv"])
        return Reply(result.ok, f"exit {result.exit_code}", _output_lines(result))
    if v in (Verb.LINK_UP, Verb.LINK_DOWN):
        state = "up" if v is Verb.LINK_UP else "down"
        orch.set_link_state(emu, target, state)
        return Reply(True, f"{target} {state}")
    if v is Verb.PAUSE:
        orch.pause(emu, target)
        return Reply(True, f"paused {target}")
    if v is Verb.RESUME:
        orch.resume(emu, target)
        return Reply(True, f"resumed {target}")
    if v is Verb.ATTACH:
        emu.handle(target)
        return Reply(True, f"attached to {target}; 'detach' returns")
    if v is Verb.QUIT:
        return Reply(True, "bye")
    raise CommandSyntaxError(f"unhandled verb {v.value}")  # pragma: no cover


def _error_reply(exc):
    kind = type(exc).__name__
    return Reply(False, f"{kind}: {exc}".replace("\n", " "))


def _read_line(instream):
    line = instream.readline()
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    return line


def _isatty(stream):
    try:
        return stream.isatty()
    except (AttributeError, ValueError, OSError):
        return False


def repl(emu, instream, outstream, prompt=None, exec_timeout_ms=60_000) -> int:
    """Read commands until ``quit`` or end of input; returns 0, or 1 if a stream breaks."""
    if prompt is None:
        prompt = PROMPT if _isatty(instream) and _isatty(outstream) else ""
    attached = None
    while True:
        try:
            if prompt:
                outstream.write(f"{attached}$ " if attached else prompt)
                outstream.flush()
            line = _read_line(instream)
        except KeyboardInterrupt:
            outstream.write("\n")
            continue
        except (OSError, ValueError) as exc:
            log.error("input stream failed: %s", exc)
            return 1
        if not line:
            return 0
        line = line.rstrip("\n")
        quit_now = False
        try:
            if attached:
                reply = _attached_line(emu, attached, line, exec_timeout_ms)
                if reply is None:
                    attached, reply = None, Reply(True, "detached")
            else:
                cmd = parse_command(line)
                if cmd is None:
                    reply = Reply(True)
                else:
                    reply = dispatch(emu, cmd)
                    if cmd.verb is Verb.ATTACH:
                        attached = cmd.target
                    quit_now = cmd.verb is Verb.QUIT
        except KeyboardInterrupt:
            reply = Reply(False, "interrupted")
        except Exception as exc:  # the loop must survive anything a user types
            reply = _error_reply(exc)
        try:
            outstream.write(reply.render())
            outstream.flush()
        except (OSError, ValueError) as exc:
            log.error("output stream failed: %s", exc)
            return 1
        if quit_now:
            return 0


def _attached_line(emu, node, line, timeout_ms):
    text = line.strip()
    if text in ("detach", "exit"):
        return None
    if not text:
        return Reply(True)
    result = emu.runtime.exec_in_node(emu.handle(node), ["sh", "-c", text], timeout_ms=timeout_ms)
    return Reply(result.ok, f"exit {result.exit_code}", _output_lines(result))


# --- experiment files ------------------------------------------------------------------

EXPERIMENT_KEYS = ("name", "topology", "topology_file", "generate", "controller", "repetitions", "events", "report")
EVENT_KEYS = ("at", "command", "measure", "parallel")
MEASURE_KEYS = {
    "ping": ("kind", "name", "src", "dst", "count", "command"),
    "udp": ("kind", "name", "src", "dst", "rate_mbps", "duration_s", "tool"),
    "resources": ("kind", "name", "window_s", "hz"),
}


@dataclass
class Measure:
    kind: str
    name: str
    params: dict


@dataclass
class Event:
    index: int
    at: float
    command: Command | None = None
    measures: list[Measure] = field(default_factory=list)
    parallel: bool = False
    text: str = ""


@dataclass
class Experiment:
    name: str
    source: str
    topology: topo_mod.Topology
    repetitions: int = 1
    events: list[Event] = field(default_factory=list)
    controller: bool | str = True
    report: str | None = None


def _fail(path, reason, lines):
    # a missing key has no line of its own; point at the enclosing value
    where = path
    while where and where not in lines:
        where = where[:-1]
    raise SchemaViolation(docfile.dotted(path), reason, lines.get(where))


def _positive(value, path, lines, cast=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "must be a number", lines)
    if not value > 0:
        _fail(path, "must be > 0", lines)
    return cast(value)


def _argv_template(value, path, lines, placeholders):
    if not isinstance(value, list) or not value or not all(isinstance(x, str) for x in value):
        _fail(path, "must be a non-empty list of strings", lines)
    try:
        for x in value:
            x.format(**{p: "" for p in placeholders})
    except (KeyError, IndexError, ValueError) as exc:
        _fail(path, f"bad placeholder {exc}; allowed: {', '.join(placeholders)}", lines)
    return list(value)


def _measure(raw, path, lines, default_name):
    if not isinstance(raw, dict):
        _fail(path, "expected a mapping", lines)
    kind = raw.get("kind")
    if kind not in MEASURE_KEYS:
        _fail(path + ("kind",), f"must be one of {', '.join(MEASURE_KEYS)}", lines)
    docfile.check_keys(raw, MEASURE_KEYS[kind], path, lines)
    params = {}
    if kind in ("ping", "udp"):
        for key in ("src", "dst"):
            if not isinstance(raw.get(key), str):
                _fail(path + (key,), "required host name", lines)
            params[key] = raw[key]
    if kind == "ping":
        params["count"] = _positive(raw.get("count", 11), path + ("count",), lines, int)
        if params["count"] < 2:
            _fail(path + ("count",), "must be at least 2", lines)
        if "command" in raw:
            params["command"] = _argv_template(raw["command"], path + ("command",), lines, ("addr", "count"))
        name = raw.get("name") or f"ping {params['src']}->{params['dst']}"
    elif kind == "udp":
        params["rate_mbps"] = _positive(raw.get("rate_mbps"), path + ("rate_mbps",), lines)
        params["duration_s"] = _positive(raw.get("duration_s", 10), path + ("duration_s",), lines)
        if "tool" in raw:
            tool = raw["tool"]
            docfile.check_keys(tool, ("server", "client"), path + ("tool",), lines, required=("server", "client"))
            params["tool"] = (
                _argv_template(tool["server"], path + ("tool", "server"), lines, ("port",)),
                _argv_template(tool["client"], path + ("tool", "client"), lines, ("addr", "rate", "duration", "port")),
            )
        name = raw.get("name") or f"udp {params['src']}->{params['dst']}"
    else:
        params["window_s"] = _positive(raw.get("window_s", 30), path + ("window_s",), lines)
        params["hz"] = _positive(raw.get("hz", 1), path + ("hz",), lines)
        name = raw.get("name") or default_name
    return Measure(kind, str(name), params)


def _topology(data, lines, base):
    given = [k for k in ("topology", "topology_file", "generate") if k in data]
    if len(given) != 1:
        _fail((), "exactly one of topology, topology_file or generate is required", lines)
    key = given[0]
    if key == "topology":
        return topo_mod.from_dict(data["topology"], lines, ("topology",))
    if key == "topology_file":
        path = base / str(data["topology_file"])
        try:
            return topo_mod.load(path)
        except OSError as exc:
            _fail(("topology_file",), f"cannot read: {exc}", lines)
    gen = data["generate"]
    docfile.check_keys(gen, ("family", "switches"), ("generate",), lines, required=("family", "switches"))
    if gen["family"] not in topo_mod.GENERATORS:
        _fail(("generate", "family"), f"must be one of {', '.join(topo_mod.GENERATORS)}", lines)
    switches = gen["switches"]
    if isinstance(switches, bool) or not isinstance(switches, int) or switches < 2:
        _fail(("generate", "switches"), "must be an integer >= 2", lines)
    return topo_mod.with_controller(topo_mod.generate(gen["family"], switches))


def parse_experiment(text, source="<experiment>") -> Experiment:
    data, lines = docfile.load(text, source)
    docfile.check_keys(data, EXPERIMENT_KEYS, (), lines)
    base = Path(source).parent if source and not source.startswith("<") else Path.cwd()
    topology = _topology(data, lines, base)

    reps = data.get("repetitions", 1)
    if isinstance(reps, bool) or not isinstance(reps, int) or reps < 1:
        _fail(("repetitions",), "must be an integer >= 1", lines)
    controller = data.get("controller", True)
    if not isinstance(controller, (bool, str)):
        _fail(("controller",), "must be true, false or a controller name", lines)
    if isinstance(controller, str) and not topology.has_node(controller):
        _fail(("controller",), f"no node named {controller!r}", lines)

    raw_events = data.get("events") or []
    if not isinstance(raw_events, list):
        _fail(("events",), "expected a list", lines)
    events = []
    for i, raw in enumerate(raw_events):
        path = ("events", i)
        docfile.check_keys(raw, EVENT_KEYS, path, lines)
        at = raw.get("at", 0)
        if isinstance(at, bool) or not isinstance(at, (int, float)) or at < 0:
            _fail(path + ("at",), "must be a number >= 0", lines)
        has_cmd, has_measure = "command" in raw, "measure" in raw
        if has_cmd == has_measure:
            _fail(path, "exactly one of command or measure is required", lines)
        ev = Event(i, float(at), parallel=bool(raw.get("parallel", False)))
        if has_cmd:
            if not isinstance(raw["command"], str):
                _fail(path + ("command",), "must be a string", lines)
            try:
                ev.command = parse_command(raw["command"])
            except CommandSyntaxError as exc:
                _fail(path + ("command",), str(exc), lines)
            if ev.command is None:
                _fail(path + ("command",), "empty command", lines)
            if ev.command.verb in (Verb.ATTACH, Verb.QUIT):
                _fail(path + ("command",), f"{ev.command.verb.value} is only meaningful interactively", lines)
            ev.text = raw["command"]
        else:
            items = raw["measure"] if isinstance(raw["measure"], list) else [raw["measure"]]
            if not items:
                _fail(path + ("measure",), "empty measure list", lines)
            for j, item in enumerate(items):
                sub = path + ("measure", j) if isinstance(raw["measure"], list) else path + ("measure",)
                ev.measures.append(_measure(item, sub, lines, f"resources #{i}"))
        events.append(ev)
    names = [m.name for ev in events for m in ev.measures]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        _fail(("events",), f"measure names must be unique: {', '.join(dupes)}", lines)
    events.sort(key=lambda e: (e.at, e.index))
    name = str(data.get("name") or Path(source).stem)
    report = data.get("report")
    return Experiment(name, source, topology, reps, events, controller, str(report) if report else None)


def load_experiment(path) -> Experiment:
    with open(path) as fh:
        return parse_experiment(fh.read(), str(path))


def _run_measure(emu, m: Measure):
    p = m.params
    if m.kind == "ping":
        command = None
        if "command" in p:
            template = p["command"]
            command = lambda addr, count: [x.format(addr=addr, count=count) for x in template]  # noqa: E731
        try:
            rec = measure.measure_first_ping(emu, p["src"], p["dst"], p["count"], command=command)
        except Unreachable:
            return {"src": p["src"], "dst": p["dst"], "sent": p["count"], "received": 0, "loss_percent": 100.0,
                    "first_ping_ms": None, "median_subsequent_ms": None, "subsequent_ms": []}
        return {
            "src": rec.src,
            "dst": rec.dst,
            "sent": rec.sent,
            "received": rec.received,
            "loss_percent": rec.loss_percent,
            "first_ping_ms": rec.first_ping_ms,
            "median_subsequent_ms": rec.median_subsequent_ms,
            "subsequent_ms": rec.subsequent_ms,
        }
    if m.kind == "udp":
        tool = tools.IPERF3
        if "tool" in p:
            server, client = p["tool"]
            tool = tools.TrafficTool(
                "custom",
                lambda port: [x.format(port=port) for x in server],
                lambda addr, rate, dur, port: [x.format(addr=addr, rate=rate, duration=dur, port=port) for x in client],
            )
        series = measure.run_udp_flow(emu, p["src"], p["dst"], p["rate_mbps"], p["duration_s"], tool=tool)
        return {
            "src": p["src"],
            "dst": p["dst"],
            "requested_mbps": series.requested_mbps,
            "mean_mbps": series.mean_mbps,
            "samples": [[s, mbps] for s, mbps in series.samples],
        }
    cpu, mem = measure.sample_steady_state(emu, window_s=p["window_s"], hz=p["hz"])
    return {"cpu_percent": cpu, "memory_mb": mem}


def _run_event(emu, ev: Event):
    if ev.command is not None:
        reply = dispatch(emu, ev.command)
        record = {"event": ev.index, "at": ev.at, "command": ev.text, "status": "ok" if reply.ok else "err",
                  "detail": reply.status, "output": reply.lines}
        if not reply.ok:
            raise VemulError(f"event {ev.index} ({ev.text}) failed: {reply.status}")
        return [record]
    if ev.parallel and len(ev.measures) > 1:
        with ThreadPoolExecutor(max_workers=len(ev.measures)) as pool:
            results = list(pool.map(lambda m: _run_measure(emu, m), ev.measures))
    else:
        results = [_run_measure(emu, m) for m in ev.measures]
    return [
        {"event": ev.index, "at": ev.at, "measure": m.name, "kind": m.kind, "result": r}
        for m, r in zip(ev.measures, results)
    ]


def _scalar_fields(result):
    return {k: v for k, v in result.items() if isinstance(v, (int, float)) and not isinstance(v, bool)}


def _means(runs, names):
    """Per measure, the arithmetic mean of every numeric field over the runs that produced it."""
    out = {}
    for name in names:
        per_field = {}
        for run in runs:
            for rec in run["events"]:
                if rec.get("measure") == name:
                    for k, v in _scalar_fields(rec["result"]).items():
                        per_field.setdefault(k, []).append(v)
        out[name] = {k: math.fsum(vs) / len(vs) for k, vs in per_field.items()}
    return out


def _connect(orch, emu, controller):
    if controller is False or not emu.topology.switches or not emu.topology.controllers:
        return
    orch.connect_switches(emu, None if controller is True else controller)


def run_experiment(exp: Experiment, orchestrator=None, out_path=None, clock=time.monotonic, sleep=time.sleep):
    """Run every repetition of ``exp`` and write the JSON report; returns its path.

    Each repetition brings the topology up, replays the events at their
    offsets from the moment it is up, and always tears down.  A failing
    event stops the experiment after teardown.
    """
    from .orchestrator import default_orchestrator

    orch = orchestrator or default_orchestrator()
    out_path = out_path or exp.report or _default_report_path(exp)
    runs = []
    for rep in range(1, exp.repetitions + 1):
        emu = orch.up(exp.topology)
        records = []
        try:
            _connect(orch, emu, exp.controller)
            start = clock()
            for ev in exp.events:
                delay = start + ev.at - clock()
                if delay > 0:
                    sleep(delay)
                records.extend(_run_event(emu, ev))
        finally:
            residue = orch.down(emu)
            if residue:
                log.error("repetition %d left residue: %s", rep, ", ".join(residue))
        runs.append({"rep": rep, "run_id": emu.run_id, "events": records})
        log.info("%s: repetition %d/%d done", exp.name, rep, exp.repetitions)
    names = [m.name for ev in exp.events for m in ev.measures]
    report = {
        "experiment": exp.name,
        "source": exp.source,
        "repetitions": exp.repetitions,
        "topology": exp.topology.to_dict(),
        "runs": runs,
        "means": _means(runs, names),
    }
    parent = os.path.dirname(os.path.abspath(out_path))
    os.makedirs(parent, exist_ok=True)
    with open(out_path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return out_path


def _default_report_path(exp):
    if exp.source.startswith("<"):
        return f"{exp.name}.report.json"
    p = Path(exp.source)
    return str(p.with_name(p.stem + ".report.json"))


def run_experiment_file(path, orchestrator=None, out_path=None):
    exp = load_experiment(path)
    if exp.report and out_path is None and not os.path.isabs(exp.report):
        out_path = str(Path(path).parent / exp.report)
    return run_experiment(exp, orchestrator, out_path)
