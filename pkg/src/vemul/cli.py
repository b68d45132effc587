"""Command-line entry point: ``vemul up|run|repl|sweep|fidelity|clean``.

Exit status is 0 on success, 2 when a topology or experiment document is
invalid, and 3 when bringing up or running the emulation fails.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading

from . import __version__, shell, topology as topo_mod
from .errors import CommandSyntaxError, PreconditionError, SchemaViolation, TopologyError, VemulError

log = logging.getLogger("vemul")

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_RUNTIME = 3


def _sizes(text):
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got {text!r}") from None
    if not sizes:
        raise argparse.ArgumentTypeError("at least one size is required")
    return sizes


def build_parser():
    p = argparse.ArgumentParser(prog="vemul", description="Container-based SDN network emulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    up = sub.add_parser("up", help="bring a topology up and keep it running until interrupted")
    up.add_argument("topology", help="topology file (YAML)")
    up.add_argument("--no-controller", action="store_true", help="do not point switches at the controller")
    up.add_argument("--repl", action="store_true", help="steer the running topology from an interactive prompt")

    run = sub.add_parser("run", help="run an experiment file and write its report")
    run.add_argument("experiment", help="experiment file (YAML)")
    run.add_argument("-o", "--output", help="report path (default: next to the experiment file)")

    repl = sub.add_parser("repl", help="interactive prompt over a topology (empty if none given)")
    repl.add_argument("topology", nargs="?", help="topology file to bring up first")
    repl.add_argument("--no-controller", action="store_true")

    sw = sub.add_parser("sweep", help="scalability sweep over switch counts")
    sw.add_argument("family", choices=("star", "mesh", "tree"))
    sw.add_argument("--sizes", type=_sizes, default=[9, 17, 33], help="comma-separated switch counts")
    sw.add_argument("--reps", type=int, default=15, help="repetitions per size (default 15)")
    sw.add_argument("--window", type=float, default=30.0, help="steady-state sampling window in seconds")
    sw.add_argument("--hz", type=float, default=1.0, help="sampling rate during the window")
    sw.add_argument("--echoes", type=int, default=11, help="echoes per latency probe")
    sw.add_argument("--rate", type=float, default=100.0, help="UDP probe rate in Mbps")
    sw.add_argument("--duration", type=float, default=10.0, help="UDP probe duration in seconds")
    sw.add_argument("--no-throughput", action="store_true", help="skip the UDP probe")
    sw.add_argument("--allow-large", action="store_true", help="permit mesh sizes above the cap")
    sw.add_argument("-o", "--output", default="sweep.csv", help="CSV path (a .comparison file is written beside it)")

    fid = sub.add_parser("fidelity", help="foreground UDP flow under background load")
    fid.add_argument("--fg", type=float, default=1000.0, help="foreground rate in Mbps before scaling")
    fid.add_argument("--bg", type=float, default=400.0, help="per-pair background rate in Mbps before scaling")
    fid.add_argument("--duration", type=float, default=60.0)
    fid.add_argument("--scale", type=float, default=0.1, help="rate multiplier in (0, 1]")
    fid.add_argument("--capacity", action="store_true", help="also measure the switching ceiling first")
    fid.add_argument("-o", "--output", default="fidelity.csv")

    cl = sub.add_parser("clean", help="remove containers and interfaces left by earlier runs")
    cl.add_argument("--run", action="append", help="only this run id (repeatable)")
    cl.add_argument("--all-interfaces", action="store_true",
                    help="also delete every root-namespace interface named like ours, whatever its run")
    return p


def _load_topology(path):
    return topo_mod.load(path)


def _connect(orch, emu, enabled):
    if enabled and emu.topology.switches and len(emu.topology.controllers) == 1:
        target = orch.connect_switches(emu)
        print(f"switches connected to {target}")


def _print_nodes(emu):
    print(shell.dispatch(emu, shell.Command(shell.Verb.LIST, "nodes")).render(), end="")


def _wait_for_interrupt():
    done = threading.Event()
    previous = signal.signal(signal.SIGTERM, lambda *_: done.set())
    try:
        while not done.wait(1.0):
            pass
    except KeyboardInterrupt:
        pass
    finally:
        signal.signal(signal.SIGTERM, previous)


def cmd_up(args, orch):
    topo = _load_topology(args.topology)
    emu = orch.up(topo)
    try:
        _connect(orch, emu, not args.no_controller)
        _print_nodes(emu)
        if args.repl:
            shell.repl(emu, sys.stdin, sys.stdout)
        else:
            print(f"run {emu.run_id} is up; Ctrl-C tears it down")
            _wait_for_interrupt()
    finally:
        residue = orch.down(emu)
    return EXIT_RUNTIME if residue else EXIT_OK


def cmd_repl(args, orch):
    topo = _load_topology(args.topology) if args.topology else topo_mod.Topology(runnable=True)
    emu = orch.up(topo)
    try:
        _connect(orch, emu, not args.no_controller)
        status = shell.repl(emu, sys.stdin, sys.stdout)
    finally:
        residue = orch.down(emu)
    return EXIT_RUNTIME if residue or status else EXIT_OK


def cmd_run(args, orch):
    path = shell.run_experiment_file(args.experiment, orch, args.output)
    print(f"report written to {path}")
    return EXIT_OK


def cmd_sweep(args, orch):
    from .metrics import REFERENCE, emit_report, run_scalability_sweep
    from .metrics.report import comparison_path

    def progress(r):
        print(f"{r.family} S={r.switch_count} rep {r.rep}: cpu={r.cpu_percent}% mem={r.memory_mb} MB "
              f"first_ping={r.first_ping_ms} ms tput={r.throughput_mbps} Mbps", flush=True)

    results = run_scalability_sweep(
        args.family,
        args.sizes,
        args.reps,
        orch,
        window_s=args.window,
        hz=args.hz,
        echo_count=args.echoes,
        measure_throughput=not args.no_throughput,
        rate_mbps=args.rate,
        duration_s=args.duration,
        allow_large=args.allow_large,
        progress=progress,
    )
    incomplete = [r for r in results if r.incomplete or r.flagged]
    if not any(r.runs for r in results):
        log.error("no repetition completed")
        return EXIT_RUNTIME
    out = emit_report(results, REFERENCE, args.output)
    print(f"wrote {out} and {comparison_path(out)}")
    for r in incomplete:
        print(f"warning: {r.family} S={r.switch_count}: {r.incomplete} incomplete"
              + (f" ({r.flagged})" if r.flagged else ""), file=sys.stderr)
    return EXIT_RUNTIME if incomplete else EXIT_OK


def cmd_fidelity(args, orch):
    from .metrics import emit_fidelity_csv, run_fidelity_scenario

    res = run_fidelity_scenario(
        args.fg, args.bg, args.duration, args.scale, orchestrator=orch, measure_capacity=args.capacity
    )
    out = emit_fidelity_csv(res, args.output)
    fg = res.foreground
    print(f"foreground {fg.flow}: requested {fg.requested_mbps:.2f} Mbps, mean {fg.mean_mbps or 0:.2f} Mbps, "
          f"{fg.fraction_within(0.10):.0%} of seconds within 10%")
    if res.capacity_mbps:
        print(f"requested total {res.requested_total_mbps:.2f} Mbps of {res.capacity_mbps:.2f} Mbps measured capacity")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_clean(args, orch):
    from .fabric import sweep_root
    from .runtime import Runtime

    rt = Runtime(engine=orch.engine) if orch.engine is not None else Runtime()
    run_ids = args.run
    if run_ids is None:
        run_ids = sorted({h.run_id for h in rt.list_managed()})
    removed = []
    for run_id in run_ids:
        removed += rt.sweep(run_id)
    ifaces = sweep_root(None if args.all_interfaces else run_ids)
    for name in removed:
        print(f"removed container {name}")
    for name in ifaces:
        print(f"removed interface {name}")
    print(f"{len(removed)} containers, {len(ifaces)} interfaces removed")
    return EXIT_OK


COMMANDS = {
    "up": cmd_up,
    "run": cmd_run,
    "repl": cmd_repl,
    "sweep": cmd_sweep,
    "fidelity": cmd_fidelity,
    "clean": cmd_clean,
}


def main(argv=None, orchestrator=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if orchestrator is None:
        from .orchestrator import Orchestrator

        orchestrator = Orchestrator()
    try:
        return COMMANDS[args.command](args, orchestrator)
    except (SchemaViolation, TopologyError, CommandSyntaxError, PreconditionError) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (VemulError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
