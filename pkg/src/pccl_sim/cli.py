"""Command-line entry point: ``pccl-sim <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from dataclasses import replace

from . import bench, config, fiber_planner, mesh_router
from .collectives import Schedule, make_schedule, split_rounds
from .cost_model import schedule_cost
from .planner import PlannerInput, plan
from .report import Table, dumps_json, emit, table_to_csv, table_to_json
from .taskgraph import Backend, TaskGraph, coschedule, simulate, tag_comm_nodes
from .topology import Topology, default_dims, make_topology


class UsageError(ValueError):
    pass


_BYTES = {"": 1, "b": 1, "kb": 2**10, "mb": 2**20, "gb": 2**30}
_TIME = {"": 1.0, "s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}


def parse_bytes(text: str) -> int:
    """``256MB`` -> bytes; KB/MB/GB are binary multiples."""
    m = re.fullmatch(r"\s*([0-9.eE+]+)\s*([a-zA-Z]*)\s*", str(text))
    if not m or m.group(2).lower() not in _BYTES:
        raise UsageError(f"cannot parse size {text!r}")
    return int(round(float(m.group(1)) * _BYTES[m.group(2).lower()]))


def parse_time(text: str) -> float:
    """``5us`` / ``1ms`` / ``0.001`` -> seconds."""
    m = re.fullmatch(r"\s*([0-9.eE+-]+)\s*([a-zA-Z]*)\s*", str(text))
    if not m or m.group(2).lower() not in _TIME:
        raise UsageError(f"cannot parse duration {text!r}")
    return float(m.group(1)) * _TIME[m.group(2).lower()]


def parse_dims(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"cannot parse dims {text!r}; expected e.g. 4x4x8") from None


def _csv_list(text, conv=str):
    return [conv(x) for x in text.split(",") if x.strip()]


def _read(path: str) -> str:
    try:
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise RuntimeError(f"{path}: {e}") from e


def _load_json(path: str):
    text = _read(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise RuntimeError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e


def _write(text: str, out):
    if out:
        try:
            with open(out, "w") as f:
                f.write(text)
        except OSError as e:
            raise RuntimeError(f"{out}: {e}") from e
    else:
        sys.stdout.write(text)


def _params(args):
    cfg = config.load_defaults(args.config)
    p = config.params_from_config(cfg)
    if args.alpha is not None:
        p = replace(p, alpha=parse_time(args.alpha))
    if args.beta is not None:
        p = replace(p, beta=float(args.beta))
    if args.reconf is not None:
        p = replace(p, reconf_delay=parse_time(args.reconf))
    return cfg, p


def _topology(kind, n, dims):
    if kind == "ring":
        return make_topology("ring", [n])
    return make_topology(kind, parse_dims(dims) if dims else default_dims(kind, n))


# -- subcommands ----------------------------------------------------------------

def cmd_gen_topology(args):
    if args.dims is None and args.n is None:
        raise UsageError("gen-topology needs --dims or --n")
    n = args.n or 0
    if args.kind == "ring" and args.dims:
        n = parse_dims(args.dims)[0]
    t = _topology(args.kind, n, args.dims)
    _write(t.to_json() + "\n", args.out)


def cmd_gen_schedule(args):
    dims = parse_dims(args.dims) if args.dims else None
    s = make_schedule(args.algorithm, args.primitive, args.n, parse_bytes(args.bytes), dims=dims)
    if args.tx != 1 or args.rx != 1:
        s = split_rounds(s, args.tx, args.rx)
    _write(s.to_json() + "\n", args.out)


def cmd_cost(args):
    _, p = _params(args)
    t = Topology.from_dict(_load_json(args.topology))
    s = Schedule.from_dict(_load_json(args.schedule))
    total, per = schedule_cost(t, s, p)
    doc = {
        "total_s": total,
        "per_round": [
            {"dilation": rc.dilation, "congestion": rc.congestion, "time_s": rc.time, "connected": rc.connected}
            for rc in per
        ],
    }
    _write(dumps_json(doc), args.out)


def cmd_plan(args):
    _, p = _params(args)
    g0 = Topology.from_dict(_load_json(args.topology))
    standard = [Topology.from_dict(_load_json(f)) for f in args.standard or []]
    s = Schedule.from_dict(_load_json(args.schedule))
    result = plan(PlannerInput(g0, standard, s, p))
    doc = result.to_dict()
    doc["n_reconfigs"] = result.n_reconfigs
    _write(dumps_json(doc), args.out)


def cmd_route_mesh(args):
    w, h = parse_dims(args.mesh)
    if args.requests:
        _, reqs = mesh_router.requests_from_json(_read(args.requests))
    else:
        reqs = mesh_router.random_requests(w, h, args.random, args.seed, args.wavelengths)
    g = mesh_router.MeshGraph(w, h)
    routes, _ = mesh_router.route_all(g, reqs, args.max_overlap, args.penalize_factor, args.trials)
    doc = mesh_router.routes_to_dict(routes)
    doc["valid"] = mesh_router.validate_routes(g, routes, args.max_overlap)
    _write(dumps_json(doc), args.out)


def cmd_plan_fibers(args):
    w, h = parse_dims(args.grid)
    g = fiber_planner.ServerGraph.grid(w, h, per_direction=args.per_direction)
    if args.requests:
        reqs = fiber_planner.requests_from_json(_read(args.requests))
    else:
        reqs = fiber_planner.random_requests(w * h, args.random, args.seed)
    result = fiber_planner.plan_fibers(g, reqs, seed=args.seed)
    doc = result.to_dict()
    doc["valid"] = fiber_planner.verify_plan(g, reqs, result)
    _write(dumps_json(doc), args.out)


def cmd_simulate(args):
    _, p = _params(args)
    try:
        g = TaskGraph.from_dict(_load_json(args.graph))
    except ValueError as e:
        raise RuntimeError(f"{args.graph}: {e}") from e
    g = coschedule(tag_comm_nodes(g), epsilon=args.epsilon)
    t = _topology(args.topology, args.n, args.dims)
    rep = simulate(g, Backend(args.backend, t, p))
    doc = rep.to_dict()
    doc["warnings"] = g.warnings
    _write(dumps_json(doc), args.out)


def _spec(args, cfg, p, **kw):
    return bench.ScenarioSpec(
        topologies=_csv_list(args.topologies) if args.topologies else list(cfg["topologies"]),
        n_ranks=args.n or cfg["n_ranks"],
        reconf_delays=_csv_list(args.reconf_sweep, parse_time) if args.reconf_sweep else [p.reconf_delay],
        params=p,
        tx_per_gpu=cfg["tx_per_gpu"],
        rx_per_gpu=cfg["rx_per_gpu"],
        seed=args.seed,
        **kw,
    )


def _emit_table(table: Table, args):
    if args.out:
        emit(table, args.format, args.out)
    else:
        sys.stdout.write(table_to_csv(table) if args.format == "csv" else table_to_json(table))


def cmd_benchmark(args):
    cfg, p = _params(args)
    buffers = _csv_list(args.buffers, parse_bytes) if args.buffers else list(cfg["buffer_sweep_bytes"])
    spec = _spec(
        args, cfg, p,
        algorithms=_csv_list(args.algorithms),
        primitive=args.primitive,
        buffers=buffers,
        dims=parse_dims(args.dims) if args.dims else None,
    )
    _emit_table(bench.run_benchmark(spec, workers=args.workers), args)


def cmd_endtoend(args):
    cfg, p = _params(args)
    graph = None
    if args.graph:
        try:
            graph = TaskGraph.from_dict(_load_json(args.graph))
        except ValueError as e:
            raise RuntimeError(f"{args.graph}: {e}") from e
    spec = _spec(args, cfg, p)
    table = bench.run_endtoend(
        spec, graph, rank_counts=_csv_list(args.ranks, int), backends=_csv_list(args.backends)
    )
    _emit_table(table, args)


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pccl-sim", description="Collective communication on reconfigurable fabrics.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def costflags(sp):
        sp.add_argument("--alpha", help="per-hop latency, e.g. 3us (default from config)")
        sp.add_argument("--beta", help="seconds per byte (default 1/450e9)")
        sp.add_argument("--reconf", help="reconfiguration delay, e.g. 5us")
        sp.add_argument("--config", help="JSON file overriding packaged defaults")

    def out(sp, fmt=False):
        sp.add_argument("--out", "-o", help="output path (default stdout)")
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("gen-topology", help="emit a topology as JSON")
    sp.add_argument("--kind", required=True, choices=("ring", "torus2d", "torus3d", "grid2d", "grid3d"))
    sp.add_argument("--dims", help="e.g. 4x4x8")
    sp.add_argument("--n", type=int, help="rank count; dims default to a near-cubic shape")
    out(sp)
    sp.set_defaults(func=cmd_gen_topology)

    sp = sub.add_parser("gen-schedule", help="emit a collective schedule as JSON")
    sp.add_argument("--algorithm", required=True, choices=("ring", "rhd", "bucket", "dex"))
    sp.add_argument("--primitive", required=True, choices=("reduce_scatter", "all_gather", "all_reduce", "all_to_all"))
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--bytes", required=True, help="buffer size, e.g. 256MB")
    sp.add_argument("--dims", help="bucket dims, e.g. 4x4x8")
    sp.add_argument("--tx", type=int, default=1, help="sends per rank per round (default 1)")
    sp.add_argument("--rx", type=int, default=1, help="receives per rank per round (default 1)")
    out(sp)
    sp.set_defaults(func=cmd_gen_schedule)

    sp = sub.add_parser("cost", help="cost a schedule on a fixed topology")
    sp.add_argument("--topology", required=True)
    sp.add_argument("--schedule", required=True)
    costflags(sp)
    out(sp)
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("plan", help="choose a topology per round")
    sp.add_argument("--topology", required=True, help="initial topology JSON")
    sp.add_argument("--standard", action="append", help="fallback topology JSON (repeatable)")
    sp.add_argument("--schedule", required=True)
    costflags(sp)
    out(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("route-mesh", help="route circuits across an MZI mesh")
    sp.add_argument("--mesh", default="64x64")
    sp.add_argument("--requests", help="JSON with a 'requests' list of {src, dst, wavelength}")
    sp.add_argument("--random", type=int, default=128, help="random request count if no file (default 128)")
    sp.add_argument("--wavelengths", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-overlap", type=int, default=mesh_router.MAX_OVERLAP)
    sp.add_argument("--penalize", "--penalize-factor", dest="penalize_factor", type=float, default=mesh_router.PENALIZE_FACTOR)
    sp.add_argument("--trials", type=int, default=mesh_router.TRIALS)
    out(sp)
    sp.set_defaults(func=cmd_route_mesh)

    sp = sub.add_parser("plan-fibers", help="route inter-server circuits minimizing fibers per link")
    sp.add_argument("--grid", default="8x8")
    sp.add_argument("--requests", help="JSON list of [src, dst] server pairs")
    sp.add_argument("--random", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--per-direction", action="store_true", help="count each link direction separately")
    out(sp)
    sp.set_defaults(func=cmd_plan_fibers)

    sp = sub.add_parser("simulate", help="replay one training iteration")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--topology", default="ring", choices=("ring", "torus2d", "torus3d", "grid2d", "grid3d"))
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--dims")
    sp.add_argument("--backend", default="pccl", choices=("ring", "rhd", "bucket", "pccl"))
    sp.add_argument("--epsilon", type=float, default=0.0, help="co-scheduling window in seconds")
    costflags(sp)
    out(sp)
    sp.set_defaults(func=cmd_simulate)

    for name, fn in (("benchmark", cmd_benchmark), ("endtoend", cmd_endtoend)):
        sp = sub.add_parser(name, help=f"{name} sweep")
        sp.add_argument("--topologies", help="comma list (default: all five)")
        sp.add_argument("--n", type=int, help="rank count (default from config)")
        sp.add_argument("--reconf-sweep", help="comma list of delays, e.g. 5us,1ms")
        sp.add_argument("--seed", type=int, default=0)
        costflags(sp)
        out(sp, fmt=True)
        sp.set_defaults(func=fn)
        if name == "benchmark":
            sp.add_argument("--algorithms", default="ring,rhd,bucket,pccl")
            sp.add_argument("--primitive", default="reduce_scatter")
            sp.add_argument("--buffers", help="comma list, e.g. 1MB,256MB (default 1MB..1GB)")
            sp.add_argument("--dims")
            sp.add_argument("--workers", type=int, default=1)
        else:
            sp.add_argument("--graph", help="task graph JSON (default: transformer fixture)")
            sp.add_argument("--ranks", default="32,64,128")
            sp.add_argument("--backends", default="ring,rhd,bucket,pccl")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (UsageError, bench.SpecError) as e:
        print(f"pccl-sim {args.command}: {e}", file=sys.stderr)
        return 2
    except (config.ConfigError, RuntimeError, ValueError, KeyError) as e:
        print(f"pccl-sim {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
