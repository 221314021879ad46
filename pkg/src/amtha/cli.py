"""Command line front end.

    amtha generate --spec paper_8core --seed 3 --out g.json
    amtha map --graph g.json --topo fig1_8core --out sched.json
    amtha simulate --schedule sched.json --graph g.json --topo fig1_8core --out result.json
    amtha evaluate --spec paper_8core --runs 30 --contention serialize-per-level
    amtha verify --max-tasks 4 --trials 50 --seed 7

``--topo`` and ``--spec`` take a file path or a preset name. Outputs without an
explicit path go to ``$AMTHA_OUTPUT_DIR`` (default: the current directory).
Failures print one ``error: <Kind>: <message>`` line and exit 1.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from ._io import read_document, write_document
from .errors import AmthaError, SpecError
from .experiment import run_experiment
from .generator import SPEC_PRESETS, WorkloadSpec, generate, load_spec, small_case
from .graph import graph_to_dict, load_graph
from .mapper import Schedule, map_graph
from .oracle import OracleLimits, optimal_schedule
from .simulator import CONTENTION_MODES, SERIALIZE, simulate
from .topology import PRESETS, resolve_topology
from .validate import check_placements

OUTPUT_ENV = "AMTHA_OUTPUT_DIR"


def _output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "."))


def _out_path(arg: str | None, default_name: str) -> Path:
    return Path(arg) if arg else _output_dir() / default_name


def _resolve_spec(ref: str) -> tuple[WorkloadSpec, dict]:
    path = Path(ref)
    if path.exists():
        return load_spec(path)
    stem = path.name.split(".")[0]
    if stem in SPEC_PRESETS:
        return load_spec(SPEC_PRESETS[stem])
    raise SpecError(f"spec {ref!r} is neither a file nor a preset ({', '.join(SPEC_PRESETS)})")


def _topology_for(args, spec_doc: dict | None = None):
    ref = args.topo or (spec_doc or {}).get("topology") or "fig1_8core"
    return resolve_topology(ref, strict=args.strict)


def cmd_generate(args) -> int:
    spec, doc = _resolve_spec(args.spec)
    topo = _topology_for(args, doc)
    base = spec.seed if args.seed is None else args.seed
    if args.count == 1:
        g = generate(spec.replace(seed=base), topo)
        out = _out_path(args.out, f"graph_seed{base}.json")
        write_document(graph_to_dict(g), out)
        print(f"wrote {out} ({len(g.tasks)} tasks, {len(g.subtasks)} subtasks, {len(g.edges)} edges)")
        return 0
    out_dir = Path(args.out) if args.out else _output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    for seed in range(base, base + args.count):
        write_document(graph_to_dict(generate(spec.replace(seed=seed), topo)), out_dir / f"graph_seed{seed}.json")
    print(f"wrote {args.count} graphs to {out_dir}")
    return 0


def cmd_map(args) -> int:
    topo = _topology_for(args)
    g = load_graph(args.graph, processor_types=topo.processor_types)
    sched = map_graph(g, topo)
    out = _out_path(args.out, "schedule.json")
    write_document(sched.to_dict(), out)
    print(f"t_est_s={sched.t_est!r} written to {out}")
    return 0


def cmd_simulate(args) -> int:
    topo = _topology_for(args)
    g = load_graph(args.graph, processor_types=topo.processor_types)
    sched = Schedule.from_dict(read_document(args.schedule), g, topo)
    res = simulate(sched, g, topo, args.contention)
    out = _out_path(args.out, "result.json")
    write_document(res.to_dict(), out)
    print(f"t_est_s={res.t_est!r} t_exec_s={res.t_exec!r} dif_rel_pct={res.dif_rel_pct!r} written to {out}")
    return 0


def cmd_evaluate(args) -> int:
    spec, doc = _resolve_spec(args.spec)
    topo = _topology_for(args, doc)
    report = run_experiment(spec, topo, args.runs, args.contention, args.seed, args.min_grain_ratio)
    out_dir = Path(args.out_dir) if args.out_dir else _output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(report.to_csv())
    write_document(report.summary_document(), out_dir / "summary.json")
    s = report.summary
    print(f"{s['n']} instances on {topo.name}: mean dif_rel_pct={s['mean_dif_rel_pct']:.6g} "
          f"max={s['max_dif_rel_pct']:.6g} stddev={s['stddev_dif_rel_pct']:.6g}; "
          f"report in {out_dir}")
    return 0


def cmd_verify(args) -> int:
    limits = OracleLimits(max_tasks=max(args.max_tasks, 1), max_cores=max(args.max_cores, 1),
                          max_subtasks=args.max_tasks * args.max_subtasks)
    ok = 0
    failures = []
    for i in range(args.trials):
        seed = args.seed + i
        g, topo = small_case(seed, args.max_tasks, args.max_subtasks, args.max_cores)
        sched = map_graph(g, topo)
        problems = check_placements(g, topo, sched.placements, sched.task_assignment, sched.pending)
        res = optimal_schedule(g, topo, limits)
        if not problems and res.exhaustive and sched.t_est >= res.optimal_makespan - 1e-9:
            ok += 1
        else:
            failures.append(f"seed {seed}: t_est={sched.t_est} optimal={res.optimal_makespan} "
                            f"exhaustive={res.exhaustive} problems={problems[:2]}")
    print(f"{ok}/{args.trials} AMTHA ≥ optimal")
    for line in failures:
        print(line, file=sys.stderr)
    return 0 if ok == args.trials else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amtha", description="AMTHA task mapping pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def topo_flags(p, required=False):
        p.add_argument("--topo", required=required,
                       help=f"topology file or preset ({', '.join(PRESETS)})")
        p.add_argument("--strict", action="store_true", help="reject non-monotone topologies")

    p = sub.add_parser("generate", help="write synthetic graph documents")
    p.add_argument("--spec", default="paper_8core", help="workload spec file or preset")
    topo_flags(p)
    p.add_argument("--seed", type=int, help="override the workload seed")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", help="output file (or directory when --count > 1)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("map", help="map a graph and write the schedule")
    p.add_argument("--graph", required=True)
    topo_flags(p, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("simulate", help="replay a schedule")
    p.add_argument("--schedule", required=True)
    p.add_argument("--graph", required=True)
    topo_flags(p, required=True)
    p.add_argument("--contention", choices=CONTENTION_MODES, default="none")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="batch estimation-error report")
    p.add_argument("--spec", default="paper_8core")
    topo_flags(p)
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--seed", type=int, help="first seed (default: the workload seed)")
    p.add_argument("--contention", choices=CONTENTION_MODES, default=SERIALIZE)
    p.add_argument("--min-grain-ratio", type=float, help="skip instances at or below this ratio")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="compare AMTHA with the exhaustive oracle")
    p.add_argument("--max-tasks", type=int, default=4)
    p.add_argument("--max-subtasks", type=int, default=3)
    p.add_argument("--max-cores", type=int, default=3)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AmthaError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
