"""Command-line entry point: ``servesim {plan,schedule,simulate,gen,report}``."""

from __future__ import annotations

import argparse
import json
import sys

from . import io as sio
from .batcher import SCHEDULERS, schedule
from .deployer import PLANNERS, plan
from .errors import ServeSimError
from .profiler import profile_all
from .report import to_csv, to_table
from .simulator import PRESETS, expand_preset, run_experiment_detailed


def _write(text: str, out) -> None:
    if out:
        sio._write_text(out, text)
    else:
        sys.stdout.write(text)


def _topology(arg):
    if arg == "table2":
        return sio.table2_topology()
    return sio.load_topology(arg)


def cmd_plan(args) -> int:
    cfg = sio.load_config(args.config)
    model = sio.load_model(args.model)
    topo = _topology(args.topology)
    dmap = plan(args.planner, model, topo, cfg.deployer)
    _write(json.dumps(sio.device_map_to_dict(dmap), indent=2) + "\n", args.out)
    return 0


def cmd_schedule(args) -> int:
    cfg = sio.load_config(args.config)
    trace = sio.load_trace(args.trace)
    profiled = profile_all(trace, cfg.predictor, cfg.monitor, rng_seed=args.seed)
    plans = schedule(args.scheduler, profiled, cfg.scheduler)
    _write(sio.dumps_plans(plans), args.out)
    return 0


def cmd_simulate(args) -> int:
    cfg = sio.load_config(args.config)
    if args.preset:
        planner, scheduler = expand_preset(args.preset)
    else:
        planner, scheduler = args.planner, args.scheduler
    trace = sio.load_trace(args.trace)
    model = sio.load_model(args.model)
    topo = _topology(args.topology)
    res = run_experiment_detailed(trace, topo, model, scheduler, planner, cfg, args.seed)
    if args.preset:
        res.metrics.tags["preset"] = args.preset
    _write(sio.dumps_metrics([res.metrics]), args.out)
    return 0


def cmd_gen(args) -> int:
    trace = sio.gen_trace(
        args.n,
        arrival_model=args.arrival,
        rate=args.rate,
        input_range=(args.input_min, args.input_max),
        output_range=(args.output_min, args.output_max),
        slo_range=(args.slo_min, args.slo_max),
        seed=args.seed,
    )
    _write(sio.dumps_trace(trace), args.out)
    return 0


def cmd_report(args) -> int:
    records = []
    for path in args.metrics:
        records.extend(sio.load_metrics(path))
    sys.stdout.write(to_table(records))
    if args.out:
        sio._write_text(args.out, to_csv(records))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="servesim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, trace=False, topology=False, model=False):
        if trace:
            sp.add_argument("--trace", required=True, help="JSONL trace file")
        if topology:
            sp.add_argument("--topology", default="table2",
                            help="topology JSON file, or 'table2' for the built-in 4-GPU testbed")
        if model:
            sp.add_argument("--model", default="chatglm2-6b",
                            help=f"model JSON file or built-in name ({', '.join(sorted(sio.MODELS))})")
        sp.add_argument("--config", help="INI file overriding scheduler/deployer/cost/predictor defaults")
        sp.add_argument("--out", help="write output here instead of stdout")

    sp = sub.add_parser("plan", help="place model layers on devices")
    common(sp, topology=True, model=True)
    sp.add_argument("--planner", choices=PLANNERS, default="helr")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("schedule", help="profile a trace and form batch plans")
    common(sp, trace=True)
    sp.add_argument("--scheduler", choices=sorted(SCHEDULERS), default="slo-odbs")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_schedule)

    sp = sub.add_parser("simulate", help="run profiler, batcher, planner and simulator end to end")
    common(sp, trace=True, topology=True, model=True)
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--scheduler", choices=sorted(SCHEDULERS), default="slo-odbs")
    sp.add_argument("--planner", choices=PLANNERS, default="helr")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("gen", help="generate a synthetic trace")
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--arrival", choices=("poisson", "uniform", "burst"), default="poisson")
    sp.add_argument("--rate", type=float, default=10.0, help="requests per second")
    sp.add_argument("--input-min", type=int, default=16)
    sp.add_argument("--input-max", type=int, default=512)
    sp.add_argument("--output-min", type=int, default=8)
    sp.add_argument("--output-max", type=int, default=512)
    sp.add_argument("--slo-min", type=float, default=1.0)
    sp.add_argument("--slo-max", type=float, default=350.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("report", help="tabulate metric records; --out writes CSV")
    sp.add_argument("--metrics", nargs="+", required=True, help="metric JSONL files")
    sp.add_argument("--out", help="CSV output path")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ServeSimError as e:
        sys.stderr.write(f"servesim: {type(e).__name__}: {e}\n")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
