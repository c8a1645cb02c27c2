"""Compare the four presets (ua, ub, ud, baseline) over seeded synthetic traces.

    python scripts/run_comparison.py --seeds 20 --n 200 --csv results.csv
"""

import argparse
from fractions import Fraction

from servesim import io as sio
from servesim.report import to_csv, to_table
from servesim.simulator import run_preset

PRESETS = ("ua", "ub", "ud", "baseline")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--n", type=int, default=200, help="requests per trace")
    ap.add_argument("--rate", type=float, default=10.0)
    ap.add_argument("--model", default="chatglm2-6b")
    ap.add_argument("--config", help="INI overrides")
    ap.add_argument("--csv", help="write every run as CSV")
    args = ap.parse_args()

    cfg = sio.load_config(args.config)
    topo = sio.table2_topology()
    model = sio.load_model(args.model)
    records = []
    for seed in range(args.seeds):
        trace = sio.gen_trace(args.n, rate=args.rate, seed=seed)
        records += [run_preset(p, trace, topo, model, cfg, seed=seed).metrics for p in PRESETS]

    print(f"{'preset':<9} {'mean_lat':>9} {'p95_lat':>9} {'thru':>8} {'viol':>6}")
    for p in PRESETS:
        rs = [r for r in records if r.tags["preset"] == p]
        avg = lambda f: float(sum((getattr(r, f) for r in rs), Fraction(0)) / len(rs))  # noqa: E731
        print(f"{p:<9} {avg('mean_latency'):>9.2f} {avg('p95_latency'):>9.2f} "
              f"{avg('throughput'):>8.2f} {avg('slo_violation_rate'):>6.3f}")

    by_seed = {}
    for r in records:
        by_seed.setdefault(r.tags["seed"], {})[r.tags["preset"]] = r
    lat = sum(s["ua"].mean_latency <= s["baseline"].mean_latency for s in by_seed.values())
    vio = sum(s["ua"].slo_violation_rate <= s["ub"].slo_violation_rate <= s["baseline"].slo_violation_rate
              for s in by_seed.values())
    print(f"\nua latency <= baseline in {lat}/{len(by_seed)} traces")
    print(f"ua <= ub <= baseline violation rate in {vio}/{len(by_seed)} traces")

    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(to_csv(records))
    elif args.seeds == 1:
        print(to_table(records))


if __name__ == "__main__":
    main()
