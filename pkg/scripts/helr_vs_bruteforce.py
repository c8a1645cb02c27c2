"""Check the subset DP placement against exhaustive chain enumeration and time both.

    python scripts/helr_vs_bruteforce.py --trials 300 --max-devices 6
"""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import brute_force_placement  # noqa: E402

from servesim.deployer import helr_search  # noqa: E402
from servesim.errors import InfeasibleError  # noqa: E402
from servesim.types import DeployerConfig, DeviceNode, ModelSpec, Topology  # noqa: E402


def random_case(rng, n):
    nodes = tuple(DeviceNode(i, rng.randint(0, 80), rng.uniform(0.5, 50.0)) for i in range(n))
    lat = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            lat[i][j] = lat[j][i] = rng.uniform(0, 10)
    layers = rng.randint(1, 48)
    model = ModelSpec("r", total_memory=layers * rng.randint(1, 3), num_layers=layers, hidden_dim=1)
    return Topology(nodes, lat), model


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--max-devices", type=int, default=6)
    ap.add_argument("--a1", type=float, default=1.0)
    ap.add_argument("--a2", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    cfg = DeployerConfig(a1=args.a1, a2=args.a2)
    agree = disagree = infeasible = 0
    t_dp = t_bf = 0.0
    for _ in range(args.trials):
        topo, model = random_case(rng, rng.randint(1, args.max_devices))
        t0 = time.perf_counter()
        try:
            got = helr_search(model, topo, cfg)
        except InfeasibleError:
            got = None
        t1 = time.perf_counter()
        best = brute_force_placement(model, topo, cfg)
        t2 = time.perf_counter()
        t_dp += t1 - t0
        t_bf += t2 - t1
        if got is None and best is None:
            infeasible += 1
        elif got is not None and best is not None and (got.score, got.latency) == best[:2]:
            agree += 1
        else:
            disagree += 1
    print(f"agree {agree}  disagree {disagree}  both infeasible {infeasible}")
    print(f"dp {t_dp:.3f}s  brute force {t_bf:.3f}s")
    sys.exit(1 if disagree else 0)


if __name__ == "__main__":
    main()
