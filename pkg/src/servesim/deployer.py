"""Layer placement over a heterogeneous device graph.

For every device subset whose usable capacity can hold the whole model, a
bitmask DP over (visited set, last device) finds the cheapest visiting order.
Layers are filled greedily along the visiting order, so the number of layers a
device receives depends only on the set of devices visited before it; that is
what makes the (mask, last) state sufficient. A chain is valid only if every
device on it receives at least one layer.

The score of a chain over subset ``S`` is
``a1 * chain_latency + a2 * |S| / |D|``; ties go to the lower latency, then to
the first subset in ``itertools.combinations`` order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError, InfeasibleError
from .types import DeployerConfig, DeviceMap, DeviceNode, ModelSpec, Topology

INF = float("inf")


def compute_cost(device: DeviceNode, layers_assigned: int, m, p: float = 1.0) -> float:
    """Processing time of ``layers_assigned`` layers: ``p * layers * m / performance``."""
    if layers_assigned < 0:
        raise ConfigError(f"layers_assigned must be >= 0, got {layers_assigned}")
    if not device.performance > 0:
        raise ConfigError(f"device {device.id}: performance must be > 0")
    if layers_assigned == 0:
        return 0.0
    return float(p) * layers_assigned * float(m) / device.performance


def max_layers(device: DeviceNode, m, kv_reserve: int, total_layers: int) -> int:
    """Layers that fit in ``memory - kv_reserve``, capped at ``total_layers``."""
    if not m > 0:
        raise ConfigError(f"memory per layer must be > 0, got {m}")
    headroom = device.memory - kv_reserve
    if headroom <= 0:
        return 0
    return min(total_layers, math.floor(Fraction(headroom) / Fraction(m)))


def greedy_split(chain: Sequence[int], caps: Dict[int, int], total_layers: int) -> List[int]:
    """Layers per chain position when each device takes ``min(remaining, cap)``."""
    remaining = total_layers
    out = []
    for dev in chain:
        take = min(remaining, caps[dev])
        out.append(take)
        remaining -= take
    return out


def split_to_map(chain: Sequence[int], layers: Sequence[int]) -> DeviceMap:
    entries = []
    start = 0
    for dev, n in zip(chain, layers):
        entries.append((dev, start, start + n - 1))
        start += n
    return DeviceMap(tuple(entries))


def chain_latency(device_map: DeviceMap, model: ModelSpec, topo: Topology, p: float = 1.0) -> float:
    """Compute plus consecutive-hop latency of a device map, accumulated in chain order."""
    m = model.memory_per_layer
    total = None
    prev = None
    for dev, start, end in device_map.entries:
        c = compute_cost(topo.nodes[dev], end - start + 1, m, p)
        if total is None:
            total = c
        else:
            total = total + topo.link_latency[prev][dev] + c
        prev = dev
    return total


def final_term(last: int, last_layers: int, members: Sequence[int], model: ModelSpec,
               topo: Topology, p: float) -> float:
    """Sum over chain devices j of ``latency[last][j] + compute_cost(last)``, in id order."""
    c = compute_cost(topo.nodes[last], last_layers, model.memory_per_layer, p)
    return sum(topo.link_latency[last][j] + c for j in sorted(members))


@dataclass(frozen=True)
class Placement:
    device_map: DeviceMap
    latency: float  # chain latency (plus the literal final term when enabled)
    score: float  # a1 * latency + a2 * |S| / |D|
    objective: float  # a1 * latency

    @property
    def num_devices(self) -> int:
        return len(self.device_map.entries)


def _subset_dp(order: Sequence[int], caps: Dict[int, int], model: ModelSpec, topo: Topology,
               cfg: DeployerConfig) -> Optional[Tuple[float, List[int]]]:
    """Cheapest valid chain visiting every device of ``order``; ``None`` if none exists."""
    k = len(order)
    L = model.num_layers
    m = model.memory_per_layer
    p = cfg.p
    lat = topo.link_latency
    nodes = topo.nodes
    full = (1 << k) - 1

    capsum = [0] * (1 << k)
    for mask in range(1, 1 << k):
        low = (mask & -mask).bit_length() - 1
        capsum[mask] = capsum[mask & (mask - 1)] + caps[order[low]]

    dp = [[INF] * k for _ in range(1 << k)]
    parent = [[-1] * k for _ in range(1 << k)]
    for j in range(k):
        dp[1 << j][j] = compute_cost(nodes[order[j]], min(caps[order[j]], L), m, p)

    for mask in range(1, full):
        rem = L - min(L, capsum[mask])
        if rem <= 0:
            continue
        row = dp[mask]
        for i in range(k):
            base = row[i]
            if base == INF:
                continue
            di = order[i]
            for j in range(k):
                if mask >> j & 1:
                    continue
                dj = order[j]
                val = base + lat[di][dj] + compute_cost(nodes[dj], min(caps[dj], rem), m, p)
                nm = mask | (1 << j)
                if val < dp[nm][j]:
                    dp[nm][j] = val
                    parent[nm][j] = i

    best_val, best_last = INF, -1
    for i in range(k):
        val = dp[full][i]
        if val == INF:
            continue
        if cfg.literal_final_term:
            last_layers = min(caps[order[i]], L - min(L, capsum[full ^ (1 << i)]))
            val = val + final_term(order[i], last_layers, order, model, topo, p)
        if val < best_val:
            best_val, best_last = val, i
    if best_last < 0:
        return None

    chain = []
    mask, i = full, best_last
    while i >= 0:
        chain.append(order[i])
        prev = parent[mask][i]
        mask ^= 1 << i
        i = prev
    chain.reverse()
    return best_val, chain


def device_caps(model: ModelSpec, topo: Topology, kv_reserve: int) -> Dict[int, int]:
    m = model.memory_per_layer
    return {d.id: max_layers(d, m, kv_reserve, model.num_layers) for d in topo.nodes}


def _check_feasible(caps: Dict[int, int], model: ModelSpec) -> None:
    total = sum(caps.values())
    if total < model.num_layers:
        short = model.num_layers - total
        raise InfeasibleError(
            f"topology can host {total} of {model.num_layers} layers of {model.name}; "
            f"short by {short} layers",
            shortfall=short,
        )


def helr_search(model: ModelSpec, topo: Topology, cfg: DeployerConfig) -> Placement:
    """Full search result; :func:`plan_helr` returns the ``(map, objective)`` view of it."""
    n = len(topo.nodes)
    if n > cfg.max_devices:
        raise ConfigError(
            f"topology has {n} devices; exhaustive placement is limited to {cfg.max_devices}"
        )
    caps = device_caps(model, topo, cfg.kv_reserve)
    _check_feasible(caps, model)
    eligible = [d.id for d in topo.nodes if caps[d.id] > 0]
    L = model.num_layers

    best_key = None
    best = None
    for size in range(1, len(eligible) + 1):
        for subset in combinations(eligible, size):
            if sum(caps[d] for d in subset) < L:
                continue
            order = sorted(subset, key=lambda d: (-topo.nodes[d].performance, -topo.nodes[d].memory, d))
            res = _subset_dp(order, caps, model, topo, cfg)
            if res is None:
                continue
            latency, chain = res
            score = cfg.a1 * latency + cfg.a2 * size / n
            key = (score, latency)
            if best_key is None or key < best_key:
                best_key = key
                best = (latency, score, chain)
    if best is None:
        # only reachable if every feasible subset has a zero-layer device in all orders
        raise InfeasibleError(f"no valid layer chain for {model.name}", shortfall=0)
    latency, score, chain = best
    dmap = split_to_map(chain, greedy_split(chain, caps, L))
    return Placement(dmap, latency, score, cfg.a1 * latency)


def plan_helr(model: ModelSpec, topo: Topology, cfg: DeployerConfig) -> Tuple[DeviceMap, float]:
    pl = helr_search(model, topo, cfg)
    return pl.device_map, pl.objective


def he_config(cfg: DeployerConfig) -> DeployerConfig:
    return replace(cfg, a1=0.0, a2=cfg.a2 if cfg.a2 > 0 else 1.0)


def lr_config(cfg: DeployerConfig) -> DeployerConfig:
    return replace(cfg, a1=10.0, a2=1.0)


def plan_he(model: ModelSpec, topo: Topology, cfg: DeployerConfig) -> Tuple[DeviceMap, float]:
    """Fewest devices first; among those, lowest chain latency."""
    return plan_helr(model, topo, he_config(cfg))


def plan_lr(model: ModelSpec, topo: Topology, cfg: DeployerConfig) -> Tuple[DeviceMap, float]:
    return plan_helr(model, topo, lr_config(cfg))


def plan_bgs(model: ModelSpec, topo: Topology, kv_reserve: int = 0) -> DeviceMap:
    """Greedy baseline: largest memory first (ties by id), each device filled to capacity."""
    caps = device_caps(model, topo, kv_reserve)
    _check_feasible(caps, model)
    order = sorted(topo.nodes, key=lambda d: (-d.memory, d.id))
    chain = []
    remaining = model.num_layers
    for d in order:
        if remaining == 0:
            break
        if caps[d.id] == 0:
            continue
        chain.append(d.id)
        remaining -= min(remaining, caps[d.id])
    return split_to_map(chain, greedy_split(chain, caps, model.num_layers))


PLANNERS = ("helr", "he", "lr", "bgs")


def plan(name: str, model: ModelSpec, topo: Topology, cfg: DeployerConfig) -> DeviceMap:
    if name == "helr":
        return plan_helr(model, topo, cfg)[0]
    if name == "he":
        return plan_he(model, topo, cfg)[0]
    if name == "lr":
        return plan_lr(model, topo, cfg)[0]
    if name == "bgs":
        return plan_bgs(model, topo, cfg.kv_reserve)
    raise ConfigError(f"unknown planner {name!r}; expected one of {PLANNERS}")
