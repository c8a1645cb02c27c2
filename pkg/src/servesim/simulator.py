"""Discrete-event execution of batch plans on one deployed pipeline.

Batches run strictly one after another in plan order. The clock is kept in
``Fraction`` so the accounting identities (work conservation, throughput times
makespan) hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

from .batcher import schedule
from .deployer import plan as plan_devices
from .errors import ConfigError, ContractError, ValidationError
from .memory import plan_token_cost
from .profiler import MonitorState, Predictor, profile_all
from .types import (
    BatchPlan,
    DeployerConfig,
    DeviceMap,
    ModelSpec,
    Request,
    SchedulerConfig,
    SimMetrics,
    Topology,
)

COMM_MODES = ("per_batch", "per_iteration")


@dataclass(frozen=True)
class CostModel:
    """Linear token cost plus additive link latency along the device chain.

    ``per_batch`` charges the chain's hop latency once per batch,
    ``per_iteration`` once per generated token position (``max_output_len`` times).
    """

    comm_mode: str = "per_batch"

    def __post_init__(self):
        if self.comm_mode not in COMM_MODES:
            raise ConfigError(f"comm_mode must be one of {COMM_MODES}, got {self.comm_mode!r}")

    @staticmethod
    def per_token_time(performance: float, tokens) -> Fraction:
        return Fraction(tokens) / Fraction(performance)

    def comm_charge(self, device_map: DeviceMap, topo: Topology, max_output_len: int) -> Fraction:
        ids = device_map.device_ids
        hops = sum((Fraction(topo.link_latency[a][b]) for a, b in zip(ids, ids[1:])), Fraction(0))
        if self.comm_mode == "per_iteration":
            return hops * max_output_len
        return hops


class Event(NamedTuple):
    time: Fraction
    kind: str  # batch_start | batch_end | request_done
    payload: Any


@dataclass
class EventLog:
    events: List[Event] = field(default_factory=list)

    def append(self, time, kind, payload):
        if self.events and time < self.events[-1].time:
            raise ValidationError("event log timestamps must be nondecreasing")
        self.events.append(Event(time, kind, payload))

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def of_kind(self, kind):
        return [e for e in self.events if e.kind == kind]


def nearest_rank(values: Sequence[Fraction], q: float) -> Fraction:
    if not values:
        return Fraction(0)
    ordered = sorted(values)
    k = max(1, math.ceil(q * len(ordered)))
    return ordered[k - 1]


def batch_service_time(batch: BatchPlan, device_map: DeviceMap, topo: Topology, model: ModelSpec,
                       cost: CostModel) -> Tuple[Fraction, Dict[int, Fraction]]:
    """Service time of one batch and the busy time it puts on each device."""
    tokens = len(batch) * batch.max_output_len
    busy = {}
    for dev, start, end in device_map.entries:
        share = Fraction(end - start + 1, model.num_layers)
        busy[dev] = cost.per_token_time(topo.nodes[dev].performance, tokens * share)
    total = sum(busy.values(), Fraction(0)) + cost.comm_charge(device_map, topo, batch.max_output_len)
    return total, busy


def simulate(
    plans: Sequence[BatchPlan],
    requests: Sequence[Request],
    device_map: DeviceMap,
    topo: Topology,
    model: ModelSpec,
    cost: Optional[CostModel] = None,
    kv_reserve: int = 0,
) -> Tuple[SimMetrics, EventLog]:
    cost = cost or CostModel()
    try:
        device_map.validate_for(model, topo, kv_reserve)
    except ValidationError as e:
        raise ContractError(f"device map does not fit the model: {e}") from e
    by_id = {r.id: r for r in requests}
    totals = plan_token_cost(plans, requests)

    log = EventLog()
    busy = {d.id: Fraction(0) for d in topo.nodes}
    latencies: Dict[int, Fraction] = {}
    if not plans:
        zero = Fraction(0)
        metrics = SimMetrics(
            latencies={}, mean_latency=zero, p95_latency=zero, throughput=zero,
            utilization={d: zero for d in busy}, slo_violation_rate=zero,
            makespan=zero, total_generated_tokens=0,
        )
        return metrics, log

    t0 = min(Fraction(r.arrival_time) for r in requests)
    clock = t0
    violations = 0
    for idx, batch in enumerate(plans):
        members = [by_id[rid] for rid in batch.request_ids]
        ready = max(Fraction(r.arrival_time) for r in members)
        start = max(clock, ready)
        service, dev_busy = batch_service_time(batch, device_map, topo, model, cost)
        end = start + service
        for dev, b in dev_busy.items():
            busy[dev] += b
        log.append(start, "batch_start", idx)
        log.append(end, "batch_end", idx)
        for r in members:
            lat = end - Fraction(r.arrival_time)
            latencies[r.id] = lat
            if lat > Fraction(r.slo):
                violations += 1
            log.append(end, "request_done", r.id)
        clock = end

    makespan = clock - t0
    n = len(latencies)
    tokens = totals.generated_tokens
    if makespan > 0:
        throughput = Fraction(tokens) / makespan
        util = {d: b / makespan for d, b in busy.items()}
    else:
        throughput = Fraction(0)
        util = {d: Fraction(0) for d in busy}
    metrics = SimMetrics(
        latencies=latencies,
        mean_latency=sum(latencies.values(), Fraction(0)) / n,
        p95_latency=nearest_rank(list(latencies.values()), 0.95),
        throughput=throughput,
        utilization=util,
        slo_violation_rate=Fraction(violations, n),
        makespan=makespan,
        total_generated_tokens=tokens,
    )
    return metrics, log


@dataclass(frozen=True)
class ExperimentConfig:
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    deployer: DeployerConfig = field(default_factory=DeployerConfig)
    cost: CostModel = field(default_factory=CostModel)
    predictor: Predictor = field(default_factory=Predictor)
    monitor: Optional[MonitorState] = None


# preset -> (planner, scheduler)
PRESETS = {
    "ud": ("helr", "fifo"),
    "ub": ("bgs", "slo-odbs"),
    "ua": ("helr", "slo-odbs"),
    "baseline": ("bgs", "fifo"),
}


def expand_preset(name: str) -> Tuple[str, str]:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None


@dataclass
class ExperimentResult:
    metrics: SimMetrics
    log: EventLog
    device_map: DeviceMap
    plans: List[BatchPlan]
    requests: List[Request]


def run_experiment_detailed(trace, topo, model, scheduler_name, planner_name,
                            cfg: Optional[ExperimentConfig] = None, seed: int = 0) -> ExperimentResult:
    cfg = cfg or ExperimentConfig()
    profiled = profile_all(trace, cfg.predictor, cfg.monitor, rng_seed=seed)
    plans = schedule(scheduler_name, profiled, cfg.scheduler)
    dmap = plan_devices(planner_name, model, topo, cfg.deployer)
    metrics, log = simulate(plans, profiled, dmap, topo, model, cfg.cost, cfg.deployer.kv_reserve)
    tags = {"scheduler": scheduler_name, "planner": planner_name, "seed": str(seed),
            "devices": str(len(dmap.entries))}
    metrics = SimMetrics(**{**metrics.__dict__, "tags": tags})
    return ExperimentResult(metrics, log, dmap, plans, profiled)


def run_experiment(trace, topo, model, scheduler_name, planner_name,
                   cfg: Optional[ExperimentConfig] = None, seed: int = 0) -> SimMetrics:
    """Profile, batch, place and simulate; returns the metrics record."""
    return run_experiment_detailed(trace, topo, model, scheduler_name, planner_name, cfg, seed).metrics


def run_preset(preset: str, trace, topo, model, cfg: Optional[ExperimentConfig] = None,
               seed: int = 0) -> ExperimentResult:
    planner, scheduler = expand_preset(preset)
    res = run_experiment_detailed(trace, topo, model, scheduler, planner, cfg, seed)
    res.metrics.tags["preset"] = preset
    return res
