"""Batch formation: SLO/output-length-driven scan and the FIFO baseline.

The scan visits requests in ascending SLO order and keeps the running maxima of
the open batch (largest SLO, largest predicted length, largest composite
metric). A candidate joins the open batch when the weighted sum of its latency
term and output-length term stays under ``threshold``; otherwise the batch is
closed and the candidate opens a new one. The composite metric also bounds the
batch size: ``cap = clamp(floor(threshold / cm), 1, max_batch_size)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Sequence

from .errors import ConfigError, ContractError
from .types import BatchPlan, Request, SchedulerConfig


@dataclass
class BatchState:
    current_batch: List[Request] = field(default_factory=list)
    l_cm: float = 0.0
    o_cm: int = 0
    cm: float = 0.0
    dynamic_cap: int = 1

    def reset(self):
        self.current_batch = []
        self.l_cm = 0.0
        self.o_cm = 0
        self.cm = 0.0


def _check_profiled(requests: Sequence[Request]) -> None:
    seen = set()
    for r in requests:
        if r.predicted_output_len is None:
            raise ContractError(f"request {r.id} has no predicted_output_len; profile it first")
        if r.id in seen:
            raise ContractError(f"request {r.id} appears twice")
        seen.add(r.id)


def slo_order(requests: Sequence[Request]) -> List[Request]:
    return sorted(requests, key=lambda r: (r.slo, r.arrival_time, r.id))


def admission_total(q: Request, state: BatchState, cfg: SchedulerConfig) -> float:
    """Weighted cost of adding ``q`` to the open batch."""
    k = len(state.current_batch) + 1
    t_l = (q.slo + state.l_cm) * k * cfg.l1_overhead
    if cfg.additive_length_term:
        gap = q.predicted_output_len + state.o_cm
    else:
        gap = q.predicted_output_len - state.o_cm
    t_o = gap * k * cfg.l2_overhead
    return cfg.w1 * t_l + cfg.w2 * t_o


def dynamic_cap(cm: float, cfg: SchedulerConfig) -> int:
    raw = math.floor(cfg.threshold / max(cm, cfg.eps))
    return max(1, min(cfg.max_batch_size, raw))


def schedule_slo_odbs(requests: Sequence[Request], cfg: SchedulerConfig) -> List[BatchPlan]:
    _check_profiled(requests)
    plans: List[BatchPlan] = []
    state = BatchState(dynamic_cap=cfg.max_batch_size)

    def flush():
        if state.current_batch:
            plans.append(BatchPlan.from_requests(state.current_batch))
        state.reset()

    for q in slo_order(requests):
        metric = cfg.w1 * q.predicted_output_len + cfg.w2 * q.slo
        if not state.current_batch or admission_total(q, state, cfg) <= cfg.threshold:
            state.current_batch.append(q)
            state.l_cm = max(state.l_cm, q.slo)
            state.o_cm = max(state.o_cm, q.predicted_output_len)
            state.cm = max(state.cm, metric)
        else:
            flush()
            state.current_batch = [q]
            state.l_cm = q.slo
            state.o_cm = q.predicted_output_len
            state.cm = metric
        state.dynamic_cap = dynamic_cap(state.cm, cfg)
        if len(state.current_batch) >= state.dynamic_cap:
            flush()
    flush()
    return plans


def schedule_slo_dbs(requests: Sequence[Request], cfg: SchedulerConfig) -> List[BatchPlan]:
    """SLO-only variant: the output-length weight ``w1`` is forced to zero."""
    return schedule_slo_odbs(requests, replace(cfg, w1=0.0))


def schedule_odbs(requests: Sequence[Request], cfg: SchedulerConfig) -> List[BatchPlan]:
    """Output-length-only variant: the SLO weight ``w2`` is forced to zero."""
    return schedule_slo_odbs(requests, replace(cfg, w2=0.0))


def schedule_fifo(requests: Sequence[Request], max_batch_size: int) -> List[BatchPlan]:
    """Arrival-order chunks of ``max_batch_size``."""
    if max_batch_size < 1:
        raise ConfigError(f"max_batch_size must be >= 1, got {max_batch_size}")
    _check_profiled(requests)
    ordered = sorted(requests, key=lambda r: (r.arrival_time, r.id))
    return [
        BatchPlan.from_requests(ordered[i : i + max_batch_size])
        for i in range(0, len(ordered), max_batch_size)
    ]


SCHEDULERS: Dict[str, Callable[[Sequence[Request], SchedulerConfig], List[BatchPlan]]] = {
    "slo-odbs": schedule_slo_odbs,
    "slo-dbs": schedule_slo_dbs,
    "odbs": schedule_odbs,
    "fifo": lambda reqs, cfg: schedule_fifo(reqs, cfg.max_batch_size),
}


def schedule(name: str, requests: Sequence[Request], cfg: SchedulerConfig) -> List[BatchPlan]:
    try:
        fn = SCHEDULERS[name]
    except KeyError:
        raise ConfigError(f"unknown scheduler {name!r}; expected one of {sorted(SCHEDULERS)}") from None
    return fn(requests, cfg)
