"""Trace-driven simulation of SLO-aware LLM batch scheduling and layer placement."""

from .batcher import schedule, schedule_fifo, schedule_odbs, schedule_slo_dbs, schedule_slo_odbs
from .deployer import (
    compute_cost,
    helr_search,
    max_layers,
    plan,
    plan_bgs,
    plan_he,
    plan_helr,
    plan_lr,
)
from .memory import batch_token_cost, kv_cache_peak_bytes, plan_token_cost
from .profiler import MonitorState, Predictor, observe_completion, profile, profile_all
from .simulator import CostModel, ExperimentConfig, run_experiment, run_preset, simulate
from .types import (
    BatchPlan,
    DeployerConfig,
    DeviceMap,
    DeviceNode,
    ModelSpec,
    Request,
    SchedulerConfig,
    SimMetrics,
    Topology,
)

__version__ = "0.1.0"
