"""File formats: traces, topologies, models, device maps, batch plans, metric records.

Traces, batch plans and metric records are JSON Lines; topologies, models and
device maps are single JSON documents. Exact rationals in metric records are
written as ``"num/den"`` strings so that loading an emitted record gives back
the same values.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, InputError, ParseError, ValidationError
from .profiler import MonitorState, Predictor
from .simulator import CostModel, ExperimentConfig
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

PathLike = Union[str, Path]

TRACE_FIELDS = ("id", "arrival_time", "input_len", "true_output_len", "slo")

GiB = 1 << 30

# Placeholder link latencies in seconds; real per-class values are not known.
DEFAULT_LINK_CLASSES = {"PIX": 5e-6, "NODE": 2e-5}

# 4x RTX 3090 (24 GiB) with per-GPU power caps; performance is taken proportional
# to the power cap (batched tokens/s).
TABLE2_LINKS = (
    ("X", "PIX", "NODE", "NODE"),
    ("PIX", "X", "NODE", "NODE"),
    ("NODE", "NODE", "X", "PIX"),
    ("NODE", "NODE", "PIX", "X"),
)
TABLE2_POWER = (350.0, 300.0, 250.0, 150.0)

MODELS = {
    "chatglm2-6b": ModelSpec("chatglm2-6b", total_memory=12_487_168_000, num_layers=28, hidden_dim=4096),
    "llama-7b": ModelSpec("llama-7b", total_memory=13_476_839_424, num_layers=32, hidden_dim=4096),
    "llama-13b": ModelSpec("llama-13b", total_memory=26_031_728_640, num_layers=40, hidden_dim=5120),
    "llama-30b": ModelSpec("llama-30b", total_memory=65_058_990_080, num_layers=60, hidden_dim=6656),
}


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from e


def _write_text(path: PathLike, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot write {path}: {e.strerror or e}") from e


def _iter_jsonl(path: PathLike):
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path, lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("each line must be a JSON object", path, lineno)
        yield lineno, obj


def _load_json(path: PathLike):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------- traces

def request_to_dict(r: Request) -> dict:
    d = {"id": r.id, "arrival_time": r.arrival_time, "input_len": r.input_len,
         "true_output_len": r.true_output_len, "slo": r.slo}
    if r.predicted_output_len is not None:
        d["predicted_output_len"] = r.predicted_output_len
    return d


def request_from_dict(d: Mapping) -> Request:
    missing = [f for f in TRACE_FIELDS if f not in d]
    if missing:
        raise ValidationError(f"missing fields {missing}")
    extra = set(d) - set(TRACE_FIELDS) - {"predicted_output_len"}
    if extra:
        raise ValidationError(f"unknown fields {sorted(extra)}")
    return Request(
        id=d["id"],
        arrival_time=d["arrival_time"],
        input_len=d["input_len"],
        true_output_len=d["true_output_len"],
        slo=d["slo"],
        predicted_output_len=d.get("predicted_output_len"),
    )


def dumps_trace(requests: Iterable[Request]) -> str:
    return "".join(json.dumps(request_to_dict(r)) + "\n" for r in requests)


def emit_trace(requests: Iterable[Request], path: PathLike) -> None:
    _write_text(path, dumps_trace(requests))


def load_trace(path: PathLike) -> List[Request]:
    out = []
    seen = {}
    for lineno, obj in _iter_jsonl(path):
        try:
            r = request_from_dict(obj)
        except ValidationError as e:
            raise ValidationError(f"{path}:{lineno}: {e}") from None
        if r.id in seen:
            raise ParseError(f"duplicate request id {r.id} (first seen on line {seen[r.id]})", path, lineno)
        seen[r.id] = lineno
        out.append(r)
    return out


def gen_trace(
    n: int,
    arrival_model: str = "poisson",
    rate: float = 10.0,
    input_range: Tuple[int, int] = (16, 512),
    output_range: Tuple[int, int] = (8, 512),
    slo_range: Tuple[float, float] = (1.0, 350.0),
    seed: int = 0,
) -> List[Request]:
    """Synthetic trace with uniform integer lengths and uniform SLOs.

    ``arrival_model`` is ``poisson`` (exponential gaps at ``rate`` req/s),
    ``uniform`` (evenly spaced at ``rate``) or ``burst`` (everything at t=0).
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if arrival_model not in ("poisson", "uniform", "burst"):
        raise ConfigError(f"unknown arrival model {arrival_model!r}")
    if arrival_model != "burst" and not rate > 0:
        raise ConfigError(f"rate must be > 0, got {rate}")
    for name, (lo, hi) in (("input_range", input_range), ("output_range", output_range)):
        if not (1 <= lo <= hi):
            raise ConfigError(f"{name} must satisfy 1 <= lo <= hi, got {(lo, hi)}")
    lo_s, hi_s = slo_range
    if not (0 < lo_s <= hi_s):
        raise ConfigError(f"slo_range must satisfy 0 < lo <= hi, got {slo_range}")

    rng = np.random.default_rng(seed)
    if arrival_model == "poisson":
        arrivals = np.cumsum(rng.exponential(1.0 / rate, size=n))
        arrivals -= arrivals[0]
    elif arrival_model == "uniform":
        arrivals = np.arange(n) / rate
    else:
        arrivals = np.zeros(n)
    inputs = rng.integers(input_range[0], input_range[1], endpoint=True, size=n)
    outputs = rng.integers(output_range[0], output_range[1], endpoint=True, size=n)
    slos = rng.uniform(lo_s, hi_s, size=n)
    return [
        Request(id=i, arrival_time=float(arrivals[i]), input_len=int(inputs[i]),
                true_output_len=int(outputs[i]), slo=float(slos[i]))
        for i in range(n)
    ]


# ---------------------------------------------------------------- topologies

def links_to_matrix(links: Sequence[Sequence[str]], classes: Mapping[str, float]) -> List[List[float]]:
    n = len(links)
    mat = []
    for i, row in enumerate(links):
        if len(row) != n:
            raise ValidationError(f"link class row {i} has {len(row)} entries, expected {n}")
        out = []
        for j, cls in enumerate(row):
            if (cls == "X") != (i == j):
                raise ValidationError(f"link class X must appear exactly on the diagonal (at {i},{j}: {cls})")
            if cls == "X":
                out.append(0.0)
                continue
            if cls not in classes:
                raise ValidationError(f"no latency given for link class {cls!r}")
            out.append(float(classes[cls]))
        mat.append(out)
    return mat


def topology_from_dict(d: Mapping, classes: Optional[Mapping[str, float]] = None) -> Topology:
    try:
        nodes = [
            DeviceNode(id=dev["id"], memory=dev["memory_bytes"], performance=dev["performance"],
                       power_cap=dev.get("power_watts", 0.0))
            for dev in d["devices"]
        ]
    except (KeyError, TypeError) as e:
        raise ValidationError(f"device entries need id, memory_bytes, performance: missing {e}") from None
    if "latency_matrix" in d:
        mat = d["latency_matrix"]
    elif "links" in d:
        mapping = dict(DEFAULT_LINK_CLASSES)
        mapping.update(d.get("link_classes", {}))
        if classes:
            mapping.update(classes)
        mat = links_to_matrix(d["links"], mapping)
    else:
        raise ValidationError("topology needs either latency_matrix or links")
    return Topology(tuple(nodes), mat)


def topology_to_dict(topo: Topology) -> dict:
    return {
        "devices": [
            {"id": n.id, "memory_bytes": n.memory, "performance": n.performance, "power_watts": n.power_cap}
            for n in topo.nodes
        ],
        "latency_matrix": [list(row) for row in topo.link_latency],
    }


def load_topology(path: PathLike, classes: Optional[Mapping[str, float]] = None) -> Topology:
    d = _load_json(path)
    if not isinstance(d, dict):
        raise ParseError("topology file must hold a JSON object", path)
    try:
        return topology_from_dict(d, classes)
    except ValidationError as e:
        raise ValidationError(f"{path}: {e}") from None


def emit_topology(topo: Topology, path: PathLike) -> None:
    _write_text(path, _dump_json(topology_to_dict(topo)))


def table2_topology(
    classes: Optional[Mapping[str, float]] = None,
    memory: int = 24 * GiB,
    tokens_per_watt: float = 1.0,
) -> Topology:
    mapping = dict(DEFAULT_LINK_CLASSES)
    if classes:
        mapping.update(classes)
    nodes = tuple(
        DeviceNode(id=i, memory=memory, performance=w * tokens_per_watt, power_cap=w)
        for i, w in enumerate(TABLE2_POWER)
    )
    return Topology(nodes, links_to_matrix(TABLE2_LINKS, mapping))


def table2_dict(classes: Optional[Mapping[str, float]] = None) -> dict:
    """The built-in 4-GPU testbed in link-class form, suitable for writing as a topology file."""
    topo = table2_topology()
    d = topology_to_dict(topo)
    del d["latency_matrix"]
    d["links"] = [list(r) for r in TABLE2_LINKS]
    d["link_classes"] = dict(classes or DEFAULT_LINK_CLASSES)
    return d


# ---------------------------------------------------------------- models

def model_to_dict(m: ModelSpec) -> dict:
    return dataclasses.asdict(m)


def load_model(spec: PathLike) -> ModelSpec:
    """A built-in model name or a JSON file with ModelSpec fields."""
    if str(spec) in MODELS:
        return MODELS[str(spec)]
    if not Path(spec).exists():
        raise InputError(f"{spec} is neither a built-in model ({', '.join(sorted(MODELS))}) nor a file")
    d = _load_json(spec)
    try:
        return ModelSpec(**d)
    except TypeError as e:
        raise ValidationError(f"{spec}: {e}") from None


def emit_model(m: ModelSpec, path: PathLike) -> None:
    _write_text(path, _dump_json(model_to_dict(m)))


# ---------------------------------------------------------------- device maps

def device_map_to_dict(dm: DeviceMap) -> dict:
    return {"entries": [{"device": d, "layer_start": s, "layer_end": e} for d, s, e in dm.entries]}


def device_map_from_dict(d: Mapping) -> DeviceMap:
    try:
        return DeviceMap(tuple((e["device"], e["layer_start"], e["layer_end"]) for e in d["entries"]))
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed device map entry: {e}") from None


def emit_device_map(dm: DeviceMap, path: PathLike) -> None:
    _write_text(path, _dump_json(device_map_to_dict(dm)))


def load_device_map(path: PathLike) -> DeviceMap:
    return device_map_from_dict(_load_json(path))


# ---------------------------------------------------------------- batch plans

def plan_to_dict(p: BatchPlan) -> dict:
    return {"request_ids": list(p.request_ids), "padded_input_len": p.padded_input_len,
            "max_output_len": p.max_output_len}


def dumps_plans(plans: Iterable[BatchPlan]) -> str:
    return "".join(json.dumps(plan_to_dict(p)) + "\n" for p in plans)


def emit_plans(plans: Iterable[BatchPlan], path: PathLike) -> None:
    _write_text(path, dumps_plans(plans))


def load_plans(path: PathLike) -> List[BatchPlan]:
    out = []
    for lineno, obj in _iter_jsonl(path):
        try:
            out.append(BatchPlan(tuple(obj["request_ids"]), obj["padded_input_len"], obj["max_output_len"]))
        except (KeyError, ValidationError) as e:
            raise ValidationError(f"{path}:{lineno}: {e}") from None
    return out


# ---------------------------------------------------------------- metric records

def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def metrics_to_dict(m: SimMetrics) -> dict:
    return {
        "tags": dict(m.tags),
        "mean_latency": _frac(m.mean_latency),
        "p95_latency": _frac(m.p95_latency),
        "throughput": _frac(m.throughput),
        "slo_violation_rate": _frac(m.slo_violation_rate),
        "makespan": _frac(m.makespan),
        "total_generated_tokens": m.total_generated_tokens,
        "utilization": {str(k): _frac(v) for k, v in sorted(m.utilization.items())},
        "latencies": {str(k): _frac(v) for k, v in sorted(m.latencies.items())},
    }


def metrics_from_dict(d: Mapping) -> SimMetrics:
    try:
        return SimMetrics(
            latencies={int(k): Fraction(v) for k, v in d["latencies"].items()},
            mean_latency=Fraction(d["mean_latency"]),
            p95_latency=Fraction(d["p95_latency"]),
            throughput=Fraction(d["throughput"]),
            utilization={int(k): Fraction(v) for k, v in d["utilization"].items()},
            slo_violation_rate=Fraction(d["slo_violation_rate"]),
            makespan=Fraction(d["makespan"]),
            total_generated_tokens=int(d["total_generated_tokens"]),
            tags=dict(d.get("tags", {})),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise ValidationError(f"malformed metrics record: {e}") from None


def dumps_metrics(records: Iterable[SimMetrics]) -> str:
    return "".join(json.dumps(metrics_to_dict(m)) + "\n" for m in records)


def emit_metrics(records: Iterable[SimMetrics], path: PathLike) -> None:
    _write_text(path, dumps_metrics(records))


def load_metrics(path: PathLike) -> List[SimMetrics]:
    out = []
    for lineno, obj in _iter_jsonl(path):
        try:
            out.append(metrics_from_dict(obj))
        except ValidationError as e:
            raise ValidationError(f"{path}:{lineno}: {e}") from None
    return out


# ---------------------------------------------------------------- config

_SECTIONS = {
    "scheduler": SchedulerConfig,
    "deployer": DeployerConfig,
    "cost": CostModel,
    "predictor": Predictor,
    "monitor": MonitorState,
}


def _coerce(raw: str, default, section: str, key: str):
    try:
        if isinstance(default, bool):
            return {"true": True, "false": False, "1": True, "0": False}[raw.strip().lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except (KeyError, ValueError):
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {type(default).__name__}") from None


def load_config(path: Optional[PathLike] = None, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """INI file with sections scheduler, deployer, cost, predictor, monitor.

    Keys are field names of the matching config dataclass, e.g.::

        [scheduler]
        threshold = 2000
        max_batch_size = 16
    """
    cfg = base or ExperimentConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    try:
        parser.read_string(_read_text(path), source=str(path))
    except configparser.Error as e:
        raise ParseError(str(e), path) from None
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]; expected {sorted(_SECTIONS)}")
        cls = _SECTIONS[section]
        current = getattr(cfg, section) or cls()
        fields = {f.name: getattr(current, f.name) for f in dataclasses.fields(cls)}
        updates = {}
        for key, raw in parser.items(section):
            if key not in fields:
                raise ConfigError(f"{path}: [{section}] has no key {key!r}")
            updates[key] = _coerce(raw, fields[key], section, key)
        values[section] = dataclasses.replace(current, **updates)
    return dataclasses.replace(cfg, **values)
