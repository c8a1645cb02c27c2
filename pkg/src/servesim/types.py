"""Shared domain types.

All types are frozen dataclasses that validate themselves in ``__post_init__``
and raise :class:`~servesim.errors.ValidationError` on a violated invariant.
Nothing here runs an algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .errors import ConfigError, ValidationError


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _finite(x) -> bool:
    try:
        return math.isfinite(x)
    except TypeError:
        return False


@dataclass(frozen=True)
class Request:
    """One inference query. ``slo`` is a deadline relative to ``arrival_time``."""

    id: int
    arrival_time: float
    input_len: int
    true_output_len: int
    slo: float
    predicted_output_len: Optional[int] = None

    def __post_init__(self):
        if not _is_int(self.id) or self.id < 0:
            raise ValidationError(f"request id must be a non-negative int, got {self.id!r}")
        if not _finite(self.arrival_time) or self.arrival_time < 0:
            raise ValidationError(f"request {self.id}: arrival_time must be finite and >= 0")
        for name in ("input_len", "true_output_len"):
            v = getattr(self, name)
            if not _is_int(v) or v < 1:
                raise ValidationError(f"request {self.id}: {name} must be an int >= 1, got {v!r}")
        if self.predicted_output_len is not None:
            v = self.predicted_output_len
            if not _is_int(v) or v < 1:
                raise ValidationError(
                    f"request {self.id}: predicted_output_len must be an int >= 1, got {v!r}"
                )
        if not _finite(self.slo) or self.slo <= 0:
            raise ValidationError(f"request {self.id}: slo must be finite and > 0, got {self.slo!r}")

    @property
    def deadline(self) -> float:
        return self.arrival_time + self.slo

    def with_prediction(self, predicted: int) -> "Request":
        return replace(self, predicted_output_len=predicted)


@dataclass(frozen=True)
class ModelSpec:
    """The served model: total weight bytes, layer count and transformer width."""

    name: str
    total_memory: int
    num_layers: int
    hidden_dim: int
    kv_bytes_per_elem: int = 4

    def __post_init__(self):
        if not _is_int(self.total_memory) or self.total_memory <= 0:
            raise ValidationError(f"model {self.name}: total_memory must be a positive int")
        if not _is_int(self.num_layers) or self.num_layers < 1:
            raise ValidationError(f"model {self.name}: num_layers must be >= 1")
        if not _is_int(self.hidden_dim) or self.hidden_dim < 1:
            raise ValidationError(f"model {self.name}: hidden_dim must be >= 1")
        if not _is_int(self.kv_bytes_per_elem) or self.kv_bytes_per_elem < 1:
            raise ValidationError(f"model {self.name}: kv_bytes_per_elem must be >= 1")

    @property
    def memory_per_layer(self) -> Fraction:
        """Bytes per layer, exact."""
        return Fraction(self.total_memory, self.num_layers)


@dataclass(frozen=True)
class DeviceNode:
    id: int
    memory: int
    performance: float  # tokens/s-equivalent
    power_cap: float = 0.0

    def __post_init__(self):
        if not _is_int(self.id) or self.id < 0:
            raise ValidationError(f"device id must be a non-negative int, got {self.id!r}")
        if not _is_int(self.memory) or self.memory < 0:
            raise ValidationError(f"device {self.id}: memory must be a non-negative int")
        if not _finite(self.performance) or self.performance <= 0:
            raise ValidationError(f"device {self.id}: performance must be finite and > 0")
        if not _finite(self.power_cap) or self.power_cap < 0:
            raise ValidationError(f"device {self.id}: power_cap must be finite and >= 0")


@dataclass(frozen=True)
class Topology:
    """Devices plus a symmetric link-latency matrix (seconds, zero diagonal).

    ``nodes[i].id == i`` is required so that matrix indices and device ids agree.
    """

    nodes: tuple
    link_latency: tuple

    def __post_init__(self):
        nodes = tuple(self.nodes)
        lat = tuple(tuple(float(x) for x in row) for row in self.link_latency)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "link_latency", lat)
        n = len(nodes)
        for i, node in enumerate(nodes):
            if not isinstance(node, DeviceNode):
                raise ValidationError(f"topology node {i} is not a DeviceNode")
            if node.id != i:
                raise ValidationError(f"topology node at index {i} has id {node.id}; ids must equal indices")
        if len(lat) != n or any(len(row) != n for row in lat):
            raise ValidationError(f"link_latency must be {n}x{n}")
        for i in range(n):
            if lat[i][i] != 0.0:
                raise ValidationError(f"link_latency[{i}][{i}] must be 0")
            for j in range(n):
                v = lat[i][j]
                if not math.isfinite(v) or v < 0:
                    raise ValidationError(f"link_latency[{i}][{j}] must be finite and >= 0")
                if v != lat[j][i]:
                    raise ValidationError(f"link_latency is not symmetric at ({i}, {j})")

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class DeviceMap:
    """Ordered ``(device_id, layer_start, layer_end)`` entries, inclusive ranges.

    Construction checks that the ranges start at layer 0, are non-empty and
    contiguous, and that no device appears twice. Coverage of a particular
    model and per-device memory are checked by :meth:`validate_for`.
    """

    entries: tuple

    def __post_init__(self):
        entries = tuple(tuple(e) for e in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ValidationError("device map must have at least one entry")
        expected = 0
        seen = set()
        for dev, start, end in entries:
            if not (_is_int(dev) and _is_int(start) and _is_int(end)):
                raise ValidationError(f"device map entry {(dev, start, end)} must be ints")
            if dev in seen:
                raise ValidationError(f"device {dev} appears twice in device map")
            seen.add(dev)
            if start != expected:
                raise ValidationError(
                    f"device map entry for device {dev} starts at layer {start}, expected {expected}"
                )
            if end < start:
                raise ValidationError(f"device map entry for device {dev} is empty ({start}-{end})")
            expected = end + 1

    @property
    def num_layers(self) -> int:
        return self.entries[-1][2] + 1

    @property
    def device_ids(self) -> tuple:
        return tuple(e[0] for e in self.entries)

    def layers_on(self, device_id: int) -> int:
        for dev, start, end in self.entries:
            if dev == device_id:
                return end - start + 1
        return 0

    def validate_for(self, model: ModelSpec, topo: Topology, kv_reserve: int = 0) -> None:
        if self.num_layers != model.num_layers:
            raise ValidationError(
                f"device map covers {self.num_layers} layers, model {model.name} has {model.num_layers}"
            )
        m = model.memory_per_layer
        for dev, start, end in self.entries:
            if dev >= len(topo.nodes):
                raise ValidationError(f"device map references unknown device {dev}")
            size = end - start + 1
            if size * m > topo.nodes[dev].memory - kv_reserve:
                raise ValidationError(
                    f"device {dev}: {size} layers exceed memory minus kv reserve"
                )


@dataclass(frozen=True)
class BatchPlan:
    request_ids: tuple
    padded_input_len: int
    max_output_len: int

    def __post_init__(self):
        ids = tuple(self.request_ids)
        object.__setattr__(self, "request_ids", ids)
        if not ids:
            raise ValidationError("batch plan must be non-empty")
        if len(set(ids)) != len(ids):
            raise ValidationError(f"batch plan has duplicate request ids: {ids}")
        if not _is_int(self.padded_input_len) or self.padded_input_len < 1:
            raise ValidationError("padded_input_len must be an int >= 1")
        if not _is_int(self.max_output_len) or self.max_output_len < 1:
            raise ValidationError("max_output_len must be an int >= 1")

    def __len__(self):
        return len(self.request_ids)

    @classmethod
    def from_requests(cls, members: Sequence[Request]) -> "BatchPlan":
        """Build a plan whose maxima are taken over ``members`` (which must be profiled)."""
        if not members:
            raise ValidationError("batch plan must be non-empty")
        if any(r.predicted_output_len is None for r in members):
            raise ValidationError("batch members must have predicted_output_len set")
        return cls(
            request_ids=tuple(r.id for r in members),
            padded_input_len=max(r.input_len for r in members),
            max_output_len=max(r.predicted_output_len for r in members),
        )


@dataclass(frozen=True)
class SchedulerConfig:
    """Weights and knobs for the SLO/output-length batch scheduler.

    ``additive_length_term`` switches the output-length term from
    ``(length - O_cm)`` to ``(length + O_cm)``.
    """

    w1: float = 1.0
    w2: float = 1.0
    l1_overhead: float = 1.0
    l2_overhead: float = 1.0
    threshold: float = 1000.0
    max_batch_size: int = 8
    additive_length_term: bool = False
    eps: float = 1e-9

    def __post_init__(self):
        for name in ("w1", "w2", "l1_overhead", "l2_overhead"):
            v = getattr(self, name)
            if not _finite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v!r}")
        if self.w1 + self.w2 <= 0:
            raise ConfigError("w1 + w2 must be > 0")
        if not _finite(self.threshold) or self.threshold <= 0:
            raise ConfigError(f"threshold must be > 0, got {self.threshold!r}")
        if not _is_int(self.max_batch_size) or self.max_batch_size < 1:
            raise ConfigError(f"max_batch_size must be an int >= 1, got {self.max_batch_size!r}")
        if not _finite(self.eps) or self.eps <= 0:
            raise ConfigError("eps must be > 0")


@dataclass(frozen=True)
class DeployerConfig:
    """Objective weights for placement: ``a1 * chain_latency + a2 * |S|/|D|``.

    ``literal_final_term`` adds, for the last device ``i`` of a chain, the sum over
    chain devices ``j`` of ``latency[i][j] + compute_cost(i)``.
    """

    a1: float = 1.0
    a2: float = 1.0
    p: float = 1.0
    kv_reserve: int = 0
    literal_final_term: bool = False
    max_devices: int = 16

    def __post_init__(self):
        for name in ("a1", "a2"):
            v = getattr(self, name)
            if not _finite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v!r}")
        if self.a1 + self.a2 <= 0:
            raise ConfigError("a1 + a2 must be > 0")
        if not _finite(self.p) or self.p <= 0:
            raise ConfigError(f"p must be > 0, got {self.p!r}")
        if not _is_int(self.kv_reserve) or self.kv_reserve < 0:
            raise ConfigError("kv_reserve must be an int >= 0")
        if not _is_int(self.max_devices) or self.max_devices < 1:
            raise ConfigError("max_devices must be an int >= 1")


@dataclass(frozen=True)
class SimMetrics:
    """Outcome of one simulation.

    Times and rates are exact ``Fraction`` values so that
    ``throughput * makespan == total_generated_tokens`` holds without rounding.
    ``utilization`` is keyed by device id, ``latencies`` by request id.
    """

    latencies: Mapping[int, Fraction]
    mean_latency: Fraction
    p95_latency: Fraction
    throughput: Fraction
    utilization: Mapping[int, Fraction]
    slo_violation_rate: Fraction
    makespan: Fraction
    total_generated_tokens: int
    tags: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("slo_violation_rate",):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        for dev, u in self.utilization.items():
            if not 0 <= u <= 1:
                raise ValidationError(f"utilization of device {dev} must lie in [0, 1], got {u}")
        if self.makespan < 0 or self.throughput < 0 or self.total_generated_tokens < 0:
            raise ValidationError("makespan, throughput and token count must be >= 0")
        if self.throughput * self.makespan != self.total_generated_tokens and self.makespan > 0:
            raise ValidationError("throughput * makespan must equal total generated tokens")

    @property
    def num_requests(self) -> int:
        return len(self.latencies)
