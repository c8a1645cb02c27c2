"""Output-length prediction stand-ins and the under-prediction monitor.

The predictors are deliberately simple: the scheduler only ever consumes a
predicted length, so prediction quality is an experimental knob here.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional

from .errors import ConfigError
from .types import Request

VARIANTS = ("oracle", "noisy", "bucketed", "constant")


@dataclass(frozen=True)
class Predictor:
    """``variant`` is one of oracle, noisy, bucketed, constant.

    ``bucket_width`` is used by noisy and bucketed, ``error_rate`` by noisy and
    ``value`` by constant.
    """

    variant: str = "oracle"
    bucket_width: int = 50
    error_rate: float = 0.0
    value: int = 256

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown predictor variant {self.variant!r}; expected one of {VARIANTS}")
        if not isinstance(self.bucket_width, int) or self.bucket_width < 1:
            raise ConfigError(f"bucket_width must be an int >= 1, got {self.bucket_width!r}")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ConfigError(f"error_rate must lie in [0, 1], got {self.error_rate!r}")
        if not isinstance(self.value, int) or self.value < 1:
            raise ConfigError(f"constant value must be an int >= 1, got {self.value!r}")

    @classmethod
    def oracle(cls):
        return cls("oracle")

    @classmethod
    def bucketed(cls, bucket_width: int):
        return cls("bucketed", bucket_width=bucket_width)

    @classmethod
    def noisy(cls, error_rate: float, bucket_width: int):
        return cls("noisy", bucket_width=bucket_width, error_rate=error_rate)

    @classmethod
    def constant(cls, value: int):
        return cls("constant", value=value)


@dataclass(frozen=True)
class MonitorState:
    corrections: int = 0
    inflation_factor: float = 1.0

    def __post_init__(self):
        if self.corrections < 0:
            raise ConfigError("corrections must be >= 0")
        if not self.inflation_factor >= 1.0:
            raise ConfigError(f"inflation_factor must be >= 1, got {self.inflation_factor!r}")


def bucket_of(length: int, width: int) -> int:
    """1-based bucket index: bucket k covers ``((k-1)*width, k*width]``."""
    return -(-length // width)


def bucket_ceiling(length: int, width: int) -> int:
    return bucket_of(length, width) * width


def _request_rng(rng_seed, request_id: int) -> random.Random:
    # keyed per request so results do not depend on profiling order
    return random.Random(f"{rng_seed}:{request_id}")


def predict_length(true_len: int, predictor: Predictor, rng: Optional[random.Random] = None) -> int:
    """Raw prediction before monitor inflation."""
    v = predictor.variant
    if v == "oracle":
        return true_len
    if v == "constant":
        return predictor.value
    width = predictor.bucket_width
    pred = bucket_ceiling(true_len, width)
    if v == "bucketed":
        return pred
    if rng is None:
        rng = random.Random(0)
    # always draw both numbers so the stream is identical for every error_rate
    miss = rng.random() < predictor.error_rate
    up = rng.random() < 0.5
    if not miss:
        return pred
    if up or pred == width:
        return pred + width
    return pred - width


def profile(
    request: Request,
    predictor: Predictor,
    monitor: Optional[MonitorState] = None,
    rng_seed=0,
) -> Request:
    """Return a copy of ``request`` with ``predicted_output_len`` set."""
    rng = _request_rng(rng_seed, request.id) if predictor.variant == "noisy" else None
    pred = predict_length(request.true_output_len, predictor, rng)
    if monitor is not None and monitor.inflation_factor != 1.0:
        pred = math.ceil(pred * monitor.inflation_factor)
    return request.with_prediction(pred)


def profile_all(
    requests: Iterable[Request],
    predictor: Predictor,
    monitor: Optional[MonitorState] = None,
    rng_seed=0,
) -> List[Request]:
    return [profile(r, predictor, monitor, rng_seed) for r in requests]


def observe_completion(
    monitor: MonitorState,
    predicted: int,
    actual: int,
    gamma: float = 1.1,
    cap: float = 2.0,
) -> MonitorState:
    """Inflate future predictions after an under-prediction; over-predictions are ignored."""
    if gamma < 1.0 or cap < 1.0:
        raise ConfigError("gamma and cap must be >= 1")
    if actual <= predicted:
        return monitor
    return replace(
        monitor,
        corrections=monitor.corrections + 1,
        inflation_factor=min(monitor.inflation_factor * gamma, cap),
    )
