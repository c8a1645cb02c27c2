"""KV-cache sizing and padded-token accounting for batches."""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

from .errors import ConsistencyError, ContractError, SizingError
from .types import BatchPlan, ModelSpec, Request

# Byte counts are reported as signed 64-bit quantities; anything larger is a sizing error.
MAX_BYTES = 2**63 - 1


class TokenCost(NamedTuple):
    generated_tokens: int
    padding_tokens: int


def kv_cache_peak_bytes(model: ModelSpec, batch_size: int, max_input: int, max_output: int) -> int:
    """Peak KV-cache bytes: ``elem_bytes * b * l * h * (s + n)``."""
    if batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {batch_size}")
    if max_input < 0:
        raise ContractError(f"max_input must be >= 0, got {max_input}")
    if max_output < 0:
        raise ContractError(f"max_output must be >= 0, got {max_output}")
    total = (
        model.kv_bytes_per_elem
        * batch_size
        * model.num_layers
        * model.hidden_dim
        * (max_input + max_output)
    )
    if total > MAX_BYTES:
        raise SizingError(f"KV cache size {total} bytes overflows a 64-bit byte count")
    return total


def _check_members(batch: BatchPlan, members: Sequence[Request]) -> None:
    ids = [r.id for r in members]
    if sorted(ids) != sorted(batch.request_ids) or len(set(ids)) != len(ids):
        raise ConsistencyError(
            f"batch members {sorted(ids)} do not match request ids {sorted(batch.request_ids)}"
        )
    if batch.padded_input_len != max(r.input_len for r in members):
        raise ConsistencyError("padded_input_len is not the maximum member input length")
    if any(r.predicted_output_len is None for r in members):
        raise ConsistencyError("batch members must carry predicted_output_len")
    if batch.max_output_len != max(r.predicted_output_len for r in members):
        raise ConsistencyError("max_output_len is not the maximum member predicted length")


def batch_token_cost(batch: BatchPlan, members: Sequence[Request]) -> TokenCost:
    """Generated tokens (``|batch| * O``) and input padding tokens for one batch."""
    _check_members(batch, members)
    generated = len(batch) * batch.max_output_len
    padding = sum(batch.padded_input_len - r.input_len for r in members)
    return TokenCost(generated, padding)


def plan_token_cost(plans: Sequence[BatchPlan], members: Iterable[Request]) -> TokenCost:
    """Sum of :func:`batch_token_cost` over ``plans``; each request must be in exactly one plan."""
    by_id = {}
    for r in members:
        if r.id in by_id:
            raise ConsistencyError(f"request {r.id} given twice")
        by_id[r.id] = r
    seen = set()
    generated = padding = 0
    for plan in plans:
        for rid in plan.request_ids:
            if rid in seen:
                raise ConsistencyError(f"request {rid} appears in more than one plan")
            if rid not in by_id:
                raise ConsistencyError(f"plan references unknown request {rid}")
            seen.add(rid)
        cost = batch_token_cost(plan, [by_id[rid] for rid in plan.request_ids])
        generated += cost.generated_tokens
        padding += cost.padding_tokens
    missing = set(by_id) - seen
    if missing:
        raise ConsistencyError(f"requests missing from plans: {sorted(missing)}")
    return TokenCost(generated, padding)
