import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_request
from oracles import kv_bytes, optimal_generated_tokens
from servesim.errors import ConsistencyError, SizingError
from servesim.memory import batch_token_cost, kv_cache_peak_bytes, plan_token_cost
from servesim.types import BatchPlan, ModelSpec


def model(l=1, h=1, elem=4):
    return ModelSpec("t", total_memory=1, num_layers=l, hidden_dim=h, kv_bytes_per_elem=elem)


def test_kv_unit_substitution():
    assert kv_cache_peak_bytes(model(), 1, 0, 1) == 4


def test_kv_zero_output():
    assert kv_cache_peak_bytes(model(), 1, 0, 0) == 0


def test_kv_llama_like():
    assert kv_cache_peak_bytes(model(32, 4096), 8, 512, 512) == 4_294_967_296


def test_kv_overflow():
    with pytest.raises(SizingError):
        kv_cache_peak_bytes(model(10**6, 10**6), 10**4, 10**4, 10**4)


@given(st.integers(1, 4), st.integers(1, 64), st.integers(1, 80), st.integers(1, 8192),
       st.integers(0, 4096), st.integers(0, 4096))
def test_kv_matches_oracle(elem, b, l, h, s, n):
    assert kv_cache_peak_bytes(model(l, h, elem), b, s, n) == kv_bytes(elem, b, l, h, s, n)


@given(st.integers(1, 16), st.integers(1, 16), st.integers(0, 100), st.integers(0, 100),
       st.sampled_from(["b", "s", "n"]))
def test_kv_monotone(b, l, s, n, which):
    m = model(l, 64)
    base = kv_cache_peak_bytes(m, b, s, n)
    bumped = {"b": (b + 1, s, n), "s": (b, s + 1, n), "n": (b, s, n + 1)}[which]
    assert kv_cache_peak_bytes(m, *bumped) >= base


def test_batch_token_cost_examples():
    r = make_request(0, 1.0, 20, input_len=10)
    assert batch_token_cost(BatchPlan.from_requests([r]), [r]) == (20, 0)
    a = make_request(0, 1.0, 5, input_len=10)
    b = make_request(1, 1.0, 50, input_len=30)
    assert batch_token_cost(BatchPlan.from_requests([a, b]), [a, b]) == (100, 20)
    same = [make_request(i, 1.0, 9, input_len=7) for i in range(3)]
    assert batch_token_cost(BatchPlan.from_requests(same), same) == (27, 0)


def test_batch_token_cost_mismatch():
    a, b = make_request(0, 1.0, 5), make_request(1, 1.0, 6)
    with pytest.raises(ConsistencyError):
        batch_token_cost(BatchPlan.from_requests([a]), [a, b])
    with pytest.raises(ConsistencyError):
        batch_token_cost(BatchPlan((0,), 10, 99), [a])


def test_plan_token_cost_examples():
    reqs = [make_request(i, 1.0, n) for i, n in enumerate([5, 5, 50, 50])]
    single = BatchPlan.from_requests(reqs)
    assert plan_token_cost([single], reqs) == batch_token_cost(single, reqs)
    assert plan_token_cost([single], reqs).generated_tokens == 200
    split = [BatchPlan.from_requests(reqs[:2]), BatchPlan.from_requests(reqs[2:])]
    assert plan_token_cost(split, reqs).generated_tokens == 110
    assert plan_token_cost([], []) == (0, 0)


def test_plan_token_cost_partition_errors():
    reqs = [make_request(i, 1.0, 5) for i in range(3)]
    with pytest.raises(ConsistencyError, match="missing"):
        plan_token_cost([BatchPlan.from_requests(reqs[:2])], reqs)
    with pytest.raises(ConsistencyError, match="more than one"):
        plan_token_cost([BatchPlan.from_requests(reqs), BatchPlan.from_requests(reqs[:1])], reqs)


@given(st.lists(st.integers(1, 100), min_size=1, max_size=7))
def test_optimal_partition_never_worse_than_single_batch(lengths):
    assert optimal_generated_tokens(lengths) <= len(lengths) * max(lengths)
