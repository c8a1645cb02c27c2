import sys
from pathlib import Path

import pytest
from hypothesis import settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from servesim.types import DeviceNode, ModelSpec, Request, Topology  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail=""):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def profiled_requests(draw, min_size=0, max_size=12, max_len=600):
    n = draw(st.integers(min_size, max_size))
    out = []
    for i in range(n):
        out.append(
            Request(
                id=i,
                arrival_time=draw(st.floats(0, 100, allow_nan=False)),
                input_len=draw(st.integers(1, max_len)),
                true_output_len=draw(st.integers(1, max_len)),
                slo=draw(st.floats(0.5, 350, allow_nan=False)),
                predicted_output_len=draw(st.integers(1, max_len)),
            )
        )
    return out


@st.composite
def topologies(draw, max_devices=4):
    n = draw(st.integers(1, max_devices))
    nodes = tuple(
        DeviceNode(
            id=i,
            memory=draw(st.integers(0, 64)),
            performance=draw(st.floats(0.5, 20, allow_nan=False)),
        )
        for i in range(n)
    )
    lat = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            lat[i][j] = lat[j][i] = draw(st.floats(0, 5, allow_nan=False))
    return Topology(nodes, lat)


@st.composite
def small_models(draw):
    layers = draw(st.integers(1, 24))
    per_layer = draw(st.integers(1, 4))
    return ModelSpec("m", total_memory=layers * per_layer, num_layers=layers, hidden_dim=8)


def make_request(i, slo, length, input_len=10, arrival=0.0, true_len=None):
    return Request(id=i, arrival_time=arrival, input_len=input_len,
                   true_output_len=true_len or length, slo=slo, predicted_output_len=length)
