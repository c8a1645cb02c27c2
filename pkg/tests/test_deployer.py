import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import small_models, topologies
from oracles import brute_force_placement, enumerate_chains, layer_caps
from servesim.deployer import (
    chain_latency,
    compute_cost,
    helr_search,
    max_layers,
    plan,
    plan_bgs,
    plan_he,
    plan_helr,
    plan_lr,
)
from servesim.errors import ConfigError, InfeasibleError
from servesim.types import DeployerConfig, DeviceNode, ModelSpec, Topology

GB = 10**9


def topo_of(mems, perfs, lat=None):
    n = len(mems)
    nodes = tuple(DeviceNode(i, m, p) for i, (m, p) in enumerate(zip(mems, perfs)))
    if lat is None:
        lat = [[0.0 if i == j else 1.0 for j in range(n)] for i in range(n)]
    return Topology(nodes, lat)


def test_compute_cost_examples():
    d = DeviceNode(0, 100, 4.0)
    assert compute_cost(d, 0, 2) == 0
    assert compute_cost(d, 10, 2, p=1) == 5.0
    assert compute_cost(DeviceNode(0, 100, 8.0), 10, 2) == compute_cost(d, 10, 2) / 2


def test_max_layers_examples():
    assert max_layers(DeviceNode(0, 24 * GB, 1.0), GB, 4 * GB, 32) == 20
    assert max_layers(DeviceNode(0, 4 * GB, 1.0), GB, 4 * GB, 32) == 0
    assert max_layers(DeviceNode(0, 3 * GB, 1.0), GB, 4 * GB, 32) == 0
    assert max_layers(DeviceNode(0, 10**6 * GB, 1.0), GB, 0, 32) == 32


def test_max_layers_is_exact_at_boundaries():
    # 7 layers of 10/3 bytes need 23.33 bytes: 23 bytes hold 6, 24 hold 7
    m = ModelSpec("x", total_memory=10, num_layers=3, hidden_dim=1).memory_per_layer
    assert max_layers(DeviceNode(0, 23, 1.0), m, 0, 100) == 6
    assert max_layers(DeviceNode(0, 24, 1.0), m, 0, 100) == 7


def test_single_device():
    model = ModelSpec("x", total_memory=32, num_layers=32, hidden_dim=1)
    topo = topo_of([64], [2.0])
    dmap, obj = plan_helr(model, topo, DeployerConfig())
    assert dmap.entries == ((0, 0, 31),)
    assert obj == compute_cost(topo.nodes[0], 32, model.memory_per_layer)


def test_identical_devices_prefer_single():
    model = ModelSpec("x", total_memory=32, num_layers=32, hidden_dim=1)
    topo = topo_of([64, 64], [2.0, 2.0], [[0, 0.5], [0.5, 0]])
    dmap, _ = plan_helr(model, topo, DeployerConfig())
    assert len(dmap.entries) == 1


def test_split_when_nothing_fits_alone():
    model = ModelSpec("x", total_memory=25, num_layers=25, hidden_dim=1)
    topo = topo_of([20, 10, 15], [1.0, 1.0, 4.0])
    pl = helr_search(model, topo, DeployerConfig(a1=1, a2=0))
    best = brute_force_placement(model, topo, DeployerConfig(a1=1, a2=0))
    assert pl.score == best[0]
    assert list(pl.device_map.device_ids) == list(best[2])


def test_he_prefers_fewer_devices():
    # device 0 alone fits but is slow; 1+2 together are much faster
    model = ModelSpec("x", total_memory=20, num_layers=20, hidden_dim=1)
    topo = topo_of([40, 12, 12], [1.0, 100.0, 100.0], [[0, 0.1, 0.1], [0.1, 0, 0.1], [0.1, 0.1, 0]])
    he_map, he_obj = plan_he(model, topo, DeployerConfig())
    lr_map, _ = plan_lr(model, topo, DeployerConfig())
    assert he_map.device_ids == (0,)
    assert he_obj == 0.0
    assert len(lr_map.entries) == 2


def test_he_picks_smallest_feasible_subset():
    model = ModelSpec("x", total_memory=30, num_layers=30, hidden_dim=1)
    topo = topo_of([10, 12, 9, 20], [5.0, 1.0, 9.0, 2.0])
    dmap, _ = plan_he(model, topo, DeployerConfig())
    assert len(dmap.entries) == 2
    caps = layer_caps(model, topo, 0)
    assert sum(caps[d] for d in dmap.device_ids) >= 30


def test_lr_weights():
    model = ModelSpec("x", total_memory=8, num_layers=8, hidden_dim=1)
    topo = topo_of([8, 8], [1.0, 3.0])
    pl = helr_search(model, topo, DeployerConfig(a1=10, a2=1))
    dmap, obj = plan_lr(model, topo, DeployerConfig())
    assert dmap == pl.device_map and obj == pl.objective
    assert dmap.device_ids == (1,)


def test_bgs_examples():
    model = ModelSpec("x", total_memory=25, num_layers=25, hidden_dim=1)
    assert plan_bgs(model, topo_of([20, 10], [1.0, 1.0])).entries == ((0, 0, 19), (1, 20, 24))
    assert plan_bgs(model, topo_of([10, 30], [1.0, 1.0])).entries == ((1, 0, 24),)
    assert plan_bgs(model, topo_of([13, 13], [1.0, 9.0])).entries == ((0, 0, 12), (1, 13, 24))


def test_infeasible_names_shortfall():
    model = ModelSpec("x", total_memory=30, num_layers=30, hidden_dim=1)
    topo = topo_of([10, 12], [1.0, 1.0])
    with pytest.raises(InfeasibleError, match="short by 8") as ei:
        plan_helr(model, topo, DeployerConfig())
    assert ei.value.shortfall == 8
    with pytest.raises(InfeasibleError):
        plan_bgs(model, topo)
    with pytest.raises(InfeasibleError):
        plan_helr(model, topo_of([14, 14], [1.0, 1.0]), DeployerConfig(kv_reserve=5))


def test_device_guard():
    model = ModelSpec("x", total_memory=4, num_layers=4, hidden_dim=1)
    topo = topo_of([4] * 5, [1.0] * 5)
    with pytest.raises(ConfigError, match="limited"):
        plan_helr(model, topo, DeployerConfig(max_devices=4))


def test_unknown_planner():
    with pytest.raises(ConfigError):
        plan("random", ModelSpec("x", 1, 1, 1), topo_of([4], [1.0]), DeployerConfig())


weights = st.tuples(st.sampled_from([0.0, 0.1, 1.0, 10.0]), st.sampled_from([0.0, 1.0, 5.0])).filter(
    lambda w: w[0] + w[1] > 0
)
deployer_cfgs = st.builds(
    lambda w, p, kv, lit: DeployerConfig(a1=w[0], a2=w[1], p=p, kv_reserve=kv, literal_final_term=lit),
    weights,
    st.sampled_from([0.5, 1.0, 3.0]),
    st.integers(0, 6),
    st.booleans(),
)


def _feasible(model, topo, cfg):
    return sum(layer_caps(model, topo, cfg.kv_reserve).values()) >= model.num_layers


@given(small_models(), topologies(), deployer_cfgs)
def test_matches_brute_force(model, topo, cfg):
    assume(_feasible(model, topo, cfg))
    pl = helr_search(model, topo, cfg)
    best = brute_force_placement(model, topo, cfg)
    assert pl.score == best[0]
    assert pl.latency == best[1]


@given(small_models(), topologies(), deployer_cfgs)
def test_map_respects_memory(model, topo, cfg):
    assume(_feasible(model, topo, cfg))
    for name in ("helr", "he", "lr", "bgs"):
        dmap = plan(name, model, topo, cfg)
        dmap.validate_for(model, topo, cfg.kv_reserve)
        assert sum(topo.nodes[d].memory for d in dmap.device_ids) >= model.total_memory


@given(small_models(), topologies(max_devices=3), deployer_cfgs,
       st.integers(0, 64), st.floats(0.5, 20), st.lists(st.floats(0, 5), min_size=3, max_size=3))
def test_adding_device_never_hurts(model, topo, cfg, mem, perf, links):
    assume(_feasible(model, topo, cfg))
    n = len(topo.nodes)
    nodes = topo.nodes + (DeviceNode(n, mem, perf),)
    lat = [list(row) + [links[i]] for i, row in enumerate(topo.link_latency)]
    lat.append(links[:n] + [0.0])
    bigger = Topology(nodes, lat)
    assert helr_search(model, bigger, cfg).score <= helr_search(model, topo, cfg).score


@given(small_models(), topologies(), deployer_cfgs)
def test_he_subset_is_minimal(model, topo, cfg):
    assume(_feasible(model, topo, cfg))
    dmap, _ = plan_he(model, topo, cfg)
    smallest = min(len(chain) for _, _, chain, _ in enumerate_chains(model, topo, cfg))
    assert len(dmap.entries) == smallest


@given(small_models(), topologies(), deployer_cfgs)
def test_reported_latency_matches_map(model, topo, cfg):
    assume(_feasible(model, topo, cfg) and not cfg.literal_final_term)
    pl = helr_search(model, topo, cfg)
    assert chain_latency(pl.device_map, model, topo, cfg.p) == pl.latency
