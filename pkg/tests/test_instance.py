import json

import pytest
from hypothesis import given, settings, strategies as st

from covtour.errors import InvalidParams, ParseError, ValidationError
from covtour.instance import (
    InstanceParams,
    build_instance,
    derive_fleet,
    generate_sparse,
    load_instance,
    save_instance,
)
from covtour.network import build_preference_lists

from conftest import make_network


def test_derive_fleet_examples():
    assert derive_fleet(1000, InstanceParams(capacity=300)) == (4, 300)
    assert derive_fleet(1000, InstanceParams(capacity=300, buffer=0.2)) == (5, 300)
    assert derive_fleet(1000, InstanceParams(m=2)) == (2, 500)
    assert derive_fleet(7, InstanceParams(m=2)) == (2, 4)


def test_params_rejected():
    with pytest.raises(InvalidParams):
        InstanceParams()
    with pytest.raises(InvalidParams):
        InstanceParams(capacity=10, buffer=1.0)
    with pytest.raises(InvalidParams):
        InstanceParams(m=0)
    with pytest.raises(InvalidParams):
        InstanceParams(capacity=-3)


@given(total=st.integers(1, 10_000), q=st.integers(1, 500), buf=st.sampled_from([0, 0.1, 0.2, 0.5]), m=st.integers(1, 20))
def test_fleet_always_fits(total, q, buf, m):
    mm, qq = derive_fleet(total, InstanceParams(capacity=q, buffer=buf))
    assert mm * qq >= total
    mm, qq = derive_fleet(total, InstanceParams(m=m))
    assert mm * qq >= total and mm == m


def _minimal_doc():
    return {
        "nodes": [{"id": 0, "x": 0, "y": 0}, {"id": 1, "x": 30, "y": 0}],
        "arcs": [{"tail": 0, "head": 1, "length_m": 30}, {"tail": 1, "head": 0, "length_m": 30}],
        "depot": 0,
        "candidate_stops": [1],
        "demands": [{"node": 1, "qty": 4}],
        "params": {"gamma_m": 0, "m": 1, "stop_penalty_s": 5, "s_col": 1, "s_dep": 1},
    }


def test_minimal_round_trip():
    inst = load_instance(json.dumps(_minimal_doc()))
    assert inst.m == 1 and inst.Q == 4
    text = save_instance(inst)
    again = load_instance(text)
    assert again == inst
    assert save_instance(again) == text


def test_prefs_derived_from_gamma_match_network_module():
    edges = [(0, 1, 40), (1, 2, 20), (2, 3, 35), (3, 0, 60), (1, 3, 45)]
    net = make_network(edges, demand=[1, 3])
    doc = {
        "nodes": [{"id": n.id, "x": n.x, "y": n.y} for n in net.nodes],
        "arcs": [{"tail": a.tail, "head": a.head, "length_m": a.length} for a in net.arcs],
        "depot": 0,
        "candidate_stops": [1, 2, 3],
        "demands": [{"node": 1, "qty": 2}, {"node": 3, "qty": 5}],
        "params": {"gamma_m": 50, "m": 1, "stop_penalty_s": 5, "s_col": 1, "s_dep": 1},
    }
    inst = load_instance(json.dumps(doc))
    _, expect = build_preference_lists(net, 50)
    assert [inst.prefs[p.owner].ranked_stops for p in expect] == [p.ranked_stops for p in expect]
    assert inst.prefs[1].ranked_stops == (1, 2, 3)


def test_explicit_prefs_are_kept_verbatim():
    doc = _minimal_doc()
    doc["nodes"].append({"id": 2, "x": 60, "y": 0})
    doc["arcs"] += [{"tail": 1, "head": 2, "length_m": 30}, {"tail": 2, "head": 1, "length_m": 30}]
    doc["candidate_stops"] = [1, 2]
    doc["prefs"] = [{"node": 1, "stops": [2, 1]}]
    inst = load_instance(json.dumps(doc))
    assert inst.prefs[1].ranked_stops == (2, 1)
    assert json.loads(save_instance(inst))["prefs"] == doc["prefs"]


def test_capacity_violation():
    doc = _minimal_doc()
    doc["params"] = {"gamma_m": 0, "m": 1, "capacity": {"Q": 3, "buffer": 0}, "stop_penalty_s": 5, "s_col": 1, "s_dep": 1}
    with pytest.raises(ValidationError) as exc:
        load_instance(json.dumps(doc))
    assert exc.value.invariant == "capacity"


def test_parse_errors_carry_locus():
    with pytest.raises(ParseError) as exc:
        load_instance('{\n "nodes": [\n}')
    assert exc.value.locus.startswith("line ")
    doc = _minimal_doc()
    doc["colour"] = "red"
    with pytest.raises(ParseError):
        load_instance(json.dumps(doc))
    doc = _minimal_doc()
    doc["arcs"][0]["length_m"] = "far"
    with pytest.raises(ParseError) as exc:
        load_instance(json.dumps(doc))
    assert "arcs[0]" in exc.value.locus


def test_stops_densified_when_omitted():
    doc = _minimal_doc()
    doc["nodes"].append({"id": 2, "x": 150, "y": 0})
    doc["arcs"] += [{"tail": 1, "head": 2, "length_m": 120}, {"tail": 2, "head": 1, "length_m": 120}]
    del doc["candidate_stops"]
    doc["params"]["gamma_m"] = 45
    inst = load_instance(json.dumps(doc))
    assert len(inst.network.nodes) == 5
    assert inst.prefs[1].ranked_stops[0] == 1


def test_generate_deterministic():
    params = InstanceParams(gamma=30, m=2)
    a = generate_sparse(10, 1.0, 42, params)
    b = generate_sparse(10, 1.0, 42, params)
    assert len(a.demand_nodes) == 9
    assert save_instance(a) == save_instance(b)
    assert all(1 <= q <= 9 for q in a.demands.values())


def test_demand_fraction():
    fractions = []
    for seed in range(5):
        inst = generate_sparse(300, 1 / 3, seed, InstanceParams(gamma=0, m=3))
        fractions.append(len(inst.demand_nodes) / 299)
    assert all(0.28 <= f <= 0.39 for f in fractions)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(3, 40), p=st.floats(0.05, 1.0), gamma=st.sampled_from([0, 20, 60]))
def test_generated_instances_reload(seed, n, p, gamma):
    inst = generate_sparse(n, p, seed, InstanceParams(gamma=gamma, m=2))
    assert inst.demand_nodes
    again = load_instance(save_instance(inst))
    assert again == inst
    assert inst.total_demand <= inst.m * inst.Q


def test_build_instance_capacity_mode():
    net = make_network([(0, 1, 10), (1, 2, 10), (2, 0, 10)], demand=[1, 2])
    inst = build_instance(net, {1: 5, 2: 6}, InstanceParams(capacity=5, buffer=0.2))
    assert (inst.m, inst.Q) == (3, 5)
