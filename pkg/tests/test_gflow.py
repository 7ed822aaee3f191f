import json

import pytest

from combentropy.errors import CapExceeded, InvalidInput
from combentropy.gflow import (
    OpenGraph,
    common_total_order,
    correction_sets,
    dag_to_dot,
    dag_to_json,
    enumerate_gflows,
    four_qubit_catalogue,
    four_qubit_graph,
    induced_dag,
    line_graph,
    make_gflow,
    odd_neighborhood,
    orders_compatible,
    triangle_graph,
    verify_gflow,
)


def xy(graph, outputs, inputs=()):
    base = graph.with_io(inputs=inputs, outputs=outputs)
    return OpenGraph(base.n, base.edges, base.inputs, base.outputs,
                     {v: "XY" for v in base.vertices if v not in base.outputs})


def test_odd_neighborhood_on_the_triangle():
    k3 = triangle_graph()
    assert odd_neighborhood(k3, {3}) == {1, 2}
    assert odd_neighborhood(k3, {2}) == {1, 3}
    assert odd_neighborhood(k3, {2, 3}) == {2, 3}
    assert odd_neighborhood(k3, set()) == frozenset()
    with pytest.raises(InvalidInput):
        odd_neighborhood(k3, {4})


def test_triangle_output_set_two_three_has_exactly_two_gflows():
    g = xy(triangle_graph(), outputs={2, 3})
    found = enumerate_gflows(g, order_constraint=[1, 2, 3])
    assert sorted(f.describe() for f in found) == ["1->{2}", "1->{3}"]
    for f in found:
        ok, violations = verify_gflow(g, f, order=[1, 2, 3])
        assert ok and not violations


def test_triangle_other_output_sets_fail_under_natural_order():
    for outputs in ({3}, {1, 3}, {1}, {2}, {1, 2}):
        g = xy(triangle_graph(), outputs=outputs)
        assert enumerate_gflows(g, order_constraint=[1, 2, 3]) == []


def test_line_graph_enumeration():
    g = xy(line_graph(3), outputs={2, 3})
    found = enumerate_gflows(g, order_constraint=[1, 2, 3])
    assert sorted(f.describe() for f in found) == ["1->{2,3}", "1->{2}"]


def test_verify_gflow_names_failed_clauses():
    g = xy(triangle_graph(), outputs={2, 3})
    # 1 in g(1) breaks the XY plane clause
    bad = make_gflow(g, {1: {1, 2}}, planes={1: "XY"})
    ok, violations = verify_gflow(g, bad)
    assert not ok and any(v.clause == 3 for v in violations)
    # 1 -> {2} needs 1 < 2; the order 2 < 1 violates the first clause
    good = make_gflow(g, {1: {2}})
    ok, violations = verify_gflow(g, good, order=[2, 1, 3])
    assert not ok and any(v.clause == 1 for v in violations)


def test_four_qubit_counts():
    graph = four_qubit_graph()
    assert len(enumerate_gflows(graph, planes="any")) == 15
    cat = four_qubit_catalogue()
    assert sorted(cat) == list(range(1, 16))
    by_plane = {}
    for gf in cat.values():
        assert gf.planes[1] == "XY"
        by_plane.setdefault(gf.planes[2], []).append(gf)
    assert {p: len(v) for p, v in by_plane.items()} == {"XY": 5, "XZ": 5, "YZ": 5}
    assert len(enumerate_gflows(graph, planes={1: "XY", 2: "XY"})) == 5


def test_correction_sets_follow_the_definition():
    graph = four_qubit_graph()
    g1 = four_qubit_catalogue()[1]  # 1 -> {2}, 2 -> {3,4}
    cs = correction_sets(g1, graph)
    # Odd({2}) = {1,4}; Odd({3,4}) = {2,3,4}
    assert cs.x_sets[2] == {1} and cs.x_sets[3] == {2} and cs.x_sets[4] == {2}
    assert cs.z_sets[3] == {2} and cs.z_sets[4] == {1, 2}
    assert cs.z_sets[1] == frozenset() and cs.z_sets[2] == frozenset()
    for v in graph.vertices:
        brute_x = {w for w, s in g1.g.items() if v in s and w != v}
        brute_z = {w for w, s in g1.g.items() if v in odd_neighborhood(graph, s) and w != v}
        assert cs.x_sets[v] == brute_x and cs.z_sets[v] == brute_z


def test_induced_dag_and_exports():
    graph = four_qubit_graph()
    g1 = four_qubit_catalogue()[1]
    dag = induced_dag(g1, graph)
    assert set(dag.edges) == {(1, 2), (2, 3), (2, 4), (1, 4)}
    assert "digraph" in dag_to_dot(dag)
    doc = json.loads(dag_to_json(dag))
    assert sorted(map(tuple, doc["edges"])) == sorted(dag.edges)


def test_order_compatibility():
    cat = four_qubit_catalogue()
    graph = four_qubit_graph()
    assert not orders_compatible(list(cat.values()))
    fam = [cat[i] for i in (1, 2, 4, 5)]
    assert orders_compatible(fam)
    assert common_total_order(fam, graph) == [1, 2, 3, 4]
    assert common_total_order([cat[3]], graph)[:2] == [2, 1]


def test_graph_validation_and_caps():
    with pytest.raises(InvalidInput):
        OpenGraph(3, frozenset({frozenset((1, 2))}))
    with pytest.raises(InvalidInput):
        OpenGraph.from_dict({"vertices": 2})
    g = OpenGraph.from_dict({"vertices": [1, 2, 3], "edges": [[1, 2], [2, 3]], "outputs": [3]})
    assert OpenGraph.from_dict(g.to_dict()) == g
    with pytest.raises(CapExceeded):
        enumerate_gflows(four_qubit_graph(), planes="any", cap=10)
