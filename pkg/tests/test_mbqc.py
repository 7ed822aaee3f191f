import numpy as np
import pytest

from combentropy.errors import InvalidInput
from combentropy.gflow import four_qubit_catalogue, four_qubit_graph, line_graph, make_gflow, triangle_graph
from combentropy.mbqc import (
    PlaneMeasurement,
    build_D_calibr,
    build_sigma_mbqc,
    catalogue_subset,
    check_causal_equivalence,
    check_determinism,
    check_qcm_structure,
    graph_state,
    measurement_channel,
    random_angles,
)


def test_graph_state_of_an_edge_matches_cz_on_plus_plus():
    gs = graph_state(line_graph(2))
    plus = np.ones(2) / np.sqrt(2)
    cz = np.diag([1, 1, 1, -1])
    expected = cz @ np.kron(plus, plus)
    assert np.allclose(gs.vector, expected)
    assert gs.stabilizer_residual() < 1e-14
    assert gs.marginal_residual() < 1e-14


def test_plane_measurement_bases():
    for plane in ("XY", "XZ", "YZ"):
        for angle in (0.0, 0.7, 2.9):
            plus, minus = PlaneMeasurement(plane, angle).kets()
            assert abs(np.vdot(plus, plus) - 1) < 1e-14
            assert abs(np.vdot(plus, minus)) < 1e-14
    plus, _ = PlaneMeasurement("XY", 0.0).kets()
    assert np.allclose(plus, np.ones(2) / np.sqrt(2))
    plus, _ = PlaneMeasurement("XZ", 0.0).kets()
    assert np.allclose(plus, [1, 0])
    with pytest.raises(InvalidInput):
        PlaneMeasurement("XX", 0.0)


def test_measurement_channel_is_trace_preserving():
    ch = measurement_channel(PlaneMeasurement("YZ", 1.1), "in", "out")
    # tracing the output must leave the identity on the input
    d = ch.data.reshape(2, 2, 2, 2)
    assert np.allclose(np.einsum("aiaj->ij", d), np.eye(2))


def test_gflow_patterns_are_deterministic(rng):
    graph = four_qubit_graph()
    for gf in four_qubit_catalogue().values():
        angles = random_angles(gf.planes, rng)
        assert check_determinism(gf, graph, angles) < 1e-9


def test_missing_corrections_break_determinism(rng):
    graph = line_graph(2, outputs=(2,))
    real = make_gflow(graph, {1: {2}}, planes={1: "XY"})
    assert check_determinism(real, graph, {1: PlaneMeasurement("XY", 0.3)}) < 1e-12
    # an empty correction set is not a gflow; outcome 1 leaves a Z error on qubit 2
    fake = make_gflow(graph, {1: set()}, planes={1: "XY"})
    assert check_determinism(fake, graph, {1: PlaneMeasurement("XY", 0.3)}) > 0.5


def test_sigma_is_a_valid_comb_and_factorises():
    graph = four_qubit_graph()
    for gf in catalogue_subset([1, 6, 11]):
        assert build_sigma_mbqc(gf, graph).validate(1e-9).valid
        assert check_qcm_structure(gf, graph).ok


def test_causal_equivalence_inside_a_plane_family():
    graph = four_qubit_graph()
    assert check_causal_equivalence(catalogue_subset([1, 2, 4, 5]), graph, seed=3) < 1e-9
    with pytest.raises(InvalidInput):
        check_causal_equivalence(catalogue_subset([1, 6]), graph)


def test_calibration_angle_range():
    with pytest.raises(InvalidInput):
        build_D_calibr(1)
    with pytest.raises(InvalidInput):
        build_D_calibr(33)
    cq = build_D_calibr(3)
    assert len(cq.blocks) == 3 and np.allclose(cq.prior, 1 / 3)
    assert all(b.validate(1e-9).valid for b in cq.blocks)


def test_triangle_sigma_structure():
    graph = triangle_graph()
    gf = make_gflow(graph, {1: {2}}, planes={1: "XY"})
    sigma = build_sigma_mbqc(gf, graph)
    assert sigma.validate(1e-9).valid
