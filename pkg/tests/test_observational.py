import numpy as np
import pytest

from combentropy.combs import ClassicalQuantumComb, Comb, TimeStepStructure
from combentropy.entropy import min_entropy
from combentropy.errors import InvalidInput
from combentropy.gflow import four_qubit_graph
from combentropy.mbqc import build_D_gflow, build_D_mp, catalogue_subset
from combentropy.observational import fibonacci_sphere, observational_problem, observational_search
from combentropy.operators import LabeledOperator, SpaceLayout

from conftest import random_density


def test_fibonacci_sphere_is_on_the_unit_sphere():
    pts = fibonacci_sphere(50)
    assert pts.shape == (50, 3)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)


def test_xy_family_observational_value():
    cq = build_D_gflow(four_qubit_graph(), catalogue_subset([1, 2, 4, 5]))
    res = observational_search(cq, mesh=16)
    assert res.p_guess == pytest.approx(0.25, abs=1e-6)
    assert res.p_guess <= min_entropy(cq).p_guess + 1e-6
    for povm in res.povms.values():
        assert np.allclose(povm.sum(axis=0), np.eye(povm.shape[1]), atol=1e-6)
    doc = res.to_dict()
    assert doc["mesh"] == 16 and doc["grid_points"] == 16 ** 2


def test_observational_never_beats_the_optimum():
    cq = build_D_mp()
    obs = observational_search(cq, mesh=8, refine_best=1)
    assert obs.p_guess <= min_entropy(cq).p_guess + 1e-6
    assert obs.p_guess >= 1 / 3 - 1e-6


def test_shape_is_checked(rng):
    rho = LabeledOperator(SpaceLayout([("A", 2)]), random_density(rng, 2))
    block = Comb(rho, TimeStepStructure([((), ("A",))]))
    cq = ClassicalQuantumComb(np.array([0.5, 0.5]), (block, block))
    with pytest.raises(InvalidInput):
        observational_problem(cq)
