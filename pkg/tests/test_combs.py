import numpy as np
import pytest

from combentropy.combs import (
    ClassicalComb,
    ClassicalQuantumComb,
    Comb,
    TimeStepStructure,
    assemble,
    dual_structure,
    multi_round,
    validate_both_orderings,
    validate_classical_comb,
    validate_comb,
)
from combentropy.errors import CapExceeded, InvalidInput
from combentropy.operators import (
    LabeledOperator,
    SpaceLayout,
    choi_from_kraus,
    kron,
    link_product,
    unnormalized_max_entangled,
)
from combentropy import serialization

from conftest import random_channel_kraus, random_density


def two_step_comb(rng):
    """A state on A1 followed by a channel C1 -> A2 with memory dropped: a valid two-slot comb."""
    rho = LabeledOperator(SpaceLayout([("A1", 2)]), random_density(rng, 2))
    ch = choi_from_kraus(random_channel_kraus(rng, 2, 2), ("A2", 2), ("C1", 2))
    return Comb(kron(rho, ch), TimeStepStructure([((), ("A1",)), (("C1",), ("A2",))]))


def test_channel_choi_validates_and_corruption_is_named(rng):
    ch = choi_from_kraus(random_channel_kraus(rng, 2, 2), ("B", 2), ("A", 2))
    structure = TimeStepStructure([(("A",), ("B",))])
    rep = validate_comb(ch, structure)
    assert rep.valid and rep.max_residual < 1e-12 and rep.d0 == pytest.approx(1.0)
    bad = LabeledOperator(ch.layout, ch.data + 0.1 * np.diag([1.0, 0, 0, 0]))
    rep = validate_comb(bad, structure)
    assert not rep.valid
    assert any("step 1" in m for m in rep.messages)


def test_two_step_comb_and_wrong_causal_order(rng):
    comb = two_step_comb(rng)
    assert comb.validate().valid
    # the identity channel C1 -> A1 is a comb only when C1 comes first
    ident = unnormalized_max_entangled(("A1", 2), ("C1", 2))
    assert validate_comb(ident, TimeStepStructure([(("C1",), ("A1",))])).valid
    rep = validate_comb(ident, TimeStepStructure([((), ("A1",)), (("C1",), ())]))
    assert not rep.valid and rep.max_residual > 0.1


def test_classical_comb_validation(rng):
    layout = SpaceLayout([("A", 2), ("B", 2)])
    structure = TimeStepStructure([(("A",), ("B",))])
    p = rng.random((2, 2))
    p /= p.sum(axis=1, keepdims=True)  # P(b|a)
    ok = ClassicalComb(layout, p.reshape(-1), structure)
    assert validate_classical_comb(ok).valid
    neg = ClassicalComb(layout, np.array([1.5, -0.5, 0.5, 0.5]), structure)
    rep = validate_classical_comb(neg)
    assert not rep.valid and any("negative" in m for m in rep.messages)
    # B -> A signalling (A depends on B) violates the chain with the order A -> B
    sig = ClassicalComb(SpaceLayout([("B", 2), ("A", 2)]), np.array([1.0, 0, 0, 1.0]),
                        TimeStepStructure([(("B",), ("A",))]))
    assert validate_classical_comb(sig).valid
    wrong = ClassicalComb(SpaceLayout([("A", 2), ("B", 2)]), np.array([1.0, 0, 0, 1.0]),
                          TimeStepStructure([((), ("A",)), (("B",), ())]))
    assert not validate_classical_comb(wrong).valid


def test_classical_comb_matches_dense_validator(rng):
    layout = SpaceLayout([("A", 2), ("C", 2), ("B", 3)])
    structure = TimeStepStructure([((), ("A",)), (("C",), ("B",))])
    pa = rng.random(2)
    pa /= pa.sum()
    pb = rng.random((2, 2, 3))
    pb /= pb.sum(axis=2, keepdims=True)
    diag = (pa[:, None, None] * pb).reshape(-1)
    c = ClassicalComb(layout, diag, structure)
    assert c.validate().valid
    assert c.to_comb().validate().valid


def test_dual_structure_interleaves():
    s = TimeStepStructure([((), ("A1",)), (("C1",), ("A2",)), (("C2",), ("A3", "A4"))])
    d = dual_structure(s, final_output="X")
    assert tuple(d) == ((("A1",), ("C1",)), (("A2",), ("C2",)), (("A3", "A4"), ("X",)))


def test_cq_comb_assembly_and_both_orderings(rng):
    blocks = tuple(two_step_comb(rng) for _ in range(3))
    cq = ClassicalQuantumComb(np.array([0.2, 0.3, 0.5]), blocks)
    big = assemble(cq)
    assert big.names[0] == "X" and big.dim == 3 * 8
    last, first = validate_both_orderings(cq)
    assert last.valid and first.valid
    with pytest.raises(CapExceeded):
        assemble(cq, cap=10)
    with pytest.raises(InvalidInput):
        ClassicalQuantumComb(np.array([0.5, 0.6, -0.1]), blocks)


def test_multi_round_is_a_comb_with_tagged_labels(rng):
    blocks = tuple(two_step_comb(rng) for _ in range(2))
    cq = ClassicalQuantumComb(np.array([0.5, 0.5]), blocks)
    two = multi_round(cq, 2)
    assert two.block_dim == 64
    assert all(r.valid for r in two.validate_blocks())
    assert "A1^2" in two.layout.names
    with pytest.raises(CapExceeded):
        multi_round(cq, 5, cap=1000)


def test_link_of_comb_with_strategy_gives_probability(rng):
    comb = two_step_comb(rng)
    # strategy: measure A1 in the computational basis, feed |0> into C1, measure A2
    meas = LabeledOperator(SpaceLayout([("A1", 2), ("C1", 2), ("A2", 2)]),
                           np.kron(np.kron(np.diag([1.0, 0]), np.diag([1.0, 0])), np.diag([1.0, 0])))
    p = link_product(comb.op, meas).data[0, 0].real
    assert 0.0 <= p <= 1.0


def test_serialization_round_trip(rng, tmp_path):
    blocks = tuple(two_step_comb(rng) for _ in range(2))
    cq = ClassicalQuantumComb(np.array([0.25, 0.75]), blocks, names=("a", "b"))
    assert serialization.max_roundtrip_error(cq) <= 1e-15
    path = tmp_path / "cq.json"
    serialization.save(cq, path)
    back = serialization.load(path)
    assert back.names == ("a", "b") and all(r.valid for r in back.validate_blocks())
    c = ClassicalComb(SpaceLayout([("A", 3)]), [0.2, 0.3, 0.5], TimeStepStructure([((), ("A",))]))
    assert serialization.max_roundtrip_error(c) == 0.0
    with pytest.raises(InvalidInput):
        serialization.loads('{"kind": "comb", "layout": [["A", 2]]}')
    with pytest.raises(InvalidInput):
        serialization.loads("{not json")
