import numpy as np
import pytest

from combentropy.combs import ClassicalComb, ClassicalQuantumComb, Comb, TimeStepStructure
from combentropy.entropy import (
    SolverConfig,
    classical_bounds,
    extract_strategy,
    min_entropy,
    monotonicity_check,
    multi_round_bounds,
    solve_assembled,
)
from combentropy.errors import CapExceeded, InvalidInput
from combentropy.operators import LabeledOperator, SpaceLayout, choi_from_kraus, identity, unitary_choi

from conftest import random_channel_kraus, random_density

STATE = TimeStepStructure([((), ("A",))])
CHANNEL = TimeStepStructure([(("C",), ("A",))])


def state_block(rho):
    return Comb(LabeledOperator(SpaceLayout([("A", rho.shape[0])]), rho), STATE)


def helstrom(prior, states):
    diff = prior[0] * states[0] - prior[1] * states[1]
    return 0.5 * (1 + np.sum(np.abs(np.linalg.eigvalsh(diff))))


def test_two_states_reach_the_helstrom_value(rng):
    for _ in range(3):
        states = [random_density(rng, 2), random_density(rng, 2)]
        prior = np.array([0.3, 0.7])
        cq = ClassicalQuantumComb(prior, tuple(state_block(s) for s in states))
        res = min_entropy(cq)
        assert res.p_guess == pytest.approx(helstrom(prior, states), abs=1e-6)
        assert res.h_min == pytest.approx(-np.log2(res.p_guess))


def test_identical_blocks_give_the_prior_maximum(rng):
    rho = random_density(rng, 3)
    prior = np.array([0.2, 0.5, 0.3])
    cq = ClassicalQuantumComb(prior, tuple(state_block(rho) for _ in prior))
    assert min_entropy(cq).p_guess == pytest.approx(0.5, abs=1e-6)


def test_entangled_probe_separates_identity_from_z():
    ident = unitary_choi(np.eye(2), ("A", 2), ("C", 2))
    zchan = unitary_choi(np.diag([1.0, -1.0]), ("A", 2), ("C", 2))
    cq = ClassicalQuantumComb(np.array([0.5, 0.5]), (Comb(ident, CHANNEL), Comb(zchan, CHANNEL)))
    assert min_entropy(cq).p_guess == pytest.approx(1.0, abs=1e-6)


def test_identity_versus_full_depolarizer():
    # diamond distance between the qubit identity and the completely depolarizing map is 3/2
    ident = unitary_choi(np.eye(2), ("A", 2), ("C", 2))
    dep = LabeledOperator(ident.layout, identity(ident.layout).data / 2)
    cq = ClassicalQuantumComb(np.array([0.5, 0.5]), (Comb(ident, CHANNEL), Comb(dep, CHANNEL)))
    res = min_entropy(cq)
    assert res.p_guess == pytest.approx(0.875, abs=1e-6)
    assert solve_assembled(cq) == pytest.approx(0.875, abs=1e-6)
    strat = extract_strategy(res, cq)
    assert strat.valid and strat.duality_gap <= 1e-5


def test_random_channels_strategy_matches_primal(rng):
    blocks = tuple(
        Comb(choi_from_kraus(random_channel_kraus(rng, 2, 2), ("A", 2), ("C", 2)), CHANNEL) for _ in range(3)
    )
    cq = ClassicalQuantumComb(np.array([0.5, 0.25, 0.25]), blocks)
    res = min_entropy(cq)
    strat = extract_strategy(res, cq)
    assert strat.valid, strat.messages
    assert strat.achieved == pytest.approx(res.p_guess, abs=1e-5)
    assert res.to_dict()["status"] == res.status


def random_classical_cq(rng, k=3):
    layout = SpaceLayout([("A", 2), ("C", 2)])
    blocks = []
    for _ in range(k):
        p = rng.random((2, 2))
        p /= p.sum(axis=0, keepdims=True)  # P(a|c), output first
        blocks.append(ClassicalComb(layout, p.reshape(-1), CHANNEL))
    prior = rng.random(k)
    return ClassicalQuantumComb(prior / prior.sum(), tuple(blocks))


def test_lp_agrees_with_sdp_on_classical_instances(rng):
    for _ in range(4):
        cq = random_classical_cq(rng)
        lp = min_entropy(cq).p_guess
        sdp = min_entropy(cq, classical_fast_path=False).p_guess
        assert lp == pytest.approx(sdp, abs=1e-6)
        lo, up = classical_bounds(cq)
        assert lo - 1e-9 <= lp <= up + 1e-9


def test_classical_channel_guessing_by_hand():
    # two deterministic maps on a bit: identity and NOT; probing with c=0 separates them
    layout = SpaceLayout([("A", 2), ("C", 2)])
    ident = ClassicalComb(layout, np.array([1.0, 0, 0, 1]), CHANNEL)
    flip = ClassicalComb(layout, np.array([0.0, 1, 1, 0]), CHANNEL)
    cq = ClassicalQuantumComb(np.array([0.5, 0.5]), (ident, flip))
    assert min_entropy(cq).p_guess == pytest.approx(1.0, abs=1e-9)
    # two constant maps outputting 0 cannot be told apart
    const = ClassicalComb(layout, np.array([1.0, 1, 0, 0]), CHANNEL)
    cq = ClassicalQuantumComb(np.array([0.6, 0.4]), (const, const))
    assert min_entropy(cq).p_guess == pytest.approx(0.6, abs=1e-9)


def test_multi_round_bounds_and_monotonicity(rng):
    cq = random_classical_cq(rng)
    report = monotonicity_check(cq, 3)
    assert report.ok
    values = [r.exact for r in report.rounds]
    assert all(b >= a - 1e-6 for a, b in zip(values, values[1:]))
    lo, up = multi_round_bounds(cq, 2)
    assert lo - 1e-6 <= values[1] <= up + 1e-6
    with pytest.raises(InvalidInput):
        monotonicity_check(cq, 0)


def test_dimension_cap_is_enforced(rng):
    blocks = tuple(state_block(random_density(rng, 4)) for _ in range(2))
    cq = ClassicalQuantumComb(np.array([0.5, 0.5]), blocks)
    with pytest.raises(CapExceeded):
        min_entropy(cq, SolverConfig(dim_cap=2))
