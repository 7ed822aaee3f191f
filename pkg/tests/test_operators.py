import numpy as np
import pytest

from combentropy.errors import InvalidInput
from combentropy.operators import (
    LabeledOperator,
    NotHermitian,
    SpaceLayout,
    choi_from_kraus,
    identity,
    is_psd,
    kron,
    link_product,
    partial_trace,
    partial_transpose,
    unnormalized_max_entangled,
)

from conftest import random_channel_kraus, random_density, random_unitary


def op(names_dims, data):
    return LabeledOperator(SpaceLayout(names_dims), data)


def test_kron_matches_numpy_and_rejects_duplicate_labels(rng):
    a = random_density(rng, 2)
    b = random_density(rng, 3)
    ab = kron(op([("A", 2)], a), op([("B", 3)], b))
    assert ab.names == ("A", "B")
    assert np.allclose(ab.data, np.kron(a, b))
    with pytest.raises(InvalidInput):
        kron(op([("A", 2)], a), op([("A", 2)], a))


def test_partial_trace_of_product_state(rng):
    a, b, c = random_density(rng, 2), random_density(rng, 3), random_density(rng, 2)
    abc = kron(kron(op([("A", 2)], a), op([("B", 3)], b)), op([("C", 2)], c))
    assert np.allclose(partial_trace(abc, ["B"]).permute(["A", "C"]).data, np.kron(a, c))
    assert np.allclose(partial_trace(abc, ["A", "C"]).data, b)
    assert np.isclose(partial_trace(abc, ["A", "B", "C"]).data[0, 0], 1.0)


def test_partial_trace_matches_explicit_sum(rng):
    rho = random_density(rng, 6)
    full = op([("A", 2), ("B", 3)], rho)
    expected = sum(rho.reshape(2, 3, 2, 3)[:, j, :, j] for j in range(3))
    assert np.allclose(partial_trace(full, ["B"]).data, expected)


def test_partial_transpose_is_an_involution_and_detects_entanglement():
    bell = unnormalized_max_entangled(("A", 2), ("B", 2)) * 0.5
    pt = partial_transpose(bell, ["B"])
    assert np.allclose(partial_transpose(pt, ["B"]).data, bell.data)
    assert np.linalg.eigvalsh(pt.data).min() == pytest.approx(-0.5)
    assert np.allclose(partial_transpose(bell, ["A", "B"]).data, bell.data.T)


def test_link_product_applies_a_channel(rng):
    kraus = random_channel_kraus(rng, 2, 2)
    choi = choi_from_kraus(kraus, ("B", 2), ("A", 2))
    rho = random_density(rng, 2)
    out = link_product(choi, op([("A", 2)], rho))
    expected = sum(k @ rho @ k.conj().T for k in kraus)
    assert out.names == ("B",)
    assert np.allclose(out.data, expected)


def test_link_product_composes_channels(rng):
    k1 = random_channel_kraus(rng, 2, 2)
    k2 = random_channel_kraus(rng, 2, 2)
    c1 = choi_from_kraus(k1, ("B", 2), ("A", 2))
    c2 = choi_from_kraus(k2, ("C", 2), ("B", 2))
    composed = link_product(c2, c1).permute(["C", "A"])
    direct = choi_from_kraus([b @ a for a in k1 for b in k2], ("C", 2), ("A", 2))
    assert np.allclose(composed.data, direct.data)


def test_link_product_with_identity_channel_and_disjoint_labels(rng):
    u = random_unitary(rng, 2)
    rho = op([("A", 2)], random_density(rng, 2))
    ident = unnormalized_max_entangled(("B", 2), ("A", 2))
    assert np.allclose(link_product(ident, rho).data, rho.data)
    disjoint = link_product(op([("X", 2)], u @ u.conj().T), rho)
    assert disjoint.names == ("X", "A")
    with pytest.raises(InvalidInput):
        link_product(op([("A", 3)], np.eye(3)), rho)


def test_is_psd_and_hermiticity_errors():
    assert is_psd(identity([("A", 2)]))
    assert not is_psd(op([("A", 2)], np.diag([1.0, -0.1])))
    with pytest.raises(NotHermitian):
        is_psd(op([("A", 2)], np.array([[0, 1], [0, 0]])))


def test_permute_and_layout_checks(rng):
    a, b = random_density(rng, 2), random_density(rng, 3)
    ab = kron(op([("A", 2)], a), op([("B", 3)], b))
    ba = ab.permute(["B", "A"])
    assert np.allclose(ba.data, np.kron(b, a))
    with pytest.raises(InvalidInput):
        ab.permute(["A", "C"])
    with pytest.raises(InvalidInput):
        op([("A", 2)], np.eye(3))
    with pytest.raises(InvalidInput):
        SpaceLayout([("A", 2), ("A", 3)])
