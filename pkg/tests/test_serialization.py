import json

import numpy as np
import pytest

from combentropy import serialization
from combentropy.bqc import build_D_client, minimal_instance
from combentropy.errors import InvalidInput
from combentropy.gflow import four_qubit_graph
from combentropy.mbqc import build_D_calibr, build_D_gflow, build_D_mp, catalogue_subset


@pytest.mark.parametrize("builder", [
    lambda: build_D_client(minimal_instance(4)),
    lambda: build_D_gflow(four_qubit_graph(), catalogue_subset([1, 2, 4, 5])),
    build_D_mp,
    lambda: build_D_calibr(4),
], ids=["client", "xy-family", "planes", "calibration"])
def test_builtin_combs_round_trip(builder, tmp_path):
    cq = builder()
    assert serialization.max_roundtrip_error(cq) <= 1e-15
    path = tmp_path / "comb.json"
    serialization.save(cq, path)
    back = serialization.load(path)
    assert back.names == cq.names and np.array_equal(back.prior, cq.prior)
    assert back.structure == cq.structure


def test_complex_entries_survive(rng):
    cq = build_D_mp()
    doc = serialization.to_dict(cq)
    assert doc["kind"] == "classical_quantum_comb"
    assert doc["blocks"][0]["kind"] == "comb"
    back = serialization.from_dict(json.loads(json.dumps(doc)))
    for a, b in zip(cq.blocks, back.blocks):
        assert np.array_equal(a.op.data, b.op.data)


@pytest.mark.parametrize("text, fragment", [
    ("{not json", "invalid JSON"),
    ('{"kind": "comb", "structure": []}', "layout"),
    ('{"kind": "comb", "layout": [["A", 2]], "structure": [[[], ["A"]]], "matrix": [[1, 2]]}', "matrix"),
    ('{"kind": "widget", "layout": [], "structure": []}', "unknown kind"),
])
def test_malformed_documents_are_rejected(text, fragment):
    with pytest.raises(InvalidInput, match=fragment):
        serialization.loads(text)


def test_missing_file():
    with pytest.raises(InvalidInput, match="cannot read"):
        serialization.load("/nonexistent/comb.json")
