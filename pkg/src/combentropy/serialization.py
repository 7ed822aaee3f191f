"""JSON form of combs and classical-quantum combs.

A comb document holds its layout as ordered ``[name, dim]`` pairs, its
structure as a list of ``[inputs, outputs]`` slots, and either a dense matrix
(row-major, each entry an ``[re, im]`` pair) or, for classical combs, the
diagonal vector.  Floats are written with Python's shortest round-trip repr,
so a dump followed by a load reproduces every entry exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .combs import ClassicalComb, ClassicalQuantumComb, Comb, TimeStepStructure
from .errors import InvalidInput
from .operators import LabeledOperator, SpaceLayout

FORMAT_VERSION = 1


def _layout_to_json(layout: SpaceLayout) -> list:
    return [[f.name, int(f.dim)] for f in layout]


def _structure_to_json(structure: TimeStepStructure) -> list:
    return [[list(i), list(o)] for i, o in structure]


def _matrix_to_json(data: np.ndarray) -> list:
    data = np.asarray(data, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in data]


def _matrix_from_json(rows: Any, where: str) -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{where}: matrix entries must be [re, im] number pairs ({exc})") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInput(f"{where}: expected a square matrix of [re, im] pairs, got shape {arr.shape}")
    data = arr[..., 0] + 1j * arr[..., 1]
    if not np.any(arr[..., 1]):
        return arr[..., 0]
    return data


def comb_to_dict(comb: Comb | ClassicalComb) -> dict:
    if isinstance(comb, ClassicalComb):
        return {
            "kind": "classical_comb",
            "version": FORMAT_VERSION,
            "layout": _layout_to_json(comb.layout),
            "structure": _structure_to_json(comb.structure),
            "normalized": bool(comb.normalized),
            "diagonal": [float(v) for v in comb.diag],
        }
    if isinstance(comb, Comb):
        return {
            "kind": "comb",
            "version": FORMAT_VERSION,
            "layout": _layout_to_json(comb.layout),
            "structure": _structure_to_json(comb.structure),
            "normalized": bool(comb.normalized),
            "matrix": _matrix_to_json(comb.op.data),
        }
    raise InvalidInput(f"cannot serialize object of type {type(comb).__name__}")


def _require(doc: dict, key: str, where: str) -> Any:
    if key not in doc:
        raise InvalidInput(f"{where}: missing field {key!r}")
    return doc[key]


def _parse_layout(doc: dict, where: str) -> SpaceLayout:
    raw = _require(doc, "layout", where)
    try:
        return SpaceLayout((str(n), int(d)) for n, d in raw)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{where}.layout: expected [name, dim] pairs ({exc})") from None


def _parse_structure(doc: dict, where: str) -> TimeStepStructure:
    raw = _require(doc, "structure", where)
    try:
        return TimeStepStructure((tuple(map(str, i)), tuple(map(str, o))) for i, o in raw)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{where}.structure: expected [inputs, outputs] slots ({exc})") from None


def comb_from_dict(doc: dict, where: str = "comb") -> Comb | ClassicalComb:
    if not isinstance(doc, dict):
        raise InvalidInput(f"{where}: expected an object")
    layout = _parse_layout(doc, where)
    structure = _parse_structure(doc, where)
    normalized = bool(doc.get("normalized", True))
    kind = doc.get("kind", "classical_comb" if "diagonal" in doc else "comb")
    if kind == "classical_comb":
        diag = np.asarray(_require(doc, "diagonal", where), dtype=float)
        return ClassicalComb(layout, diag, structure, normalized)
    if kind == "comb":
        data = _matrix_from_json(_require(doc, "matrix", where), f"{where}.matrix")
        return Comb(LabeledOperator(layout, data), structure, normalized)
    raise InvalidInput(f"{where}: unknown kind {kind!r}")


def cq_to_dict(cq: ClassicalQuantumComb) -> dict:
    return {
        "kind": "classical_quantum_comb",
        "version": FORMAT_VERSION,
        "x_label": cq.x_label,
        "names": list(cq.names),
        "prior": [float(p) for p in cq.prior],
        "blocks": [comb_to_dict(b) for b in cq.blocks],
    }


def cq_from_dict(doc: dict, where: str = "comb") -> ClassicalQuantumComb:
    prior = np.asarray(_require(doc, "prior", where), dtype=float)
    blocks = tuple(comb_from_dict(b, f"{where}.blocks[{i}]") for i, b in enumerate(_require(doc, "blocks", where)))
    return ClassicalQuantumComb(prior, blocks, str(doc.get("x_label", "X")), tuple(doc.get("names", ())))


def to_dict(obj: Comb | ClassicalComb | ClassicalQuantumComb) -> dict:
    if isinstance(obj, ClassicalQuantumComb):
        return cq_to_dict(obj)
    return comb_to_dict(obj)


def from_dict(doc: dict, where: str = "comb") -> Comb | ClassicalComb | ClassicalQuantumComb:
    if isinstance(doc, dict) and doc.get("kind") == "classical_quantum_comb":
        return cq_from_dict(doc, where)
    return comb_from_dict(doc, where)


def dumps(obj, indent: int | None = None) -> str:
    return json.dumps(to_dict(obj), indent=indent)


def loads(text: str, where: str = "comb"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{where}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_dict(doc, where)


def save(obj, path: str | Path, indent: int | None = None) -> None:
    Path(path).write_text(dumps(obj, indent))


def load(path: str | Path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, str(path))


def max_roundtrip_error(obj) -> float:
    """Largest entry change after one dump and load."""
    back = loads(dumps(obj))

    def arrays(o):
        if isinstance(o, ClassicalQuantumComb):
            return [np.asarray(o.prior)] + [a for b in o.blocks for a in arrays(b)]
        if isinstance(o, ClassicalComb):
            return [o.diag]
        return [o.op.data]

    return max(float(np.max(np.abs(a - b))) if a.size else 0.0 for a, b in zip(arrays(obj), arrays(back)))
