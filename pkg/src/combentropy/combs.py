"""Combs, classical combs and classical-quantum combs.

A comb is stored together with a :class:`TimeStepStructure`, an ordered list
of ``(inputs, outputs)`` slots whose order is the causal order.  A slot with an
empty input or output tuple stands for a one-dimensional space.

Validation follows the partial-trace chain

    Tr_{out_k} D_k = I_{in_k} (x) D_{k-1},   D_n = D,

and reports the worst residual of each step together with the terminal
scalar ``D_0``.  Classical combs run the same chain on diagonal vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, InvalidInput
from .operators import (
    PSD_TOL,
    LabeledOperator,
    SpaceLayout,
    SubsystemLabel,
    check_dim_cap,
    hermiticity_residual,
    min_eigenvalue,
    partial_trace,
    permute_vector,
)

VALIDATION_TOL = 1e-9
CLASSICAL_TOL = 1e-12
DIM_CAP = 4096

Slot = tuple[tuple[str, ...], tuple[str, ...]]


class TimeStepStructure(tuple):
    """Causally ordered ``(inputs, outputs)`` slots."""

    def __new__(cls, steps: Iterable[tuple[Iterable[str], Iterable[str]]]):
        norm = tuple((tuple(i), tuple(o)) for i, o in steps)
        labels = [x for i, o in norm for x in i + o]
        if len(set(labels)) != len(labels):
            raise InvalidInput(f"a label appears in more than one slot: {labels}")
        return super().__new__(cls, norm)

    @property
    def labels(self) -> tuple[str, ...]:
        """All labels in causal order (in_1, out_1, in_2, ...)."""
        return tuple(x for i, o in self for x in i + o)

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(x for i, _ in self for x in i)

    @property
    def outputs(self) -> tuple[str, ...]:
        return tuple(x for _, o in self for x in o)

    def compact(self) -> "TimeStepStructure":
        """Drop slots that are trivial on both sides."""
        return TimeStepStructure(s for s in self if s[0] or s[1])

    def check_layout(self, layout: SpaceLayout) -> None:
        if sorted(self.labels) != sorted(layout.names):
            raise InvalidInput(
                f"structure labels {sorted(self.labels)} do not cover layout {sorted(layout.names)} exactly"
            )

    def input_dim(self, layout: SpaceLayout) -> int:
        return layout.dim_of(self.inputs)

    def relabel(self, mapping: dict[str, str]) -> "TimeStepStructure":
        return TimeStepStructure(
            (tuple(mapping.get(x, x) for x in i), tuple(mapping.get(x, x) for x in o)) for i, o in self
        )

    def __repr__(self) -> str:
        def fmt(names):
            return "(x)".join(names) if names else "C"

        return "TimeStepStructure(" + ", ".join(f"{fmt(i)}->{fmt(o)}" for i, o in self) + ")"


def dual_structure(structure: TimeStepStructure, final_output: str | None = None) -> TimeStepStructure:
    """Interleaved complementary ordering used by strategies.

    ``(in_1->out_1, ..., in_n->out_n)`` becomes
    ``(C->in_1, out_1->in_2, ..., out_n->X)`` where ``X`` is the optional
    ``final_output`` (otherwise the last slot ends in the trivial space).
    """
    steps = list(structure.compact())
    dual: list[Slot] = []
    prev_out: tuple[str, ...] = ()
    for ins, outs in steps:
        dual.append((prev_out, ins))
        prev_out = outs
    dual.append((prev_out, (final_output,) if final_output else ()))
    return TimeStepStructure(dual).compact()


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    psd: bool
    min_eigenvalue: float
    hermitian_residual: float
    residuals: tuple[float, ...]
    d0: float
    normalized: bool
    messages: tuple[str, ...] = ()

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "psd": self.psd,
            "min_eigenvalue": self.min_eigenvalue,
            "hermitian_residual": self.hermitian_residual,
            "residuals": list(self.residuals),
            "d0": self.d0,
            "normalized": self.normalized,
            "messages": list(self.messages),
        }


def _chain_dense(op: LabeledOperator, structure: TimeStepStructure):
    """Yield ``(step index, residual)`` and return D_0 for a dense operator."""
    residuals = []
    current = op.permute(structure.labels)
    for k in range(len(structure) - 1, -1, -1):
        ins, outs = structure[k]
        traced = partial_trace(current, outs)
        d_in = traced.layout.dim_of(ins)
        prev = partial_trace(traced, ins) * (1.0 / d_in)
        k_dim = prev.dim
        expected = np.kron(prev.data, np.eye(d_in))
        residuals.append(float(np.max(np.abs(traced.data - expected), initial=0.0)) if k_dim else 0.0)
        current = prev
    residuals.reverse()
    return residuals, float(np.real(current.data[0, 0]))


def validate_comb(
    op: LabeledOperator,
    structure: TimeStepStructure,
    tol: float = VALIDATION_TOL,
    normalized: bool | None = True,
    psd_tol: float = PSD_TOL,
) -> ValidationReport:
    """Check positivity and the partial-trace chain of a quantum comb.

    ``normalized=True`` demands ``D_0 = 1``; ``False`` or ``None`` accepts any
    positive ``D_0`` (the report's ``normalized`` flag says which case holds).
    """
    structure = TimeStepStructure(structure)
    structure.check_layout(op.layout)
    messages = []
    herm = hermiticity_residual(op)
    lam = min_eigenvalue(op)
    psd = herm <= tol and lam >= -psd_tol
    if not psd:
        messages.append(f"not PSD: min eigenvalue {lam:.3e}, hermiticity residual {herm:.3e}")
    residuals, d0 = _chain_dense(op, structure)
    for k, r in enumerate(residuals):
        if r > tol:
            messages.append(f"step {k + 1} ({structure[k]}): trace condition residual {r:.3e} > {tol:.1e}")
    is_norm = abs(d0 - 1.0) <= tol
    d0_ok = is_norm if normalized else d0 > tol
    if not d0_ok:
        messages.append(f"terminal scalar D_0 = {d0:.6g} violates the {'normalized' if normalized else 'positivity'} condition")
    valid = psd and all(r <= tol for r in residuals) and d0_ok
    return ValidationReport(valid, psd, lam, herm, tuple(residuals), d0, is_norm, tuple(messages))


@dataclass(frozen=True, eq=False)
class Comb:
    op: LabeledOperator
    structure: TimeStepStructure
    normalized: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "structure", TimeStepStructure(self.structure))
        self.structure.check_layout(self.op.layout)

    @property
    def layout(self) -> SpaceLayout:
        return self.op.layout

    @property
    def input_dim(self) -> int:
        return self.structure.input_dim(self.op.layout)

    def validate(self, tol: float = VALIDATION_TOL) -> ValidationReport:
        return validate_comb(self.op, self.structure, tol, self.normalized)

    def causal(self) -> "Comb":
        """Same comb with its layout permuted into causal order."""
        return Comb(self.op.permute(self.structure.labels), self.structure, self.normalized)

    def relabel(self, mapping: dict[str, str]) -> "Comb":
        return Comb(self.op.relabel(mapping), self.structure.relabel(mapping), self.normalized)


@dataclass(frozen=True, eq=False)
class ClassicalComb:
    """A comb diagonal in the computational basis of ``layout``.

    ``diag[idx]`` is ``f(a)`` for the joint basis string whose digits follow
    the order of ``layout``.
    """

    layout: SpaceLayout
    diag: np.ndarray
    structure: TimeStepStructure
    normalized: bool = True

    def __post_init__(self) -> None:
        layout = self.layout if isinstance(self.layout, SpaceLayout) else SpaceLayout(self.layout)
        diag = np.asarray(self.diag, dtype=float).reshape(-1)
        if diag.size != layout.total_dim:
            raise InvalidInput(f"diagonal length {diag.size} does not match layout dimension {layout.total_dim}")
        diag = diag.copy()
        diag.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "structure", TimeStepStructure(self.structure))
        self.structure.check_layout(layout)

    @property
    def input_dim(self) -> int:
        return self.structure.input_dim(self.layout)

    def causal_tensor(self) -> np.ndarray:
        """The diagonal reshaped as a tensor with axes in causal order."""
        perm = [self.layout.index(n) for n in self.structure.labels]
        dims = self.layout.dims
        vec = permute_vector(self.diag, dims, perm)
        return vec.reshape(tuple(dims[p] for p in perm)) if dims else vec.reshape(())

    def to_operator(self, cap: int = DIM_CAP) -> LabeledOperator:
        check_dim_cap(self.layout.total_dim, cap, "classical comb")
        return LabeledOperator(self.layout, np.diag(self.diag))

    def to_comb(self, cap: int = DIM_CAP) -> Comb:
        return Comb(self.to_operator(cap), self.structure, self.normalized)

    def validate(self, tol: float = CLASSICAL_TOL) -> ValidationReport:
        return validate_classical_comb(self, tol)


def validate_classical_comb(c: ClassicalComb, tol: float = CLASSICAL_TOL, normalized: bool | None = None) -> ValidationReport:
    """Check nonnegativity and the marginalization chain of a classical comb."""
    normalized = c.normalized if normalized is None else normalized
    messages = []
    low = float(c.diag.min(initial=0.0))
    nonneg = low >= -tol
    if not nonneg:
        messages.append(f"negative entry {low:.3e}")
    t = c.causal_tensor()
    layout = c.layout
    residuals = []
    axis = t.ndim
    for k in range(len(c.structure) - 1, -1, -1):
        ins, outs = c.structure[k]
        n_out, n_in = len(outs), len(ins)
        if n_out:
            t = t.sum(axis=tuple(range(axis - n_out, axis)))
        axis -= n_out
        d_in = layout.dim_of(ins)
        prev = t.sum(axis=tuple(range(axis - n_in, axis))) / d_in if n_in else t
        expanded = prev.reshape(prev.shape + (1,) * n_in) if n_in else prev
        residuals.append(float(np.max(np.abs(t - expanded), initial=0.0)))
        t = prev
        axis -= n_in
    residuals.reverse()
    d0 = float(t)
    for k, r in enumerate(residuals):
        if r > tol:
            messages.append(f"step {k + 1} ({c.structure[k]}): marginal residual {r:.3e} > {tol:.1e}")
    is_norm = abs(d0 - 1.0) <= tol
    d0_ok = is_norm if normalized else d0 > tol
    if not d0_ok:
        messages.append(f"terminal scalar f^(0) = {d0:.6g} violates the {'normalized' if normalized else 'positivity'} condition")
    valid = nonneg and d0_ok and all(r <= tol for r in residuals)
    return ValidationReport(valid, nonneg, low, 0.0, tuple(residuals), d0, is_norm, tuple(messages))


@dataclass(frozen=True, eq=False)
class ClassicalQuantumComb:
    """``D = sum_x P(x) |x><x| (x) sigma_x`` stored block-wise.

    ``blocks`` are all :class:`Comb` or all :class:`ClassicalComb`; they share
    one layout and structure.  ``names`` optionally tags each classical value.
    """

    prior: np.ndarray
    blocks: tuple
    x_label: str = "X"
    names: tuple = field(default=())

    def __post_init__(self) -> None:
        prior = np.asarray(self.prior, dtype=float).reshape(-1)
        blocks = tuple(self.blocks)
        if len(blocks) == 0:
            raise InvalidInput("a classical-quantum comb needs at least one block")
        if prior.size != len(blocks):
            raise InvalidInput(f"prior has {prior.size} entries but there are {len(blocks)} blocks")
        if prior.min() < 0 or abs(prior.sum() - 1.0) > 1e-12:
            raise InvalidInput(f"prior must be a probability vector (sum {prior.sum():.15g})")
        kinds = {type(b) for b in blocks}
        if len(kinds) != 1 or not kinds <= {Comb, ClassicalComb}:
            raise InvalidInput("blocks must all be Comb or all be ClassicalComb")
        first = blocks[0]
        for b in blocks[1:]:
            if tuple(b.layout) != tuple(first.layout) or tuple(b.structure) != tuple(first.structure):
                raise InvalidInput("all blocks must share one layout and one structure")
        if self.x_label in first.layout.names:
            raise InvalidInput(f"classical label {self.x_label!r} clashes with a block label")
        names = tuple(self.names) if self.names else tuple(str(i) for i in range(len(blocks)))
        if len(names) != len(blocks):
            raise InvalidInput("one name per block is required")
        prior.setflags(write=False)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "names", names)

    @property
    def classical(self) -> bool:
        return isinstance(self.blocks[0], ClassicalComb)

    @property
    def structure(self) -> TimeStepStructure:
        return self.blocks[0].structure

    @property
    def layout(self) -> SpaceLayout:
        return self.blocks[0].layout

    @property
    def block_dim(self) -> int:
        return self.layout.total_dim

    @property
    def input_dim(self) -> int:
        return self.structure.input_dim(self.layout)

    def __len__(self) -> int:
        return len(self.blocks)

    def validate_blocks(self, tol: float | None = None) -> list[ValidationReport]:
        if self.classical:
            return [b.validate(CLASSICAL_TOL if tol is None else tol) for b in self.blocks]
        return [b.validate(VALIDATION_TOL if tol is None else tol) for b in self.blocks]

    def both_orderings(self) -> tuple[TimeStepStructure, TimeStepStructure]:
        """Structures with X as the last output and with X as the first output."""
        x = self.x_label
        last = TimeStepStructure(tuple(self.structure) + (((), (x,)),))
        first = TimeStepStructure((((), (x,)),) + tuple(self.structure))
        return last, first

    def mixture(self) -> LabeledOperator:
        """``Tr_X D = sum_x P(x) sigma_x``."""
        ops = [b.op if isinstance(b, Comb) else b.to_operator() for b in self.blocks]
        acc = sum(p * o.data for p, o in zip(self.prior, ops))
        return LabeledOperator(ops[0].layout, acc)


def assemble(cq: ClassicalQuantumComb, cap: int = DIM_CAP) -> LabeledOperator:
    """Block-diagonal operator with the classical factor leftmost."""
    k = len(cq)
    total = k * cq.block_dim
    check_dim_cap(total, cap, "assembled classical-quantum comb")
    ops = [b.op if isinstance(b, Comb) else b.to_operator(cap) for b in cq.blocks]
    dtype = complex if any(np.iscomplexobj(o.data) for o in ops) else float
    d = cq.block_dim
    data = np.zeros((total, total), dtype=dtype)
    for x, (p, o) in enumerate(zip(cq.prior, ops)):
        data[x * d:(x + 1) * d, x * d:(x + 1) * d] = p * o.data
    layout = SpaceLayout((SubsystemLabel(cq.x_label, k),) + tuple(cq.layout))
    return LabeledOperator(layout, data)


def validate_both_orderings(cq: ClassicalQuantumComb, tol: float = VALIDATION_TOL,
                            cap: int = DIM_CAP) -> tuple[ValidationReport, ValidationReport]:
    """Validate the assembled operator with X placed last and first in causal order."""
    d = assemble(cq, cap)
    last, first = cq.both_orderings()
    return validate_comb(d, last, tol), validate_comb(d, first, tol)


def round_label(name: str, j: int) -> str:
    return f"{name}^{j}"


def multi_round(cq: ClassicalQuantumComb, m: int, cap: int = DIM_CAP) -> ClassicalQuantumComb:
    """``D^(m) = sum_x P(x)|x><x| (x) sigma_x^{(x) m}`` with labels tagged by round."""
    if int(m) < 1:
        raise InvalidInput("number of rounds must be at least 1")
    m = int(m)
    dim = cq.block_dim ** m
    if dim > cap:
        raise CapExceeded(f"{m}-round block dimension {dim} exceeds the cap {cap}")
    mappings = [{n: round_label(n, j) for n in cq.layout.names} for j in range(1, m + 1)]
    structure = TimeStepStructure(s for mp in mappings for s in cq.structure.relabel(mp))
    layout = SpaceLayout(
        SubsystemLabel(mp[f.name], f.dim) for mp in mappings for f in cq.layout
    )
    blocks = []
    for b in cq.blocks:
        if isinstance(b, ClassicalComb):
            vec = np.ones(1)
            for _ in range(m):
                vec = np.kron(vec, b.diag)
            blocks.append(ClassicalComb(layout, vec, structure, b.normalized))
        else:
            mat = np.ones((1, 1))
            for _ in range(m):
                mat = np.kron(mat, b.op.data)
            blocks.append(Comb(LabeledOperator(layout, mat), structure, b.normalized))
    return ClassicalQuantumComb(cq.prior, tuple(blocks), cq.x_label, cq.names)


def born_probability(d: LabeledOperator, e: LabeledOperator) -> float:
    """``Tr[D E^T]`` for operators on the same labels."""
    e = e.permute(d.names)
    return float(np.real(np.sum(d.data * e.data)))


def strategy_probability(cq: ClassicalQuantumComb, effects: Sequence[LabeledOperator]) -> float:
    """``sum_x P(x) Tr[sigma_x E_x^T]`` for a strategy given by its X-blocks."""
    total = 0.0
    for p, b, e in zip(cq.prior, cq.blocks, effects):
        op = b.op if isinstance(b, Comb) else b.to_operator()
        total += p * born_probability(op, e)
    return total


def strategy_operator(effects: Sequence[LabeledOperator], x_label: str = "X") -> LabeledOperator:
    """``E = sum_x |x><x| (x) E_x`` with X leftmost."""
    k = len(effects)
    d = effects[0].dim
    names = effects[0].names
    data = np.zeros((k * d, k * d), dtype=complex)
    for x, e in enumerate(effects):
        data[x * d:(x + 1) * d, x * d:(x + 1) * d] = e.permute(names).data
    layout = SpaceLayout((SubsystemLabel(x_label, k),) + tuple(effects[0].layout))
    return LabeledOperator(layout, data)


def comb_dims(structure: TimeStepStructure, layout: SpaceLayout) -> list[tuple[int, int]]:
    """``(d_in, d_out)`` per slot."""
    return [(layout.dim_of(i), layout.dim_of(o)) for i, o in structure]
