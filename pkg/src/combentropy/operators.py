"""Dense operators over labelled tensor-factor spaces.

Every state, Choi operator, comb and projector in the package is a
:class:`LabeledOperator`: a square complex matrix together with an ordered
tuple of named subsystems.  The factor order is the Kronecker order, so the
leftmost factor indexes the most significant block of rows and columns.

Choi operators use the output-first convention

    Choi(E) = sum_ij E(|i><j|) (x) |i><j|,

so that ``link_product(choi, rho)`` returns ``E(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, InvalidInput

HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-8


@dataclass(frozen=True)
class SubsystemLabel:
    name: str
    dim: int

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise InvalidInput("subsystem names must be non-empty strings")
        if int(self.dim) < 1:
            raise InvalidInput(f"subsystem {self.name!r} has dimension {self.dim} < 1")
        object.__setattr__(self, "dim", int(self.dim))


class SpaceLayout(tuple):
    """Ordered tuple of :class:`SubsystemLabel` with unique names."""

    def __new__(cls, factors: Iterable[SubsystemLabel | tuple[str, int]] = ()):
        items = tuple(f if isinstance(f, SubsystemLabel) else SubsystemLabel(*f) for f in factors)
        names = [f.name for f in items]
        if len(set(names)) != len(names):
            raise InvalidInput(f"duplicate subsystem names in layout {names}")
        return super().__new__(cls, items)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self else 1

    def dim_of(self, names: Iterable[str]) -> int:
        lookup = dict(zip(self.names, self.dims))
        out = 1
        for n in names:
            out *= lookup[n]
        return out

    def index(self, name: str) -> int:  # type: ignore[override]
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInput(f"unknown subsystem label {name!r}; layout has {self.names}") from None

    def subset(self, names: Iterable[str]) -> "SpaceLayout":
        return SpaceLayout(self[self.index(n)] for n in names)

    def without(self, names: Iterable[str]) -> "SpaceLayout":
        drop = set(names)
        return SpaceLayout(f for f in self if f.name not in drop)

    def __repr__(self) -> str:
        inner = ", ".join(f"{f.name}:{f.dim}" for f in self)
        return f"SpaceLayout({inner})"


def as_layout(layout: SpaceLayout | Sequence[SubsystemLabel | tuple[str, int]]) -> SpaceLayout:
    return layout if isinstance(layout, SpaceLayout) else SpaceLayout(layout)


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """Square matrix acting on the tensor product described by ``layout``."""

    layout: SpaceLayout
    data: np.ndarray

    def __post_init__(self) -> None:
        layout = as_layout(self.layout)
        data = np.asarray(self.data)
        if not np.iscomplexobj(data):
            data = data.astype(np.float64)
        d = layout.total_dim
        if data.shape != (d, d):
            raise InvalidInput(f"matrix shape {data.shape} does not match layout {layout} (dim {d})")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "data", data)

    # -- convenience -------------------------------------------------------
    @property
    def names(self) -> tuple[str, ...]:
        return self.layout.names

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def is_real(self, tol: float = 0.0) -> bool:
        return not np.iscomplexobj(self.data) or float(np.max(np.abs(self.data.imag), initial=0.0)) <= tol

    def __add__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = other.permute(self.names)
        return LabeledOperator(self.layout, self.data + other.data)

    def __sub__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = other.permute(self.names)
        return LabeledOperator(self.layout, self.data - other.data)

    def __mul__(self, scalar: complex) -> "LabeledOperator":
        return LabeledOperator(self.layout, self.data * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = other.permute(self.names)
        return LabeledOperator(self.layout, self.data @ other.data)

    def dagger(self) -> "LabeledOperator":
        return LabeledOperator(self.layout, self.data.conj().T)

    def relabel(self, mapping: dict[str, str]) -> "LabeledOperator":
        layout = SpaceLayout(SubsystemLabel(mapping.get(f.name, f.name), f.dim) for f in self.layout)
        return LabeledOperator(layout, self.data)

    def permute(self, names: Sequence[str]) -> "LabeledOperator":
        """Reorder tensor factors so that the layout follows ``names``."""
        names = tuple(names)
        if names == self.names:
            return self
        if sorted(names) != sorted(self.names):
            raise InvalidInput(f"cannot permute {self.names} into {names}")
        perm = [self.layout.index(n) for n in names]
        return LabeledOperator(self.layout.subset(names), permute_matrix(self.data, self.dims, perm))

    def allclose(self, other: "LabeledOperator", atol: float = 1e-10) -> bool:
        if sorted(self.names) != sorted(other.names):
            return False
        return bool(np.allclose(self.data, other.permute(self.names).data, atol=atol, rtol=0.0))

    def max_abs_diff(self, other: "LabeledOperator") -> float:
        return float(np.max(np.abs(self.data - other.permute(self.names).data), initial=0.0))


# -- raw tensor helpers --------------------------------------------------------

def permute_matrix(data: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Permute the tensor factors of a square matrix; new factor k is old ``perm[k]``."""
    n = len(dims)
    if n <= 1 or list(perm) == list(range(n)):
        return np.array(data)
    t = np.asarray(data).reshape(tuple(dims) * 2)
    axes = list(perm) + [p + n for p in perm]
    d = int(np.prod(dims))
    return t.transpose(axes).reshape(d, d)


def permute_vector(vec: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    if len(dims) <= 1:
        return np.array(vec)
    return np.asarray(vec).reshape(tuple(dims)).transpose(list(perm)).reshape(-1)


def _split(layout: SpaceLayout, names: Iterable[str]) -> tuple[list[str], list[str]]:
    chosen = set(names)
    for n in chosen:
        layout.index(n)
    keep = [n for n in layout.names if n not in chosen]
    gone = [n for n in layout.names if n in chosen]
    return keep, gone


# -- public operations ----------------------------------------------------------

def operator(layout: SpaceLayout | Sequence[tuple[str, int]], data: np.ndarray) -> LabeledOperator:
    return LabeledOperator(as_layout(layout), np.asarray(data))


def identity(layout: SpaceLayout | Sequence[tuple[str, int]]) -> LabeledOperator:
    layout = as_layout(layout)
    return LabeledOperator(layout, np.eye(layout.total_dim))


def scalar(value: complex) -> LabeledOperator:
    return LabeledOperator(SpaceLayout(), np.array([[value]]))


def kron(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    clash = set(a.names) & set(b.names)
    if clash:
        raise InvalidInput(f"kron: duplicate subsystem labels {sorted(clash)}")
    return LabeledOperator(SpaceLayout(tuple(a.layout) + tuple(b.layout)), np.kron(a.data, b.data))


def kron_all(ops: Iterable[LabeledOperator]) -> LabeledOperator:
    out = scalar(1.0)
    for op in ops:
        out = kron(out, op)
    return out


def partial_trace(op: LabeledOperator, over: Iterable[str]) -> LabeledOperator:
    keep, gone = _split(op.layout, over)
    if not gone:
        return op
    arranged = op.permute(keep + gone)
    k = op.layout.dim_of(keep)
    t = op.layout.dim_of(gone)
    reduced = np.einsum("itjt->ij", arranged.data.reshape(k, t, k, t))
    return LabeledOperator(op.layout.subset(keep), reduced)


def partial_transpose(op: LabeledOperator, over: Iterable[str]) -> LabeledOperator:
    _, gone = _split(op.layout, over)
    if not gone:
        return op
    n = len(op.dims)
    t = op.data.reshape(op.dims * 2)
    axes = list(range(2 * n))
    for name in gone:
        i = op.layout.index(name)
        axes[i], axes[i + n] = axes[i + n], axes[i]
    return LabeledOperator(op.layout, t.transpose(axes).reshape(op.dim, op.dim))


def link_product(m: LabeledOperator, n: LabeledOperator) -> LabeledOperator:
    """``M * N = Tr_B[(M^{T_B} (x) I_C)(I_A (x) N)]`` where B are the shared labels.

    The result lives on the labels of ``m`` that are not shared, followed by
    the unshared labels of ``n``.
    """
    shared = [x for x in m.names if x in set(n.names)]
    for s in shared:
        if m.layout.dim_of([s]) != n.layout.dim_of([s]):
            raise InvalidInput(f"link product: label {s!r} has dims {m.layout.dim_of([s])} and {n.layout.dim_of([s])}")
    a_names = [x for x in m.names if x not in shared]
    c_names = [x for x in n.names if x not in shared]
    if not shared:
        return kron(m, n)
    da = m.layout.dim_of(a_names)
    db = m.layout.dim_of(shared)
    dc = n.layout.dim_of(c_names)
    m4 = m.permute(a_names + shared).data.reshape(da, db, da, db)
    n4 = n.permute(shared + c_names).data.reshape(db, dc, db, dc)
    out = np.einsum("aubv,ucvd->acbd", m4, n4, optimize=True).reshape(da * dc, da * dc)
    layout = SpaceLayout(tuple(m.layout.subset(a_names)) + tuple(n.layout.subset(c_names)))
    return LabeledOperator(layout, out)


def hermiticity_residual(op: LabeledOperator) -> float:
    return float(np.max(np.abs(op.data - op.data.conj().T), initial=0.0))


def is_hermitian(op: LabeledOperator, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_residual(op) <= tol


def min_eigenvalue(op: LabeledOperator) -> float:
    if op.dim == 0:
        return 0.0
    herm = 0.5 * (op.data + op.data.conj().T)
    return float(np.linalg.eigvalsh(herm)[0])


def is_psd(op: LabeledOperator, tol: float = PSD_TOL, herm_tol: float = HERMITIAN_TOL) -> bool:
    """True iff ``op`` is Hermitian (within ``herm_tol``) with smallest eigenvalue >= -tol.

    A non-Hermitian input raises :class:`NotHermitian` rather than returning
    False, so callers can tell the two failure modes apart.
    """
    res = hermiticity_residual(op)
    if res > herm_tol:
        raise NotHermitian(f"operator is not Hermitian (residual {res:.3e} > {herm_tol:.1e})")
    return min_eigenvalue(op) >= -tol


class NotHermitian(InvalidInput):
    """Raised by :func:`is_psd` for inputs that fail the Hermiticity check."""


# -- common constructors ----------------------------------------------------------

def ket_bra(ket: np.ndarray, bra: np.ndarray | None = None) -> np.ndarray:
    ket = np.asarray(ket).reshape(-1)
    bra = ket if bra is None else np.asarray(bra).reshape(-1)
    return np.outer(ket, bra.conj())


def basis_projector(dim: int, index: int) -> np.ndarray:
    p = np.zeros((dim, dim))
    p[index, index] = 1.0
    return p


def unnormalized_max_entangled(a: SubsystemLabel | tuple[str, int], b: SubsystemLabel | tuple[str, int]) -> LabeledOperator:
    """``|Phi+><Phi+|`` with ``|Phi+> = sum_i |ii>``; the Choi operator of the identity channel."""
    layout = SpaceLayout([a, b])
    d = layout.dims[0]
    if layout.dims[1] != d:
        raise InvalidInput("maximally entangled operator needs equal dimensions")
    vec = np.eye(d).reshape(-1)
    return LabeledOperator(layout, np.outer(vec, vec))


def choi_from_kraus(kraus: Sequence[np.ndarray], out_label: tuple[str, int] | SubsystemLabel,
                    in_label: tuple[str, int] | SubsystemLabel) -> LabeledOperator:
    """Choi operator on (out, in) of the map ``rho -> sum_k K rho K^dagger``."""
    layout = SpaceLayout([out_label, in_label])
    dout, din = layout.dims
    acc = np.zeros((dout * din, dout * din), dtype=complex)
    for k in kraus:
        k = np.asarray(k)
        if k.shape != (dout, din):
            raise InvalidInput(f"Kraus operator shape {k.shape} != ({dout}, {din})")
        vec = k.reshape(-1)  # row-major: index (o, i) -> K[o, i]
        acc += np.outer(vec, vec.conj())
    return LabeledOperator(layout, acc)


def unitary_choi(u: np.ndarray, out_label, in_label) -> LabeledOperator:
    return choi_from_kraus([u], out_label, in_label)


def check_dim_cap(dim: int, cap: int, what: str = "operator") -> None:
    if dim > cap:
        raise CapExceeded(f"{what} dimension {dim} exceeds the cap {cap}")
