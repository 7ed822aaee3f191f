"""Graph states, plane measurements, gflow corrections and the MBQC combs.

Label conventions used throughout:

* ``A'v``: qubit ``v`` entering the device (where the graph state is fed in);
* ``Av``: qubit ``v`` leaving the device after its correction;
* ``Cv``: the classical outcome of measuring qubit ``v``, fed back into the
  device.  Only measured (non-output) vertices carry a ``Cv``.

Measurement projectors per plane (``alpha`` measured as in the table):

* XY: ``(|0> + e^{-i alpha}|1>)/sqrt 2``;
* XZ: ``cos(alpha/2)|0> + sin(alpha/2)|1>``, Bloch vector ``(sin a, 0, cos a)``;
* YZ: ``cos(alpha/2)|0> + i sin(alpha/2)|1>``, Bloch vector ``(0, -sin a, cos a)``.

The ``-`` projector is the orthogonal complement.  With these choices
``Z``, ``XZ`` and ``X`` map the ``+`` projector of the XY, XZ and YZ planes
respectively onto the ``-`` projector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .combs import ClassicalQuantumComb, Comb, TimeStepStructure
from .errors import InvalidInput
from .gflow import (
    PLANES,
    Gflow,
    OpenGraph,
    common_total_order,
    correction_sets,
    enumerate_gflows,
    four_qubit_catalogue,
    four_qubit_graph,
    line_graph,
    make_gflow,
    orders_compatible,
)
from .operators import (
    LabeledOperator,
    SpaceLayout,
    SubsystemLabel,
    check_dim_cap,
    identity,
    kron,
    link_product,
    partial_trace,
)
from .combs import DIM_CAP, validate_comb

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

# single-site products: (a, b) -> (phase, letter) with a.b = phase * letter
_PAULI_TABLE: dict[tuple[str, str], tuple[complex, str]] = {}
for _a, _b in itertools.product("IXYZ", repeat=2):
    _prod = PAULI[_a] @ PAULI[_b]
    for _c in "IXYZ":
        _ph = np.trace(PAULI[_c].conj().T @ _prod) / 2
        if abs(abs(_ph) - 1) < 1e-12:
            _PAULI_TABLE[(_a, _b)] = (complex(np.round(_ph.real) + 1j * np.round(_ph.imag)), _c)


def a_label(v: int) -> str:
    return f"A{v}"


def c_label(v: int) -> str:
    return f"C{v}"


def in_label(v: int) -> str:
    return f"A'{v}"


# -- Pauli strings -------------------------------------------------------------

@dataclass(frozen=True)
class PauliString:
    """``phase * prod_v letters[v]`` with phase in ``{1, -1, 1j, -1j}``."""

    letters: Mapping[int, str]
    phase: complex = 1.0

    def __post_init__(self) -> None:
        letters = {int(v): str(p).upper() for v, p in dict(self.letters).items() if str(p).upper() != "I"}
        if any(p not in "XYZ" for p in letters.values()):
            raise InvalidInput(f"unknown Pauli letters in {letters}")
        ph = complex(self.phase)
        if min(abs(ph - u) for u in (1, -1, 1j, -1j)) > 1e-12:
            raise InvalidInput(f"Pauli phase {ph} is not a fourth root of unity")
        object.__setattr__(self, "letters", dict(sorted(letters.items())))
        object.__setattr__(self, "phase", ph)

    def __mul__(self, other: "PauliString") -> "PauliString":
        phase = self.phase * other.phase
        out = dict(self.letters)
        for v, b in other.letters.items():
            a = out.get(v, "I")
            ph, c = _PAULI_TABLE[(a, b)]
            phase *= ph
            out[v] = c
        return PauliString(out, phase)

    def adjoint(self) -> "PauliString":
        return PauliString(self.letters, np.conj(self.phase))

    def transpose(self) -> "PauliString":
        sign = (-1) ** sum(1 for p in self.letters.values() if p == "Y")
        return PauliString(self.letters, self.phase * sign)

    def commutes_with(self, other: "PauliString") -> bool:
        anti = sum(
            1 for v in set(self.letters) & set(other.letters) if self.letters[v] != other.letters[v]
        )
        return anti % 2 == 0

    def matrix(self, vertices: Sequence[int]) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for v in vertices:
            out = np.kron(out, PAULI[self.letters.get(v, "I")])
        return self.phase * out

    def operator(self, vertices: Sequence[int], label=a_label) -> LabeledOperator:
        return LabeledOperator(SpaceLayout((label(v), 2) for v in vertices), self.matrix(vertices))

    def __repr__(self) -> str:
        ph = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[complex(self.phase)]
        body = " ".join(f"{p}{v}" for v, p in self.letters.items()) or "I"
        return f"{ph}{body}"


def stabilizer(graph: OpenGraph, v: int) -> PauliString:
    """``K_v = X_v Z_{N(v)}``."""
    return PauliString({v: "X", **{w: "Z" for w in graph.neighbors(v)}})


def stabilizer_product(graph: OpenGraph, vertices: Iterable[int]) -> PauliString:
    """``K_S`` as the ordered product of generators over ``S`` (increasing order)."""
    out = PauliString({})
    for v in sorted(vertices):
        out = out * stabilizer(graph, v)
    return out


# -- graph states ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GraphState:
    graph: OpenGraph
    state: LabeledOperator
    vector: np.ndarray = field(repr=False)

    def stabilizer_residual(self) -> float:
        verts = self.graph.vertices
        worst = 0.0
        rho = self.state.data
        for v in verts:
            k = stabilizer(self.graph, v).matrix(verts)
            worst = max(worst, float(np.max(np.abs(k @ rho @ k.conj().T - rho))))
        return worst

    def marginal_residual(self) -> float:
        worst = 0.0
        for v in self.graph.vertices:
            others = [n for n in self.state.names if n != self.state.names[v - 1]]
            red = partial_trace(self.state, others).data
            worst = max(worst, float(np.max(np.abs(red - I2 / 2))))
        return worst


def graph_state(graph: OpenGraph, label=in_label, cap: int = DIM_CAP) -> GraphState:
    """``|G> = prod_{(i,j) in E} CZ_ij |+>^n`` as a density operator."""
    n = graph.n
    check_dim_cap(2**n, cap, "graph state")
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1  # column k is vertex k+1
    sign = np.zeros(2**n, dtype=int)
    for u, v in graph.sorted_edges():
        sign ^= bits[:, u - 1] & bits[:, v - 1]
    vec = ((-1.0) ** sign) / np.sqrt(2**n)
    layout = SpaceLayout((label(v), 2) for v in graph.vertices)
    return GraphState(graph, LabeledOperator(layout, np.outer(vec, vec)), vec)


# -- plane measurements ------------------------------------------------------------

def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@dataclass(frozen=True)
class PlaneMeasurement:
    plane: str
    angle: float

    def __post_init__(self) -> None:
        plane = str(self.plane).upper()
        if plane not in PLANES:
            raise InvalidInput(f"unknown plane {self.plane!r}")
        object.__setattr__(self, "plane", plane)
        object.__setattr__(self, "angle", float(self.angle) % (2 * np.pi))

    def kets(self) -> tuple[np.ndarray, np.ndarray]:
        a = self.angle
        if self.plane == "XY":
            plus = np.array([1, np.exp(-1j * a)]) / np.sqrt(2)
            minus = np.array([1, -np.exp(-1j * a)]) / np.sqrt(2)
        elif self.plane == "XZ":
            plus = np.array([np.cos(a / 2), np.sin(a / 2)], dtype=complex)
            minus = np.array([np.sin(a / 2), -np.cos(a / 2)], dtype=complex)
        else:
            plus = np.array([np.cos(a / 2), 1j * np.sin(a / 2)])
            minus = np.array([1j * np.sin(a / 2), np.cos(a / 2)])
        return plus, minus

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        plus, minus = self.kets()
        return np.outer(plus, plus.conj()), np.outer(minus, minus.conj())

    def symmetry(self) -> np.ndarray:
        """Pauli mapping the ``+`` projector to the ``-`` projector by conjugation."""
        return {"XY": Z, "XZ": X @ Z, "YZ": X}[self.plane]


def measurement_channel(m: PlaneMeasurement, in_name: str, out_name: str) -> LabeledOperator:
    """Choi operator on ``(out, in)`` of the qubit-to-bit measurement map.

    ``|0><0| (x) P_+^T + |1><1| (x) P_-^T``.
    """
    p_plus, p_minus = m.projectors()
    data = np.kron(np.diag([1.0, 0.0]), p_plus.T) + np.kron(np.diag([0.0, 1.0]), p_minus.T)
    return LabeledOperator(SpaceLayout([(out_name, 2), (in_name, 2)]), data)


# -- corrections ----------------------------------------------------------------------

def correction_exponents(cs, v: int, c: Mapping[int, int]) -> tuple[int, int]:
    """``(x, z)`` exponents of ``U_corr(c),v = X^x Z^z``."""
    x = sum(c.get(j, 0) for j in cs.x_sets[v]) % 2
    z = sum(c.get(j, 0) for j in cs.z_sets[v]) % 2
    return x, z


def local_correction(x: int, z: int, x_frame: np.ndarray | None = None) -> np.ndarray:
    """``X^x Z^z``; when ``x_frame`` is given the X factor is conjugated by it."""
    xm = np.linalg.matrix_power(X, x)
    if x_frame is not None:
        xm = x_frame @ xm @ x_frame.conj().T
    return xm @ np.linalg.matrix_power(Z, z)


def correction_unitary(g: Gflow, graph: OpenGraph, c: Mapping[int, int], x_frame: np.ndarray | None = None) -> np.ndarray:
    """``U_corr(c) = (x)_v X^{...} Z^{...}`` over vertices in increasing order."""
    cs = correction_sets(g, graph)
    out = np.ones((1, 1), dtype=complex)
    for v in graph.vertices:
        out = np.kron(out, local_correction(*correction_exponents(cs, v, c), x_frame))
    return out


def outcome_strings(measured: Sequence[int]) -> list[dict[int, int]]:
    return [dict(zip(measured, bits)) for bits in itertools.product((0, 1), repeat=len(measured))]


def _slot_order(g: Gflow | None, graph: OpenGraph, total_order: Sequence[int] | None) -> list[int]:
    """Measured vertices in the order they appear in ``total_order``."""
    if total_order is None:
        total_order = common_total_order([g], graph) if g is not None else list(graph.vertices)
    total_order = [int(v) for v in total_order]
    if sorted(total_order) != list(graph.vertices):
        raise InvalidInput("total order must list every vertex exactly once")
    return [v for v in total_order if v not in graph.outputs]


def _check_order(g: Gflow, total_order: Sequence[int]) -> None:
    rank = {v: i for i, v in enumerate(total_order)}
    bad = [(a, b) for a, b in g.order if rank[a] >= rank[b]]
    if bad:
        raise InvalidInput(f"total order {list(total_order)} does not extend the order of gflow {g.describe()}: {sorted(bad)}")


def device_structure(graph: OpenGraph, measured_order: Sequence[int], with_inputs: bool) -> TimeStepStructure:
    """``A' -> A_first, C_first -> A_second, ..., C_last -> A_O`` (``C -> ...`` without inputs)."""
    outputs = tuple(a_label(v) for v in graph.vertices if v in graph.outputs)
    steps = []
    prev = tuple(in_label(v) for v in graph.vertices) if with_inputs else ()
    for v in measured_order:
        steps.append((prev, (a_label(v),)))
        prev = (c_label(v),)
    steps.append((prev, outputs))
    return TimeStepStructure(steps).compact()


def build_sigma_mbqc(g: Gflow, graph: OpenGraph, total_order: Sequence[int] | None = None,
                     cap: int = DIM_CAP) -> Comb:
    """The gflow comb ``sum_{a,b,c} U_c|a><b|U_c^dagger (x) |c,a><c,b|`` on ``(A, C, A')``."""
    if total_order is None:
        total_order = common_total_order([g], graph)
    _check_order(g, total_order)
    order = _slot_order(g, graph, total_order)
    n, k = graph.n, len(graph.measured)
    check_dim_cap(4**n * 2**k, cap, "gflow comb")
    d = 2**n
    data = np.zeros((d * d * 2**k,) * 2, dtype=complex)
    for ci, c in enumerate(outcome_strings(graph.measured)):
        u = correction_unitary(g, graph, c)
        choi = np.outer(u.reshape(-1), u.reshape(-1).conj())  # on (A, A')
        proj = np.zeros((2**k, 2**k))
        proj[ci, ci] = 1.0
        data += np.kron(choi, proj)  # layout (A, A', C)
    layout = SpaceLayout(
        [(a_label(v), 2) for v in graph.vertices]
        + [(in_label(v), 2) for v in graph.vertices]
        + [(c_label(v), 2) for v in graph.measured]
    )
    structure = device_structure(graph, order, with_inputs=True)
    op = LabeledOperator(layout, data).permute(structure.labels)
    return Comb(op, structure, True)


def _contracted_block(graph: OpenGraph, measured_order: Sequence[int], unitaries: Sequence[np.ndarray],
                      rho: np.ndarray) -> Comb:
    """``sum_c |c><c|_C (x) U_c rho U_c^dagger`` in causal layout."""
    k = len(graph.measured)
    d = 2**graph.n
    data = np.zeros((2**k * d,) * 2, dtype=complex)
    for ci, u in enumerate(unitaries):
        data[ci * d:(ci + 1) * d, ci * d:(ci + 1) * d] = u @ rho @ u.conj().T
    layout = SpaceLayout([(c_label(v), 2) for v in graph.measured] + [(a_label(v), 2) for v in graph.vertices])
    structure = device_structure(graph, measured_order, with_inputs=False)
    op = LabeledOperator(layout, data).permute(structure.labels)
    if np.max(np.abs(op.data.imag), initial=0.0) < 1e-14:
        op = LabeledOperator(op.layout, op.data.real)
    return Comb(op, structure, True)


def sigma_on_graph_state(g: Gflow, graph: OpenGraph, measured_order: Sequence[int] | None = None) -> Comb:
    """``sigma^g * rho_G``: the gflow comb with the graph state plugged into ``A'``.

    ``measured_order`` fixes the slot order of the measured qubits (default:
    the lexicographically smallest order compatible with ``g``).
    """
    if measured_order is None:
        measured_order = _slot_order(g, graph, None)
    rho = graph_state(graph).state.data
    unitaries = [correction_unitary(g, graph, c) for c in outcome_strings(graph.measured)]
    return _contracted_block(graph, measured_order, unitaries, rho)


def post_selected_state(block: Comb, graph: OpenGraph, angles: Mapping[int, PlaneMeasurement],
                        c: Mapping[int, int]) -> np.ndarray:
    """``(x)_v M^{c_v} * (sigma^g * rho_G)``: the unnormalized output state for outcome ``c``."""
    op = block.op
    for v in graph.measured:
        proj = angles[v].projectors()[c[v]]
        meas = LabeledOperator(
            SpaceLayout([(c_label(v), 2), (a_label(v), 2)]),
            np.kron(np.diag([1.0 - c[v], float(c[v])]), proj.T),
        )
        op = link_product(meas, op)
    return op.permute([a_label(v) for v in graph.vertices if v in graph.outputs]).data


def random_angles(planes: Mapping[int, str], rng: np.random.Generator) -> dict[int, PlaneMeasurement]:
    return {v: PlaneMeasurement(p, rng.uniform(0, 2 * np.pi)) for v, p in planes.items()}


def check_determinism(g: Gflow, graph: OpenGraph, angles: Mapping[int, PlaneMeasurement],
                      block: Comb | None = None) -> float:
    """Largest trace-norm distance between the rescaled output state of any
    outcome string and that of the all-zero string.

    States are rescaled by ``2^{|O^c|}`` so that a deterministic pattern (each
    branch having probability ``2^{-|O^c|}``) gives normalized states.
    """
    if block is None:
        block = sigma_on_graph_state(g, graph)
    scale = 2 ** len(graph.measured)
    outcomes = outcome_strings(graph.measured)
    ref = post_selected_state(block, graph, angles, outcomes[0]) * scale
    worst = 0.0
    for c in outcomes[1:]:
        st = post_selected_state(block, graph, angles, c) * scale
        worst = max(worst, float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * ((st - ref) + (st - ref).conj().T))))))
    return worst


# -- quantum causal model structure --------------------------------------------------

def qcm_channels(g: Gflow, graph: OpenGraph) -> dict[int, LabeledOperator]:
    """Per-node Choi operators ``rho_{A_i | C_Pa(i), A'_i}`` (not embedded)."""
    cs = correction_sets(g, graph)
    out = {}
    for v in graph.vertices:
        parents = sorted(cs.parents(v))
        layout = SpaceLayout([(a_label(v), 2)] + [(c_label(p), 2) for p in parents] + [(in_label(v), 2)])
        dim_c = 2 ** len(parents)
        data = np.zeros((4 * dim_c,) * 2, dtype=complex)
        for ci, bits in enumerate(itertools.product((0, 1), repeat=len(parents))):
            c = dict(zip(parents, bits))
            u = local_correction(*correction_exponents(cs, v, c))
            choi = np.outer(u.reshape(-1), u.reshape(-1).conj())  # (A_v, A'_v)
            proj = np.zeros((dim_c, dim_c))
            proj[ci, ci] = 1.0
            block = np.kron(choi, proj)  # (A_v, A'_v, C_Pa)
            data += block
        raw = LabeledOperator(
            SpaceLayout([(a_label(v), 2), (in_label(v), 2)] + [(c_label(p), 2) for p in parents]), data
        )
        out[v] = raw.permute(layout.names)
    return out


def embed(op: LabeledOperator, layout: SpaceLayout) -> LabeledOperator:
    """``op (x) I`` on the remaining factors of ``layout``, in ``layout`` order."""
    rest = layout.without(op.names)
    return kron(op, identity(rest)).permute(layout.names)


def qcm_product(channels: Mapping[int, LabeledOperator], layout: SpaceLayout) -> LabeledOperator:
    ops = [embed(ch, layout) for _, ch in sorted(channels.items())]
    out = ops[0]
    for op in ops[1:]:
        out = out @ op
    return out


@dataclass(frozen=True)
class QcmReport:
    channels_valid: bool
    commute: bool
    product_matches: bool
    max_commutator: float
    product_residual: float

    @property
    def ok(self) -> bool:
        return self.channels_valid and self.commute and self.product_matches


def check_qcm_structure(g: Gflow, graph: OpenGraph, tol: float = 1e-10) -> QcmReport:
    """Per-node channels are valid, commute pairwise, and multiply to ``sigma^g``."""
    sigma = build_sigma_mbqc(g, graph)
    channels = qcm_channels(g, graph)
    cs = correction_sets(g, graph)
    valid = True
    for v, ch in channels.items():
        ins = tuple(c_label(p) for p in sorted(cs.parents(v))) + (in_label(v),)
        rep = validate_comb(ch, TimeStepStructure([(ins, (a_label(v),))]), tol)
        valid &= rep.valid
    layout = sigma.op.layout
    embedded = {v: embed(ch, layout) for v, ch in channels.items()}
    worst = 0.0
    for a, b in itertools.combinations(sorted(embedded), 2):
        ea, eb = embedded[a].data, embedded[b].data
        worst = max(worst, float(np.max(np.abs(ea @ eb - eb @ ea))))
    prod = qcm_product(channels, layout)
    resid = prod.max_abs_diff(sigma.op)
    return QcmReport(bool(valid), worst <= tol, resid <= tol, worst, resid)


def check_causal_equivalence(gflows: Sequence[Gflow], graph: OpenGraph,
                             angles: Mapping[int, PlaneMeasurement] | None = None,
                             seed: int = 0) -> float:
    """Largest trace-norm gap between post-selected states of different gflows.

    Requires one plane assignment shared by all gflows and mutually compatible
    orders.  ``angles`` default to random angles in the shared planes.
    """
    if not gflows:
        raise InvalidInput("need at least one gflow")
    planes = dict(gflows[0].planes)
    if any(dict(gf.planes) != planes for gf in gflows):
        raise InvalidInput("gflows use different measurement planes; causal equivalence does not apply")
    if not orders_compatible(gflows):
        raise InvalidInput("gflow orders are not mutually compatible")
    if angles is None:
        angles = random_angles(planes, np.random.default_rng(seed))
    order = _slot_order(None, graph, common_total_order(gflows, graph))
    blocks = [sigma_on_graph_state(gf, graph, order) for gf in gflows]
    worst = 0.0
    for c in outcome_strings(graph.measured):
        states = [post_selected_state(b, graph, angles, c) for b in blocks]
        for st in states[1:]:
            diff = st - states[0]
            worst = max(worst, float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))))))
    return worst


# -- classical-quantum combs ---------------------------------------------------------

def _gflow_blocks(graph: OpenGraph, gflows: Sequence[Gflow], measured_order: Sequence[int] | None,
                  tol: float) -> tuple[list[Comb], list[int]]:
    """Contracted blocks sharing one slot structure.

    With a common compatible order every block uses it.  Otherwise each block
    is written in its own smallest compatible order and the k-th measured slot
    of every block is identified with the k-th slot of the natural order, so
    the first output space always carries the first qubit to be measured.
    """
    if measured_order is None and not orders_compatible(gflows):
        reference = list(graph.measured)
        blocks = []
        for gf in gflows:
            own = _slot_order(gf, graph, None)
            mapping = {}
            for src, dst in zip(own, reference):
                mapping[a_label(src)] = a_label(dst)
                mapping[c_label(src)] = c_label(dst)
            blocks.append(sigma_on_graph_state(gf, graph, own).relabel(mapping))
        labels = blocks[0].op.layout.names
        blocks = [Comb(b.op.permute(labels), blocks[0].structure, True) for b in blocks]
        measured_order = reference
    else:
        if measured_order is None:
            measured_order = _slot_order(None, graph, common_total_order(gflows, graph))
        blocks = [sigma_on_graph_state(gf, graph, measured_order) for gf in gflows]
    for gf, b in zip(gflows, blocks):
        rep = b.validate(tol)
        if not rep.valid:
            raise InvalidInput(
                f"block for gflow {gf.describe()} is not a comb in the measurement order {list(measured_order)}: "
                + "; ".join(rep.messages)
            )
    return blocks, list(measured_order)


def build_D_gflow(graph: OpenGraph, gflows: Sequence[Gflow], prior: Sequence[float] | None = None,
                  measured_order: Sequence[int] | None = None, names: Sequence[str] | None = None,
                  tol: float = 1e-9) -> ClassicalQuantumComb:
    """``sum_g P(g)|g><g| (x) sigma^g * rho_G``.

    The measured qubits are ordered by the lexicographically smallest total
    order compatible with every gflow.  When no such order exists the device
    slots are positional: each gflow measures its qubits in its own order and
    slot k holds whichever qubit that gflow measures k-th.  Passing
    ``measured_order`` forces one labelled order for all blocks instead.
    """
    if not gflows:
        raise InvalidInput("need at least one gflow")
    prior = np.full(len(gflows), 1.0 / len(gflows)) if prior is None else np.asarray(prior, float)
    blocks, _ = _gflow_blocks(graph, gflows, measured_order, tol)
    names = tuple(names) if names else tuple(gf.describe() for gf in gflows)
    return ClassicalQuantumComb(prior, tuple(blocks), "X", names)


def build_D_mp(graph: OpenGraph | None = None, gflows: Sequence[Gflow] | None = None,
               measured_vertex: int | None = None, tol: float = 1e-9) -> ClassicalQuantumComb:
    """One block per measurement plane of ``measured_vertex``: the uniform mixture
    of ``sigma^g * rho_G`` over the gflows using that plane; uniform plane prior."""
    if graph is None:
        graph = four_qubit_graph()
    if gflows is None:
        gflows = enumerate_gflows(graph, planes="any")
    if measured_vertex is None:
        measured_vertex = max(graph.measured)
    groups: dict[str, list[Gflow]] = {p: [] for p in PLANES}
    for gf in gflows:
        groups[gf.planes[measured_vertex]].append(gf)
    empty = [p for p, gs in groups.items() if not gs]
    if empty:
        raise InvalidInput(f"no gflows for plane(s) {empty} of vertex {measured_vertex}")
    blocks_all, order = _gflow_blocks(graph, list(gflows), None, tol)
    lookup = {gf.key(): b for gf, b in zip(gflows, blocks_all)}
    blocks = []
    for p in PLANES:
        ops = [lookup[gf.key()].op for gf in groups[p]]
        mix = sum(o.data for o in ops) / len(ops)
        blocks.append(Comb(LabeledOperator(ops[0].layout, mix), blocks_all[0].structure, True))
    return ClassicalQuantumComb(np.full(3, 1.0 / 3), tuple(blocks), "X", PLANES)


def calibration_graph() -> tuple[OpenGraph, Gflow]:
    graph = line_graph(3, inputs=(1,), outputs=(3,))
    return graph, make_gflow(graph, {1: {2}, 2: {3}})


def calibration_block(theta: float) -> Comb:
    """``sigma^theta * rho^theta_G`` for the three-qubit line.

    ``rho^theta_G = R_Z(-theta)^{(x)3} rho_G R_Z(-theta)^{(x)3 dagger}`` and the
    corrections are ``(R_Z(-theta) X^x R_Z(-theta)^dagger) Z^z``.
    """
    graph, g = calibration_graph()
    frame = rz(-theta)
    full = np.ones((1, 1), dtype=complex)
    for _ in graph.vertices:
        full = np.kron(full, frame)
    rho = full @ graph_state(graph).state.data @ full.conj().T
    unitaries = [correction_unitary(g, graph, c, x_frame=frame) for c in outcome_strings(graph.measured)]
    return _contracted_block(graph, list(graph.measured), unitaries, rho)


def build_D_calibr(angle_count: int) -> ClassicalQuantumComb:
    """Uniform prior over ``theta_k = 2 pi k / N``, ``k = 0..N-1``, ``2 <= N <= 32``."""
    n = int(angle_count)
    if not 2 <= n <= 32:
        raise InvalidInput(f"angle count must lie in [2, 32], got {angle_count}")
    thetas = [2 * np.pi * k / n for k in range(n)]
    blocks = tuple(calibration_block(t) for t in thetas)
    return ClassicalQuantumComb(np.full(n, 1.0 / n), blocks, "X", tuple(f"{t:.6f}" for t in thetas))


def catalogue_subset(indices: Iterable[int]) -> list[Gflow]:
    cat = four_qubit_catalogue()
    return [cat[i] for i in indices]
