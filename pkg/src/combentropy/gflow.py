"""Open graphs, generalized flow (gflow) verification and enumeration.

Vertices are the integers ``1..n``.  A gflow is a map ``g: O^c -> P(I^c)``
together with the strict partial order generated by

* ``v < v'`` for every ``v' in g(v)``, ``v' != v``;
* ``v < v'`` for every ``v' in Odd(g(v))``, ``v' != v``;

plus the plane conditions

==========  =================  =====================
plane       ``v in g(v)``      ``v in Odd(g(v))``
==========  =================  =====================
XY          no                 yes
XZ          yes                yes
YZ          yes                no
==========  =================  =====================

The generated order is the weakest witness for the existential quantifier on
the partial order, so a candidate map is a gflow exactly when that relation
is acyclic.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .errors import CapExceeded, InvalidInput

PLANES = ("XY", "XZ", "YZ")
ENUMERATION_CAP = 10**7

# (v in g(v), v in Odd(g(v))) for each plane
_PLANE_PATTERN = {"XY": (False, True), "XZ": (True, True), "YZ": (True, False)}
_PATTERN_PLANE = {pat: plane for plane, pat in _PLANE_PATTERN.items()}


def _vset(items: Iterable[int]) -> frozenset[int]:
    return frozenset(int(v) for v in items)


@dataclass(frozen=True)
class OpenGraph:
    """A graph with input set ``I``, output set ``O`` and optional planes on ``O^c``."""

    n: int
    edges: frozenset
    inputs: frozenset = frozenset()
    outputs: frozenset = frozenset()
    planes: Mapping[int, str] | None = None

    def __post_init__(self) -> None:
        n = int(self.n)
        if n < 1:
            raise InvalidInput("a graph needs at least one vertex")
        edges = set()
        for e in self.edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise InvalidInput(f"self-loop at vertex {u}")
            for w in (u, v):
                if not 1 <= w <= n:
                    raise InvalidInput(f"edge endpoint {w} outside 1..{n}")
            edges.add(frozenset((u, v)))
        inputs, outputs = _vset(self.inputs), _vset(self.outputs)
        for w in inputs | outputs:
            if not 1 <= w <= n:
                raise InvalidInput(f"vertex {w} outside 1..{n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", frozenset(edges))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        if self.planes is not None:
            planes = {int(v): str(p).upper() for v, p in dict(self.planes).items()}
            bad = {p for p in planes.values() if p not in PLANES}
            if bad:
                raise InvalidInput(f"unknown measurement planes {sorted(bad)}")
            if set(planes) != set(self.measured):
                raise InvalidInput(
                    f"planes must be given exactly on the measured vertices {sorted(self.measured)}"
                )
            object.__setattr__(self, "planes", planes)
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(tuple(e) for e in self.edges)
        if not nx.is_connected(g):
            raise InvalidInput("the graph must be connected")
        nbrs = {v: frozenset(g.neighbors(v)) for v in self.vertices}
        object.__setattr__(self, "_nbrs", nbrs)

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(range(1, self.n + 1))

    @property
    def measured(self) -> tuple[int, ...]:
        """``O^c`` in increasing order."""
        return tuple(v for v in self.vertices if v not in self.outputs)

    @property
    def non_inputs(self) -> tuple[int, ...]:
        """``I^c`` in increasing order."""
        return tuple(v for v in self.vertices if v not in self.inputs)

    def neighbors(self, v: int) -> frozenset[int]:
        return self._nbrs[v]  # type: ignore[attr-defined]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.edges)

    def with_io(self, inputs: Iterable[int] | None = None, outputs: Iterable[int] | None = None,
                planes: Mapping[int, str] | None = None) -> "OpenGraph":
        return OpenGraph(
            self.n,
            self.edges,
            self.inputs if inputs is None else inputs,
            self.outputs if outputs is None else outputs,
            planes,
        )

    def to_dict(self) -> dict:
        out = {
            "vertices": self.n,
            "edges": [list(e) for e in self.sorted_edges()],
            "inputs": sorted(self.inputs),
            "outputs": sorted(self.outputs),
        }
        if self.planes is not None:
            out["planes"] = {str(v): p for v, p in sorted(self.planes.items())}
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "OpenGraph":
        try:
            verts = data["vertices"]
            n = len(verts) if isinstance(verts, (list, tuple)) else int(verts)
            if isinstance(verts, (list, tuple)) and sorted(int(v) for v in verts) != list(range(1, n + 1)):
                raise InvalidInput("vertices must be labelled 1..n")
            planes = data.get("planes")
            if planes is not None:
                planes = {int(k): v for k, v in planes.items()}
            return cls(n, frozenset(frozenset(e) for e in data["edges"]), data.get("inputs", ()),
                       data.get("outputs", ()), planes)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInput):
                raise
            raise InvalidInput(f"malformed graph description: {exc}") from exc


def odd_neighborhood(graph: OpenGraph, k: Iterable[int]) -> frozenset[int]:
    """Vertices with an odd number of neighbours in ``k``."""
    parity: set[int] = set()
    for v in k:
        if not 1 <= int(v) <= graph.n:
            raise InvalidInput(f"vertex {v} outside 1..{graph.n}")
        parity ^= graph.neighbors(int(v))
    return frozenset(parity)


@dataclass(frozen=True)
class Violation:
    vertex: int
    clause: int
    message: str


@dataclass(frozen=True)
class Gflow:
    """A correction map with its plane labels and generated order.

    ``order`` holds the generating pairs ``(v, v')`` meaning ``v < v'``.
    """

    g: Mapping[int, frozenset]
    planes: Mapping[int, str]
    order: frozenset = field(default=frozenset())

    def __post_init__(self) -> None:
        object.__setattr__(self, "g", {int(v): _vset(s) for v, s in sorted(dict(self.g).items())})
        object.__setattr__(self, "planes", {int(v): p for v, p in sorted(dict(self.planes).items())})

    def key(self) -> tuple:
        return tuple((v, tuple(sorted(s))) for v, s in self.g.items())

    def __hash__(self) -> int:
        return hash(self.key())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Gflow) and self.key() == other.key()

    def describe(self) -> str:
        return ", ".join(f"{v}->{{{','.join(map(str, sorted(s)))}}}" for v, s in self.g.items())

    def to_dict(self) -> dict:
        return {
            "g": {str(v): sorted(s) for v, s in self.g.items()},
            "planes": {str(v): p for v, p in self.planes.items()},
            "order": sorted([list(p) for p in self.order]),
        }


def generated_order(graph: OpenGraph, g: Mapping[int, Iterable[int]]) -> frozenset[tuple[int, int]]:
    pairs = set()
    for v, s in g.items():
        s = _vset(s)
        for w in s | odd_neighborhood(graph, s):
            if w != v:
                pairs.add((int(v), w))
    return frozenset(pairs)


def _acyclic(vertices: Iterable[int], pairs: Iterable[tuple[int, int]]) -> bool:
    d = nx.DiGraph()
    d.add_nodes_from(vertices)
    d.add_edges_from(pairs)
    return nx.is_directed_acyclic_graph(d)


def plane_of(graph: OpenGraph, v: int, s: Iterable[int]) -> str | None:
    s = _vset(s)
    return _PATTERN_PLANE.get((v in s, v in odd_neighborhood(graph, s)))


def make_gflow(graph: OpenGraph, g: Mapping[int, Iterable[int]], planes: Mapping[int, str] | None = None) -> Gflow:
    """Wrap a correction map, deriving planes from the map when not given."""
    g = {int(v): _vset(s) for v, s in g.items()}
    if planes is None:
        planes = graph.planes if graph.planes is not None else {v: plane_of(graph, v, s) or "?" for v, s in g.items()}
    return Gflow(g, planes, generated_order(graph, g))


def verify_gflow(graph: OpenGraph, candidate: Gflow, order: Sequence[int] | None = None) -> tuple[bool, list[Violation]]:
    """Check every gflow clause, naming each failure.

    Clauses 1 and 2 are checked against ``order`` (a total order given as a
    vertex sequence) when provided, and otherwise against acyclicity of the
    generated relation.  Clause numbers 3, 4 and 5 are the XY, XZ and YZ
    plane conditions.
    """
    measured, non_inputs = set(graph.measured), set(graph.non_inputs)
    if set(candidate.g) != measured:
        raise InvalidInput(f"gflow domain {sorted(candidate.g)} differs from the measured vertices {sorted(measured)}")
    for v, s in candidate.g.items():
        if not s <= non_inputs:
            raise InvalidInput(f"g({v}) = {sorted(s)} is not a subset of the non-input vertices")
    planes = dict(candidate.planes)
    violations: list[Violation] = []
    rank = None
    if order is not None:
        order = [int(v) for v in order]
        if sorted(order) != list(graph.vertices):
            raise InvalidInput("a total order must list every vertex exactly once")
        rank = {v: i for i, v in enumerate(order)}
    for v, s in candidate.g.items():
        odd = odd_neighborhood(graph, s)
        for clause, targets in ((1, s), (2, odd)):
            for w in sorted(targets - {v}):
                if rank is not None and rank[v] >= rank[w]:
                    violations.append(Violation(v, clause, f"{w} must come after {v}"))
        plane = planes.get(v)
        if plane not in _PLANE_PATTERN:
            violations.append(Violation(v, 3, f"vertex {v} has no valid plane label ({plane!r})"))
            continue
        want_in, want_odd = _PLANE_PATTERN[plane]
        clause = {"XY": 3, "XZ": 4, "YZ": 5}[plane]
        if (v in s) != want_in:
            violations.append(Violation(v, clause, f"{plane}: {v} {'must' if want_in else 'must not'} lie in g({v})"))
        if (v in odd) != want_odd:
            violations.append(Violation(v, clause, f"{plane}: {v} {'must' if want_odd else 'must not'} lie in Odd(g({v}))"))
    if rank is None:
        pairs = generated_order(graph, candidate.g)
        if not _acyclic(graph.vertices, pairs):
            cyc = nx.find_cycle(nx.DiGraph(list(pairs)))
            violations.append(Violation(cyc[0][0], 1, f"generated order has a cycle {cyc}"))
    return (not violations), violations


def _subsets(pool: Sequence[int]) -> list[frozenset[int]]:
    """All subsets of ``pool`` ordered by bitmask over the sorted pool."""
    pool = sorted(pool)
    out = []
    for mask in range(1 << len(pool)):
        out.append(frozenset(pool[i] for i in range(len(pool)) if mask >> i & 1))
    return out


def enumerate_gflows(
    graph: OpenGraph,
    order_constraint: Sequence[int] | None = None,
    planes: Mapping[int, str] | str | None = None,
    cap: int = ENUMERATION_CAP,
) -> list[Gflow]:
    """All gflows of ``graph`` by exhaustive search.

    ``planes`` may be a map on the measured vertices, the string ``"any"``
    (every plane allowed, the plane being read off the map), or ``None`` to
    use ``graph.planes`` (falling back to ``"any"`` when the graph has none).
    Results are listed lexicographically by ``(vertex, subset bitmask)``.
    The cap bounds the number of candidate maps left after per-vertex plane
    filtering.
    """
    if planes is None:
        planes = graph.planes if graph.planes is not None else "any"
    measured = graph.measured
    pool = _subsets(graph.non_inputs)
    choices: list[list[tuple[frozenset[int], str]]] = []
    for v in measured:
        opts = []
        for s in pool:
            p = plane_of(graph, v, s)
            if p is None:
                continue
            if planes != "any" and planes[v] != p:
                continue
            opts.append((s, p))
        choices.append(opts)
    total = 1
    for opts in choices:
        total *= len(opts)
    if total > cap:
        raise CapExceeded(f"gflow search would examine {total} candidate maps (cap {cap})")
    rank = None
    if order_constraint is not None:
        order_constraint = [int(v) for v in order_constraint]
        if sorted(order_constraint) != list(graph.vertices):
            raise InvalidInput("order constraint must list every vertex exactly once")
        rank = {v: i for i, v in enumerate(order_constraint)}
    found = []
    for combo in itertools.product(*choices):
        g = {v: s for v, (s, _) in zip(measured, combo)}
        pairs = generated_order(graph, g)
        if rank is not None:
            if any(rank[a] >= rank[b] for a, b in pairs):
                continue
        elif not _acyclic(graph.vertices, pairs):
            continue
        found.append(Gflow(g, {v: p for v, (_, p) in zip(measured, combo)}, pairs))
    return found


@dataclass(frozen=True)
class CorrectionSets:
    x_sets: Mapping[int, frozenset]
    z_sets: Mapping[int, frozenset]

    def parents(self, v: int) -> frozenset[int]:
        return self.x_sets[v] | self.z_sets[v]


def correction_sets(g: Gflow, graph: OpenGraph) -> CorrectionSets:
    """``X_v = {v' : v in g(v'), v != v'}`` and ``Z_v = {v' : v in Odd(g(v')), v != v'}``."""
    xs = {v: set() for v in graph.vertices}
    zs = {v: set() for v in graph.vertices}
    for src, s in g.g.items():
        for v in s:
            if v != src:
                xs[v].add(src)
        for v in odd_neighborhood(graph, s):
            if v != src:
                zs[v].add(src)
    return CorrectionSets({v: frozenset(s) for v, s in xs.items()}, {v: frozenset(s) for v, s in zs.items()})


def induced_dag(g: Gflow, graph: OpenGraph) -> nx.DiGraph:
    """DAG with an edge ``i -> j`` whenever ``i`` is in ``X_j`` or ``Z_j``."""
    cs = correction_sets(g, graph)
    d = nx.DiGraph()
    d.add_nodes_from(graph.vertices)
    for j in graph.vertices:
        for i in sorted(cs.parents(j)):
            d.add_edge(i, j)
    if not nx.is_directed_acyclic_graph(d):
        raise InvalidInput(f"correction DAG of gflow {g.describe()} has a cycle; the gflow was not verified")
    return d


def dag_to_dot(dag: nx.DiGraph, name: str = "corrections") -> str:
    lines = [f"digraph {name} {{"]
    lines += [f"  {v};" for v in sorted(dag.nodes)]
    lines += [f"  {u} -> {v};" for u, v in sorted(dag.edges)]
    lines.append("}")
    return "\n".join(lines) + "\n"


def dag_to_json(dag: nx.DiGraph) -> str:
    return json.dumps({"nodes": sorted(dag.nodes), "edges": [list(e) for e in sorted(dag.edges)]})


def orders_compatible(gflows: Sequence[Gflow]) -> bool:
    """True when the union of the generated orders is acyclic."""
    pairs = set()
    verts = set()
    for gf in gflows:
        pairs |= set(gf.order)
        verts |= set(gf.g)
    verts |= {v for p in pairs for v in p}
    return _acyclic(verts, pairs)


def common_total_order(gflows: Sequence[Gflow], graph: OpenGraph) -> list[int]:
    """Lexicographically smallest total order extending every generated order."""
    d = nx.DiGraph()
    d.add_nodes_from(graph.vertices)
    for gf in gflows:
        d.add_edges_from(gf.order)
    if not nx.is_directed_acyclic_graph(d):
        raise InvalidInput("the gflows have no common compatible total order")
    return list(nx.lexicographical_topological_sort(d))


# -- fixtures ----------------------------------------------------------------

def line_graph(n: int = 3, inputs: Iterable[int] = (), outputs: Iterable[int] = ()) -> OpenGraph:
    return OpenGraph(n, frozenset(frozenset((i, i + 1)) for i in range(1, n)), inputs, outputs)


def triangle_graph(inputs: Iterable[int] = (), outputs: Iterable[int] = (2, 3)) -> OpenGraph:
    """The complete graph on three vertices, the smallest BQC instance.

    With XY measurements and the order ``1 < 2 < 3`` the only non-trivial
    output set admitting gflow is ``{2, 3}``, with ``1 -> {2}`` and ``1 -> {3}``.
    """
    return OpenGraph(3, frozenset(frozenset(e) for e in [(1, 2), (1, 3), (2, 3)]), inputs, outputs)


def four_qubit_graph() -> OpenGraph:
    """The four-vertex causal-discovery instance with ``I = {1}``, ``O = {3, 4}``.

    The edge set is the four-vertex graph whose exhaustive enumeration
    reproduces the catalogue below and whose corrections for ``g1`` include
    ``Z`` on both outputs after outcome 2, which needs the edge ``3-4``.
    """
    edges = [(1, 2), (1, 3), (1, 4), (2, 4), (3, 4)]
    return OpenGraph(4, frozenset(frozenset(e) for e in edges), {1}, {3, 4})


#: the fifteen gflows of the four-vertex instance, in catalogue order g1..g15
FOUR_QUBIT_CATALOGUE: tuple[dict[int, frozenset], ...] = tuple(
    {1: frozenset(a), 2: frozenset(b)}
    for a, b in [
        ({2}, {3, 4}), ({3}, {3, 4}), ({3}, {4}), ({4}, {3, 4}), ({2, 3, 4}, {3, 4}),
        ({2}, {2, 4}), ({3}, {2, 4}), ({3}, {2, 3, 4}), ({4}, {2, 4}), ({2, 3, 4}, {2, 4}),
        ({2}, {2, 3}), ({3}, {2}), ({3}, {2, 3}), ({4}, {2, 3}), ({2, 3, 4}, {2, 3}),
    ]
)


def catalogue_index(gflows: Sequence[Gflow]) -> dict[int, Gflow]:
    """Map catalogue numbers 1..15 to enumerated gflows by matching their maps."""
    by_key = {gf.key(): gf for gf in gflows}
    out = {}
    for idx, g in enumerate(FOUR_QUBIT_CATALOGUE, start=1):
        key = tuple((v, tuple(sorted(s))) for v, s in sorted(g.items()))
        if key not in by_key:
            raise InvalidInput(f"catalogue entry g{idx} was not found among the enumerated gflows")
        out[idx] = by_key[key]
    return out


def four_qubit_catalogue() -> dict[int, Gflow]:
    graph = four_qubit_graph()
    return catalogue_index(enumerate_gflows(graph, planes="any"))
