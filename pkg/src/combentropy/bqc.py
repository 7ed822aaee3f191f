"""Classical combs of the classically driven blind quantum computing protocol.

The client hides a computation ``(alpha, O)`` and, for every vertex in the
agreed total order, reports the padded and adapted angle

    alpha'_i = (-1)^{XOR_{j in X_i} c_j} alpha_i + (r_i XOR XOR_{j in Z_i} c_j) pi,
    c_j = c'_j XOR r_j,

where ``c'_j`` is the outcome announced by the server.  All combinatorics run
on integer indices into an :class:`AngleSet`: negation and the shift by
``pi`` act as precomputed permutations of those indices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .combs import ClassicalComb, ClassicalQuantumComb, TimeStepStructure
from .entropy import classical_bounds, multi_round_bounds
from .errors import CapExceeded, InvalidInput
from .gflow import Gflow, OpenGraph, correction_sets, enumerate_gflows, triangle_graph
from .operators import SpaceLayout

TWO_PI = 2 * math.pi
ANGLE_TOL = 1e-9


def _wrap(a: float) -> float:
    a = math.fmod(float(a), TWO_PI)
    if a < 0:
        a += TWO_PI
    return 0.0 if abs(a - TWO_PI) < ANGLE_TOL else a


def _same(a: float, b: float) -> bool:
    d = abs(_wrap(a) - _wrap(b))
    return d < ANGLE_TOL or abs(d - TWO_PI) < ANGLE_TOL


@dataclass(frozen=True)
class AngleSet:
    """Sorted angles in ``[0, 2 pi)`` closed under ``a -> -a`` and ``a -> a + pi``."""

    angles: tuple

    def __post_init__(self) -> None:
        vals = sorted(_wrap(a) for a in self.angles)
        for a, b in zip(vals, vals[1:]):
            if _same(a, b):
                raise InvalidInput(f"angle {b} appears twice")
        if not vals:
            raise InvalidInput("an angle set needs at least one angle")
        object.__setattr__(self, "angles", tuple(vals))
        neg = tuple(self._find(-a) for a in vals)
        shift = tuple(self._find(a + math.pi) for a in vals)
        if None in neg or None in shift:
            raise InvalidInput("angle set is not closed under negation and the shift by pi")
        # table[x, z, i] = index of (-1)^x a_i + z pi
        table = np.empty((2, 2, len(vals)), dtype=np.int64)
        for i in range(len(vals)):
            table[0, 0, i] = i
            table[1, 0, i] = neg[i]
            table[0, 1, i] = shift[i]
            table[1, 1, i] = shift[neg[i]]
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def _find(self, a: float) -> int | None:
        for i, b in enumerate(self.angles):
            if _same(a, b):
                return i
        return None

    def __len__(self) -> int:
        return len(self.angles)

    def index(self, a: float) -> int:
        i = self._find(a)
        if i is None:
            raise InvalidInput(f"angle {a} is not in the set")
        return i

    def transform(self, i: int, x: int, z: int) -> int:
        """Index of ``(-1)^x a_i + z pi``."""
        return int(self.table[x & 1, z & 1, i])

    def to_list(self) -> list[float]:
        return list(self.angles)


def closed_angle_set(seeds: Iterable[float], target_size: int | None = None) -> AngleSet:
    """Smallest set containing ``seeds`` closed under ``(-1)^x a + z pi``."""
    out: list[float] = []
    for s in seeds:
        for x, z in itertools.product((0, 1), repeat=2):
            a = _wrap((-1) ** x * float(s) + z * math.pi)
            if not any(_same(a, b) for b in out):
                out.append(a)
    if not out:
        raise InvalidInput("at least one seed angle is required")
    result = AngleSet(tuple(out))
    if target_size is not None and len(result) != int(target_size):
        raise InvalidInput(f"closure has {len(result)} angles, expected {target_size}")
    return result


def default_angle_set(size: int = 4) -> AngleSet:
    """The 4-angle set seeded by ``pi/4`` or the 8-angle set seeded by ``{pi/5, pi/3}``."""
    if size == 4:
        return closed_angle_set([math.pi / 4], 4)
    if size == 8:
        return closed_angle_set([math.pi / 5, math.pi / 3], 8)
    raise InvalidInput("builtin angle sets have 4 or 8 elements")


# -- protocol --------------------------------------------------------------------------

def _order(graph: OpenGraph, order: Sequence[int] | None) -> list[int]:
    order = list(graph.vertices) if order is None else [int(v) for v in order]
    if sorted(order) != list(graph.vertices):
        raise InvalidInput("the total order must list every vertex exactly once")
    return order


@dataclass(frozen=True)
class _Adaptation:
    """Per-step parent positions of the X and Z dependencies of one gflow."""

    x_parents: tuple  # x_parents[i] = positions j < i in X_{order[i]}
    z_parents: tuple


def _adaptation(g: Gflow, graph: OpenGraph, order: Sequence[int]) -> _Adaptation:
    cs = correction_sets(g, graph)
    pos = {v: i for i, v in enumerate(order)}
    xs, zs = [], []
    for i, v in enumerate(order):
        xp = tuple(sorted(pos[j] for j in cs.x_sets[v]))
        zp = tuple(sorted(pos[j] for j in cs.z_sets[v]))
        if any(j >= i for j in xp + zp):
            raise InvalidInput(
                f"gflow {g.describe()} corrects vertex {v} with a later outcome under the order {list(order)}"
            )
        xs.append(xp)
        zs.append(zp)
    return _Adaptation(tuple(xs), tuple(zs))


def _flips(ad: _Adaptation, r: Sequence[int], c_prime: Sequence[int]) -> tuple[list[int], list[int]]:
    """``(x_i, z_i)`` exponents per step, positions in the total order."""
    c = [cp ^ ri for cp, ri in zip(c_prime, r)]
    xs, zs = [], []
    for i in range(len(r)):
        x = 0
        for j in ad.x_parents[i]:
            x ^= c[j]
        z = r[i]
        for j in ad.z_parents[i]:
            z ^= c[j]
        xs.append(x)
        zs.append(z)
    return xs, zs


def reported_angle(i: int, alpha: float, r: Sequence[int], c_prime: Sequence[int], g: Gflow,
                   graph: OpenGraph, order: Sequence[int] | None = None) -> float:
    """``alpha'`` at step ``i`` (1-based position in the order) as a float in ``[0, 2 pi)``.

    ``r`` and ``c_prime`` are listed in the total order.
    """
    order = _order(graph, order)
    if not 1 <= i <= len(order):
        raise InvalidInput(f"step {i} outside 1..{len(order)}")
    ad = _adaptation(g, graph, order)
    xs, zs = _flips(ad, [int(b) for b in r], [int(b) for b in c_prime])
    return _wrap((-1) ** xs[i - 1] * float(alpha) + zs[i - 1] * math.pi)


def bqc_structure(n: int) -> TimeStepStructure:
    """``C -> A'_1, C'_1 -> A'_2, ..., C'_n -> C``."""
    steps = []
    prev: tuple = ()
    for i in range(1, n + 1):
        steps.append((prev, (f"A'{i}",)))
        prev = (f"C'{i}",)
    steps.append((prev, ()))
    return TimeStepStructure(steps)


def bqc_layout(n: int, angle_count: int) -> SpaceLayout:
    labels = []
    for i in range(1, n + 1):
        labels += [(f"A'{i}", angle_count), (f"C'{i}", 2)]
    return SpaceLayout(labels)


def _flat_index(alpha_p: np.ndarray, c_prime: Sequence[int], angle_count: int) -> np.ndarray:
    """Row-major index of ``(a'_1, c'_1, ..., a'_n, c'_n)``; ``alpha_p`` has shape (..., n)."""
    idx = np.zeros(alpha_p.shape[:-1], dtype=np.int64)
    for i, c in enumerate(c_prime):
        idx = (idx * angle_count + alpha_p[..., i]) * 2 + int(c)
    return idx


def _reports(ad: _Adaptation, angle_set: AngleSet, alphas: np.ndarray, n: int):
    """Yield ``(r, c', alpha')`` for every pad and outcome string; ``alphas`` is (B, n)."""
    table = angle_set.table
    for r in itertools.product((0, 1), repeat=n):
        for cp in itertools.product((0, 1), repeat=n):
            xs, zs = _flips(ad, r, cp)
            ap = np.stack([table[xs[i], zs[i], alphas[:, i]] for i in range(n)], axis=-1)
            yield r, cp, ap


def build_sigma_bqc(alpha: Sequence[int], r: Sequence[int], g: Gflow, graph: OpenGraph,
                    angle_set: AngleSet, order: Sequence[int] | None = None) -> ClassicalComb:
    """The deterministic comb ``sum_{c'} |alpha'(c'), c'><...|`` for fixed ``alpha``, ``r`` and ``g``.

    ``alpha`` holds indices into ``angle_set``; ``alpha`` and ``r`` follow the total order.
    """
    order = _order(graph, order)
    n = len(order)
    alpha = np.asarray(alpha, dtype=np.int64).reshape(1, n)
    r = tuple(int(b) & 1 for b in r)
    ad = _adaptation(g, graph, order)
    k = len(angle_set)
    diag = np.zeros((2 * k) ** n)
    for cp in itertools.product((0, 1), repeat=n):
        xs, zs = _flips(ad, r, cp)
        ap = np.array([[angle_set.table[xs[i], zs[i], alpha[0, i]] for i in range(n)]])
        diag[_flat_index(ap, cp, k)] = 1.0
    return ClassicalComb(bqc_layout(n, k), diag, bqc_structure(n))


def _sigma_alpha_o_batch(alphas: np.ndarray, gflows: Sequence[Gflow], graph: OpenGraph, angle_set: AngleSet,
                         order: Sequence[int], gflow_prior: Sequence[float] | None = None) -> np.ndarray:
    """Diagonals of ``sigma_{alpha,O}`` for a batch of angle index vectors, shape (B, (2|A|)^n)."""
    n = len(order)
    k = len(angle_set)
    if not gflows:
        raise InvalidInput("at least one gflow is required")
    weights = np.full(len(gflows), 1.0 / len(gflows)) if gflow_prior is None else np.asarray(gflow_prior, float)
    out = np.zeros((len(alphas), (2 * k) ** n))
    rows = np.arange(len(alphas))
    for wg, g in zip(weights, gflows):
        ad = _adaptation(g, graph, order)
        for _, cp, ap in _reports(ad, angle_set, alphas, n):
            np.add.at(out, (rows, _flat_index(ap, cp, k)), wg / 2**n)
    return out


def build_sigma_alpha_O(alpha: Sequence[int], gflows: Sequence[Gflow], graph: OpenGraph, angle_set: AngleSet,
                        order: Sequence[int] | None = None,
                        gflow_prior: Sequence[float] | None = None) -> ClassicalComb:
    """Mixture of ``sigma_BQC`` over uniform pads and the gflows compatible with ``O``."""
    order = _order(graph, order)
    alpha = np.asarray(alpha, dtype=np.int64).reshape(1, -1)
    diag = _sigma_alpha_o_batch(alpha, gflows, graph, angle_set, order, gflow_prior)[0]
    return ClassicalComb(bqc_layout(len(order), len(angle_set)), diag, bqc_structure(len(order)))


def xy_open_graph(graph: OpenGraph, outputs: Iterable[int]) -> OpenGraph:
    outputs = frozenset(int(v) for v in outputs)
    return OpenGraph(graph.n, graph.edges, frozenset(), outputs,
                     {v: "XY" for v in graph.vertices if v not in outputs})


def output_sets(graph: OpenGraph, order: Sequence[int] | None = None) -> dict[frozenset, list[Gflow]]:
    """Non-trivial output sets with at least one XY gflow compatible with the order.

    The input set is taken empty: a map that is a gflow for some ``I`` is a
    gflow for ``I`` empty, so this collects every admissible map.
    """
    order = _order(graph, order)
    found = {}
    for size in range(1, graph.n):
        for o in itertools.combinations(graph.vertices, size):
            og = xy_open_graph(graph, o)
            gfs = enumerate_gflows(og, order_constraint=order, planes="any")
            gfs = [gf for gf in gfs if all(p == "XY" for p in gf.planes.values())]
            if gfs:
                found[frozenset(o)] = gfs
    return found


@dataclass(frozen=True, eq=False)
class BqcInstance:
    graph: OpenGraph
    order: tuple
    angle_set: AngleSet
    outputs: dict  # frozenset -> list[Gflow]

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def output_list(self) -> list[frozenset]:
        return sorted(self.outputs, key=lambda o: (len(o), sorted(o)))


def bqc_instance(graph: OpenGraph, angle_set: AngleSet, order: Sequence[int] | None = None) -> BqcInstance:
    order = _order(graph, order)
    outs = output_sets(graph, order)
    if not outs:
        raise InvalidInput("no non-trivial output set admits a gflow compatible with the order")
    return BqcInstance(graph, tuple(order), angle_set, outs)


def minimal_instance(angle_count: int = 4) -> BqcInstance:
    """The three-vertex triangle with order ``1 < 2 < 3``."""
    return bqc_instance(triangle_graph(), default_angle_set(angle_count))


def build_D_client(instance: BqcInstance, output_prior: Mapping[frozenset, float] | None = None,
                   cap: int = 50_000_000) -> ClassicalQuantumComb:
    """``sum P(alpha, O) |alpha, O><alpha, O| (x) sigma_{alpha,O}`` with ``P(alpha, O) = P(O)/|A|^n``.

    ``output_prior`` defaults to uniform over the admissible output sets.
    """
    n, k = instance.n, len(instance.angle_set)
    outs = instance.output_list
    size = k**n * len(outs) * (2 * k) ** n
    if size > cap:
        raise CapExceeded(f"D_client would hold {size} entries (cap {cap})")
    p_o = _output_prior(outs, output_prior)
    alphas = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64)
    layout, structure = bqc_layout(n, k), bqc_structure(n)
    blocks, prior, names = [], [], []
    for o in outs:
        diags = _sigma_alpha_o_batch(alphas, instance.outputs[o], instance.graph, instance.angle_set,
                                     instance.order)
        for a, d in zip(alphas, diags):
            blocks.append(ClassicalComb(layout, d, structure))
            prior.append(p_o[o] / k**n)
            names.append(f"alpha={tuple(int(v) for v in a)};O={sorted(o)}")
    return ClassicalQuantumComb(np.array(prior), tuple(blocks), "X", tuple(names))


def _output_prior(outs: Sequence[frozenset], output_prior: Mapping | None) -> dict:
    if output_prior is None:
        return {o: 1.0 / len(outs) for o in outs}
    p = {frozenset(int(v) for v in o): float(w) for o, w in dict(output_prior).items()}
    unknown = set(p) - set(outs)
    if unknown:
        raise InvalidInput(f"prior names output sets without gflow: {[sorted(o) for o in unknown]}")
    total = sum(p.values())
    if any(w < 0 for w in p.values()) or abs(total - 1.0) > 1e-12:
        raise InvalidInput("output-set prior must be a probability vector")
    return {o: p.get(o, 0.0) for o in outs}


# -- bounds ------------------------------------------------------------------------------

def single_round_bound(n: int, n_output_sets: int) -> float:
    """Single-round min-entropy lower bound ``n + log2 |O|`` under a uniform prior."""
    return float(n + math.log2(n_output_sets))


def any_round_bound(output_prior: Mapping[frozenset, float]) -> float:
    """Any-round min-entropy lower bound ``-log2 sum_O P(O) / 2^|O|``."""
    s = sum(float(p) / 2 ** len(o) for o, p in output_prior.items())
    return float(-math.log2(s))


def theorem_bounds(instance: BqcInstance, m: int = 1, output_prior: Mapping[frozenset, float] | None = None) -> float:
    """Analytic min-entropy lower bound: the single-round bound for ``m = 1`` and a
    uniform prior, otherwise the any-round bound."""
    outs = instance.output_list
    if m == 1 and output_prior is None:
        return single_round_bound(instance.n, len(outs))
    return any_round_bound(_output_prior(outs, output_prior))


# -- structural checks --------------------------------------------------------------------

def preimage_violations(instance: BqcInstance) -> list[tuple]:
    """Brute-force check that for fixed ``(alpha', c', alpha, g)`` at most one pad reports ``alpha'``.

    Returns the offending ``(g, alpha, c', alpha')`` tuples (empty when the property holds).
    """
    n, k = instance.n, len(instance.angle_set)
    alphas = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64)
    bad = []
    for o in instance.output_list:
        for g in instance.outputs[o]:
            ad = _adaptation(g, instance.graph, instance.order)
            counts: dict = {}
            for _, cp, ap in _reports(ad, instance.angle_set, alphas, n):
                flat = _flat_index(ap, cp, k)
                for ai, f in enumerate(flat):
                    counts[(ai, int(f))] = counts.get((ai, int(f)), 0) + 1
            for (ai, f), cnt in counts.items():
                if cnt > 1:
                    bad.append((g.describe(), tuple(alphas[ai]), f, cnt))
    return bad


def output_shift(instance: BqcInstance, alpha: Sequence[int], o: frozenset, bits: Sequence[int]) -> np.ndarray:
    """``alpha`` with ``pi`` added on the output vertices selected by ``bits``."""
    alpha = np.array(alpha, dtype=np.int64)
    pos = {v: i for i, v in enumerate(instance.order)}
    for v, b in zip(sorted(o), bits):
        if b:
            alpha[pos[v]] = instance.angle_set.transform(int(alpha[pos[v]]), 0, 1)
    return alpha


def output_symmetry_residual(instance: BqcInstance) -> float:
    """Largest entry difference between ``sigma_{alpha,O}`` and ``sigma_{alpha~,O}`` over
    all ``alpha`` and all output shifts ``alpha~``."""
    n, k = instance.n, len(instance.angle_set)
    alphas = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64)
    worst = 0.0
    for o in instance.output_list:
        gfs = instance.outputs[o]
        base = _sigma_alpha_o_batch(alphas, gfs, instance.graph, instance.angle_set, instance.order)
        for bits in itertools.product((0, 1), repeat=len(o)):
            shifted = np.array([output_shift(instance, a, o, bits) for a in alphas])
            other = _sigma_alpha_o_batch(shifted, gfs, instance.graph, instance.angle_set, instance.order)
            worst = max(worst, float(np.abs(base - other).max()))
    return worst
