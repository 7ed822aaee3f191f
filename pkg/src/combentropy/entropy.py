"""Guessing probability and min-entropy of classical-quantum combs.

For ``D = sum_x P(x)|x><x| (x) sigma_x`` the guessing probability is

    P_guess = min { Gamma_0 : Gamma_hat >= P(x) sigma_x for all x,
                    Gamma_hat an unnormalized comb with terminal scalar Gamma_0 }

(``Tr Gamma_hat / prod d_in = Gamma_0``).  The block-diagonal form of ``D``
splits ``I_X (x) Gamma_hat >= D`` into one constraint per ``x``.  The comb
chain is imposed with auxiliary variables ``Gamma_{n-1}, ..., Gamma_1``.

Classical blocks go through a linear program over the diagonal of
``Gamma_hat`` instead; the dual variables of either program give an optimal
strategy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .combs import (
    DIM_CAP,
    ClassicalComb,
    ClassicalQuantumComb,
    Comb,
    TimeStepStructure,
    comb_dims,
    multi_round,
    dual_structure,
    strategy_operator,
    strategy_probability,
    validate_classical_comb,
    validate_comb,
)
from .errors import CapExceeded, InvalidInput, SolverFailure
from .operators import LabeledOperator, SpaceLayout, SubsystemLabel

FEAS_TOL = 1e-8
DUALITY_GAP_TOL = 1e-5
BOUNDS_CAP = 50_000_000


@dataclass(frozen=True)
class SolverConfig:
    """Options forwarded to the conic solver."""

    solver: str = "SCS"
    eps: float = 1e-9
    verbose: bool = False
    dim_cap: int = DIM_CAP
    extra: dict = field(default_factory=dict)

    def solver_kwargs(self) -> dict:
        opts = dict(self.extra)
        if self.solver == "CLARABEL":
            opts.setdefault("tol_gap_abs", self.eps)
            opts.setdefault("tol_gap_rel", self.eps)
            opts.setdefault("tol_feas", self.eps)
        elif self.solver == "SCS":
            opts.setdefault("eps", self.eps)
            opts.setdefault("max_iters", 200000)
        return opts


@dataclass(frozen=True, eq=False)
class MinEntropyResult:
    p_guess: float
    h_min: float
    status: str
    certificate: LabeledOperator | np.ndarray | None
    chain: tuple = ()
    primal_residual: float = 0.0
    duality_gap: float = float("nan")
    wall_ms: float = 0.0
    solver: str = ""
    duals: tuple = ()
    structure: TimeStepStructure | None = None
    layout: SpaceLayout | None = None

    def to_dict(self) -> dict:
        return {
            "p_guess": self.p_guess,
            "h_min": self.h_min,
            "status": self.status,
            "primal_residual": self.primal_residual,
            "duality_gap": self.duality_gap,
            "wall_ms": self.wall_ms,
            "solver": self.solver,
        }


def _result(p: float, **kw) -> MinEntropyResult:
    p = float(p)
    return MinEntropyResult(p_guess=p, h_min=float(-np.log2(p)) if p > 0 else float("inf"), **kw)


def _causal_blocks(cq: ClassicalQuantumComb) -> tuple[list[np.ndarray], SpaceLayout]:
    structure = cq.structure
    ops = [b.op.permute(structure.labels) for b in cq.blocks]
    return [o.data for o in ops], ops[0].layout


def min_entropy(cq: ClassicalQuantumComb, config: SolverConfig | None = None,
                classical_fast_path: bool = True) -> MinEntropyResult:
    """Solve the guessing-probability program for ``cq``.

    Classical blocks use :func:`min_entropy_classical` unless
    ``classical_fast_path`` is False (then they are densified, subject to the
    dimension cap, and solved as an SDP).
    """
    config = config or SolverConfig()
    if cq.classical:
        if classical_fast_path:
            return min_entropy_classical(cq, config)
        cq = ClassicalQuantumComb(cq.prior, tuple(b.to_comb(config.dim_cap) for b in cq.blocks), cq.x_label, cq.names)
    return _solve_sdp(cq, config)


def _solve_sdp(cq: ClassicalQuantumComb, config: SolverConfig) -> MinEntropyResult:
    import cvxpy as cp

    if cq.block_dim > config.dim_cap:
        raise CapExceeded(f"block dimension {cq.block_dim} exceeds the cap {config.dim_cap}")
    start = time.perf_counter()
    structure = cq.structure
    blocks, layout = _causal_blocks(cq)
    dims = comb_dims(structure, layout)
    real = all(not np.iscomplexobj(b) or np.max(np.abs(b.imag), initial=0.0) < 1e-13 for b in blocks)
    if real:
        blocks = [np.real(b) for b in blocks]
    sizes = [1]
    for din, dout in dims:
        sizes.append(sizes[-1] * din * dout)

    def var(d):
        if d == 1:
            return cp.Variable()
        return cp.Variable((d, d), symmetric=True) if real else cp.Variable((d, d), hermitian=True)

    gammas = [var(s) for s in sizes]
    cons = []
    for k, (din, dout) in enumerate(dims, start=1):
        gk, prev = gammas[k], gammas[k - 1]
        if sizes[k] == 1:
            cons.append(gk == prev)
            continue
        traced = cp.partial_trace(gk, [sizes[k - 1] * din, dout], axis=1) if dout > 1 else gk
        if sizes[k - 1] == 1:
            rhs = prev * np.eye(din)
        elif din > 1:
            rhs = cp.kron(prev, np.eye(din))
        else:
            rhs = prev
        cons.append(traced == rhs)
    top = gammas[-1]
    dom = []
    for p, s in zip(cq.prior, blocks):
        c = (top - p * s >> 0) if sizes[-1] > 1 else (top >= p * s[0, 0])
        dom.append(c)
    prob = cp.Problem(cp.Minimize(gammas[0]), cons + dom)
    try:
        prob.solve(solver=config.solver, verbose=config.verbose, **config.solver_kwargs())
    except cp.error.SolverError as exc:
        raise SolverFailure(f"conic solver failed: {exc}") from exc
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SolverFailure(f"conic solver returned status {prob.status}")
    wall = 1000 * (time.perf_counter() - start)

    def value(v):
        val = np.asarray(v.value)
        return val.reshape(1, 1) if val.ndim == 0 else val

    gamma_hat = value(top)
    certificate = LabeledOperator(layout, gamma_hat)
    # primal residual: worst violation of the domination constraints
    resid = 0.0
    for p, s in zip(cq.prior, blocks):
        lam = np.linalg.eigvalsh(0.5 * (gamma_hat - p * s + (gamma_hat - p * s).conj().T))[0]
        resid = max(resid, -float(lam))
    chain_rep = validate_comb(certificate, structure, tol=1.0, normalized=False, psd_tol=1.0)
    resid = max(resid, chain_rep.max_residual)
    duals = []
    for c in dom:
        y = np.asarray(c.dual_value)
        if not real and y.ndim == 2:
            # hermitian cones are embedded as real symmetric ones of twice the
            # size, which halves the reported multiplier
            y = 2.0 * y
        duals.append(y.reshape(1, 1) if y.ndim == 0 else y)
    dual_value = float(sum(p * np.real(np.sum(s * y.T)) for p, s, y in zip(cq.prior, blocks, duals)))
    p_guess = float(np.real(prob.value))
    return _result(
        p_guess,
        status=prob.status,
        certificate=certificate,
        chain=tuple(value(g) for g in gammas),
        primal_residual=resid,
        duality_gap=abs(p_guess - dual_value),
        wall_ms=wall,
        solver=config.solver,
        duals=tuple(duals),
        structure=structure,
        layout=layout,
    )


# -- classical fast path ----------------------------------------------------------------

def _classical_tensors(cq: ClassicalQuantumComb) -> tuple[list[np.ndarray], list[tuple[int, int]]]:
    tensors = [b.causal_tensor().reshape(-1) for b in cq.blocks]
    return tensors, comb_dims(cq.structure, cq.layout)


def _chain_matrix(sizes: Sequence[int], dims: Sequence[tuple[int, int]]):
    """Sparse equality system ``sum_out f_k = f_{k-1} (x) 1_in`` stacked over k."""
    from scipy import sparse

    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rows, cols, vals = [], [], []
    row = 0
    for k, (din, dout) in enumerate(dims, start=1):
        prev = sizes[k - 1]
        n_rows = prev * din
        # f_k index (p, i, o) -> row (p, i); coefficient +1
        idx = np.arange(sizes[k])
        r = idx // dout
        rows.append(row + r)
        cols.append(offsets[k] + idx)
        vals.append(np.ones(sizes[k]))
        # -f_{k-1}[p] on every row (p, i)
        r2 = np.arange(n_rows)
        rows.append(row + r2)
        cols.append(offsets[k - 1] + r2 // din)
        vals.append(-np.ones(n_rows))
        row += n_rows
    a = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(row, int(offsets[-1]))
    )
    return a, offsets


def min_entropy_classical(cq: ClassicalQuantumComb, config: SolverConfig | None = None) -> MinEntropyResult:
    """Linear program over the diagonal of ``Gamma_hat`` for diagonal blocks."""
    from scipy.optimize import linprog

    if not cq.classical:
        raise InvalidInput("min_entropy_classical needs ClassicalComb blocks")
    start = time.perf_counter()
    tensors, dims = _classical_tensors(cq)
    weighted = np.stack([p * t for p, t in zip(cq.prior, tensors)])
    bound = weighted.max(axis=0)
    winner = weighted.argmax(axis=0)
    sizes = [1]
    for din, dout in dims:
        sizes.append(sizes[-1] * din * dout)
    a_eq, offsets = _chain_matrix(sizes, dims)
    c = np.zeros(int(offsets[-1]))
    c[0] = 1.0
    lower = np.zeros(int(offsets[-1]))
    lower[offsets[-2]:] = bound
    res = linprog(c, A_eq=a_eq, b_eq=np.zeros(a_eq.shape[0]), bounds=np.column_stack([lower, np.full(lower.size, np.inf)]),
                  method="highs")
    if res.status != 0:
        raise SolverFailure(f"linear program failed: {res.message}")
    f = res.x
    top = f[offsets[-2]:]
    chain = tuple(f[offsets[k]:offsets[k + 1]] for k in range(len(sizes)))
    # dual: reduced costs of the active lower bounds give the optimal strategy weights
    y = np.asarray(res.lower.marginals)[offsets[-2]:]
    duals = []
    for x in range(len(cq)):
        duals.append(np.where(winner == x, y, 0.0))
    dual_value = float(np.sum(y * bound))
    causal_layout = SpaceLayout(cq.layout.subset(cq.structure.labels))
    resid = max(0.0, float(np.max(bound - top)))
    return _result(
        float(res.fun),
        status="optimal",
        certificate=top,
        chain=chain,
        primal_residual=resid,
        duality_gap=abs(float(res.fun) - dual_value),
        wall_ms=1000 * (time.perf_counter() - start),
        solver="HIGHS",
        duals=tuple(duals),
        structure=cq.structure,
        layout=causal_layout,
    )


# -- strategies ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Strategy:
    effects: tuple  # E_x per classical value, LabeledOperator on the causal layout
    operator: LabeledOperator | None
    structure: TimeStepStructure
    achieved: float
    duality_gap: float
    valid: bool
    messages: tuple = ()


def extract_strategy(result: MinEntropyResult, cq: ClassicalQuantumComb,
                     gap_tol: float = DUALITY_GAP_TOL, tol: float = 1e-6) -> Strategy:
    """Optimal strategy ``E = sum_x |x><x| (x) E_x`` from the dual variables.

    ``E_x`` is the transpose of the dual variable of ``Gamma_hat >= P(x) sigma_x``.
    The strategy is checked as a normalized comb on the dual structure ending
    in the classical guess, and its achieved probability ``Tr[D E^T]`` is
    compared with the primal value.
    """
    if not result.duals:
        raise InvalidInput("result carries no dual variables")
    layout = result.layout
    structure = dual_structure(cq.structure, final_output=cq.x_label)
    if cq.classical:
        effects = tuple(LabeledOperator(layout, np.diag(y)) for y in result.duals)
    else:
        effects = tuple(LabeledOperator(layout, np.asarray(y).T) for y in result.duals)
    achieved = strategy_probability(cq, effects)
    gap = abs(achieved - result.p_guess)
    messages = []
    if cq.classical:
        k = len(effects)
        stacked = np.concatenate([np.diag(e.data).real for e in effects])
        full_layout = SpaceLayout((SubsystemLabel(cq.x_label, k),) + tuple(layout))
        rep = validate_classical_comb(ClassicalComb(full_layout, stacked, structure), tol, normalized=True)
        op = None
    else:
        op = strategy_operator(effects, cq.x_label)
        rep = validate_comb(op, structure, tol, normalized=True, psd_tol=tol)
    valid = rep.valid and gap <= gap_tol
    messages.extend(rep.messages)
    if gap > gap_tol:
        messages.append(f"duality gap {gap:.3e} exceeds {gap_tol:.1e}")
    return Strategy(effects, op, structure, achieved, gap, valid, tuple(messages))


def solve_assembled(cq: ClassicalQuantumComb, config: SolverConfig | None = None) -> float:
    """Guessing probability from the undecomposed constraint ``I_X (x) Gamma_hat >= D``.

    Only meant for small instances; used to cross-check the block formulation.
    """
    import cvxpy as cp

    config = config or SolverConfig()
    blocks, layout = _causal_blocks(cq)
    dims = comb_dims(cq.structure, layout)
    sizes = [1]
    for din, dout in dims:
        sizes.append(sizes[-1] * din * dout)
    gammas = [cp.Variable() if s == 1 else cp.Variable((s, s), hermitian=True) for s in sizes]
    cons = []
    for k, (din, dout) in enumerate(dims, start=1):
        gk, prev = gammas[k], gammas[k - 1]
        traced = cp.partial_trace(gk, [sizes[k - 1] * din, dout], axis=1) if dout > 1 else gk
        rhs = prev * np.eye(din) if sizes[k - 1] == 1 else (cp.kron(prev, np.eye(din)) if din > 1 else prev)
        cons.append(traced == rhs)
    k = len(cq)
    d = np.zeros((k * sizes[-1],) * 2, dtype=complex)
    for x, (p, s) in enumerate(zip(cq.prior, blocks)):
        d[x * sizes[-1]:(x + 1) * sizes[-1], x * sizes[-1]:(x + 1) * sizes[-1]] = p * s
    cons.append(cp.kron(np.eye(k), gammas[-1]) - d >> 0)
    prob = cp.Problem(cp.Minimize(gammas[0]), cons)
    prob.solve(solver=config.solver, **config.solver_kwargs())
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SolverFailure(f"conic solver returned status {prob.status}")
    return float(prob.value)


# -- classical bounds ------------------------------------------------------------------

def _io_axes(cq: ClassicalQuantumComb) -> tuple[list[int], list[int], list[int]]:
    """Causal-order axis positions of inputs and outputs, and the axis dims."""
    labels = cq.structure.labels
    inputs = set(cq.structure.inputs)
    dims = [cq.layout.dim_of([n]) for n in labels]
    ins = [i for i, n in enumerate(labels) if n in inputs]
    outs = [i for i, n in enumerate(labels) if n not in inputs]
    return ins, outs, dims


def classical_bounds(cq: ClassicalQuantumComb) -> tuple[float, float]:
    """Lower and upper bounds on the guessing probability of a classical comb.

    lower = sum_{a_in, a_out} max_x P(x) P(a_out | x, a_in) / dim(in)
    upper = sum_{a_out} max_{x, a_in} P(x) P(a_out | x, a_in)
    """
    if not cq.classical:
        raise InvalidInput("classical_bounds needs diagonal (ClassicalComb) blocks")
    ins, outs, dims = _io_axes(cq)
    lower_max = None
    upper_max = None
    for p, b in zip(cq.prior, cq.blocks):
        t = p * b.causal_tensor()
        lower_max = t if lower_max is None else np.maximum(lower_max, t)
        u = t.max(axis=tuple(ins)) if ins else t
        upper_max = u if upper_max is None else np.maximum(upper_max, u)
    d_in = int(np.prod([dims[i] for i in ins])) if ins else 1
    return float(lower_max.sum() / d_in), float(upper_max.sum())


def _group_max_sum(keys: np.ndarray, vals: np.ndarray) -> float:
    if keys.size == 0:
        return 0.0
    order = np.argsort(keys, kind="stable")
    keys, vals = keys[order], vals[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    return float(np.maximum.reduceat(vals, starts).sum())


def multi_round_bounds(cq: ClassicalQuantumComb, m: int, cap: int = BOUNDS_CAP) -> tuple[float, float]:
    """The bounds of :func:`classical_bounds` for ``m`` independent rounds, from sparse supports.

    Only the nonzero entries of each block are expanded, so the cost is
    ``|X| * s^m`` for blocks with ``s`` nonzero entries.
    """
    if not cq.classical:
        raise InvalidInput("multi_round_bounds needs diagonal (ClassicalComb) blocks")
    m = int(m)
    if m < 1:
        raise InvalidInput("number of rounds must be at least 1")
    ins, outs, dims = _io_axes(cq)
    n_all = int(np.prod(dims))
    n_out = int(np.prod([dims[i] for i in outs])) if outs else 1
    d_in = int(np.prod([dims[i] for i in ins])) if ins else 1
    supports = []
    total = 0
    for b in cq.blocks:
        flat = b.causal_tensor().reshape(-1)
        nz = np.flatnonzero(flat > 0)
        supports.append((nz, flat[nz]))
        total += nz.size**m
    if total > cap:
        raise CapExceeded(f"{m}-round bounds would expand {total} entries (cap {cap})")
    if float(n_all) ** m >= 2**62:
        raise CapExceeded("joint index space too large for 64-bit keys")
    # output part of each single-round index
    digits = np.unravel_index(np.arange(n_all), dims)
    out_index = np.zeros(n_all, dtype=np.int64)
    for ax in outs:
        out_index = out_index * dims[ax] + digits[ax]
    all_keys, out_keys, values = [], [], []
    for p, (nz, val) in zip(cq.prior, supports):
        key = np.zeros(1, dtype=np.int64)
        okey = np.zeros(1, dtype=np.int64)
        v = np.full(1, float(p))
        for _ in range(m):
            key = (key[:, None] * n_all + nz[None, :]).reshape(-1)
            okey = (okey[:, None] * n_out + out_index[nz][None, :]).reshape(-1)
            v = (v[:, None] * val[None, :]).reshape(-1)
        all_keys.append(key)
        out_keys.append(okey)
        values.append(v)
    keys = np.concatenate(all_keys)
    okeys = np.concatenate(out_keys)
    vals = np.concatenate(values)
    lower = _group_max_sum(keys, vals) / float(d_in) ** m
    upper = _group_max_sum(okeys, vals)
    return lower, upper


# -- rounds --------------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundValue:
    """Guessing probability after ``m`` rounds: exact when ``exact`` is set, else bracketed."""

    m: int
    lower: float
    upper: float
    exact: float | None

    def to_dict(self) -> dict:
        return {"m": self.m, "lower": self.lower, "upper": self.upper, "exact": self.exact}


@dataclass(frozen=True)
class MonotonicityReport:
    rounds: tuple
    violations: tuple  # (m, message)
    strict_increases: tuple  # m with lower(m) > upper(m - 1)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "rounds": [r.to_dict() for r in self.rounds],
            "violations": [list(v) for v in self.violations],
            "strict_increases": list(self.strict_increases),
            "ok": self.ok,
        }


def monotonicity_check(cq: ClassicalQuantumComb, m_max: int, config: SolverConfig | None = None,
                       tol: float = 1e-6, bounds_cap: int = BOUNDS_CAP) -> MonotonicityReport:
    """Guessing probability for ``m = 1..m_max`` rounds and a check that it never decreases.

    Each round count is solved exactly while the ``m``-round block fits under
    ``config.dim_cap``.  Beyond the cap, classical instances fall back to the
    combinatorial bounds, and when those are out of reach too (or the instance
    is quantum) to the trivial bracket ``[max_x P(x), 1]``.  A violation is an
    ``m`` whose upper value lies below the lower value of ``m - 1`` by more
    than ``tol``.
    """
    config = config or SolverConfig()
    if int(m_max) < 1:
        raise InvalidInput("m_max must be at least 1")
    rounds = []
    for m in range(1, int(m_max) + 1):
        try:
            cm = cq if m == 1 else multi_round(cq, m, cap=config.dim_cap)
            p = min_entropy(cm, config).p_guess
            rounds.append(RoundValue(m, p, p, p))
        except CapExceeded:
            # guessing from the prior alone is always possible
            lo, up = float(cq.prior.max()), 1.0
            if cq.classical:
                try:
                    lo, up = multi_round_bounds(cq, m, cap=bounds_cap)
                except CapExceeded:
                    pass
            rounds.append(RoundValue(m, lo, up, None))
    violations, strict = [], []
    for prev, cur in zip(rounds, rounds[1:]):
        if cur.upper < prev.lower - tol:
            violations.append((cur.m, f"round {cur.m} upper {cur.upper:.9g} < round {prev.m} lower {prev.lower:.9g}"))
        if cur.lower > prev.upper + tol:
            strict.append(cur.m)
    return MonotonicityReport(tuple(rounds), tuple(violations), tuple(strict))
