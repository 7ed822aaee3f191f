"""Guessing probability restricted to observational strategies.

An observational strategy measures every intermediate qubit wire with a fixed
rank-1 projector ``{|psi><psi|, I - |psi><psi|}``, reports the outcome as the
classical input of the next step and finishes with an outcome-dependent POVM
on the terminal wire.  For Bloch directions ``n_1..n_k`` the success
probability is

    sum_c  max_POVM  sum_x Tr[M_x tau_x^c],
    tau_x^c = P(x) Tr_{A_1..A_k}[sigma_x (Pi_1^{c_1} (x) |c_1><c_1| (x) ... (x) I)],

and ``tau_x^c`` is multilinear in the Bloch vectors.  The coefficients of that
expansion are precomputed once, so a grid point only costs a small
state-discrimination problem per outcome branch.

The grid is screened with a batched fixed-point iteration for minimum-error
discrimination.  Every screened value is a feasible POVM value (a lower
bound) and comes with a dual certificate ``Y >= tau_x`` (an upper bound).
The best points are polished with Nelder-Mead and the final value is an exact
SDP per branch.
"""

from __future__ import annotations

import itertools
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .combs import ClassicalQuantumComb
from .errors import InvalidInput, SolverFailure

PAULIS = np.array([
    [[1, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

DEFAULT_MESH = 64
SCREEN_ITERS = 400
SCREEN_TOL = 1e-7
REFINE_ITERS = 600
CHUNK = 4096


@dataclass(frozen=True)
class ObservationalProblem:
    """Multilinear coefficients ``R[x, c, i_1..i_k]`` of the branch ensembles."""

    coeffs: np.ndarray  # shape (K, 2**k, 4**k, d, d)
    wires: tuple  # names of the measured output wires
    terminal: tuple  # names of the terminal output spaces
    outcome_labels: tuple

    @property
    def k(self) -> int:
        return len(self.wires)

    @property
    def classes(self) -> int:
        return self.coeffs.shape[0]

    @property
    def terminal_dim(self) -> int:
        return self.coeffs.shape[-1]


@dataclass(frozen=True, eq=False)
class ObservationalResult:
    p_guess: float
    directions: np.ndarray  # (k, 3) Bloch vectors of the "0" projectors
    povms: dict  # outcome string -> (K, d, d) POVM on the terminal wire
    grid_best: float
    grid_upper: float
    grid_values: np.ndarray
    mesh: int
    refined: bool
    mesh_warning: bool
    wall_ms: float

    @property
    def angles(self) -> np.ndarray:
        """(polar, azimuth) of every projector direction."""
        d = self.directions
        return np.column_stack([np.arccos(np.clip(d[:, 2], -1, 1)), np.arctan2(d[:, 1], d[:, 0])])

    def to_dict(self) -> dict:
        return {
            "p_guess": self.p_guess,
            "directions": self.directions.tolist(),
            "angles": self.angles.tolist(),
            "grid_best": self.grid_best,
            "grid_upper": self.grid_upper,
            "mesh": self.mesh,
            "grid_points": int(self.grid_values.size),
            "refined": bool(self.refined),
            "mesh_warning": self.mesh_warning,
            "wall_ms": self.wall_ms,
        }


def observational_problem(cq: ClassicalQuantumComb) -> ObservationalProblem:
    """Check the shape ``C -> A_1, C_1 -> A_2, ..., C_k -> T`` and precompute coefficients.

    Every ``A_j`` and ``C_j`` must be a qubit; the terminal wire ``T`` may be
    any collection of spaces.
    """
    structure = cq.structure
    layout = cq.layout
    steps = list(structure)
    if len(steps) < 2:
        raise InvalidInput("observational search needs at least one measured wire before the terminal wire")
    if steps[0][0]:
        raise InvalidInput("the first step must have no input")
    wires, outcomes = [], []
    for j, (ins, outs) in enumerate(steps[:-1]):
        nxt_ins = steps[j + 1][0]
        if len(outs) != 1 or layout.dim_of([outs[0]]) != 2:
            raise InvalidInput(f"step {j + 1} must output a single qubit wire, got {outs}")
        if len(nxt_ins) != 1 or layout.dim_of([nxt_ins[0]]) != 2:
            raise InvalidInput(f"step {j + 2} must take a single classical bit, got {nxt_ins}")
        wires.append(outs[0])
        outcomes.append(nxt_ins[0])
    terminal = tuple(steps[-1][1])
    if not terminal:
        raise InvalidInput("the last step must have a terminal output")
    k = len(wires)
    if k > 2:
        warnings.warn(f"observational search over {k} wires scales as mesh**{k}", RuntimeWarning, stacklevel=2)
    d = int(layout.dim_of(terminal))
    order = []
    for w, c in zip(wires, outcomes):
        order += [w, c]
    order += list(terminal)
    coeffs = np.zeros((len(cq), 2**k, 4**k, d, d), dtype=complex)
    for x, (p, block) in enumerate(zip(cq.prior, cq.blocks)):
        data = block.op.permute(order).data
        t = data.reshape([2] * (2 * k) + [d] + [2] * (2 * k) + [d])
        for ci, c in enumerate(itertools.product((0, 1), repeat=k)):
            idx = []
            for cj in c:
                idx += [slice(None), cj]
            sub = t[tuple(idx + [slice(None)] + idx + [slice(None)])]  # (a_1..a_k, T, b_1..b_k, T)
            # sum_{a,b} sub[a_1..a_k, t, b_1..b_k, s] prod_w P_{i_w}[b_w, a_w]
            a_ax, b_ax = list(range(k)), list(range(k + 1, 2 * k + 1))
            t_ax, s_ax = k, 2 * k + 1
            i_ax = list(range(2 * k + 2, 3 * k + 2))
            operands = [sub, a_ax + [t_ax] + b_ax + [s_ax]]
            for w in range(k):
                operands += [PAULIS, [i_ax[w], b_ax[w], a_ax[w]]]
            sub = np.einsum(*operands, i_ax + [t_ax, s_ax])
            coeffs[x, ci] = p * sub.reshape(4**k, d, d)
    return ObservationalProblem(coeffs, tuple(wires), terminal, tuple(outcomes))


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors."""
    if n < 1:
        raise InvalidInput("mesh must have at least one point")
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = np.pi * (1 + 5**0.5) * i
    r = np.sqrt(1 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _bloch_weights(n: np.ndarray) -> np.ndarray:
    """``w[b, c, i]``: Pauli coefficients of ``Pi^c = (I + (-1)^c n.sigma)/2``."""
    w = np.zeros((len(n), 2, 4))
    w[:, :, 0] = 0.5
    w[:, 0, 1:] = 0.5 * n
    w[:, 1, 1:] = -0.5 * n
    return w


def branch_ensembles(problem: ObservationalProblem, directions: np.ndarray) -> np.ndarray:
    """``tau[b, c, x]`` for a batch of direction tuples ``directions[b, wire, 3]``."""
    directions = np.asarray(directions, float)
    if directions.ndim == 2:
        directions = directions[None]
    bsz, k = directions.shape[:2]
    if k != problem.k:
        raise InvalidInput(f"need {problem.k} directions per point, got {k}")
    total = np.ones((bsz, 1, 1))
    for w in range(k):
        wts = _bloch_weights(directions[:, w])
        total = np.einsum("bcp,bdq->bcdpq", total, wts).reshape(bsz, total.shape[1] * 2, total.shape[2] * 4)
    return np.einsum("bcp,xcpkl->bcxkl", total, problem.coeffs)


def discriminate_iterative(states: np.ndarray, iters: int = SCREEN_ITERS,
                           tol: float = SCREEN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Batched minimum-error discrimination by the fixed-point iteration
    ``M_x <- L^{-1} tau_x M_x tau_x L^{-1}``, ``L^2 = sum_x tau_x M_x tau_x``.

    ``states`` has shape ``(B, K, d, d)``.  Returns ``(lower, upper)`` per
    problem: the value of the final POVM and the trace of the dual
    certificate ``Y = Herm(sum_x tau_x M_x) + max(0, lambda_max(tau_x - Y)) I``.
    """
    states = np.asarray(states, dtype=complex)
    bsz, kk, d, _ = states.shape
    povm = np.broadcast_to(np.eye(d, dtype=complex) / kk, states.shape).copy()
    lower = np.zeros(bsz)
    upper = np.full(bsz, np.inf)
    active = np.arange(bsz)
    check_every = 20
    for it in range(1, iters + 1):
        t = states[active]
        m = povm[active]
        a = t @ m @ t
        s = a.sum(axis=1)
        w, v = np.linalg.eigh(s)
        keep = w > 1e-12 * np.maximum(w.max(axis=-1, keepdims=True), 1e-300)
        inv = np.where(keep, 1.0 / np.sqrt(np.where(keep, w, 1.0)), 0.0)
        vh = v.conj().transpose(0, 2, 1)
        li = (v * inv[:, None, :]) @ vh
        ker = (v * (~keep)[:, None, :]) @ vh
        m = li[:, None] @ a @ li[:, None] + ker[:, None] / kk
        povm[active] = m
        if it % check_every == 0 or it == iters:
            lo, up = _bounds(t, m)
            lower[active] = lo
            upper[active] = up
            done = (up - lo) <= tol
            active = active[~done]
            if active.size == 0:
                break
    return lower, upper


def _bounds(t: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = t.shape[-1]
    lo = np.einsum("bkij,bkji->b", m, t).real
    h = np.einsum("bkij,bkjl->bil", t, m)
    h = 0.5 * (h + h.conj().transpose(0, 2, 1))
    lam = np.linalg.eigvalsh(t - h[:, None]).max(axis=(1, 2))
    up = np.einsum("bii->b", h).real + d * np.maximum(lam, 0.0)
    return lo, up


def _screen_chunk(args) -> tuple[np.ndarray, np.ndarray]:
    problem, directions = args
    tau = branch_ensembles(problem, directions)
    bsz, nc = tau.shape[:2]
    lo, up = discriminate_iterative(tau.reshape(bsz * nc, *tau.shape[2:]))
    return lo.reshape(bsz, nc).sum(axis=1), up.reshape(bsz, nc).sum(axis=1)


def screen(problem: ObservationalProblem, directions: np.ndarray, jobs: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper values for every direction tuple in ``directions[b, wire, 3]``."""
    chunks = [(problem, directions[i:i + CHUNK]) for i in range(0, len(directions), CHUNK)]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_screen_chunk, chunks))
    else:
        parts = [_screen_chunk(c) for c in chunks]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def discriminate_exact(states: np.ndarray, solver: str = "SCS", eps: float = 1e-9) -> tuple[float, np.ndarray]:
    """``max sum_x Tr[M_x tau_x]`` over POVMs, solved as an SDP."""
    import cvxpy as cp

    states = np.asarray(states, dtype=complex)
    kk, d, _ = states.shape
    if np.max(np.abs(states)) == 0:
        return 0.0, np.broadcast_to(np.eye(d) / kk, states.shape).copy()
    real = np.max(np.abs(states.imag)) < 1e-13
    ms = [cp.Variable((d, d), symmetric=True) if real else cp.Variable((d, d), hermitian=True) for _ in range(kk)]
    objective = sum(cp.real(cp.trace(m @ (s.real if real else s))) for m, s in zip(ms, states))
    cons = [m >> 0 for m in ms] + [sum(ms) == np.eye(d)]
    prob = cp.Problem(cp.Maximize(objective), cons)
    kwargs = {"eps": eps, "max_iters": 200000} if solver == "SCS" else {}
    prob.solve(solver=solver, **kwargs)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SolverFailure(f"discrimination SDP returned status {prob.status}")
    return float(prob.value), np.array([np.asarray(m.value) for m in ms])


def observational_value(problem: ObservationalProblem, directions: np.ndarray,
                        exact: bool = True) -> tuple[float, dict]:
    """Success probability of the best observational strategy with fixed projectors."""
    tau = branch_ensembles(problem, np.asarray(directions, float)[None])[0]
    labels = ["".join(map(str, c)) for c in itertools.product((0, 1), repeat=problem.k)]
    total, povms = 0.0, {}
    for lab, t in zip(labels, tau):
        if exact:
            val, m = discriminate_exact(t)
        else:
            lo, _ = discriminate_iterative(t[None], iters=4000, tol=1e-12)
            val, m = float(lo[0]), None
        total += val
        povms[lab] = m
    return total, povms


def _to_directions(params: np.ndarray) -> np.ndarray:
    pol, az = params[0::2], params[1::2]
    return np.column_stack([np.sin(pol) * np.cos(az), np.sin(pol) * np.sin(az), np.cos(pol)])


def _to_params(directions: np.ndarray) -> np.ndarray:
    out = []
    for n in directions:
        out += [np.arccos(np.clip(n[2], -1, 1)), np.arctan2(n[1], n[0])]
    return np.array(out)


def refine(problem: ObservationalProblem, start: np.ndarray) -> tuple[np.ndarray, float]:
    """Nelder-Mead over spherical angles starting from ``start[wire, 3]``."""
    from scipy.optimize import minimize

    def neg(params):
        tau = branch_ensembles(problem, _to_directions(params)[None])[0]
        lo, _ = discriminate_iterative(tau, iters=REFINE_ITERS, tol=1e-9)
        return -float(lo.sum())

    res = minimize(neg, _to_params(start), method="Nelder-Mead",
                   options={"xatol": 1e-5, "fatol": 1e-8, "maxiter": 200 * 2 * problem.k})
    return _to_directions(res.x), -float(res.fun)


def observational_search(cq: ClassicalQuantumComb, mesh: int = DEFAULT_MESH, refine_best: int = 2,
                         jobs: int = 1, exact: bool = True) -> ObservationalResult:
    """Best guessing probability over observational strategies.

    The grid is the product of ``mesh``-point Fibonacci spheres, one per
    measured wire.  The ``refine_best`` best grid points are polished locally,
    and the winner is re-evaluated with an exact SDP per outcome branch
    (``exact=False`` keeps the iterative value).  ``mesh_warning`` is set when
    refinement moves a projector by more than the grid spacing, which means
    the grid was too coarse to locate the optimum's basin reliably.
    """
    start = time.perf_counter()
    problem = observational_problem(cq)
    sphere = fibonacci_sphere(mesh)
    grid = np.array(list(itertools.product(range(mesh), repeat=problem.k)))
    directions = sphere[grid]  # (B, k, 3)
    lower, upper = screen(problem, directions, jobs=jobs)
    best_idx = int(np.argmax(lower))
    best_dirs, best_val, refined = directions[best_idx], float(lower[best_idx]), False
    mesh_warning = False
    spacing = np.sqrt(4 * np.pi / mesh)
    if refine_best > 0:
        for idx in np.argsort(-lower)[:refine_best]:
            dirs, val = refine(problem, directions[idx])
            if val > best_val + 1e-9:
                # n and -n give the same measurement with relabelled outcomes
                moved = np.arccos(np.clip(np.abs(np.sum(dirs * directions[idx], axis=1)), 0, 1)).max()
                mesh_warning = bool(moved > spacing)
                best_dirs, best_val, refined = dirs, val, True
    p, povms = observational_value(problem, best_dirs, exact=exact)
    values = lower.reshape((mesh,) * problem.k)
    return ObservationalResult(
        p_guess=float(p),
        directions=np.asarray(best_dirs),
        povms=povms,
        grid_best=float(lower.max()),
        grid_upper=float(upper.max()),
        grid_values=values,
        mesh=mesh,
        refined=refined,
        mesh_warning=mesh_warning,
        wall_ms=1000 * (time.perf_counter() - start),
    )
