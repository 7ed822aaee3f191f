"""Command-line front end.

Every subcommand reads optional defaults from a JSON config file (``--config``
or the ``COMBENTROPY_CONFIG`` environment variable), lets command-line flags
override them, and writes one report as JSON or CSV.  Exit codes: 0 success,
1 invalid input, 2 solver failure, 3 cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import bqc as bqcmod
from . import serialization
from .combs import ClassicalComb, ClassicalQuantumComb, Comb
from .entropy import SolverConfig, extract_strategy, min_entropy
from .errors import CapExceeded, CombError, InvalidInput
from .gflow import (
    OpenGraph,
    dag_to_json,
    enumerate_gflows,
    four_qubit_graph,
    induced_dag,
    orders_compatible,
    triangle_graph,
)
from .mbqc import build_D_calibr, build_D_gflow, build_D_mp, check_causal_equivalence, catalogue_subset
from .observational import DEFAULT_MESH, observational_search

CONFIG_ENV = "COMBENTROPY_CONFIG"

BQC_BUILTINS = {
    "minimal-3vertex": {"angle_count": 4, "rounds": 1},
    "minimal-3vertex-2rounds": {"angle_count": 8, "rounds": 2},
}
GFLOW_BUILTINS = {
    "four-qubit-15": list(range(1, 16)),
    "xy-restricted": [1, 2, 4, 5],
}
#: plane-sharing families with a common order, used for the equivalence report
EQUIVALENCE_FAMILIES = {"XY": [1, 2, 4, 5], "XZ": [6, 7, 9, 10], "YZ": [11, 13, 14, 15]}


# -- config ---------------------------------------------------------------------------------

def load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise InvalidInput(f"cannot read config {p}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"config {p}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InvalidInput(f"config {p}: expected a JSON object")
    return doc


def merged(args: argparse.Namespace, config: dict, keys: Sequence[str]) -> dict:
    """Config values overridden by every flag the user actually set."""
    out = {k: config[k] for k in keys if k in config}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def solver_config(opts: dict) -> SolverConfig:
    solver = opts.get("solver", {}) or {}
    if isinstance(solver, str):
        solver = {"name": solver}
    kwargs = {}
    if "name" in solver:
        kwargs["solver"] = str(solver["name"]).upper()
    if "eps" in solver:
        kwargs["eps"] = float(solver["eps"])
    if opts.get("dim_cap") is not None:
        kwargs["dim_cap"] = int(opts["dim_cap"])
    return SolverConfig(**kwargs)


def _hmin(p: float) -> float:
    return float(-math.log2(p)) if p > 0 else float("inf")


# -- bqc ------------------------------------------------------------------------------------

def _parse_output_key(key: Any) -> frozenset:
    if isinstance(key, str):
        parts = [s for s in key.replace("{", "").replace("}", "").split(",") if s.strip()]
        return frozenset(int(s) for s in parts)
    return frozenset(int(v) for v in key)


def bqc_instance_from(opts: dict) -> tuple[bqcmod.BqcInstance, int, dict | None]:
    builtin = opts.get("builtin")
    if builtin is not None and builtin not in BQC_BUILTINS:
        raise InvalidInput(f"unknown bqc builtin {builtin!r}; choose from {sorted(BQC_BUILTINS)}")
    base = dict(BQC_BUILTINS.get(builtin, {})) if builtin else {}
    graph = OpenGraph.from_dict(opts["graph"]) if "graph" in opts else triangle_graph()
    order = opts.get("total_order")
    if "angle_list" in opts:
        angle_set = bqcmod.AngleSet(tuple(float(a) for a in opts["angle_list"]))
    elif "angle_seed" in opts:
        angle_set = bqcmod.closed_angle_set(opts["angle_seed"], opts.get("angle_count"))
    else:
        count = int(opts.get("angle_count", base.get("angle_count", 4)))
        angle_set = bqcmod.default_angle_set(count)
    rounds = int(opts.get("rounds", base.get("rounds", 1)))
    if rounds < 1:
        raise InvalidInput("rounds must be at least 1")
    instance = bqcmod.bqc_instance(graph, angle_set, order)
    prior = None
    overrides = opts.get("prior_overrides")
    if overrides:
        prior = {_parse_output_key(k): float(v) for k, v in dict(overrides).items()}
    return instance, rounds, prior


def cmd_bqc(opts: dict) -> dict:
    instance, rounds, prior = bqc_instance_from(opts)
    config = solver_config(opts)
    notices = []
    cq = bqcmod.build_D_client(instance, prior)
    result: dict[str, Any] = {}
    try:
        res = min_entropy(cq, config)
        result["exact"] = res.p_guess
        result["h_min_exact"] = res.h_min
    except CapExceeded as exc:
        notices.append(f"exact value skipped: {exc}")
    lower, upper = bqcmod.multi_round_bounds(cq, rounds) if rounds > 1 else bqcmod.classical_bounds(cq)
    result.update({
        "rounds": rounds,
        "lower": lower,
        "upper": upper,
        "hmin_bounds": [_hmin(upper), _hmin(lower)],
    })
    if rounds > 1:
        notices.append(f"exact is the single-round value; rounds={rounds} is bracketed by lower and upper")
    p_o = bqcmod._output_prior(instance.output_list, prior)
    thm = {"any_round_hmin": bqcmod.any_round_bound(p_o)}
    if prior is None:
        thm["single_round_hmin"] = bqcmod.single_round_bound(instance.n, len(instance.output_list))
        result["thm1_bound_hmin"] = thm["single_round_hmin"]
    result["theorem_bounds"] = thm
    result["instance"] = {
        "graph": instance.graph.to_dict(),
        "total_order": list(instance.order),
        "angle_set": instance.angle_set.to_list(),
        "output_sets": [sorted(o) for o in instance.output_list],
        "gflows": {",".join(map(str, sorted(o))): [g.describe() for g in instance.outputs[o]]
                   for o in instance.output_list},
        "classical_values": len(cq),
        "block_length": cq.block_dim,
    }
    if opts.get("export"):
        serialization.save(cq, opts["export"])
    result["notices"] = notices
    return result


# -- gflow / planes -------------------------------------------------------------------------

def _gflow_family(opts: dict):
    builtin = opts.get("builtin") or ("four-qubit-15" if "graph" not in opts else None)
    if builtin is not None:
        if builtin not in GFLOW_BUILTINS:
            choices = sorted(GFLOW_BUILTINS) + ["planes"]
            raise InvalidInput(f"unknown gflow builtin {builtin!r}; choose from {choices}")
        indices = opts.get("catalogue", GFLOW_BUILTINS[builtin])
        return four_qubit_graph(), catalogue_subset(int(i) for i in indices), builtin
    graph = OpenGraph.from_dict(opts["graph"])
    gflows = enumerate_gflows(graph)
    if not gflows:
        raise InvalidInput("the graph has no gflow")
    return graph, gflows, "custom"


def cmd_gflow(opts: dict) -> dict:
    if opts.get("builtin") == "planes":
        return cmd_planes(opts)
    graph, gflows, label = _gflow_family(opts)
    config = solver_config(opts)
    cq = build_D_gflow(graph, gflows)
    res = min_entropy(cq, config)
    strategy = extract_strategy(res, cq)
    out: dict[str, Any] = {
        "instance": label,
        "graph": graph.to_dict(),
        "gflows": [g.describe() for g in gflows],
        "orders_compatible": orders_compatible(gflows),
        "optimal": res.p_guess,
        "h_min": res.h_min,
        "solver": res.to_dict(),
        "strategy": {"achieved": strategy.achieved, "duality_gap": strategy.duality_gap, "valid": strategy.valid},
        "dags": {g.describe(): json.loads(dag_to_json(induced_dag(g, graph))) for g in gflows},
    }
    if opts.get("observational", True):
        obs = observational_search(cq, mesh=int(opts.get("mesh", DEFAULT_MESH)),
                                   refine_best=int(opts.get("refine", 2)), jobs=int(opts.get("jobs", 1)))
        d = obs.to_dict()
        d.pop("grid_values", None)
        d.pop("povms", None)
        out["observational"] = d["p_guess"]
        out["observational_search"] = d
    if label == "four-qubit-15":
        out["equivalence_deviation"] = {
            plane: check_causal_equivalence(catalogue_subset(idx), graph, seed=int(opts.get("seed", 0)))
            for plane, idx in EQUIVALENCE_FAMILIES.items()
        }
    elif label == "xy-restricted":
        out["equivalence_deviation"] = {
            "XY": check_causal_equivalence(gflows, graph, seed=int(opts.get("seed", 0)))
        }
    if opts.get("export"):
        serialization.save(cq, opts["export"])
    return out


def cmd_planes(opts: dict) -> dict:
    config = solver_config(opts)
    cq = build_D_mp()
    res = min_entropy(cq, config)
    strategy = extract_strategy(res, cq)
    if opts.get("export"):
        serialization.save(cq, opts["export"])
    return {
        "instance": "planes",
        "planes": list(cq.names),
        "optimal": res.p_guess,
        "h_min": res.h_min,
        "solver": res.to_dict(),
        "strategy": {"achieved": strategy.achieved, "duality_gap": strategy.duality_gap, "valid": strategy.valid},
    }


# -- calibration ----------------------------------------------------------------------------

def cmd_calibrate(opts: dict) -> list[dict]:
    lo = int(opts.get("min_count", 2))
    hi = int(opts.get("max_count", 8))
    if not (2 <= lo <= hi <= 32):
        raise InvalidInput(f"angle counts must satisfy 2 <= min <= max <= 32, got {lo}..{hi}")
    config = solver_config(opts)
    rows = []
    for n in range(lo, hi + 1):
        res = min_entropy(build_D_calibr(n), config)
        rows.append({"angle_count": n, "p_guess": res.p_guess, "prior_baseline": 1.0 / n})
    return rows


# -- files ----------------------------------------------------------------------------------

def _validate_obj(obj, tol: float | None) -> dict:
    if isinstance(obj, ClassicalQuantumComb):
        reps = obj.validate_blocks(tol)
        return {
            "kind": "classical_quantum_comb",
            "valid": all(r.valid for r in reps),
            "max_residual": max(r.max_residual for r in reps),
            "blocks": [dict(r.to_dict(), name=n) for n, r in zip(obj.names, reps)],
        }
    rep = obj.validate() if tol is None else obj.validate(tol)
    kind = "classical_comb" if isinstance(obj, ClassicalComb) else "comb"
    return dict(rep.to_dict(), kind=kind)


def cmd_validate(opts: dict) -> dict:
    if not opts.get("file"):
        raise InvalidInput("validate needs a comb file")
    obj = serialization.load(opts["file"])
    return _validate_obj(obj, opts.get("tol"))


def _certificate(strategy, cq: ClassicalQuantumComb):
    if cq.classical:
        from .operators import SpaceLayout, SubsystemLabel

        layout = SpaceLayout((SubsystemLabel(cq.x_label, len(cq)),) + tuple(strategy.effects[0].layout))
        stacked = np.concatenate([np.diag(e.data).real for e in strategy.effects])
        return ClassicalComb(layout, stacked, strategy.structure)
    return Comb(strategy.operator, strategy.structure)


def cmd_min_entropy(opts: dict) -> dict:
    if not opts.get("file"):
        raise InvalidInput("min-entropy needs a comb file")
    obj = serialization.load(opts["file"])
    if not isinstance(obj, ClassicalQuantumComb):
        raise InvalidInput("min-entropy needs a classical_quantum_comb document")
    res = min_entropy(obj, solver_config(opts))
    out = res.to_dict()
    if opts.get("certificate"):
        strategy = extract_strategy(res, obj)
        serialization.save(_certificate(strategy, obj), opts["certificate"])
        out["certificate"] = {"path": str(opts["certificate"]), "valid": strategy.valid,
                              "duality_gap": strategy.duality_gap}
    return out


# -- output ---------------------------------------------------------------------------------

def _flatten(prefix: str, value: Any, out: list) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, (list, tuple)) and value and isinstance(value[0], (dict, list, tuple)):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, json.dumps(value) if isinstance(value, (list, tuple)) else value))


def render(results: Any, report: dict, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        if isinstance(results, list) and results and isinstance(results[0], dict):
            writer = csv.DictWriter(buf, fieldnames=list(results[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(results)
        else:
            rows: list = []
            _flatten("", results, rows)
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["key", "value"])
            writer.writerows(rows)
        return buf.getvalue()
    return json.dumps(report, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# -- parser ---------------------------------------------------------------------------------

COMMANDS = {
    "bqc": (cmd_bqc, "json", ["builtin", "graph", "total_order", "angle_seed", "angle_list", "angle_count",
                              "rounds", "prior_overrides", "export"]),
    "gflow": (cmd_gflow, "json", ["builtin", "graph", "catalogue", "mesh", "refine", "observational", "export"]),
    "planes": (cmd_planes, "json", ["export"]),
    "calibrate": (cmd_calibrate, "csv", ["min_count", "max_count"]),
    "validate": (cmd_validate, "json", ["file"]),
    "min-entropy": (cmd_min_entropy, "json", ["file", "certificate"]),
}
COMMON = ["tol", "dim_cap", "jobs", "seed", "solver"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], help="report format")
    common.add_argument("--tol", type=float, help="validation tolerance")
    common.add_argument("--dim-cap", dest="dim_cap", type=int, help="largest block dimension solved exactly")
    common.add_argument("--jobs", type=int, help="worker processes for grid searches")
    common.add_argument("--seed", type=int, help="seed for randomized checks")

    parser = argparse.ArgumentParser(prog="combentropy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bqc", parents=[common], help="blind computing client comb: exact value and bounds")
    p.add_argument("--builtin", help=f"one of {sorted(BQC_BUILTINS)}")
    p.add_argument("--angle-count", dest="angle_count", type=int, choices=[4, 8], help="builtin angle set size")
    p.add_argument("--rounds", type=int, help="number of protocol rounds")
    p.add_argument("--export", help="write the client comb as JSON")

    p = sub.add_parser("gflow", parents=[common], help="learning the gflow of a measurement pattern")
    p.add_argument("--builtin", help=f"one of {sorted(GFLOW_BUILTINS) + ['planes']}")
    p.add_argument("--mesh", type=int, help="Fibonacci-sphere points per measured wire")
    p.add_argument("--refine", type=int, help="grid points polished locally")
    p.add_argument("--no-observational", dest="observational", action="store_const", const=False,
                   help="skip the observational search")
    p.add_argument("--export", help="write the comb as JSON")

    p = sub.add_parser("planes", parents=[common], help="learning the measurement plane")
    p.add_argument("--export", help="write the comb as JSON")

    p = sub.add_parser("calibrate", parents=[common], help="guessing probability against angle count")
    p.add_argument("--min", dest="min_count", type=int, help="smallest angle count (default 2)")
    p.add_argument("--max", dest="max_count", type=int, help="largest angle count (default 8)")

    p = sub.add_parser("validate", parents=[common], help="check a comb JSON file")
    p.add_argument("file", nargs="?")

    p = sub.add_parser("min-entropy", parents=[common], help="solve a classical-quantum comb JSON file")
    p.add_argument("file", nargs="?")
    p.add_argument("--certificate", help="write the optimal strategy as comb JSON")
    return parser


@dataclass(frozen=True)
class Outcome:
    exit_code: int
    text: str
    is_error: bool
    out_path: str | None


def run(argv: Sequence[str] | None = None) -> Outcome:
    """Execute one command and return its exit code and rendered report."""
    parser = build_parser()
    args = parser.parse_args(argv)
    func, default_fmt, keys = COMMANDS[args.command]
    start = time.perf_counter()
    try:
        config = load_config(args.config)
        opts = merged(args, config, keys + COMMON)
        seed = int(opts.get("seed", 0))
        results = func(opts)
    except CombError as exc:
        err = {"error": {"type": type(exc).__name__, "message": str(exc)}, "exit_code": exc.exit_code}
        return Outcome(exc.exit_code, json.dumps(err, indent=2) + "\n", True, None)
    code = 1 if args.command == "validate" and not results.get("valid", False) else 0
    fmt = args.format or config.get("format") or default_fmt
    report = {
        "command": args.command,
        "scenario": dict(opts),
        "results": results,
        "environment": {
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "seed": seed,
            "wall_ms": 1000 * (time.perf_counter() - start),
        },
    }
    return Outcome(code, render(results, report, fmt), False, args.out or config.get("out"))


def main(argv: Sequence[str] | None = None) -> int:
    outcome = run(argv)
    if outcome.is_error:
        sys.stderr.write(outcome.text)
    elif outcome.out_path:
        Path(outcome.out_path).write_text(outcome.text)
    else:
        sys.stdout.write(outcome.text)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
