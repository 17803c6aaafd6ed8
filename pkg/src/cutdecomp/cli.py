"""Command line interface.

Subcommands: decompose, cutnorm, check, gen, tensor, maxcsp.  JSON outputs
carry a manifest (command, input hashes, parameters, seed, backend,
version, timings); repeated runs with the same inputs and seed produce
byte-identical documents except for manifest.timings.  Exit codes: 0 on
success, 1 on usage or input errors, 2 when a requested verification fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .csp import approx_max_csp, read_csp_text
from .engine import (
    decompose,
    partition_from_json,
    synthesize_params,
    verify_result,
    DecompositionResult,
    DecompositionTrace,
)
from .kernels import backend_name
from .measure import (
    MatrixFormatError,
    RealMatrix,
    RectPartition,
    Rectangle,
    StepMatrix,
    conditional_expectation,
    cut_norm_exact,
    density,
    format_matrix_text,
    read_matrix_text,
)
from .oracle import OracleConfig
from .regularity import generate_w_random, read_w_grid
from .tensor import read_tensor_text, tensor_decompose, tensor_verify
from fractions import Fraction


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; reserve 2 for failed
    verification and use 1 for usage errors instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _json_dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _manifest(command: str, inputs: dict, params: dict, seed, oracle, t0: float) -> dict:
    return {
        "command": command,
        "inputs": inputs,
        "params": params,
        "seed": seed,
        "oracle": oracle,
        "backend": backend_name(),
        "version": __version__,
        "timings": {"wall_s": time.perf_counter() - t0},
    }


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_p(raw: str) -> float:
    if raw.lower() in ("inf", "infinity"):
        return math.inf
    return float(raw)


def _oracle_from_args(args) -> tuple[OracleConfig, float]:
    """Build the oracle configuration and the schedule guarantee a0."""
    if args.oracle == "exact":
        cfg = OracleConfig(kind="exact", alpha_claim=1.0, limit=args.limit)
        a0 = args.a0 if args.a0 is not None else 1.0
    else:
        alpha = args.alpha if args.alpha is not None else 0.3
        cfg = OracleConfig(
            kind="heuristic",
            alpha_claim=alpha,
            seed=args.seed,
            restarts=args.restarts,
            limit=args.limit,
        )
        a0 = args.a0 if args.a0 is not None else alpha
    return cfg, a0


def _oracle_json(cfg: OracleConfig) -> dict:
    return {
        "kind": cfg.kind,
        "alpha_claim": cfg.alpha_claim,
        "seed": cfg.seed,
        "restarts": cfg.restarts,
        "limit": cfg.limit,
    }


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------


def cmd_decompose(args) -> int:
    t0 = time.perf_counter()
    f = read_matrix_text(args.infile)
    cfg, a0 = _oracle_from_args(args)
    params = synthesize_params(args.eps, args.C, _parse_p(args.p), a0)
    result = decompose(f, params, cfg)
    verification = None
    if args.verify:
        verification = verify_result(f, result, params, limit=args.limit)
    doc = {
        "manifest": _manifest(
            "decompose",
            {"matrix": _sha256(args.infile)},
            params.to_json_dict(),
            args.seed,
            _oracle_json(cfg),
            t0,
        ),
        "params": params.to_json_dict(),
        "result": result.to_json_dict(),
        "verification": None if verification is None else verification.to_json_dict(),
    }
    if args.format == "json":
        _emit(args, _json_dump(doc))
    else:
        lines = [
            f"matrix {f.n1} x {f.n2}, {len(f.ones)} ones, density {float(density(f)):.6g}",
            f"eps={args.eps} C={args.C} p={args.p} a0={a0} tau={params.tau}",
            f"rounds: {len(result.trace.steps)}, halted: {result.trace.halted}",
            f"cut matrices: {len(result.cut_matrices)} on {result.partition.n_cells} cells",
            f"certificate: {result.certificate['status']}",
        ]
        if verification is not None:
            lines.append(f"verification: {verification.status}")
            for name, res, detail in verification.clauses:
                lines.append(f"  {name}: {res} ({detail})")
        _emit(args, "\n".join(lines) + "\n")
    if verification is not None and verification.status == "failed":
        return 2
    return 0


# ---------------------------------------------------------------------------
# cutnorm
# ---------------------------------------------------------------------------


def cmd_cutnorm(args) -> int:
    t0 = time.perf_counter()
    f = read_matrix_text(args.infile)
    if args.center:
        step = conditional_expectation(f, RectPartition.trivial(f.n1, f.n2))
        g = RealMatrix.residual(f, step)
    else:
        g = f
    value, witness = cut_norm_exact(g, limit=args.limit)
    doc = {
        "manifest": _manifest(
            "cutnorm",
            {"matrix": _sha256(args.infile)},
            {"center": args.center, "limit": args.limit},
            None,
            None,
            t0,
        ),
        "value": value,
        "witness": {"rows": sorted(witness.rows), "cols": sorted(witness.cols)},
    }
    if args.format == "json":
        _emit(args, _json_dump(doc))
    else:
        _emit(
            args,
            f"cut norm: {value:.9g}\nrows: {sorted(witness.rows)}\ncols: {sorted(witness.cols)}\n",
        )
    return 0


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    t0 = time.perf_counter()
    f = read_matrix_text(args.matrix)
    with open(args.result, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    pj = doc["params"]
    p = math.inf if pj["p"] == "inf" else float(pj["p"])
    params = synthesize_params(pj["eps"], pj["C"], p, pj["a0"])
    partition = partition_from_json(doc["result"]["partition"])
    by_cell = {}
    for cm in doc["result"]["cut_matrices"]:
        rect = Rectangle.of(cm["rows"], cm["cols"])
        by_cell[rect] = Fraction(cm["value"])
    values = tuple(by_cell.get(cell, Fraction(0)) for cell in partition.cells)
    step = StepMatrix(partition, values)
    result = DecompositionResult(
        partition=partition,
        step=step,
        cut_matrices=tuple((r, v) for r, v in by_cell.items() if v != 0),
        trace=DecompositionTrace(steps=(), halted=True, stalled=False, budget_exhausted=False),
        certificate=doc["result"].get("certificate", {}),
    )
    report = verify_result(f, result, params, limit=args.limit)
    out = {
        "manifest": _manifest(
            "check",
            {"matrix": _sha256(args.matrix), "result": _sha256(args.result)},
            params.to_json_dict(),
            None,
            None,
            t0,
        ),
        "verification": report.to_json_dict(),
    }
    if args.format == "json":
        _emit(args, _json_dump(out))
    else:
        lines = [f"verification: {report.status}"]
        for name, res, detail in report.clauses:
            lines.append(f"  {name}: {res} ({detail})")
        _emit(args, "\n".join(lines) + "\n")
    return 2 if report.status == "failed" else 0


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.grid:
        grid = read_w_grid(args.grid)
    else:
        grid = np.ones((1, 1))
    f = generate_w_random(
        grid, args.n, args.density, args.seed, symmetric=args.symmetric, n2=args.n2
    )
    header = (
        f"# generated: n={args.n} n2={args.n2 or args.n} density={args.density} "
        f"seed={args.seed} symmetric={args.symmetric} grid={args.grid or 'uniform'}\n"
    )
    _emit(args, header + format_matrix_text(f))
    return 0


# ---------------------------------------------------------------------------
# tensor
# ---------------------------------------------------------------------------


def cmd_tensor(args) -> int:
    t0 = time.perf_counter()
    t = read_tensor_text(args.infile)
    cfg, _ = _oracle_from_args(args)
    result = tensor_decompose(t, args.eps, cfg)
    verification = None
    if args.verify:
        verification = tensor_verify(t, result, args.eps)
    doc = {
        "manifest": _manifest(
            "tensor",
            {"tensor": _sha256(args.infile)},
            {"eps": args.eps},
            args.seed,
            _oracle_json(cfg),
            t0,
        ),
        "result": result.to_json_dict(),
        "verification": verification,
    }
    if args.format == "json":
        _emit(args, _json_dump(doc))
    else:
        lines = [
            f"tensor dims {list(t.dims)}, {len(t.ones)} ones",
            f"cut tensors: {len(result.cut_tensors)}",
        ]
        if verification is not None:
            lines.append(
                f"residual cut norm {verification['residual_cut_norm']:.6g} "
                f"vs bound {verification['bound']:.6g}: "
                f"{'ok' if verification['ok'] else 'FAILED'}"
            )
        _emit(args, "\n".join(lines) + "\n")
    if verification is not None and not verification["ok"]:
        return 2
    return 0


# ---------------------------------------------------------------------------
# maxcsp
# ---------------------------------------------------------------------------


def cmd_maxcsp(args) -> int:
    t0 = time.perf_counter()
    inst = read_csp_text(args.infile)
    cfg, _ = _oracle_from_args(args)
    result = approx_max_csp(inst, args.eps, cfg, with_opt=args.opt)
    doc = {
        "manifest": _manifest(
            "maxcsp",
            {"csp": _sha256(args.infile)},
            {"eps": args.eps, "n": inst.n, "k": inst.k, "m": inst.m},
            args.seed,
            _oracle_json(cfg),
            t0,
        ),
        "result": result.to_json_dict(),
    }
    if args.format == "json":
        _emit(args, _json_dump(doc))
    else:
        lines = [
            f"csp n={inst.n} k={inst.k} m={inst.m}",
            f"value: {result.value} of {inst.m}",
            f"assignment: {''.join(str(b) for b in result.assignment)}",
        ]
        if args.opt:
            lines.append(
                f"opt: {result.report['opt']}, ratio: {result.report['ratio']:.4f}"
            )
        _emit(args, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_oracle_args(sp) -> None:
    sp.add_argument("--oracle", choices=["exact", "heuristic"], default="exact")
    sp.add_argument("--alpha", type=float, default=None,
                    help="heuristic oracle guarantee claim (default 0.3)")
    sp.add_argument("--a0", type=float, default=None,
                    help="schedule guarantee (defaults to the oracle's claim)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--restarts", type=int, default=8)
    sp.add_argument("--limit", type=int, default=24,
                    help="exhaustive enumeration cap on min(n1, n2)")


def build_parser() -> _Parser:
    parser = _Parser(prog="cutdecomp", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="decompose a {0,1} matrix into cut matrices")
    d.add_argument("--in", dest="infile", required=True)
    d.add_argument("--eps", type=float, required=True)
    d.add_argument("--C", type=float, default=1.0)
    d.add_argument("--p", default="2")
    _add_oracle_args(d)
    d.add_argument("--verify", action="store_true")
    d.add_argument("--out", default=None)
    d.add_argument("--format", choices=["json", "text"], default="json")
    d.set_defaults(func=cmd_decompose)

    c = sub.add_parser("cutnorm", help="exact cut norm with a maximizing rectangle")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--center", action="store_true",
                   help="subtract the global density first")
    c.add_argument("--limit", type=int, default=24)
    c.add_argument("--out", default=None)
    c.add_argument("--format", choices=["json", "text"], default="json")
    c.set_defaults(func=cmd_cutnorm)

    k = sub.add_parser("check", help="re-verify a decompose result document")
    k.add_argument("--matrix", required=True)
    k.add_argument("--result", required=True)
    k.add_argument("--limit", type=int, default=24)
    k.add_argument("--out", default=None)
    k.add_argument("--format", choices=["json", "text"], default="json")
    k.set_defaults(func=cmd_check)

    g = sub.add_parser("gen", help="sample a W-random {0,1} matrix")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--n2", type=int, default=None)
    g.add_argument("--density", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--grid", default=None, help="step kernel grid file")
    g.add_argument("--symmetric", action="store_true")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("tensor", help="decompose a {0,1} tensor into cut tensors")
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--eps", type=float, required=True)
    _add_oracle_args(t)
    t.add_argument("--verify", action="store_true")
    t.add_argument("--out", default=None)
    t.add_argument("--format", choices=["json", "text"], default="json")
    t.set_defaults(func=cmd_tensor)

    m = sub.add_parser("maxcsp", help="approximate MAX-CSP via type tensors")
    m.add_argument("--in", dest="infile", required=True)
    m.add_argument("--eps", type=float, required=True)
    _add_oracle_args(m)
    m.add_argument("--opt", action="store_true",
                   help="also brute-force the optimum and report the ratio")
    m.add_argument("--out", default=None)
    m.add_argument("--format", choices=["json", "text"], default="json")
    m.set_defaults(func=cmd_maxcsp)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MatrixFormatError, OSError, ValueError, json.JSONDecodeError, KeyError) as e:
        sys.stderr.write(f"cutdecomp: error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
