"""Iterative cut decomposition of a {0,1} matrix.

Starting from the trivial partition, each round compares f with its
conditional expectation on the current partition.  A rectangle oracle
produces a near-maximizing rectangle for the residual; if the residual
integral over that rectangle is small the loop halts and the conditional
expectation (a sum of cut matrices with pairwise disjoint supports) is the
output.  Otherwise the partition is refined against the rectangle by
envelope splitting and the loop continues.

Parameters are synthesized from the target accuracy eps, the regularity
constant C, the exponent p and the oracle guarantee a0.  The iteration
budget tau and the density floor eta are chosen so that, for inputs that
are regular at scale eta, the refinement chain keeps every partition
eligible and the halting test must trigger within tau rounds; eta shrinks
so fast that it is stored in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .measure import (
    BinaryMatrix,
    RealMatrix,
    RectPartition,
    Rectangle,
    StepMatrix,
    conditional_expectation,
    cut_norm_exact,
    density,
    scaled_integral,
    step_difference,
    step_lp_norm,
)
from .oracle import OracleConfig, oracle_dispatch
from .refine import RefineParams, log_fraction, refine_partition

_TOL = 1e-9

#: tau values above this threshold make eta underflow any float; the exact
#: exponent is then skipped and log(eta) reported as -inf directly.
_TAU_EXACT_LIMIT = 100_000


@dataclass(frozen=True)
class DecomposeParams:
    """User inputs (eps, C, p, a0) plus the derived schedule.

    p_dagger = min(2, p), q its conjugate; vartheta = a0 eps / (16 C);
    tau = ceil(4 C^2 / ((p_dagger - 1) eps^2 a0^2)); eta = vartheta^E with
    E = sum_{i=1}^{tau+1} (2/p_dagger + 1)^{i-1} q^i, kept as log(eta).
    """

    eps: float
    C: float
    p: float
    a0: float
    p_dagger: Fraction
    q: Fraction
    vartheta: Fraction
    tau: int
    log_eta: float

    @property
    def eta(self) -> float:
        return math.exp(self.log_eta) if self.log_eta > -math.inf else 0.0

    def to_json_dict(self) -> dict:
        return {
            "eps": self.eps,
            "C": self.C,
            "p": "inf" if math.isinf(self.p) else self.p,
            "a0": self.a0,
            "p_dagger": float(self.p_dagger),
            "q": float(self.q),
            "vartheta": str(self.vartheta),
            "tau": self.tau,
            "log_eta": "-inf" if self.log_eta == -math.inf else self.log_eta,
        }


def synthesize_params(
    eps: float, C: float = 1.0, p: float = 2.0, a0: float = 1.0
) -> DecomposeParams:
    """Derive the full parameter schedule from (eps, C, p, a0)."""
    if not (0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")
    if C < 1:
        raise ValueError("C must be at least 1")
    if not (p > 1):
        raise ValueError("p must exceed 1 (p = inf allowed)")
    if not (0 < a0 <= 1):
        raise ValueError("a0 must lie in (0, 1]")
    p_dagger = Fraction(2) if p >= 2 else Fraction(p)
    q = p_dagger / (p_dagger - 1)
    f_eps, f_c, f_a0 = Fraction(eps), Fraction(C), Fraction(a0)
    vartheta = f_a0 * f_eps / (16 * f_c)
    tau = math.ceil(4 * f_c**2 / ((p_dagger - 1) * f_eps**2 * f_a0**2))
    log_eta = _log_eta(vartheta, q, p_dagger, tau)
    return DecomposeParams(
        eps=eps, C=C, p=p, a0=a0,
        p_dagger=p_dagger, q=q, vartheta=vartheta, tau=tau, log_eta=log_eta,
    )


def _log_eta(vartheta: Fraction, q: Fraction, p_dagger: Fraction, tau: int) -> float:
    """log of vartheta^E via the geometric closed form
    E = q ((rq)^{tau+1} - 1) / (rq - 1) with r = 2/p_dagger + 1."""
    if tau > _TAU_EXACT_LIMIT:
        return -math.inf
    r = 2 / p_dagger + 1
    rq = r * q  # >= 4, so the geometric sum never degenerates
    exponent = q * (rq ** (tau + 1) - 1) / (rq - 1)
    log_theta = log_fraction(vartheta)  # negative: vartheta < 1/32
    try:
        return float(exponent) * log_theta
    except OverflowError:
        return -math.inf


@dataclass(frozen=True)
class TraceStep:
    """One round of the loop: the partition it saw, the oracle's rectangle,
    the exact halting comparison, and the refinement that followed (if any)."""

    m: int
    partition: RectPartition = field(repr=False)
    n_cells: int
    iota: Fraction
    witness: Rectangle
    scaled_value: float
    halted: bool
    theta: Fraction | None = None
    labels: tuple[int, ...] | None = None
    increment_lp: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "n_cells": self.n_cells,
            "iota": str(self.iota),
            "witness": {
                "rows": sorted(self.witness.rows),
                "cols": sorted(self.witness.cols),
            },
            "scaled_value": self.scaled_value,
            "halted": self.halted,
            "theta": None if self.theta is None else str(self.theta),
            "labels": None if self.labels is None else list(self.labels),
            "increment_lp": self.increment_lp,
        }


@dataclass(frozen=True)
class DecompositionTrace:
    steps: tuple[TraceStep, ...]
    halted: bool
    stalled: bool
    budget_exhausted: bool

    @property
    def partitions(self) -> tuple[RectPartition, ...]:
        return tuple(s.partition for s in self.steps)

    def to_json_dict(self) -> dict:
        return {
            "steps": [s.to_json_dict() for s in self.steps],
            "halted": self.halted,
            "stalled": self.stalled,
            "budget_exhausted": self.budget_exhausted,
        }


@dataclass(frozen=True)
class DecompositionResult:
    partition: RectPartition
    step: StepMatrix
    cut_matrices: tuple[tuple[Rectangle, Fraction], ...]
    trace: DecompositionTrace
    certificate: dict

    def to_json_dict(self) -> dict:
        return {
            "partition": _partition_json(self.partition),
            "cut_matrices": [
                {
                    "rows": sorted(rect.rows),
                    "cols": sorted(rect.cols),
                    "value": str(value),
                    "value_float": float(value),
                }
                for rect, value in self.cut_matrices
            ],
            "trace": self.trace.to_json_dict(),
            "certificate": self.certificate,
        }


def _partition_json(partition: RectPartition) -> dict:
    return {
        "n1": len(partition.row_space),
        "n2": len(partition.col_space),
        "cells": [
            {"rows": sorted(c.rows), "cols": sorted(c.cols)} for c in partition.cells
        ],
    }


def partition_from_json(doc: dict) -> RectPartition:
    cells = [Rectangle.of(c["rows"], c["cols"]) for c in doc["cells"]]
    return RectPartition.build(cells, doc["n1"], doc["n2"])


def decompose(
    f: BinaryMatrix,
    params: DecomposeParams,
    oracle_cfg: OracleConfig | None = None,
) -> DecompositionResult:
    """Run the loop and return the step matrix of the final partition as a
    list of disjoint cut matrices, with a full trace and a certificate.

    The halting comparison |int_A (f - E)| <= a0 eps ||f||_{L1} is exact
    rational.  The oracle's a0 claim must cover params.a0.  Partitions
    strictly refine between rounds (a refinement fixpoint aborts the loop
    and is flagged), so the loop runs at most min(tau, n1 n2) rounds.
    """
    cfg = oracle_cfg if oracle_cfg is not None else OracleConfig()
    if cfg.alpha_claim < params.a0:
        raise ValueError(
            f"oracle guarantees a0 = {cfg.alpha_claim}, but the schedule "
            f"was synthesized for a0 = {params.a0}"
        )
    dens = density(f)
    threshold = Fraction(params.a0) * Fraction(params.eps) * dens
    partition = RectPartition.trivial(f.n1, f.n2)
    steps: list[dict] = []
    halted = stalled = exhausted = False
    final_step: StepMatrix | None = None
    m = 0
    while True:
        step = conditional_expectation(f, partition)
        residual = RealMatrix.residual(f, step)
        outcome = oracle_dispatch(residual, cfg)
        integral = residual.integral_on(outcome.witness)
        assert isinstance(integral, Fraction)
        record = {
            "m": m,
            "partition": partition,
            "witness": outcome.witness,
            "scaled_value": scaled_integral(residual, outcome.witness),
            "halted": False,
            "theta": None,
            "labels": None,
        }
        if abs(integral) <= threshold:
            halted = True
            record["halted"] = True
            steps.append(record)
            final_step = step
            break
        if m == params.tau:
            exhausted = True
            steps.append(record)
            final_step = step
            break
        rp = RefineParams.for_partition(
            vartheta=params.vartheta,
            q=float(params.q),
            p_dagger=float(params.p_dagger),
            log_eta=params.log_eta,
            partition=partition,
            C=params.C,
        )
        refined = refine_partition(f, partition, outcome.witness, rp)
        record["theta"] = rp.theta
        record["labels"] = refined.report.labels
        if refined.partition == partition:
            # envelope splitting left every cell whole; iterating further
            # would repeat this round verbatim, so stop here
            stalled = True
            steps.append(record)
            final_step = step
            break
        steps.append(record)
        partition = refined.partition
        m += 1

    assert final_step is not None
    trace_steps = _finish_trace(f, steps, params)
    trace = DecompositionTrace(
        steps=trace_steps, halted=halted, stalled=stalled, budget_exhausted=exhausted
    )
    cut_matrices = tuple(
        (cell, value)
        for cell, value in zip(final_step.partition.cells, final_step.values)
        if value != 0
    )
    certificate = _certificate(f, params, trace, cut_matrices)
    return DecompositionResult(
        partition=final_step.partition,
        step=final_step,
        cut_matrices=cut_matrices,
        trace=trace,
        certificate=certificate,
    )


def _finish_trace(
    f: BinaryMatrix, records: list[dict], params: DecomposeParams
) -> tuple[TraceStep, ...]:
    out: list[TraceStep] = []
    for idx, rec in enumerate(records):
        increment = None
        if idx + 1 < len(records):
            fine = conditional_expectation(f, records[idx + 1]["partition"])
            diff = step_difference(fine, conditional_expectation(f, rec["partition"]))
            increment = step_lp_norm(diff, float(params.p_dagger))
        out.append(
            TraceStep(
                m=rec["m"],
                partition=rec["partition"],
                n_cells=rec["partition"].n_cells,
                iota=rec["partition"].iota(),
                witness=rec["witness"],
                scaled_value=rec["scaled_value"],
                halted=rec["halted"],
                theta=rec["theta"],
                labels=rec["labels"],
                increment_lp=increment,
            )
        )
    return tuple(out)


def _certificate(
    f: BinaryMatrix,
    params: DecomposeParams,
    trace: DecompositionTrace,
    cut_matrices: tuple,
) -> dict:
    last = trace.steps[-1]
    n_ones = len(f.ones)
    # scaled_value / a0 upper-bounds the residual cut norm if the oracle's
    # guarantee is honest; with the exact oracle it equals the cut norm
    claimed = last.scaled_value / params.a0
    return {
        "status": "halted-certified" if trace.halted else "unverified-output",
        "halted": trace.halted,
        "stalled": trace.stalled,
        "budget_exhausted": trace.budget_exhausted,
        "rounds": len(trace.steps),
        "residual_cut_norm_claim": claimed,
        "residual_threshold": params.eps * n_ones,
        "n_cut_matrices": len(cut_matrices),
        "max_cut_matrices": 4**params.tau if params.tau <= 64 else None,
        "iota_final": str(last.iota),
        "log_eta": "-inf" if params.log_eta == -math.inf else params.log_eta,
    }


# ---------------------------------------------------------------------------
# independent verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    status: str  # "verified" | "uncertified" | "failed"
    clauses: tuple[tuple[str, str, str], ...]  # (name, "ok"/"fail"/"skipped", detail)

    @property
    def ok(self) -> bool:
        return self.status == "verified"

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "clauses": [
                {"name": n, "result": r, "detail": d} for n, r, d in self.clauses
            ],
        }


def verify_result(
    f: BinaryMatrix,
    result: DecompositionResult,
    params: DecomposeParams,
    limit: int = 24,
    backend: str | None = None,
) -> VerificationReport:
    """Re-derive every promise of the output from scratch.

    Checks, in order: the step matrix is exactly the conditional expectation
    of f on the stated partition; the cut matrices have pairwise disjoint
    supports and rebuild the step matrix exactly; their count is at most
    4^tau; iota of the partition is at least eta (log-space compare); and
    the residual f - E has exact cut norm at most eps * |ones| + 1e-9.  The
    last clause needs an exhaustive scan, so when min(n1, n2) > limit it is
    skipped and the report is "uncertified" rather than "verified".
    """
    clauses: list[tuple[str, str, str]] = []

    step = conditional_expectation(f, result.partition)
    same = step.partition == result.step.partition and step.values == result.step.values
    clauses.append(
        ("step-matches", "ok" if same else "fail",
         "conditional expectation recomputed exactly")
    )

    disjoint = True
    rects = [r for r, _ in result.cut_matrices]
    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            if not rects[i].intersect(rects[j]).is_empty:
                disjoint = False
    clauses.append(
        ("disjoint-supports", "ok" if disjoint else "fail",
         f"{len(rects)} cut matrices, pairwise empty intersections")
    )

    by_cell = dict(result.cut_matrices)
    rebuild = all(
        by_cell.get(cell, Fraction(0)) == value
        for cell, value in zip(result.partition.cells, result.step.values)
    ) and all(cell in set(result.partition.cells) for cell in by_cell)
    clauses.append(
        ("reconstruction", "ok" if rebuild else "fail",
         "sum of cut matrices equals the step matrix entrywise")
    )

    count_ok = (
        params.tau > 64 or len(result.cut_matrices) <= 4**params.tau
    ) and len(result.cut_matrices) <= result.partition.n_cells
    clauses.append(
        ("count-bound", "ok" if count_ok else "fail",
         f"{len(result.cut_matrices)} cut matrices vs 4^tau, tau = {params.tau}")
    )

    iota = result.partition.iota()
    iota_ok = log_fraction(iota) >= params.log_eta - 1e-12
    clauses.append(
        ("iota-bound", "ok" if iota_ok else "fail",
         f"log iota = {log_fraction(iota):.6g}, log eta = {params.log_eta:.6g}")
    )

    residual = RealMatrix.residual(f, result.step)
    bound = params.eps * len(f.ones) + _TOL
    if min(f.n1, f.n2) <= limit:
        norm, _ = cut_norm_exact(residual, limit=limit)
        res_ok = norm <= bound
        clauses.append(
            ("residual-cut-norm", "ok" if res_ok else "fail",
             f"exact cut norm {norm:.6g} vs bound {bound:.6g}")
        )
        skipped = False
    else:
        clauses.append(
            ("residual-cut-norm", "skipped",
             f"min dimension exceeds the exhaustive limit {limit}")
        )
        skipped = True

    if any(r == "fail" for _, r, _ in clauses):
        status = "failed"
    elif skipped:
        status = "uncertified"
    else:
        status = "verified"
    return VerificationReport(status=status, clauses=tuple(clauses))


# ---------------------------------------------------------------------------
# increment sequence check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MartingaleReport:
    p: float
    p_dagger: float
    lhs: float
    rhs: float
    holds: bool
    telescoping_ok: bool
    n_increments: int


def martingale_check(
    f: BinaryMatrix,
    partitions: tuple[RectPartition, ...],
    p: float,
    tol: float = _TOL,
) -> MartingaleReport:
    """Check the square-function inequality along a refinement chain.

    With d_0 = E(f|P_0) and d_i = E(f|P_i) - E(f|P_{i-1}), verify
    (sum_i ||d_i||_{L_{p_dagger}}^2)^{1/2} <= (p_dagger - 1)^{-1/2}
    ||sum_i d_i||_{L_{p_dagger}}, and that the increments telescope exactly
    to E(f|P_last).
    """
    if not partitions:
        raise ValueError("need at least one partition")
    p_dagger = min(2.0, p)
    expectations = [conditional_expectation(f, part) for part in partitions]
    norms = [step_lp_norm(expectations[0], p_dagger)]
    increments: list[StepMatrix] = [expectations[0]]
    for prev, cur in zip(expectations, expectations[1:]):
        diff = step_difference(cur, prev)
        increments.append(diff)
        norms.append(step_lp_norm(diff, p_dagger))
    lhs = math.sqrt(sum(v * v for v in norms))
    rhs = step_lp_norm(expectations[-1], p_dagger) / math.sqrt(p_dagger - 1.0)
    # telescoping is exact: check one representative point per final cell
    final = expectations[-1]
    tele = True
    for cell, value in zip(final.partition.cells, final.values):
        i, j = min(cell.rows), min(cell.cols)
        total = sum((inc.value_at(i, j) for inc in increments), Fraction(0))
        if total != value:
            tele = False
            break
    return MartingaleReport(
        p=p,
        p_dagger=p_dagger,
        lhs=lhs,
        rhs=rhs,
        holds=lhs <= rhs + tol,
        telescoping_ok=tele,
        n_increments=len(increments),
    )
