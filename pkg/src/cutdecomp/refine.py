"""Partition refinement against a distinguished rectangle.

Given a rectangle partition P and a rectangle A (typically an oracle witness
for the residual f - E(f|P)), the refinement produces Q with at most 4|P|
cells such that some union B of Q-cells approximates A: mu(A triangle B) is
at most 2*theta, where theta = vartheta^q * iota(P)^{2q/p_dagger}.  Cells
where A's trace is thin on either side are kept whole; cells where both
traces are thick are split by an envelope partition of the cell.

When the residual integral over A is large (at least a0*eps*||f||_{L1}) and
f is regular at the operative scale, the refinement strictly increases the
energy: ||E(f|Q) - E(f|P)||_{L_{p_dagger}} >= a0*eps*||f||_{L1}/2.

All set-measure comparisons here are exact rational; only norms are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from .measure import (
    BinaryMatrix,
    InvalidPartitionError,
    RealMatrix,
    RectPartition,
    Rectangle,
    StepMatrix,
    _as_index_space,
    conditional_expectation,
    density,
    integral_over,
    step_difference,
    step_lp_norm,
)

#: Relative slack for log-space comparisons of astronomically small scales.
_LOG_SLACK = 1e-9


def fraction_power(base: Fraction, exponent: float) -> Fraction:
    """base**exponent as a Fraction; exact for integer exponents.

    Non-integer exponents are evaluated in binary64 and embedded exactly,
    which is deterministic, and every comparison in this module uses the
    same embedded value on both sides, so structural postconditions are
    unaffected by the embedding.
    """
    base = Fraction(base)
    if base < 0:
        raise ValueError("negative base")
    r = round(exponent)
    if abs(exponent - r) < 1e-9 and abs(exponent) < 10_000:
        return base ** int(r)
    if base == 0:
        return Fraction(0)
    value = float(base) ** exponent
    if value == 0.0:
        raise ValueError(
            "threshold power underflows binary64; parameters are outside the "
            "representable range (p too close to 1 at this scale)"
        )
    return Fraction(value)


def log_fraction(x: Fraction) -> float:
    """log of a positive rational without overflowing through float()."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("log of a non-positive value")
    return math.log(x.numerator) - math.log(x.denominator)


@dataclass(frozen=True)
class RefineParams:
    """Thresholds for one refinement step.

    vartheta is the global envelope scale a0*eps/(16C); theta is recomputed
    from iota(P) whenever the partition changes (use `for_partition`);
    log_eta carries the regularity scale eta in log space (eta itself
    underflows binary64 for all but tiny tau).  C is carried so the
    analytic Eq-3.4-style report bounds can be evaluated.
    """

    vartheta: Fraction
    theta: Fraction
    q: float
    p_dagger: float
    log_eta: float
    C: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "vartheta", Fraction(self.vartheta))
        object.__setattr__(self, "theta", Fraction(self.theta))
        if not (0 < self.vartheta < Fraction(1, 2)):
            raise ValueError("vartheta must lie in (0, 1/2)")
        if not (0 < self.theta < Fraction(1, 2)):
            raise ValueError("theta must lie in (0, 1/2)")
        if self.p_dagger <= 1 or self.p_dagger > 2:
            raise ValueError("p_dagger must lie in (1, 2]")
        if self.q < 2:
            raise ValueError("q must be the conjugate exponent of p_dagger (>= 2)")

    @classmethod
    def for_partition(
        cls,
        vartheta: Fraction,
        q: float,
        p_dagger: float,
        log_eta: float,
        partition: RectPartition,
        C: float = 1.0,
    ) -> "RefineParams":
        theta = compute_theta(vartheta, q, p_dagger, partition.iota())
        return cls(
            vartheta=Fraction(vartheta),
            theta=theta,
            q=q,
            p_dagger=p_dagger,
            log_eta=log_eta,
            C=C,
        )


def compute_theta(vartheta: Fraction, q: float, p_dagger: float, iota_p: Fraction) -> Fraction:
    """theta = vartheta^q * iota(P)^{2q/p_dagger}."""
    return fraction_power(Fraction(vartheta), q) * fraction_power(
        Fraction(iota_p), 2.0 * q / p_dagger
    )


def entry_precondition_ok(params: RefineParams, partition: RectPartition) -> bool:
    """eta <= (vartheta * iota(P)^{2/p_dagger + 1})^q, compared in log space."""
    io = partition.iota()
    bound = params.q * (
        log_fraction(params.vartheta)
        + (2.0 / params.p_dagger + 1.0) * log_fraction(io)
    )
    return params.log_eta <= bound + _LOG_SLACK * max(1.0, abs(bound))


# ---------------------------------------------------------------------------
# envelope partition (four cases on how much of the box A covers)
# ---------------------------------------------------------------------------


def envelope_partition(
    X1: Union[int, Iterable[int]],
    X2: Union[int, Iterable[int]],
    A1: Iterable[int],
    A2: Iterable[int],
    vartheta,
) -> tuple[RectPartition, Rectangle]:
    """Partition X1 x X2 into at most 4 rectangles so that one of them (or a
    side-slab, or the whole box) envelopes A1 x A2 with excess at most
    2*vartheta, while every new side keeps density > vartheta.

    Requires mu(A1), mu(A2) >= vartheta and 0 < vartheta < 1/2 (measures
    relative to X1, X2).  Returns (Q, B) with A1 x A2 contained in B, B a
    cell of Q or a union's worth of it in the slab cases, and
    mu(B minus A1 x A2) <= 2*vartheta.
    """
    x1 = _as_index_space(X1)
    x2 = _as_index_space(X2)
    a1 = frozenset(int(i) for i in A1)
    a2 = frozenset(int(j) for j in A2)
    if not (a1 <= x1 and a2 <= x2):
        raise ValueError("A1, A2 must be subsets of X1, X2")
    vt = Fraction(vartheta)
    if not (0 < vt < Fraction(1, 2)):
        raise ValueError("vartheta must lie in (0, 1/2)")
    mu1 = Fraction(len(a1), len(x1))
    mu2 = Fraction(len(a2), len(x2))
    if mu1 < vt or mu2 < vt:
        raise ValueError("A sides must have measure at least vartheta")

    small1 = mu1 < 1 - vt
    small2 = mu2 < 1 - vt
    c1 = x1 - a1
    c2 = x2 - a2
    if small1 and small2:
        b = Rectangle(a1, a2)
        cells = (b, Rectangle(c1, a2), Rectangle(a1, c2), Rectangle(c1, c2))
    elif small1:
        b = Rectangle(a1, x2)
        cells = (b, Rectangle(c1, x2))
    elif small2:
        b = Rectangle(x1, a2)
        cells = (b, Rectangle(x1, c2))
    else:
        b = Rectangle(x1, x2)
        cells = (b,)
    return RectPartition(cells, x1, x2), b


# ---------------------------------------------------------------------------
# cell classification and refinement
# ---------------------------------------------------------------------------

#: labels: 1 = both traces thin, 2 = rows thin, 3 = cols thin, 4 = both thick
CELL_BOTH_THIN = 1
CELL_ROWS_THIN = 2
CELL_COLS_THIN = 3
CELL_BOTH_THICK = 4


def classify_cells(partition: RectPartition, a: Rectangle, theta) -> tuple[int, ...]:
    """Label each cell by whether A's row/column trace is thin there.

    Thin on rows means |A1 cap P1| < theta * |P1| (strict); thick is >=.
    Exact rational comparisons.
    """
    th = Fraction(theta)
    labels = []
    for cell in partition.cells:
        rows_thin = Fraction(len(a.rows & cell.rows)) < th * len(cell.rows)
        cols_thin = Fraction(len(a.cols & cell.cols)) < th * len(cell.cols)
        if rows_thin and cols_thin:
            labels.append(CELL_BOTH_THIN)
        elif rows_thin:
            labels.append(CELL_ROWS_THIN)
        elif cols_thin:
            labels.append(CELL_COLS_THIN)
        else:
            labels.append(CELL_BOTH_THICK)
    return tuple(labels)


@dataclass(frozen=True)
class RefineReport:
    """Checked guarantees of one refinement step.

    Structural fields hold by construction and are verified exactly; the
    symmetric-difference integral bounds additionally require f to be
    regular at the operative scale (reported, not asserted).
    """

    labels: tuple
    theta: Fraction
    refines: bool
    cell_bound_ok: bool          # |Q| <= 4 |P|
    iota_p: Fraction
    iota_q: Fraction
    iota_bound: Fraction         # theta * iota(P)^q  (statement-level bound)
    iota_bound_ok: bool
    iota_proof_bound: Fraction   # theta * iota(P)    (what the split attains)
    iota_proof_bound_ok: bool
    b_in_algebra: bool
    mu_sym_diff: Fraction
    sym_diff_bound_ok: bool      # mu(A triangle B) <= 2 theta, exact
    int_e_sym_diff: Fraction
    int_f_sym_diff: Fraction
    int_e_sym_bound: Fraction    # 2 C ||f||_{L1} vartheta
    int_f_sym_bound: Fraction    # 6 C ||f||_{L1} vartheta
    int_e_sym_ok: bool
    int_f_sym_ok: bool


@dataclass(frozen=True)
class RefineOutcome:
    partition: RectPartition
    b_cells: tuple  # tuple[Rectangle, ...]; the union is B
    report: RefineReport


def refine_partition(
    f: BinaryMatrix,
    partition: RectPartition,
    a: Rectangle,
    params: RefineParams,
) -> RefineOutcome:
    """Refine `partition` against the rectangle `a` at params.theta.

    Cells labeled thick on both sides are split by an envelope partition of
    the cell (thresholds relative to the cell); all other cells are kept
    whole and contribute nothing to B.
    """
    if not entry_precondition_ok(params, partition):
        raise ValueError(
            "refinement entry precondition failed: eta exceeds "
            "(vartheta * iota(P)^{2/p_dagger+1})^q"
        )
    labels = classify_cells(partition, a, params.theta)
    new_cells: list[Rectangle] = []
    b_cells: list[Rectangle] = []
    per_cell: list[tuple[Rectangle, int, Rectangle | None]] = []
    for cell, label in zip(partition.cells, labels):
        if label == CELL_BOTH_THICK:
            sub, b = envelope_partition(
                cell.rows, cell.cols, a.rows & cell.rows, a.cols & cell.cols, params.theta
            )
            new_cells.extend(sub.cells)
            b_cells.append(b)
            per_cell.append((cell, label, b))
        else:
            new_cells.append(cell)
            per_cell.append((cell, label, None))
    refined = RectPartition(tuple(new_cells), partition.row_space, partition.col_space)
    report = _build_report(f, partition, refined, a, per_cell, labels, params)
    return RefineOutcome(partition=refined, b_cells=tuple(b_cells), report=report)


def _build_report(
    f: BinaryMatrix,
    partition: RectPartition,
    refined: RectPartition,
    a: Rectangle,
    per_cell: list,
    labels: tuple,
    params: RefineParams,
) -> RefineReport:
    n_pairs = f.n1 * f.n2
    expected = conditional_expectation(f, partition)
    cell_values = dict(zip(expected.partition.cells, expected.values))

    # A triangle B decomposes cell by cell: the trace A cap P on kept cells,
    # and B_P minus (A cap P) on split cells.
    mu_sym = Fraction(0)
    int_f_sym = Fraction(0)
    int_e_sym = Fraction(0)
    for cell, label, b in per_cell:
        trace = a.intersect(cell)
        mu_trace = Fraction(trace.size, n_pairs)
        int_f_trace = Fraction(f.count_in(trace.rows, trace.cols), n_pairs)
        v = cell_values[cell]
        if label == CELL_BOTH_THICK:
            assert b is not None and b.contains(trace)
            mu_part = Fraction(b.size, n_pairs) - mu_trace
            int_f_sym += Fraction(f.count_in(b.rows, b.cols), n_pairs) - int_f_trace
        else:
            mu_part = mu_trace
            int_f_sym += int_f_trace
        mu_sym += mu_part
        int_e_sym += v * mu_part

    dens = density(f)
    vt = params.vartheta
    int_e_sym_bound = 2 * Fraction(params.C) * dens * vt
    int_f_sym_bound = 6 * Fraction(params.C) * dens * vt

    iota_p = partition.iota()
    iota_q = refined.iota()
    iota_bound = params.theta * fraction_power(iota_p, params.q)
    iota_proof_bound = params.theta * iota_p
    b_cells_set = set(refined.cells)

    return RefineReport(
        labels=labels,
        theta=params.theta,
        refines=refined.refines(partition),
        cell_bound_ok=refined.n_cells <= 4 * partition.n_cells,
        iota_p=iota_p,
        iota_q=iota_q,
        iota_bound=iota_bound,
        iota_bound_ok=iota_q >= iota_bound,
        iota_proof_bound=iota_proof_bound,
        iota_proof_bound_ok=iota_q >= iota_proof_bound,
        b_in_algebra=all(b in b_cells_set for _, lab, b in per_cell if lab == CELL_BOTH_THICK),
        mu_sym_diff=mu_sym,
        sym_diff_bound_ok=mu_sym <= 2 * params.theta,
        int_e_sym_diff=int_e_sym,
        int_f_sym_diff=int_f_sym,
        int_e_sym_bound=int_e_sym_bound,
        int_f_sym_bound=int_f_sym_bound,
        int_e_sym_ok=int_e_sym <= int_e_sym_bound,
        int_f_sym_ok=int_f_sym <= int_f_sym_bound,
    )


def increment_guarantee_check(
    f: BinaryMatrix,
    coarse: RectPartition,
    refined: RectPartition,
    a: Rectangle,
    eps: float,
    a0: float = 1.0,
    p_dagger: float = 2.0,
    tol: float = 1e-9,
) -> str:
    """Check the energy-increment implication for one refinement step.

    Returns "hypothesis-not-met" when |int_A (f - E(f|P))| < a0*eps*||f||_{L1}
    (the implication is vacuous), "confirmed" when the increment
    ||E(f|Q) - E(f|P)||_{L_{p_dagger}} reaches a0*eps*||f||_{L1}/2 within
    tolerance, and "breach" otherwise.  A breach with an input that is
    regular at the operative scale indicates a bug.
    """
    e_coarse = conditional_expectation(f, coarse)
    e_fine = conditional_expectation(f, refined)
    residual_int = integral_over(RealMatrix.residual(f, e_coarse), a)
    dens = density(f)
    threshold = Fraction(a0) * Fraction(eps) * dens
    if abs(residual_int) < threshold:
        return "hypothesis-not-met"
    increment = step_lp_norm(step_difference(e_fine, e_coarse), p_dagger)
    bound = float(threshold / 2)
    return "confirmed" if increment >= bound - tol else "breach"
