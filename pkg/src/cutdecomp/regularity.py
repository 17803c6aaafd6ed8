"""Regularity and boundedness checks for {0,1} matrices.

A matrix f is (C, eta)-bounded when every rectangle S x T with both side
densities at least eta has average at most C * ||f||_{L1}; it is
(C, eta, p)-regular when every rectangle partition P with iota(P) >= eta
has ||E(f|A_P)||_{L_p} <= C * ||f||_{L1}.  Boundedness and regularity at
p = inf sandwich each other (with a factor 4 on C in one direction), and
regularity at 1 < p <= 2 forces a Hoelder-type bound
int_A f <= C ||f||_{L1} (mu(A) + 6 eta)^{1/q} on every rectangle.

Searches here are falsification tools: the boundedness check is exhaustive
(exact rational comparisons, strict violations only), the partition witness
search enumerates grid partitions exhaustively at small sizes or samples
non-grid rectangle partitions randomly, and "none-found" is evidence, not
proof, except where the enumeration is genuinely exhaustive.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .measure import (
    BinaryMatrix,
    MatrixFormatError,
    RectPartition,
    Rectangle,
    conditional_expectation,
    density,
    step_lp_norm,
)

logger = logging.getLogger(__name__)

#: Cap on the enumerated dimension of exhaustive rectangle searches.
BOUNDEDNESS_LIMIT = 15

#: Cap on both dimensions for the exhaustive grid-partition search.
GRID_SEARCH_LIMIT = 8

_TOL = 1e-9


@dataclass(frozen=True)
class RegularityParams:
    """(C, eta, p) with p in (1, inf]; p_dagger and q are derived."""

    C: float
    eta: float
    p: float

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be positive")
        if not (0 < self.eta <= 1):
            raise ValueError("eta must lie in (0, 1]")
        if not (self.p > 1):
            raise ValueError("p must exceed 1 (p = inf allowed)")

    @property
    def p_dagger(self) -> float:
        return min(2.0, self.p)

    @property
    def q(self) -> float:
        pd = self.p_dagger
        return pd / (pd - 1.0)


def _min_side(eta, n: int) -> int:
    """Smallest block size s with s/n >= eta."""
    return max(1, math.ceil(Fraction(eta) * n))


def _masks_by_popcount(n: int, min_pop: int = 1) -> list[int]:
    """All masks over n bits with popcount >= min_pop, ordered by
    (popcount, index sequence)."""
    masks = [m for m in range(1 << n) if bin(m).count("1") >= min_pop]
    masks.sort(key=lambda m: (bin(m).count("1"), [i for i in range(n) if (m >> i) & 1]))
    return masks


def _lex_least_subset_exceeding(counts: list[int], t: int, bound: float) -> tuple | None:
    """Lexicographically least t-subset of column indices whose count sum
    strictly exceeds `bound`, or None."""
    n = len(counts)
    chosen: list[int] = []
    total = 0

    def best_completion(start: int, need: int) -> int:
        return sum(sorted(counts[start:], reverse=True)[:need])

    j = 0
    while len(chosen) < t:
        need = t - len(chosen) - 1
        found = False
        for cand in range(j, n - need):
            if total + counts[cand] + best_completion(cand + 1, need) > bound:
                chosen.append(cand)
                total += counts[cand]
                j = cand + 1
                found = True
                break
        if not found:
            return None
    return tuple(chosen)


@dataclass(frozen=True)
class BoundednessReport:
    bounded: bool
    violator: Rectangle | None
    rectangles_checked: int


def is_bounded(
    f: BinaryMatrix, C: float, eta: float, limit: int = BOUNDEDNESS_LIMIT
) -> BoundednessReport:
    """Exhaustively check (C, eta)-boundedness.

    Enumerates all subsets of the smaller dimension in (popcount, lex) order;
    for each, the other side reduces to prefix sums of the per-index counts.
    Comparisons are exact rational; only strict violations count.  The first
    violator in (|S|, S, |T|, T) order is reported (in original orientation).
    """
    swap = f.n1 > f.n2
    F = f.to_dense().astype(np.int64)
    if swap:
        F = F.T
    k, m = F.shape
    if k > limit:
        raise ValueError(f"min(n1, n2) = {k} exceeds the boundedness limit {limit}")
    s_min = _min_side(eta, k)
    t_min = _min_side(eta, m)
    bound_factor = Fraction(C) * density(f)
    checked = 0
    for mask in _masks_by_popcount(k, s_min):
        s_idx = [i for i in range(k) if (mask >> i) & 1]
        s = len(s_idx)
        counts = F[s_idx].sum(axis=0)
        order = sorted(range(m), key=lambda j: (-counts[j], j))
        prefix = 0
        best_t = None
        for rank, j in enumerate(order, start=1):
            prefix += int(counts[j])
            if rank < t_min:
                continue
            checked += 1
            if Fraction(prefix, s * rank) > bound_factor:
                best_t = rank
                break
        if best_t is None:
            continue
        # minimal violating t for this S, then the lex-least violating T
        for t in range(t_min, best_t + 1):
            top = sum(sorted((int(c) for c in counts), reverse=True)[:t])
            if Fraction(top, s * t) > bound_factor:
                bound_cnt = float(bound_factor * s * t)
                t_idx = _lex_least_subset_exceeding([int(c) for c in counts], t, bound_cnt)
                assert t_idx is not None
                rows = tuple(i + 1 for i in s_idx)
                cols = tuple(j + 1 for j in t_idx)
                if swap:
                    rows, cols = cols, rows
                return BoundednessReport(False, Rectangle.of(rows, cols), checked)
    return BoundednessReport(True, None, checked)


# ---------------------------------------------------------------------------
# partition witness search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessReport:
    verdict: str  # "none-found" | "violated"
    partition: RectPartition | None
    attained_norm: float | None
    search_mode: str
    partitions_checked: int


def set_partitions_min_block(items: tuple, min_size: int) -> Iterator[list]:
    """All set partitions of `items` with every block of size >= min_size,
    in a deterministic first-element-anchored order."""
    items = tuple(items)
    if not items:
        yield []
        return

    def rec(rest: tuple) -> Iterator[list]:
        if not rest:
            yield []
            return
        first, tail = rest[0], rest[1:]
        # first joins each subset of the tail as its block
        for mask in range(1 << len(tail)):
            block = [first] + [tail[i] for i in range(len(tail)) if (mask >> i) & 1]
            if len(block) < min_size:
                continue
            remaining = tuple(tail[i] for i in range(len(tail)) if not (mask >> i) & 1)
            if remaining and len(remaining) < min_size:
                continue
            for others in rec(remaining):
                yield [block] + others

    yield from rec(items)


def _grid_partition(row_blocks: list, col_blocks: list, n1: int, n2: int) -> RectPartition:
    cells = [Rectangle.of(rb, cb) for rb in row_blocks for cb in col_blocks]
    return RectPartition.build(cells, n1, n2)


def _random_partition(
    rng: np.random.Generator, n1: int, n2: int, eta: float
) -> RectPartition:
    """A random rectangle partition with iota >= eta, built by repeatedly
    splitting a random cell's side into two random halves.  Not restricted
    to grids."""
    s1_min = _min_side(eta, n1)
    s2_min = _min_side(eta, n2)
    cells = [Rectangle.of(range(1, n1 + 1), range(1, n2 + 1))]
    ops = int(rng.integers(1, 2 * int(math.log2(max(n1, n2))) + 4))
    for _ in range(ops):
        idx = int(rng.integers(0, len(cells)))
        cell = cells[idx]
        axis = int(rng.integers(0, 2))
        side = sorted(cell.rows) if axis == 0 else sorted(cell.cols)
        smin = s1_min if axis == 0 else s2_min
        if len(side) < 2 * smin:
            continue
        size = int(rng.integers(smin, len(side) - smin + 1))
        perm = rng.permutation(len(side))
        part1 = frozenset(side[i] for i in perm[:size])
        part2 = frozenset(side) - part1
        if axis == 0:
            new = [Rectangle(part1, cell.cols), Rectangle(part2, cell.cols)]
        else:
            new = [Rectangle(cell.rows, part1), Rectangle(cell.rows, part2)]
        cells[idx : idx + 1] = new
    return RectPartition.build(cells, n1, n2)


def regularity_witness_search(
    f: BinaryMatrix,
    params: RegularityParams,
    mode: str = "grid",
    budget: int = 1000,
    seed: int = 0,
) -> WitnessReport:
    """Search for a partition violating ||E(f|A_P)||_{L_p} <= C ||f||_{L1}.

    mode "grid" enumerates every product partition (all pairs of row/column
    set partitions with block densities >= eta; requires n1, n2 <= 8) and is
    exhaustive over grids; general rectangle partitions are not grids, so
    "none-found" remains a necessary-condition check.  mode "random" samples
    `budget` non-grid rectangle partitions with iota >= eta.  The first
    violation (enumeration order / sample order) is reported.
    """
    dens = float(density(f))
    bound = params.C * dens + _TOL
    checked = 0

    def violates(partition: RectPartition) -> float | None:
        step = conditional_expectation(f, partition)
        norm = step_lp_norm(step, params.p)
        return norm if norm > bound else None

    if mode == "grid":
        if f.n1 > GRID_SEARCH_LIMIT or f.n2 > GRID_SEARCH_LIMIT:
            raise ValueError(
                f"grid-exhaustive search requires n1, n2 <= {GRID_SEARCH_LIMIT}"
            )
        rows = tuple(range(1, f.n1 + 1))
        cols = tuple(range(1, f.n2 + 1))
        col_parts = list(
            set_partitions_min_block(cols, _min_side(params.eta, f.n2))
        )
        for rp in set_partitions_min_block(rows, _min_side(params.eta, f.n1)):
            for cp in col_parts:
                partition = _grid_partition(rp, cp, f.n1, f.n2)
                checked += 1
                attained = violates(partition)
                if attained is not None:
                    return WitnessReport("violated", partition, attained, mode, checked)
        return WitnessReport("none-found", None, None, mode, checked)

    if mode == "random":
        rng = np.random.default_rng(seed)
        for _ in range(budget):
            partition = _random_partition(rng, f.n1, f.n2, params.eta)
            checked += 1
            attained = violates(partition)
            if attained is not None:
                return WitnessReport("violated", partition, attained, mode, checked)
        return WitnessReport("none-found", None, None, mode, checked)

    raise ValueError(f"unknown search mode {mode!r}")


# ---------------------------------------------------------------------------
# Hoelder-type rectangle bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderReport:
    holds: bool
    counterexample: Rectangle | None
    rectangles_checked: int


def holder_bound_check(
    f: BinaryMatrix, params: RegularityParams, limit: int = BOUNDEDNESS_LIMIT
) -> HolderReport:
    """Check int_A f <= C ||f||_{L1} (mu(A) + 6 eta)^{1/q} over all rectangles.

    Enumerates subsets of the smaller dimension; for fixed S and |T| = t the
    integral is maximized by the t largest column counts, so only prefix
    sums need checking.  Violations are strict beyond the 1e-9 tolerance.
    """
    swap = f.n1 > f.n2
    F = f.to_dense().astype(np.int64)
    if swap:
        F = F.T
    k, m = F.shape
    if k > limit:
        raise ValueError(f"min(n1, n2) = {k} exceeds the enumeration limit {limit}")
    n_pairs = f.n1 * f.n2
    cd = params.C * float(density(f))
    inv_q = 1.0 / params.q
    six_eta = 6.0 * params.eta
    checked = 0
    for mask in _masks_by_popcount(k, 1):
        s_idx = [i for i in range(k) if (mask >> i) & 1]
        s = len(s_idx)
        counts = F[s_idx].sum(axis=0)
        ordered = sorted((int(c) for c in counts), reverse=True)
        prefix = 0
        for t in range(1, m + 1):
            prefix += ordered[t - 1]
            checked += 1
            lhs = prefix / n_pairs
            rhs = cd * (s * t / n_pairs + six_eta) ** inv_q
            if lhs > rhs + _TOL:
                bound_cnt = (rhs + _TOL) * n_pairs
                t_idx = _lex_least_subset_exceeding([int(c) for c in counts], t, bound_cnt)
                assert t_idx is not None
                rows = tuple(i + 1 for i in s_idx)
                cols = tuple(j + 1 for j in t_idx)
                if swap:
                    rows, cols = cols, rows
                return HolderReport(False, Rectangle.of(rows, cols), checked)
    return HolderReport(True, None, checked)


# ---------------------------------------------------------------------------
# W-random generation
# ---------------------------------------------------------------------------


def generate_w_random(
    w_grid: np.ndarray,
    n: int,
    target_density: float,
    seed: int,
    symmetric: bool = False,
    n2: int | None = None,
) -> BinaryMatrix:
    """Sample a W-random {0,1} matrix from a step kernel.

    The grid is normalized to mean 1; entry (i, j) is one with probability
    min(1, target_density * W(x_i, y_j)) at midpoint coordinates.  Clipped
    probabilities are counted and logged.  With symmetric=True the matrix is
    square and sampled on i <= j, mirrored below.
    """
    W = np.asarray(w_grid, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
        raise ValueError("w_grid must be square and nonempty")
    if (W < 0).any() or not np.isfinite(W).all():
        raise ValueError("w_grid entries must be finite and nonnegative")
    mean = W.mean()
    if mean == 0:
        raise ValueError("w_grid must have positive mass")
    W = W / mean
    if not (0 <= target_density <= 1):
        raise ValueError("target_density must lie in [0, 1]")
    m = W.shape[0]
    n2 = n if n2 is None else n2
    if symmetric and n2 != n:
        raise ValueError("symmetric generation requires a square matrix")

    def cell(x: float) -> int:
        return min(int(x * m), m - 1)

    probs = np.empty((n, n2))
    for i in range(n):
        xi = (i + 0.5) / n
        for j in range(n2):
            yj = (j + 0.5) / n2
            probs[i, j] = target_density * W[cell(xi), cell(yj)]
    clipped = int((probs > 1.0).sum())
    if clipped:
        logger.warning(
            "W-random generation clipped %d of %d probabilities at 1", clipped, probs.size
        )
    probs = np.minimum(probs, 1.0)
    rng = np.random.default_rng(seed)
    u = rng.random((n, n2))
    keep = u < probs
    if symmetric:
        upper = np.triu(keep)
        keep = upper | upper.T
        # the strict lower triangle's draws are discarded, diagonal kept once
    ones = frozenset((int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(keep)))
    return BinaryMatrix(n, n2, ones)


# ---------------------------------------------------------------------------
# boundedness vs regularity audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    """Both sandwich directions at p = inf for one matrix.

    bounded_to_regular: (C, eta)-bounded implies no (C, eta, inf) partition
    violation exists.  regular_to_bounded: no (C, eta, inf) violation among
    grids implies (4C, eta)-boundedness.
    """

    bounded: bool
    witness_verdict: str
    bounded_to_regular_ok: bool
    regular_to_bounded_ok: bool
    bounded_4c: bool


def boundedness_vs_regularity_audit(f: BinaryMatrix, C: float, eta: float) -> AuditReport:
    params = RegularityParams(C=C, eta=eta, p=math.inf)
    bnd = is_bounded(f, C, eta)
    witness = regularity_witness_search(f, params, mode="grid")
    bnd4 = is_bounded(f, 4 * C, eta)
    dir1 = (not bnd.bounded) or witness.verdict == "none-found"
    dir2 = (witness.verdict == "violated") or bnd4.bounded
    return AuditReport(
        bounded=bnd.bounded,
        witness_verdict=witness.verdict,
        bounded_to_regular_ok=dir1,
        regular_to_bounded_ok=dir2,
        bounded_4c=bnd4.bounded,
    )


# ---------------------------------------------------------------------------
# step-kernel grid text format
# ---------------------------------------------------------------------------


def parse_w_grid(text: str) -> np.ndarray:
    """Parse the grid format: a line "m", then m rows of m reals; '#'
    comments and blank lines are ignored."""
    rows: list[list[float]] = []
    m: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m is None:
            try:
                m = int(line)
            except ValueError:
                raise MatrixFormatError(f"line {lineno}: expected the grid size") from None
            if m < 1:
                raise MatrixFormatError(f"line {lineno}: grid size must be >= 1")
            continue
        parts = line.split()
        if len(parts) != m:
            raise MatrixFormatError(f"line {lineno}: expected {m} entries")
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise MatrixFormatError(f"line {lineno}: non-numeric entry") from None
    if m is None:
        raise MatrixFormatError("empty grid file")
    if len(rows) != m:
        raise MatrixFormatError(f"expected {m} grid rows, got {len(rows)}")
    return np.array(rows)


def read_w_grid(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_w_grid(fh.read())
