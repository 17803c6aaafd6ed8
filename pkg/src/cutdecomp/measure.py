"""Measure-theoretic core for {0,1} matrices under the uniform product measure.

A matrix f on [n1] x [n2] is viewed as a function on a probability space:
mu is the uniform measure, so a set S of rows has mu1(S) = |S|/n1, a
rectangle A = A1 x A2 has mu(A) = mu1(A1) * mu2(A2), and integrals are
entry sums divided by n1*n2.  Everything set-measure-valued is computed in
exact rational arithmetic (fractions.Fraction); only norms and cut-norm
values live in binary64, with a documented comparison tolerance of 1e-9.

The objects here are deliberately small and immutable:

- BinaryMatrix: a {0,1} matrix stored as its set of one-positions (1-based).
- Rectangle: a combinatorial rectangle A1 x A2; sides may be empty when the
  rectangle is used as a witness, never as a partition cell.
- RectPartition: a partition of a (sub-)box into rectangles.
- StepMatrix: a function constant on the cells of a RectPartition.
- RealMatrix: either a dense array or the composite "binary minus step",
  which keeps residuals f - E(f|P) exactly representable.

Indices in every public interface are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

#: Default cap on the enumerated dimension of the exhaustive cut-norm scan.
EXHAUSTIVE_LIMIT = 22

#: Absolute tolerance for binary64 inequality comparisons across the library.
FLOAT_TOL = 1e-9


class MatrixFormatError(ValueError):
    """Raised for malformed matrix/tensor/CSP text files."""


class DimensionLimitError(ValueError):
    """Raised when an exhaustive enumeration would exceed its size cap."""


class InvalidPartitionError(ValueError):
    """Raised when rectangle cells fail to partition their box."""


# ---------------------------------------------------------------------------
# core objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryMatrix:
    """A {0,1} matrix on [n1] x [n2], stored as its set of one-positions.

    Attributes
    ----------
    n1, n2 : int
        Row and column counts, both >= 1.
    ones : frozenset[tuple[int, int]]
        Positions (i, j) holding a one, 1-based.
    """

    n1: int
    n2: int
    ones: frozenset  # frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("matrix dimensions must be >= 1")
        for i, j in self.ones:
            if not (1 <= i <= self.n1 and 1 <= j <= self.n2):
                raise ValueError(f"one-position ({i}, {j}) outside [{self.n1}] x [{self.n2}]")

    @classmethod
    def from_pairs(cls, n1: int, n2: int, pairs: Iterable[tuple[int, int]]) -> "BinaryMatrix":
        """Build from an iterable of positions, rejecting duplicates."""
        seen: set[tuple[int, int]] = set()
        for p in pairs:
            p = (int(p[0]), int(p[1]))
            if p in seen:
                raise ValueError(f"duplicate one-position {p}")
            seen.add(p)
        return cls(n1, n2, frozenset(seen))

    @classmethod
    def from_dense(cls, arr: np.ndarray) -> "BinaryMatrix":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d array")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("entries must be 0 or 1")
        ones = frozenset((int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(arr)))
        return cls(arr.shape[0], arr.shape[1], ones)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n1, self.n2), dtype=np.float64)
        for i, j in self.ones:
            out[i - 1, j - 1] = 1.0
        return out

    def count_in(self, rows: frozenset, cols: frozenset) -> int:
        """Number of ones inside rows x cols."""
        if not rows or not cols:
            return 0
        # iterate the sparser description
        if len(self.ones) <= len(rows) * len(cols):
            return sum(1 for (i, j) in self.ones if i in rows and j in cols)
        return sum(1 for i in rows for j in cols if (i, j) in self.ones)


@dataclass(frozen=True)
class Rectangle:
    """A combinatorial rectangle A1 x A2 given by its row and column index sets.

    Empty sides are allowed (the empty rectangle is a legitimate cut-norm
    witness); partition cells are validated separately to be nonempty.
    """

    rows: frozenset  # frozenset[int]
    cols: frozenset  # frozenset[int]

    @classmethod
    def of(cls, rows: Iterable[int], cols: Iterable[int]) -> "Rectangle":
        return cls(frozenset(int(i) for i in rows), frozenset(int(j) for j in cols))

    @property
    def size(self) -> int:
        return len(self.rows) * len(self.cols)

    @property
    def is_empty(self) -> bool:
        return not self.rows or not self.cols

    def measure(self, n1: int, n2: int) -> Fraction:
        return Fraction(len(self.rows), n1) * Fraction(len(self.cols), n2)

    def intersect(self, other: "Rectangle") -> "Rectangle":
        return Rectangle(self.rows & other.rows, self.cols & other.cols)

    def contains(self, other: "Rectangle") -> bool:
        return other.rows <= self.rows and other.cols <= self.cols

    def key(self) -> tuple:
        """Canonical ordering key: (|rows|, |cols|, sorted rows, sorted cols)."""
        return (len(self.rows), len(self.cols), tuple(sorted(self.rows)), tuple(sorted(self.cols)))

    def sorted_rows(self) -> tuple[int, ...]:
        return tuple(sorted(self.rows))

    def sorted_cols(self) -> tuple[int, ...]:
        return tuple(sorted(self.cols))


def _as_index_space(given: Union[int, Iterable[int]]) -> frozenset:
    """An index space given either as a size n (meaning 1..n) or explicitly."""
    if isinstance(given, (int, np.integer)):
        n = int(given)
        if n < 1:
            raise ValueError("index space size must be >= 1")
        return frozenset(range(1, n + 1))
    out = frozenset(int(i) for i in given)
    if not out:
        raise ValueError("index space must be nonempty")
    return out


@dataclass(frozen=True)
class RectPartition:
    """A partition of row_space x col_space into rectangle cells.

    Cells are stored in canonical order (sorted by Rectangle.key) so that
    equal partitions compare equal regardless of construction order.
    """

    cells: tuple  # tuple[Rectangle, ...]
    row_space: frozenset
    col_space: frozenset

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple(sorted(self.cells, key=Rectangle.key)))
        self._validate()

    @classmethod
    def build(
        cls,
        cells: Iterable[Rectangle],
        row_space: Union[int, Iterable[int]],
        col_space: Union[int, Iterable[int]],
    ) -> "RectPartition":
        return cls(tuple(cells), _as_index_space(row_space), _as_index_space(col_space))

    @classmethod
    def trivial(cls, n1: int, n2: int) -> "RectPartition":
        rs = _as_index_space(n1)
        cs = _as_index_space(n2)
        return cls((Rectangle(rs, cs),), rs, cs)

    def _validate(self) -> None:
        n_pairs = len(self.row_space) * len(self.col_space)
        total = 0
        seen: set[tuple[int, int]] = set()
        for cell in self.cells:
            if cell.is_empty:
                raise InvalidPartitionError("partition cell with an empty side")
            if not (cell.rows <= self.row_space and cell.cols <= self.col_space):
                raise InvalidPartitionError("partition cell outside its index spaces")
            total += cell.size
            for i in cell.rows:
                for j in cell.cols:
                    seen.add((i, j))
        if total != n_pairs or len(seen) != n_pairs:
            raise InvalidPartitionError("cells do not partition the box exactly")

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def iota(self) -> Fraction:
        """min over cells of min(mu1(rows), mu2(cols)), relative to the spaces."""
        n1 = len(self.row_space)
        n2 = len(self.col_space)
        best = Fraction(1)
        for cell in self.cells:
            m = min(Fraction(len(cell.rows), n1), Fraction(len(cell.cols), n2))
            if m < best:
                best = m
        return best

    def cell_containing(self, i: int, j: int) -> Rectangle:
        for cell in self.cells:
            if i in cell.rows and j in cell.cols:
                return cell
        raise KeyError(f"({i}, {j}) not covered")

    def refines(self, coarser: "RectPartition") -> bool:
        """True when every cell here is contained in some cell of `coarser`."""
        return all(any(c.contains(cell) for c in coarser.cells) for cell in self.cells)


@dataclass(frozen=True)
class StepMatrix:
    """A function on [n1] x [n2] constant on the cells of a partition.

    values[k] is the (exact rational) value on partition.cells[k].
    """

    partition: RectPartition
    values: tuple  # tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if len(self.values) != self.partition.n_cells:
            raise ValueError("one value per cell required")
        object.__setattr__(self, "values", tuple(Fraction(v) for v in self.values))

    @property
    def n1(self) -> int:
        return len(self.partition.row_space)

    @property
    def n2(self) -> int:
        return len(self.partition.col_space)

    def value_at(self, i: int, j: int) -> Fraction:
        for cell, v in zip(self.partition.cells, self.values):
            if i in cell.rows and j in cell.cols:
                return v
        raise KeyError(f"({i}, {j}) not covered")

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n1, self.n2), dtype=np.float64)
        for cell, v in zip(self.partition.cells, self.values):
            fv = float(v)
            for i in cell.rows:
                for j in cell.cols:
                    out[i - 1, j - 1] = fv
        return out

    def integral_on(self, rect: Rectangle) -> Fraction:
        total = Fraction(0)
        for cell, v in zip(self.partition.cells, self.values):
            if v == 0:
                continue
            overlap = len(cell.rows & rect.rows) * len(cell.cols & rect.cols)
            if overlap:
                total += v * overlap
        return total / (self.n1 * self.n2)


@dataclass(frozen=True, eq=False)
class RealMatrix:
    """A real matrix, dense or in composite "binary minus step" form.

    The composite form represents base + step_sign * step without ever
    materializing entries, which keeps residuals f - E(f|P) exact: integrals
    over rectangles are rational and computed as such.
    """

    n1: int
    n2: int
    dense: np.ndarray | None = None
    base: BinaryMatrix | None = None
    step: StepMatrix | None = None
    step_sign: int = -1

    def __post_init__(self) -> None:
        if self.dense is not None:
            if self.base is not None or self.step is not None:
                raise ValueError("dense and composite parts are exclusive")
            arr = np.asarray(self.dense, dtype=np.float64)
            if arr.shape != (self.n1, self.n2):
                raise ValueError("dense shape mismatch")
            if not np.isfinite(arr).all():
                raise ValueError("entries must be finite")
            object.__setattr__(self, "dense", arr)
        elif self.base is None and self.step is None:
            raise ValueError("empty RealMatrix")
        if self.step_sign not in (-1, 1):
            raise ValueError("step_sign must be +1 or -1")
        for part, shape in ((self.base, "base"), (self.step, "step")):
            if part is not None and (part.n1, part.n2) != (self.n1, self.n2):
                raise ValueError(f"{shape} shape mismatch")

    @classmethod
    def from_dense(cls, arr: np.ndarray) -> "RealMatrix":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape[0], arr.shape[1], dense=arr)

    @classmethod
    def from_binary(cls, f: BinaryMatrix) -> "RealMatrix":
        return cls(f.n1, f.n2, base=f)

    @classmethod
    def from_step(cls, s: StepMatrix) -> "RealMatrix":
        return cls(s.n1, s.n2, step=s, step_sign=1)

    @classmethod
    def residual(cls, f: BinaryMatrix, s: StepMatrix) -> "RealMatrix":
        """f - s, kept in exact composite form."""
        if (f.n1, f.n2) != (s.n1, s.n2):
            raise ValueError("shape mismatch")
        return cls(f.n1, f.n2, base=f, step=s, step_sign=-1)

    @property
    def is_exact(self) -> bool:
        return self.dense is None

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense.copy()
        out = np.zeros((self.n1, self.n2), dtype=np.float64)
        if self.base is not None:
            out += self.base.to_dense()
        if self.step is not None:
            out += self.step_sign * self.step.to_dense()
        return out

    def value_at(self, i: int, j: int):
        if self.dense is not None:
            return float(self.dense[i - 1, j - 1])
        v = Fraction(0)
        if self.base is not None:
            v += int((i, j) in self.base.ones)
        if self.step is not None:
            v += self.step_sign * self.step.value_at(i, j)
        return v

    def integral_on(self, rect: Rectangle):
        """Integral of the matrix over a rectangle; exact Fraction when composite."""
        if rect.is_empty:
            return Fraction(0) if self.is_exact else 0.0
        if self.dense is not None:
            ridx = [i - 1 for i in sorted(rect.rows)]
            cidx = [j - 1 for j in sorted(rect.cols)]
            return float(self.dense[np.ix_(ridx, cidx)].sum()) / (self.n1 * self.n2)
        total = Fraction(0)
        if self.base is not None:
            total += Fraction(self.base.count_in(rect.rows, rect.cols), self.n1 * self.n2)
        if self.step is not None:
            total += self.step_sign * self.step.integral_on(rect)
        return total


MatrixLike = Union[BinaryMatrix, StepMatrix, RealMatrix]


def as_real(g: MatrixLike) -> RealMatrix:
    if isinstance(g, RealMatrix):
        return g
    if isinstance(g, BinaryMatrix):
        return RealMatrix.from_binary(g)
    if isinstance(g, StepMatrix):
        return RealMatrix.from_step(g)
    raise TypeError(f"not a matrix type: {type(g)!r}")


# ---------------------------------------------------------------------------
# measure operations
# ---------------------------------------------------------------------------


def density(f: BinaryMatrix) -> Fraction:
    """||f||_{L1} = mu(support) for a {0,1} matrix, as an exact rational."""
    return Fraction(len(f.ones), f.n1 * f.n2)


def integral_over(g: MatrixLike, rect: Rectangle):
    """int_{rect} g dmu.  Exact Fraction for binary/step/composite inputs."""
    return as_real(g).integral_on(rect)


def conditional_expectation(f: BinaryMatrix, partition: RectPartition) -> StepMatrix:
    """E(f | A_P): on each cell, the average of f over that cell.

    This is simultaneously a sum of cut matrices with pairwise disjoint
    supports (one per cell) and the L2 projection onto cell-constant
    functions; cell averages are exact rationals.
    """
    if partition.row_space != frozenset(range(1, f.n1 + 1)) or partition.col_space != frozenset(
        range(1, f.n2 + 1)
    ):
        raise InvalidPartitionError("partition spaces must match the matrix box")
    values = []
    for cell in partition.cells:
        cnt = f.count_in(cell.rows, cell.cols)
        values.append(Fraction(cnt, cell.size))
    return StepMatrix(partition, tuple(values))


def step_lp_norm(step: StepMatrix, p: float) -> float:
    """||step||_{L_p} under the uniform measure; p in [1, inf]."""
    if p != math.inf and p < 1:
        raise ValueError("p must be >= 1 or inf")
    n_pairs = step.n1 * step.n2
    if p == math.inf:
        return max((abs(float(v)) for v in step.values), default=0.0)
    acc = 0.0
    for cell, v in zip(step.partition.cells, step.values):
        if v != 0:
            acc += abs(float(v)) ** p * (cell.size / n_pairs)
    return acc ** (1.0 / p)


def step_l1_norm_exact(step: StepMatrix) -> Fraction:
    """||step||_{L1} as an exact rational (used by exactness assertions)."""
    n_pairs = step.n1 * step.n2
    return sum(
        (abs(v) * cell.size for cell, v in zip(step.partition.cells, step.values)),
        Fraction(0),
    ) / n_pairs


def iota(partition: RectPartition) -> Fraction:
    """The minimum side density over cells; 1 for the trivial partition."""
    return partition.iota()


def step_difference(fine: StepMatrix, coarse: StepMatrix) -> StepMatrix:
    """fine - coarse as a step matrix on fine's partition.

    Requires fine's partition to refine coarse's.
    """
    if not fine.partition.refines(coarse.partition):
        raise InvalidPartitionError("difference requires a refining partition")
    coarse_cells = list(zip(coarse.partition.cells, coarse.values))
    values = []
    for cell, v in zip(fine.partition.cells, fine.values):
        i = next(iter(cell.rows))
        j = next(iter(cell.cols))
        parent_v = next(pv for pc, pv in coarse_cells if i in pc.rows and j in pc.cols)
        values.append(v - parent_v)
    return StepMatrix(fine.partition, tuple(values))


# ---------------------------------------------------------------------------
# exhaustive cut norm
# ---------------------------------------------------------------------------


def cut_norm_exact(
    g: MatrixLike, limit: int = EXHAUSTIVE_LIMIT
) -> tuple[float, Rectangle]:
    """||g||_cut = max over S, T of |sum of g over S x T|, by exhaustive scan.

    Enumerates all subsets of the smaller dimension (which must not exceed
    `limit`); for each fixed subset the optimal other side collects the
    indices whose partial sums share a sign, done for both signs.  Among
    maximizers the witness with the lexicographically smallest
    (|rows|, |cols|, rows, cols) key is returned; when the maximum is 0 that
    is the empty rectangle.  The returned value is recomputed from the
    witness (exactly, for exactly-representable inputs).
    """
    from . import kernels

    gm = as_real(g)
    if min(gm.n1, gm.n2) > limit:
        raise DimensionLimitError(
            f"min(n1, n2) = {min(gm.n1, gm.n2)} exceeds the exhaustive limit "
            f"{limit}; use the heuristic oracle for matrices this large"
        )
    arr = gm.to_dense()
    _, rows0, cols0 = kernels.cut_norm_dense(arr)
    witness = Rectangle.of((i + 1 for i in rows0), (j + 1 for j in cols0))
    return scaled_integral(gm, witness), witness


def scaled_integral(g: MatrixLike, rect: Rectangle) -> float:
    """(n1*n2) * |int_rect g dmu|, scaled before any float conversion."""
    gm = as_real(g)
    integral = gm.integral_on(rect)
    if isinstance(integral, Fraction):
        return float(abs(integral) * (gm.n1 * gm.n2))
    return abs(integral) * gm.n1 * gm.n2


# ---------------------------------------------------------------------------
# matrix text format
# ---------------------------------------------------------------------------


def _content_lines(text: str) -> Iterator[tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_matrix_text(text: str) -> BinaryMatrix:
    """Parse the one-position format: a header "n1 n2", then one "i j" line
    per one.  '#' starts a comment; blank lines are ignored; duplicate
    positions are an error."""
    lines = _content_lines(text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise MatrixFormatError("empty matrix file") from None
    parts = header.split()
    if len(parts) != 2:
        raise MatrixFormatError(f"line {lineno}: expected 'n1 n2', got {header!r}")
    try:
        n1, n2 = int(parts[0]), int(parts[1])
    except ValueError:
        raise MatrixFormatError(f"line {lineno}: non-integer dimensions") from None
    if n1 < 1 or n2 < 1:
        raise MatrixFormatError(f"line {lineno}: dimensions must be >= 1")
    seen: set[tuple[int, int]] = set()
    for lineno, line in lines:
        parts = line.split()
        if len(parts) != 2:
            raise MatrixFormatError(f"line {lineno}: expected 'i j', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise MatrixFormatError(f"line {lineno}: non-integer position") from None
        if not (1 <= i <= n1 and 1 <= j <= n2):
            raise MatrixFormatError(f"line {lineno}: position ({i}, {j}) out of range")
        if (i, j) in seen:
            raise MatrixFormatError(f"line {lineno}: duplicate position ({i}, {j})")
        seen.add((i, j))
    return BinaryMatrix(n1, n2, frozenset(seen))


def format_matrix_text(f: BinaryMatrix) -> str:
    out = [f"{f.n1} {f.n2}"]
    out.extend(f"{i} {j}" for i, j in sorted(f.ones))
    return "\n".join(out) + "\n"


def read_matrix_text(path) -> BinaryMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix_text(fh.read())


def write_matrix_text(f: BinaryMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matrix_text(f))
