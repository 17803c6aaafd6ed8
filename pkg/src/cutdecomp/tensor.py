"""Cut decomposition of {0,1} tensors by flattening.

A k-dimensional tensor is flattened into a matrix by grouping the first
floor(k/2) axes into row tuples and the rest into column tuples (row-major,
1-based).  The matrix engine decomposes the flattening; each resulting cut
matrix lives on a rectangle of tuple sets, whose sides are then rounded
back into products of per-axis sets by recursively decomposing the side
indicators as lower-order tensors.  Every product test set of the tensor
flattens to a rectangle, so the matrix residual bound dominates the tensor
one and the rounding budgets are chosen to keep the total at eps * |ones|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .engine import decompose, synthesize_params
from .measure import BinaryMatrix, MatrixFormatError
from .oracle import OracleConfig

#: Exhaustive tensor cut norm enumerates every axis except the largest;
#: the sum of the enumerated axis lengths is capped here.
TENSOR_SCAN_LIMIT = 18

_TOL = 1e-9


@dataclass(frozen=True)
class BinaryTensor:
    """A {0,1} tensor given by its dimensions and the set of one positions
    (1-based index tuples)."""

    dims: tuple[int, ...]
    ones: frozenset[tuple[int, ...]]

    def __post_init__(self) -> None:
        if len(self.dims) < 1 or any(d < 1 for d in self.dims):
            raise ValueError("dims must be positive")

    @classmethod
    def from_pairs(cls, dims: Sequence[int], positions: Iterable[Sequence[int]]) -> "BinaryTensor":
        dims = tuple(int(d) for d in dims)
        seen: set[tuple[int, ...]] = set()
        for pos in positions:
            pos = tuple(int(x) for x in pos)
            if len(pos) != len(dims):
                raise MatrixFormatError(f"position {pos} has arity {len(pos)}, expected {len(dims)}")
            if any(not (1 <= x <= d) for x, d in zip(pos, dims)):
                raise MatrixFormatError(f"position {pos} out of range for dims {dims}")
            if pos in seen:
                raise MatrixFormatError(f"duplicate position {pos}")
            seen.add(pos)
        return cls(dims, frozenset(seen))

    @property
    def k(self) -> int:
        return len(self.dims)

    def to_dense(self) -> np.ndarray:
        arr = np.zeros(self.dims, dtype=np.int64)
        for pos in self.ones:
            arr[tuple(x - 1 for x in pos)] = 1
        return arr


@dataclass(frozen=True)
class CutTensor:
    """value * indicator(S_1 x ... x S_k): one product side per axis."""

    dims: tuple[int, ...]
    sides: tuple[frozenset[int], ...]
    value: Fraction

    def __post_init__(self) -> None:
        if len(self.sides) != len(self.dims):
            raise ValueError("one side per axis required")
        for side, d in zip(self.sides, self.dims):
            if any(not (1 <= x <= d) for x in side):
                raise ValueError("side index out of range")

    def to_dense(self) -> np.ndarray:
        arr = np.zeros(self.dims, dtype=np.float64)
        if any(not s for s in self.sides):
            return arr
        idx = np.ix_(*[sorted(x - 1 for x in side) for side in self.sides])
        arr[idx] = float(self.value)
        return arr


# ---------------------------------------------------------------------------
# flattening codecs (row-major, 1-based)
# ---------------------------------------------------------------------------


def flatten_index(dims: Sequence[int], idx: Sequence[int]) -> int:
    """Row-major linearization: the last axis varies fastest."""
    out = 0
    for d, x in zip(dims, idx):
        if not (1 <= x <= d):
            raise ValueError(f"index {x} out of range 1..{d}")
        out = out * d + (x - 1)
    return out + 1


def unflatten_index(dims: Sequence[int], lin: int) -> tuple[int, ...]:
    total = math.prod(dims)
    if not (1 <= lin <= total):
        raise ValueError(f"linear index {lin} out of range 1..{total}")
    lin -= 1
    rev: list[int] = []
    for d in reversed(tuple(dims)):
        rev.append(lin % d + 1)
        lin //= d
    return tuple(reversed(rev))


def split_point(k: int) -> int:
    """Number of leading axes grouped into matrix rows."""
    return k // 2


def flatten(t: BinaryTensor) -> BinaryMatrix:
    """Flatten a tensor with k >= 2 axes into its row/column-tuple matrix."""
    if t.k < 2:
        raise ValueError("flattening needs at least two axes")
    k1 = split_point(t.k)
    rdims, cdims = t.dims[:k1], t.dims[k1:]
    pairs = [
        (flatten_index(rdims, pos[:k1]), flatten_index(cdims, pos[k1:]))
        for pos in t.ones
    ]
    return BinaryMatrix.from_pairs(math.prod(rdims), math.prod(cdims), pairs)


def unflatten(m: BinaryMatrix, dims: Sequence[int]) -> BinaryTensor:
    dims = tuple(int(d) for d in dims)
    k1 = split_point(len(dims))
    rdims, cdims = dims[:k1], dims[k1:]
    if m.n1 != math.prod(rdims) or m.n2 != math.prod(cdims):
        raise ValueError("matrix shape does not match the flattened dims")
    ones = frozenset(
        unflatten_index(rdims, i) + unflatten_index(cdims, j) for (i, j) in m.ones
    )
    return BinaryTensor(dims, ones)


# ---------------------------------------------------------------------------
# exhaustive tensor cut norm
# ---------------------------------------------------------------------------


def tensor_cut_norm_exact(
    t: BinaryTensor,
    cuts: Sequence[CutTensor] = (),
    limit: int = TENSOR_SCAN_LIMIT,
) -> tuple[float, tuple[tuple[int, ...], ...]]:
    """max over products S_1 x ... x S_k of |sum of (t - sum cuts)|.

    Every axis except the largest is enumerated by Gray-code subset updates;
    the largest axis is optimized by sign.  Requires the enumerated axis
    lengths to sum to at most `limit`.  Returns the value (recomputed from
    the witness in one pass, so no incremental drift) and the witness sides.
    """
    G = t.to_dense().astype(np.float64)
    for ct in cuts:
        if ct.dims != t.dims:
            raise ValueError("cut tensor dims mismatch")
        G = G - ct.to_dense()
    dims = G.shape
    k = G.ndim
    if k == 1:
        pos = [i + 1 for i in range(dims[0]) if G[i] > 0]
        neg = [i + 1 for i in range(dims[0]) if G[i] < 0]
        pv = float(G[[i - 1 for i in pos]].sum()) if pos else 0.0
        nv = float(-G[[i - 1 for i in neg]].sum()) if neg else 0.0
        side = tuple(pos) if pv >= nv else tuple(neg)
        return max(pv, nv), ((side if max(pv, nv) > 0 else ()),)
    L = int(np.argmax(dims))
    scan_axes = [i for i in range(k) if i != L]
    if sum(dims[i] for i in scan_axes) > limit:
        raise ValueError(
            f"enumerated axis lengths sum to {sum(dims[i] for i in scan_axes)}, "
            f"limit is {limit}"
        )
    H = np.moveaxis(G, L, -1)  # scan axes first, optimized axis last
    best: list = [0.0, tuple(() for _ in range(k))]

    def leaf(vec: np.ndarray, chosen: tuple[tuple[int, ...], ...]) -> None:
        pv = float(vec[vec > 0].sum())
        nv = float(-vec[vec < 0].sum())
        val = max(pv, nv)
        if val > best[0] + 1e-12:
            if pv >= nv:
                lside = tuple(int(i) + 1 for i in np.nonzero(vec > 0)[0])
            else:
                lside = tuple(int(i) + 1 for i in np.nonzero(vec < 0)[0])
            sides = list(chosen) + [lside]
            full = sides[:L] + [sides[-1]] + sides[L:-1]  # restore axis order
            # recompute without incremental drift
            sub = G[np.ix_(*[[x - 1 for x in s] for s in full])]
            best[0] = abs(float(sub.sum()))
            best[1] = tuple(tuple(s) for s in full)

    def rec(arr: np.ndarray, chosen: tuple[tuple[int, ...], ...]) -> None:
        if arr.ndim == 1:
            leaf(arr, chosen)
            return
        n0 = arr.shape[0]
        partial = np.zeros(arr.shape[1:], dtype=np.float64)
        state: set[int] = set()
        rec(partial, chosen + ((),))
        for g in range(1, 1 << n0):
            bit = (g & -g).bit_length() - 1
            if bit in state:
                state.remove(bit)
                partial = partial - arr[bit]
            else:
                state.add(bit)
                partial = partial + arr[bit]
            rec(partial, chosen + (tuple(sorted(i + 1 for i in state)),))

    rec(H, ())
    if best[0] <= 1e-12:
        return 0.0, tuple(() for _ in range(k))
    return best[0], best[1]


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TensorDecomposition:
    dims: tuple[int, ...]
    cut_tensors: tuple[CutTensor, ...]
    report: dict

    def to_json_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "cut_tensors": [
                {
                    "sides": [sorted(s) for s in ct.sides],
                    "value": str(ct.value),
                    "value_float": float(ct.value),
                }
                for ct in self.cut_tensors
            ],
            "report": self.report,
        }


def tensor_decompose(
    t: BinaryTensor,
    eps: float,
    oracle_cfg: OracleConfig | None = None,
) -> TensorDecomposition:
    """Approximate t by cut tensors to tensor cut norm eps * |ones|.

    k = 1 is exact (the support is already a product).  k = 2 delegates to
    the matrix engine: rectangles are products, no rounding needed.  For
    k >= 3 the flattening is decomposed at eps/2 and each cut matrix side
    is rounded into products at eps/6; the cross terms then total at most
    (1/2 + (2 + eps/6) / 6) eps |ones| <= eps |ones|.
    """
    if not (0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")
    n_ones = len(t.ones)
    if n_ones == 0:
        return TensorDecomposition(t.dims, (), {"k": t.k, "n_ones": 0, "eps": eps,
                                                "n_cut_tensors": 0, "levels": []})
    if t.k == 1:
        side = frozenset(x[0] for x in t.ones)
        ct = CutTensor(t.dims, (side,), Fraction(1))
        return TensorDecomposition(t.dims, (ct,), {"k": 1, "n_ones": n_ones, "eps": eps,
                                                   "n_cut_tensors": 1, "levels": []})

    k1 = split_point(t.k)
    flat = flatten(t)
    if t.k == 2:
        params = synthesize_params(eps, a0=_oracle_a0(oracle_cfg))
        result = decompose(flat, params, oracle_cfg)
        cts = tuple(
            CutTensor(t.dims, (frozenset(r.rows), frozenset(r.cols)), v)
            for r, v in result.cut_matrices
        )
        report = {
            "k": 2, "n_ones": n_ones, "eps": eps, "n_cut_tensors": len(cts),
            "levels": [{"cut_matrices": len(result.cut_matrices),
                        "rounds": len(result.trace.steps),
                        "halted": result.trace.halted}],
        }
        return TensorDecomposition(t.dims, cts, report)

    top_params = synthesize_params(eps / 2, a0=_oracle_a0(oracle_cfg))
    result = decompose(flat, top_params, oracle_cfg)
    delta = eps / 6
    rdims, cdims = t.dims[:k1], t.dims[k1:]
    cut_tensors: list[CutTensor] = []
    side_counts: list[tuple[int, int]] = []
    for rect, value in result.cut_matrices:
        row_side = _side_tensor(rect.rows, rdims)
        col_side = _side_tensor(rect.cols, cdims)
        u = tensor_decompose(row_side, delta, oracle_cfg)
        v = tensor_decompose(col_side, delta, oracle_cfg)
        side_counts.append((len(u.cut_tensors), len(v.cut_tensors)))
        for cu in u.cut_tensors:
            for cv in v.cut_tensors:
                cut_tensors.append(
                    CutTensor(t.dims, cu.sides + cv.sides, value * cu.value * cv.value)
                )
    report = {
        "k": t.k, "n_ones": n_ones, "eps": eps,
        "n_cut_tensors": len(cut_tensors),
        "levels": [{"cut_matrices": len(result.cut_matrices),
                    "rounds": len(result.trace.steps),
                    "halted": result.trace.halted,
                    "side_budget": delta,
                    "side_counts": side_counts}],
    }
    return TensorDecomposition(t.dims, tuple(cut_tensors), report)


def _oracle_a0(cfg: OracleConfig | None) -> float:
    return 1.0 if cfg is None else cfg.alpha_claim


def _side_tensor(indices: frozenset[int], dims: tuple[int, ...]) -> BinaryTensor:
    """The indicator of a flattened index set, as a tensor over `dims`."""
    return BinaryTensor(dims, frozenset(unflatten_index(dims, i) for i in indices))


def tensor_verify(
    t: BinaryTensor,
    decomposition: TensorDecomposition,
    eps: float,
    limit: int = TENSOR_SCAN_LIMIT,
) -> dict:
    """Independent residual check: exhaustive tensor cut norm of
    t - sum(cut tensors) against eps * |ones| + 1e-9."""
    norm, witness = tensor_cut_norm_exact(t, decomposition.cut_tensors, limit=limit)
    bound = eps * len(t.ones) + _TOL
    return {
        "residual_cut_norm": norm,
        "bound": bound,
        "ok": norm <= bound,
        "witness": [list(s) for s in witness],
        "n_cut_tensors": len(decomposition.cut_tensors),
    }


# ---------------------------------------------------------------------------
# text format: a dims header line, then one line per one
# ---------------------------------------------------------------------------


def parse_tensor_text(text: str) -> BinaryTensor:
    dims: tuple[int, ...] | None = None
    positions: list[tuple[int, ...]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            nums = [int(x) for x in parts]
        except ValueError:
            raise MatrixFormatError(f"line {lineno}: non-integer entry") from None
        if dims is None:
            if any(d < 1 for d in nums) or not nums:
                raise MatrixFormatError(f"line {lineno}: dims must be positive")
            dims = tuple(nums)
            continue
        if len(nums) != len(dims):
            raise MatrixFormatError(
                f"line {lineno}: expected {len(dims)} indices, got {len(nums)}"
            )
        positions.append(tuple(nums))
    if dims is None:
        raise MatrixFormatError("empty tensor file")
    return BinaryTensor.from_pairs(dims, positions)


def format_tensor_text(t: BinaryTensor) -> str:
    lines = [" ".join(str(d) for d in t.dims)]
    for pos in sorted(t.ones):
        lines.append(" ".join(str(x) for x in pos))
    return "\n".join(lines) + "\n"


def read_tensor_text(path) -> BinaryTensor:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_tensor_text(fh.read())


def write_tensor_text(path, t: BinaryTensor) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_tensor_text(t))
