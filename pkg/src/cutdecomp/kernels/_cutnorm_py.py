"""Pure-numpy fallback for the exhaustive cut-norm scan.

Enumerates every subset of the k enumerated rows in chunks, computing all
column partial sums with one matmul per chunk.  Semantics match the compiled
kernel: for each subset S the optimal other side collects the columns whose
partial sums share a sign (both signs tried), and among maximizers the
witness minimizing the key (|rows|, |cols|, rows, cols) in the original
orientation wins.  A maximum of 0 yields the empty witness.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 4096


def _candidate_key(s_idx: tuple, t_idx: tuple, swap: bool) -> tuple:
    rows, cols = (t_idx, s_idx) if swap else (s_idx, t_idx)
    return (len(rows), len(cols), rows, cols)


def cutnorm_scan(G: np.ndarray, swap: bool) -> tuple[float, tuple, tuple]:
    """Scan all subsets of G's rows.  `swap` marks G as the transpose of the
    caller's matrix, so witness components are reported swapped back."""
    G = np.ascontiguousarray(G, dtype=np.float64)
    k, m = G.shape
    if k > 62:
        raise ValueError("enumerated dimension too large for the scan")
    shifts = np.arange(k, dtype=np.uint64)
    best_val = 0.0
    best_key: tuple | None = None
    best_witness = ((), ())

    total = 1 << k
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        masks = np.arange(lo, hi, dtype=np.uint64)
        bits = ((masks[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.float64)
        colsums = bits @ G
        pos = np.where(colsums > 0, colsums, 0.0).sum(axis=1)
        neg = np.where(colsums < 0, -colsums, 0.0).sum(axis=1)
        vals = np.maximum(pos, neg)
        cmax = float(vals.max())
        if cmax < best_val:
            continue
        if cmax > best_val:
            best_val = cmax
            best_key = None
            best_witness = ((), ())
        if best_val == 0.0:
            continue
        for row in np.nonzero(vals == best_val)[0]:
            mask = int(masks[row])
            s_idx = tuple(i for i in range(k) if (mask >> i) & 1)
            cs = colsums[row]
            for sgn, attained in ((1, pos[row]), (-1, neg[row])):
                if attained != best_val:
                    continue
                t_idx = tuple(np.nonzero(cs > 0 if sgn > 0 else cs < 0)[0].tolist())
                key = _candidate_key(s_idx, t_idx, swap)
                if best_key is None or key < best_key:
                    best_key = key
                    best_witness = (s_idx, t_idx) if not swap else (t_idx, s_idx)

    if best_val == 0.0:
        return 0.0, (), ()
    return best_val, best_witness[0], best_witness[1]
