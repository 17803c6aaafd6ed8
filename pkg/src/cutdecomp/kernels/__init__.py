"""Backend selection for the exhaustive cut-norm scan.

The compiled Gray-code kernel is used when the extension built; otherwise a
chunked-numpy fallback with identical semantics takes over.  Both expose

    cutnorm_scan(G, swap) -> (value, rows, cols)

over 0-based indices; `cut_norm_dense` picks the enumeration orientation
(always the smaller dimension) and reports the witness in the original one.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly by whichever build runs
    from . import _cutnorm as _impl

    BACKEND = "compiled"
except ImportError:  # pragma: no cover
    from . import _cutnorm_py as _impl

    BACKEND = "python"

from . import _cutnorm_py


def backend_name() -> str:
    return BACKEND


def cut_norm_dense(arr: np.ndarray, backend=None) -> tuple[float, tuple, tuple]:
    """Exhaustive cut norm of a dense array: (value, rows, cols), 0-based.

    Enumerates subsets of the smaller dimension.  The value is the raw scan
    maximum; callers recompute it from the witness when exactness matters.
    """
    table = {None: _impl, "compiled": _impl, "python": _cutnorm_py}
    if backend not in table:
        raise ValueError(f"unknown backend {backend!r}")
    impl = table[backend]
    if backend == "compiled" and BACKEND != "compiled":
        raise RuntimeError("compiled kernel unavailable")
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d array")
    n1, n2 = arr.shape
    if n1 <= n2:
        return impl.cutnorm_scan(arr, False)
    return impl.cutnorm_scan(np.ascontiguousarray(arr.T), True)
