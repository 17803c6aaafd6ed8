"""Shared test helpers: independent brute-force oracles and generators."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from cutdecomp.csp import Constraint, CSPInstance
from cutdecomp.measure import BinaryMatrix


def brute_cut_norm(values) -> tuple[Fraction, tuple[tuple[int, ...], tuple[int, ...]]]:
    """Exhaustive cut norm over a dense grid of Fractions, independent of the
    library: every (S, T) pair, exact sums, canonical
    (|rows|, |cols|, rows, cols) tie-break.  Only for tiny matrices."""
    vals = [[Fraction(x) for x in row] for row in values]
    n1, n2 = len(vals), len(vals[0])
    best = Fraction(0)
    best_key = (0, 0, (), ())
    for rmask in range(1 << n1):
        rows = tuple(i for i in range(n1) if (rmask >> i) & 1)
        for cmask in range(1 << n2):
            cols = tuple(j for j in range(n2) if (cmask >> j) & 1)
            s = sum((vals[i][j] for i in rows for j in cols), Fraction(0))
            v = abs(s)
            key = (len(rows), len(cols), tuple(r + 1 for r in rows), tuple(c + 1 for c in cols))
            if v > best or (v == best and v > 0 and key < best_key):
                best = v
                best_key = key
    if best == 0:
        return Fraction(0), ((), ())
    return best, (best_key[2], best_key[3])


def rand_binary(rng: np.random.Generator, n1: int, n2: int, density: float) -> BinaryMatrix:
    return BinaryMatrix.from_dense((rng.random((n1, n2)) < density).astype(int))


def structured_matrix(kind: str, n: int, rng: np.random.Generator) -> BinaryMatrix:
    """Small corpus generator shared by engine and acceptance tests."""
    if kind == "random":
        return rand_binary(rng, n, n, 0.5)
    if kind == "sparse":
        return rand_binary(rng, n, n, 0.2)
    if kind == "block":
        d = np.zeros((n, n), dtype=int)
        d[: n // 2, : n // 2] = 1
        d[n // 2 :, n // 2 :] = 1
        return BinaryMatrix.from_dense(d)
    if kind == "corner":
        d = (rng.random((n, n)) < 0.15).astype(int)
        d[: max(1, n // 3), : max(1, n // 3)] = 1
        return BinaryMatrix.from_dense(d)
    if kind == "stripes":
        d = np.zeros((n, n), dtype=int)
        d[:, ::2] = 1
        return BinaryMatrix.from_dense(d)
    raise ValueError(kind)


def random_csp(n: int, k: int, m: int, rng: np.random.Generator) -> CSPInstance:
    """Random instance with distinct constraints and no never-satisfiable
    tables; m is capped by the number of distinct constraints available."""
    m = min(m, math.comb(n, k) * ((1 << (1 << k)) - 1))
    cons: list[Constraint] = []
    used: set[tuple] = set()
    while len(cons) < m:
        vs = tuple(sorted(int(v) for v in rng.choice(n, size=k, replace=False) + 1))
        tb = tuple(int(b) for b in rng.integers(0, 2, 1 << k))
        if (vs, tb) in used or all(b == 0 for b in tb):
            continue
        used.add((vs, tb))
        cons.append(Constraint(vs, tb))
    return CSPInstance(n, k, tuple(cons))


def strip_timings(doc: dict) -> dict:
    out = dict(doc)
    if "manifest" in out:
        man = dict(out["manifest"])
        man.pop("timings", None)
        out["manifest"] = man
    return out


def all_subsets(items):
    items = tuple(items)
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
