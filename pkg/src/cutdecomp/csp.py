"""Approximate MAX-CSP via cut decomposition of constraint type tensors.

Constraints of arity k sit on strictly increasing variable tuples; each
distinct truth table (a "type") yields a {0,1} tensor of order k over the
variable set, with a one at every tuple carrying a constraint of that type.
Decomposing each type tensor into cut tensors makes the satisfied-count of
an assignment depend, up to the residual error, only on how many selected
variables fall into each atom of the side-set partition.  The search space
then collapses from 2^n assignments to a grid of atom count vectors.

The returned value is always the exact satisfied count of the returned
assignment, re-evaluated against the instance; the count-grid estimate is
reported separately.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .measure import MatrixFormatError
from .oracle import OracleConfig
from .tensor import BinaryTensor, CutTensor, tensor_decompose

#: opt_bruteforce enumerates all 2^n assignments in numeric chunks.
BRUTEFORCE_LIMIT = 24
_CHUNK = 1 << 20


@dataclass(frozen=True)
class Constraint:
    """A truth table over a strictly increasing variable tuple.

    table has length 2^k and is indexed with the first variable as the most
    significant bit: entry sum(sigma(v_i) << (k-1-i)) decides satisfaction.
    """

    vars: tuple[int, ...]
    table: tuple[int, ...]

    def __post_init__(self) -> None:
        k = len(self.vars)
        if k < 1:
            raise ValueError("constraints need at least one variable")
        if any(b <= a for a, b in zip(self.vars, self.vars[1:])):
            raise ValueError("variables must be strictly increasing")
        if len(self.table) != 1 << k:
            raise ValueError(f"table must have length {1 << k}")
        if any(b not in (0, 1) for b in self.table):
            raise ValueError("table entries must be 0 or 1")

    def satisfied(self, sigma: Sequence[int]) -> int:
        idx = 0
        for v in self.vars:
            idx = (idx << 1) | (sigma[v - 1] & 1)
        return self.table[idx]


@dataclass(frozen=True)
class CSPInstance:
    n: int
    k: int
    constraints: tuple[Constraint, ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.k < 1:
            raise ValueError("k must be positive")
        seen: set[tuple] = set()
        for c in self.constraints:
            if len(c.vars) != self.k:
                raise ValueError(f"constraint arity {len(c.vars)} != k = {self.k}")
            if c.vars[-1] > self.n:
                raise ValueError(f"variable {c.vars[-1]} exceeds n = {self.n}")
            key = (c.vars, c.table)
            if key in seen:
                raise ValueError(f"duplicate constraint on {c.vars}")
            seen.add(key)

    @property
    def m(self) -> int:
        return len(self.constraints)


def evaluate_assignment(instance: CSPInstance, sigma: Sequence[int]) -> int:
    if len(sigma) != instance.n:
        raise ValueError(f"assignment length {len(sigma)} != n = {instance.n}")
    return sum(c.satisfied(sigma) for c in instance.constraints)


def opt_bruteforce(instance: CSPInstance, limit: int = BRUTEFORCE_LIMIT) -> tuple[int, tuple[int, ...]]:
    """Exact optimum with the lexicographically least maximizer.

    Assignments are enumerated as integers with variable 1 as the most
    significant bit, so ascending numeric order is ascending lex order and
    a strict argmax keeps the lex-least winner.
    """
    n = instance.n
    if n > limit:
        raise ValueError(f"n = {n} exceeds the brute-force limit {limit}")
    shifts = np.array([n - v for v in range(1, n + 1)], dtype=np.uint32)
    best_val = -1
    best_a = 0
    for start in range(0, 1 << n, _CHUNK):
        stop = min(start + _CHUNK, 1 << n)
        a = np.arange(start, stop, dtype=np.uint32)
        vals = np.zeros(a.shape[0], dtype=np.int64)
        for c in instance.constraints:
            idx = np.zeros(a.shape[0], dtype=np.uint32)
            for v in c.vars:
                idx = (idx << 1) | ((a >> np.uint32(n - v)) & 1)
            vals += np.asarray(c.table, dtype=np.int64)[idx]
        pos = int(np.argmax(vals))
        if int(vals[pos]) > best_val:
            best_val = int(vals[pos])
            best_a = start + pos
    sigma = tuple((best_a >> (n - v)) & 1 for v in range(1, n + 1))
    return best_val, sigma


def build_type_tensors(instance: CSPInstance) -> dict[tuple[int, ...], BinaryTensor]:
    """One order-k tensor per distinct truth table present in the instance,
    with ones at the (strictly increasing) constrained tuples."""
    groups: dict[tuple[int, ...], set[tuple[int, ...]]] = {}
    for c in instance.constraints:
        groups.setdefault(c.table, set()).add(c.vars)
    dims = (instance.n,) * instance.k
    return {table: BinaryTensor(dims, frozenset(tuples)) for table, tuples in sorted(groups.items())}


# ---------------------------------------------------------------------------
# count-grid approximation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CSPResult:
    value: int
    assignment: tuple[int, ...]
    estimate: float
    report: dict

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "assignment": list(self.assignment),
            "estimate": self.estimate,
            "report": self.report,
        }


def _atoms_from_sides(n: int, sides: list[frozenset[int]]) -> list[tuple[int, ...]]:
    """Partition [n] by membership signature across all sides; atoms are
    ordered by their smallest variable."""
    signature = {v: tuple(v in s for s in sides) for v in range(1, n + 1)}
    groups: dict[tuple, list[int]] = {}
    for v in range(1, n + 1):
        groups.setdefault(signature[v], []).append(v)
    return sorted((tuple(vs) for vs in groups.values()), key=lambda a: a[0])


def approx_max_csp(
    instance: CSPInstance,
    eps: float,
    oracle_cfg: OracleConfig | None = None,
    grid_limit: int = 2_000_000,
    with_opt: bool = False,
) -> CSPResult:
    """Approximate the maximum satisfiable count within eps * m.

    Each present type tensor is decomposed at accuracy
    a = eps * 2^-(2^k + 2k + 2); for an assignment sigma and pattern b the
    count of constrained tuples hitting sigma^{-1}(b) is a product-set sum,
    so the cut tensors estimate the satisfied count with total error at
    most eps * m / 4 once every pattern of every type is accounted.  The
    estimate depends only on per-atom selection counts; the best count
    vector on the grid is realized lowest-variables-first and then polished
    by swaps inside atoms (count-preserving) and single flips, accepting
    only strict improvements of the exact value.
    """
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    n, k, m = instance.n, instance.k, instance.m
    if m == 0:
        return CSPResult(0, (0,) * n, 0.0, {"a": 0.0, "atoms": 0, "grid_points": 0,
                                            "polish_gain": 0, "n_cut_tensors": 0})
    a = eps * 2.0 ** -(2**k + 2 * k + 2)
    tensors = build_type_tensors(instance)
    decomposed = {table: tensor_decompose(t, a, oracle_cfg) for table, t in tensors.items()}

    all_sides: list[frozenset[int]] = []
    for d in decomposed.values():
        for ct in d.cut_tensors:
            all_sides.extend(ct.sides)
    # deduplicate before the signature pass, order-stable
    uniq: list[frozenset[int]] = []
    seen: set[frozenset[int]] = set()
    for s in all_sides:
        if s not in seen:
            seen.add(s)
            uniq.append(s)
    atoms = _atoms_from_sides(n, uniq)
    n_atoms = len(atoms)
    sizes = np.array([len(a_) for a_ in atoms], dtype=np.int64)
    grid_points = int(np.prod(sizes + 1))
    if grid_points > grid_limit:
        raise ValueError(
            f"count grid has {grid_points} points (limit {grid_limit}); "
            "a larger eps gives fewer atoms"
        )
    atom_index = {v: i for i, a_ in enumerate(atoms) for v in a_}

    # membership matrix rows: unique sides as 0/1 vectors over atoms
    side_id = {s: i for i, s in enumerate(uniq)}
    member = np.zeros((len(uniq), n_atoms), dtype=np.float64)
    for s, i in side_id.items():
        for v in s:
            member[i, atom_index[v]] = 1.0
    # sides are unions of atoms by construction of the signature partition

    # enumerate the grid
    tgrid = np.array(list(itertools.product(*[range(sz + 1) for sz in sizes])),
                     dtype=np.float64)
    cnt1 = tgrid @ member.T                   # |S ∩ sigma^{-1}(1)| per side
    cnt0 = (member @ sizes.astype(np.float64))[None, :] - cnt1

    estimate = np.zeros(tgrid.shape[0], dtype=np.float64)
    n_cut_tensors = 0
    for table, d in decomposed.items():
        patterns = [tuple((idx >> (k - 1 - i)) & 1 for i in range(k))
                    for idx in range(1 << k) if table[idx]]
        if not patterns:
            continue
        for ct in d.cut_tensors:
            n_cut_tensors += 1
            ids = [side_id[s] for s in ct.sides]
            for b in patterns:
                prod = np.full(tgrid.shape[0], float(ct.value))
                for pos, bit in enumerate(b):
                    prod = prod * (cnt1[:, ids[pos]] if bit else cnt0[:, ids[pos]])
                estimate += prod

    best_idx = int(np.argmax(estimate))
    best_t = [int(x) for x in tgrid[best_idx]]
    best_estimate = float(estimate[best_idx])

    sigma = [0] * n
    for a_, t in zip(atoms, best_t):
        for v in a_[:t]:
            sigma[v - 1] = 1
    value = evaluate_assignment(instance, sigma)

    sigma, polished = _polish(instance, sigma, atoms)
    report = {
        "a": a,
        "atoms": n_atoms,
        "grid_points": grid_points,
        "n_cut_tensors": n_cut_tensors,
        "polish_gain": polished - value,
        "types": len(tensors),
    }
    if with_opt:
        opt, _ = opt_bruteforce(instance)
        report["opt"] = opt
        report["ratio"] = polished / opt if opt else 1.0
    return CSPResult(polished, tuple(sigma), best_estimate, report)


def _polish(
    instance: CSPInstance, sigma: list[int], atoms: list[tuple[int, ...]]
) -> tuple[list[int], int]:
    """Greedy exact-value ascent: swaps inside atoms first (they preserve
    the count vector), then single flips; first strict improvement wins,
    repeated to a fixpoint."""
    value = evaluate_assignment(instance, sigma)
    improved = True
    while improved:
        improved = False
        for atom in atoms:
            ones = [v for v in atom if sigma[v - 1] == 1]
            zeros = [v for v in atom if sigma[v - 1] == 0]
            for u in ones:
                for w in zeros:
                    sigma[u - 1], sigma[w - 1] = 0, 1
                    cand = evaluate_assignment(instance, sigma)
                    if cand > value:
                        value = cand
                        improved = True
                        break
                    sigma[u - 1], sigma[w - 1] = 1, 0
                if improved:
                    break
            if improved:
                break
        if improved:
            continue
        for v in range(1, instance.n + 1):
            sigma[v - 1] ^= 1
            cand = evaluate_assignment(instance, sigma)
            if cand > value:
                value = cand
                improved = True
                break
            sigma[v - 1] ^= 1
    return sigma, value


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def parse_csp_text(text: str) -> CSPInstance:
    """Header "n k", then alternating "vars i1 .. ik" / "table b0 .. b_{2^k-1}"
    lines per constraint; '#' comments and blank lines ignored."""
    n = k = None
    constraints: list[Constraint] = []
    pending_vars: tuple[int, ...] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2:
                raise MatrixFormatError(f"line {lineno}: expected 'n k'")
            try:
                n, k = int(parts[0]), int(parts[1])
            except ValueError:
                raise MatrixFormatError(f"line {lineno}: non-integer header") from None
            continue
        if parts[0] == "vars":
            if pending_vars is not None:
                raise MatrixFormatError(f"line {lineno}: vars without a table")
            try:
                pending_vars = tuple(int(x) for x in parts[1:])
            except ValueError:
                raise MatrixFormatError(f"line {lineno}: non-integer variable") from None
        elif parts[0] == "table":
            if pending_vars is None:
                raise MatrixFormatError(f"line {lineno}: table without vars")
            try:
                table = tuple(int(x) for x in parts[1:])
            except ValueError:
                raise MatrixFormatError(f"line {lineno}: non-integer table entry") from None
            try:
                constraints.append(Constraint(pending_vars, table))
            except ValueError as e:
                raise MatrixFormatError(f"line {lineno}: {e}") from None
            pending_vars = None
        else:
            raise MatrixFormatError(f"line {lineno}: expected 'vars' or 'table'")
    if n is None:
        raise MatrixFormatError("empty constraint file")
    if pending_vars is not None:
        raise MatrixFormatError("dangling vars line at end of file")
    try:
        return CSPInstance(n, k, tuple(constraints))
    except ValueError as e:
        raise MatrixFormatError(str(e)) from None


def format_csp_text(instance: CSPInstance) -> str:
    lines = [f"{instance.n} {instance.k}"]
    for c in sorted(instance.constraints, key=lambda c: (c.vars, c.table)):
        lines.append("vars " + " ".join(str(v) for v in c.vars))
        lines.append("table " + " ".join(str(b) for b in c.table))
    return "\n".join(lines) + "\n"


def read_csp_text(path) -> CSPInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_csp_text(fh.read())


def write_csp_text(path, instance: CSPInstance) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_csp_text(instance))
