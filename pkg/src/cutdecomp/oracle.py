"""Cut-norm oracles: exact (exhaustive) and heuristic (alternating ascent).

An oracle takes a real matrix g and returns a rectangle A together with the
scaled integral (n1*n2)*|int_A g dmu| it attains.  The exact oracle is the
exhaustive scan and attains the cut norm itself (alpha = 1); the heuristic
runs a seeded multi-restart alternating sign ascent (for a fixed row set the
optimal column set collects the columns whose partial sums share a sign, and
vice versa), warm-started from top-singular-vector sign roundings and random
subsets, on both +g and -g, and claims only a fraction alpha of the norm.

All randomness flows through the seed in OracleConfig; outcomes are
deterministic, with ties broken toward the lexicographically smallest
(|rows|, |cols|, rows, cols) witness key.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .measure import (
    EXHAUSTIVE_LIMIT,
    MatrixLike,
    Rectangle,
    as_real,
    cut_norm_exact,
    scaled_integral,
)


@dataclass(frozen=True)
class OracleConfig:
    """Oracle selection and knobs; `kind` is "exact" or "heuristic"."""

    kind: str = "exact"
    alpha_claim: float = 1.0
    seed: int = 0
    restarts: int = 8
    max_iters: int = 200
    limit: int = EXHAUSTIVE_LIMIT

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "heuristic"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.kind == "exact" and self.alpha_claim != 1.0:
            raise ValueError("the exact oracle attains the cut norm; alpha_claim must be 1")
        if not (0 < self.alpha_claim <= 1):
            raise ValueError("alpha_claim must lie in (0, 1]")
        if self.restarts < 0 or self.max_iters < 1 or self.limit < 1:
            raise ValueError("bad oracle configuration")

    @classmethod
    def heuristic(cls, seed: int = 0, restarts: int = 8, alpha_claim: float = 0.3) -> "OracleConfig":
        return cls(kind="heuristic", alpha_claim=alpha_claim, seed=seed, restarts=restarts)


@dataclass(frozen=True)
class OracleOutcome:
    """A rectangle and the scaled integral it attains.

    scaled_value = (n1*n2) * |int_witness g dmu|, recomputed from the witness
    (exactly, for exactly representable g), so it always matches the witness.
    alpha is the claimed fraction of the cut norm this value is guaranteed to
    reach (1 for the exact oracle).
    """

    witness: Rectangle
    scaled_value: float
    alpha: float


def _outcome_for(g, witness: Rectangle, alpha: float) -> OracleOutcome:
    return OracleOutcome(
        witness=witness, scaled_value=scaled_integral(g, witness), alpha=alpha
    )


def oracle_exact(g: MatrixLike, limit: int = EXHAUSTIVE_LIMIT) -> OracleOutcome:
    """Exhaustive oracle; attains the cut norm (alpha = 1)."""
    gm = as_real(g)
    value, witness = cut_norm_exact(gm, limit=limit)
    return OracleOutcome(witness=witness, scaled_value=value, alpha=1.0)


def _ascend_rows(G: np.ndarray, s0: np.ndarray, max_iters: int):
    """Alternate optimal-side updates until a fixpoint; returns (s, t)."""
    s = s0.astype(bool)
    t = (s @ G) > 0
    for _ in range(max_iters):
        s_new = (G @ t) > 0
        t_new = (s_new @ G) > 0
        if (s_new == s).all() and (t_new == t).all():
            break
        s, t = s_new, t_new
    return s, t


def _ascend_cols(G: np.ndarray, t0: np.ndarray, max_iters: int):
    t = t0.astype(bool)
    s = (G @ t) > 0
    return _ascend_rows(G, s, max_iters)


def oracle_heuristic(g: MatrixLike, cfg: OracleConfig) -> OracleOutcome:
    """Multi-restart alternating ascent on +g and -g; alpha = cfg.alpha_claim."""
    gm = as_real(g)
    G = gm.to_dense()
    n1, n2 = G.shape
    rng = np.random.default_rng(cfg.seed)

    starts_rows: list[np.ndarray] = []
    starts_cols: list[np.ndarray] = []
    # spectral warm starts: sign roundings of the top singular pair
    u, _, vt = np.linalg.svd(G, full_matrices=False)
    starts_rows.append(u[:, 0] > 0)
    starts_rows.append(u[:, 0] < 0)
    starts_cols.append(vt[0] > 0)
    starts_cols.append(vt[0] < 0)
    for _ in range(cfg.restarts):
        starts_rows.append(rng.random(n1) < 0.5)
    for _ in range(cfg.restarts):
        starts_cols.append(rng.random(n2) < 0.5)

    best: tuple[Fraction, tuple, Rectangle] | None = None

    def consider(s: np.ndarray, t: np.ndarray) -> None:
        nonlocal best
        witness = Rectangle.of(
            (int(i) + 1 for i in np.nonzero(s)[0]),
            (int(j) + 1 for j in np.nonzero(t)[0]),
        )
        integral = gm.integral_on(witness)
        value = abs(Fraction(integral)) if gm.is_exact else Fraction(abs(float(integral)))
        cand = (-value, witness.key(), witness)
        if best is None or cand[:2] < best[:2]:
            best = cand

    consider(np.zeros(n1, dtype=bool), np.zeros(n2, dtype=bool))
    for signed in (G, -G):
        for s0 in starts_rows:
            consider(*_ascend_rows(signed, s0, cfg.max_iters))
        for t0 in starts_cols:
            consider(*_ascend_cols(signed, t0, cfg.max_iters))

    assert best is not None
    witness = best[2]
    return _outcome_for(gm, witness, cfg.alpha_claim)


def oracle_dispatch(g: MatrixLike, cfg: OracleConfig) -> OracleOutcome:
    """Route to the configured oracle."""
    if cfg.kind == "exact":
        return oracle_exact(g, limit=cfg.limit)
    return oracle_heuristic(g, cfg)
