"""Envelope partitions, cell classification, and the refinement step."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import rand_binary, structured_matrix
from cutdecomp.engine import decompose, synthesize_params
from cutdecomp.measure import BinaryMatrix, RectPartition, Rectangle
from cutdecomp.refine import (
    CELL_BOTH_THICK,
    CELL_BOTH_THIN,
    CELL_COLS_THIN,
    CELL_ROWS_THIN,
    RefineParams,
    classify_cells,
    compute_theta,
    envelope_partition,
    entry_precondition_ok,
    fraction_power,
    increment_guarantee_check,
    log_fraction,
    refine_partition,
)


class TestFractionPower:
    def test_integer_exponent_is_exact(self):
        assert fraction_power(Fraction(1, 3), 2.0) == Fraction(1, 9)
        assert fraction_power(Fraction(2, 5), 3.0) == Fraction(8, 125)
        # large integer exponents stay on the exact path
        assert fraction_power(Fraction(1, 10), 400.0) == Fraction(1, 10**400)

    def test_float_exponent_falls_back(self):
        assert fraction_power(Fraction(1, 4), 0.5) == Fraction(1, 2)

    def test_float_underflow_raises(self):
        with pytest.raises(ValueError):
            fraction_power(Fraction(1, 10), 400.5)

    def test_negative_base_rejected(self):
        with pytest.raises(ValueError):
            fraction_power(Fraction(-1, 2), 2.0)

    def test_log_fraction(self):
        assert log_fraction(Fraction(1, 64)) == pytest.approx(-math.log(64), abs=1e-12)
        assert log_fraction(Fraction(10) ** 500) == pytest.approx(500 * math.log(10), rel=1e-12)


class TestEnvelope:
    def test_both_sides_partial_gives_four_cells(self):
        q, b = envelope_partition(4, 4, {1, 2}, {1, 2, 3}, Fraction(1, 5))
        assert q.n_cells == 4
        assert b == Rectangle.of([1, 2], [1, 2, 3])
        assert Rectangle.of([1, 2], [1, 2, 3]) in q.cells
        assert Rectangle.of([3, 4], [4]) in q.cells

    def test_full_cols_splits_rows_only(self):
        q, b = envelope_partition(4, 4, {1, 2}, {1, 2, 3, 4}, Fraction(1, 5))
        assert q.n_cells == 2
        assert b == Rectangle.of([1, 2], [1, 2, 3, 4])

    def test_nearly_full_rows_splits_cols_only(self):
        # mu(A1) = 4/5 equals 1 - vartheta: the split keys on strict <
        q, b = envelope_partition(5, 5, {1, 2, 3, 4}, {1, 2}, Fraction(1, 5))
        assert q.n_cells == 2
        assert set(q.cells) == {
            Rectangle.of([1, 2, 3, 4, 5], [1, 2]),
            Rectangle.of([1, 2, 3, 4, 5], [3, 4, 5]),
        }
        assert b == Rectangle.of([1, 2, 3, 4, 5], [1, 2])

    def test_both_nearly_full_keeps_cell_whole(self):
        q, b = envelope_partition(5, 5, {1, 2, 3, 4}, {2, 3, 4, 5}, Fraction(1, 5))
        assert q.n_cells == 1
        assert b == Rectangle.of(range(1, 6), range(1, 6))

    def test_small_sides_rejected(self):
        with pytest.raises(ValueError):
            envelope_partition(10, 10, {1}, {1, 2, 3}, Fraction(1, 5))

    @settings(deadline=None, max_examples=80)
    @given(
        st.integers(3, 7),
        st.integers(3, 7),
        st.integers(1, 2**7 - 1),
        st.integers(1, 2**7 - 1),
        st.sampled_from([Fraction(1, 10), Fraction(1, 5), Fraction(34, 100)]),
    )
    def test_postconditions(self, n1, n2, bits1, bits2, vartheta):
        a1 = {i + 1 for i in range(n1) if (bits1 >> i) & 1}
        a2 = {j + 1 for j in range(n2) if (bits2 >> j) & 1}
        if Fraction(len(a1), n1) < vartheta or Fraction(len(a2), n2) < vartheta:
            return
        q, b = envelope_partition(n1, n2, a1, a2, vartheta)
        assert q.n_cells <= 4
        # B is a union of cells and contains A1 x A2
        assert b.contains(Rectangle.of(a1, a2))
        covered = [c for c in q.cells if b.contains(c)]
        assert sum(c.size for c in covered) == b.size
        # mu(B \ A1 x A2) <= 2 vartheta, exact arithmetic
        excess = Fraction(b.size - len(a1) * len(a2), n1 * n2)
        assert excess <= 2 * vartheta
        # every new side has density >= vartheta
        for cell in q.cells:
            assert Fraction(len(cell.rows), n1) >= vartheta
            assert Fraction(len(cell.cols), n2) >= vartheta


class TestClassifyCells:
    def quadrants(self) -> RectPartition:
        cells = [
            Rectangle.of([1, 2], [1, 2]),
            Rectangle.of([1, 2], [3, 4]),
            Rectangle.of([3, 4], [1, 2]),
            Rectangle.of([3, 4], [3, 4]),
        ]
        return RectPartition.build(cells, 4, 4)

    def test_quadrant_labels(self):
        a = Rectangle.of([1, 2], [1, 2])
        labels = classify_cells(self.quadrants(), a, Fraction(2, 5))
        assert labels == (CELL_BOTH_THICK, CELL_COLS_THIN, CELL_ROWS_THIN, CELL_BOTH_THIN)

    def test_threshold_is_strict(self):
        # intersection exactly theta * side counts as thick
        a = Rectangle.of([1], [1])
        labels = classify_cells(self.quadrants(), a, Fraction(1, 2))
        assert labels[0] == CELL_BOTH_THICK


class TestRefinePartition:
    def params_for(self, partition, vartheta=Fraction(1, 16)) -> RefineParams:
        return RefineParams.for_partition(
            vartheta=vartheta, q=2.0, p_dagger=2.0, log_eta=-1e9,
            partition=partition, C=1.0,
        )

    def test_theta_formula(self):
        theta = compute_theta(Fraction(1, 16), 2.0, 2.0, Fraction(1, 4))
        assert theta == Fraction(1, 256) * Fraction(1, 16)

    def test_quadrant_split(self, rng):
        f = rand_binary(rng, 8, 8, 0.5)
        p = RectPartition.trivial(8, 8)
        a = Rectangle.of(range(1, 5), range(1, 5))
        out = refine_partition(f, p, a, self.params_for(p))
        assert out.partition.n_cells == 4
        assert out.report.refines
        assert out.report.cell_bound_ok
        assert out.report.sym_diff_bound_ok
        assert out.report.iota_bound_ok and out.report.iota_proof_bound_ok
        assert out.report.b_in_algebra
        assert out.report.int_e_sym_ok and out.report.int_f_sym_ok
        assert out.report.mu_sym_diff == 0  # B equals A exactly here

    def test_thin_rectangle_leaves_partition_unchanged(self, rng):
        f = rand_binary(rng, 8, 8, 0.5)
        p = RectPartition.trivial(8, 8)
        a = Rectangle.of(range(1, 5), [1])
        params = RefineParams.for_partition(
            vartheta=Fraction(45, 100), q=2.0, p_dagger=2.0, log_eta=-1e9,
            partition=p, C=1.0,
        )
        out = refine_partition(f, p, a, params)
        assert out.partition == p
        assert out.report.labels == (CELL_COLS_THIN,)
        assert out.report.sym_diff_bound_ok

    def test_empty_rectangle_is_fixpoint(self, rng):
        f = rand_binary(rng, 6, 6, 0.5)
        p = RectPartition.trivial(6, 6)
        out = refine_partition(f, p, Rectangle.of([], []), self.params_for(p))
        assert out.partition == p

    def test_entry_precondition_enforced(self):
        f = BinaryMatrix.from_pairs(4, 4, [(1, 1)])
        p = RectPartition.trivial(4, 4)
        params = RefineParams.for_partition(
            vartheta=Fraction(1, 100), q=2.0, p_dagger=2.0,
            log_eta=math.log(0.4), partition=p,
        )
        assert not entry_precondition_ok(params, p)
        with pytest.raises(ValueError):
            refine_partition(f, p, Rectangle.of([1, 2], [1, 2]), params)

    def test_symmetric_difference_bound_holds_on_corpus(self, rng):
        for _ in range(20):
            n = int(rng.integers(6, 10))
            f = rand_binary(rng, n, n, 0.5)
            p = RectPartition.trivial(n, n)
            rows = [i + 1 for i in range(n) if rng.random() < 0.5] or [1]
            cols = [j + 1 for j in range(n) if rng.random() < 0.5] or [1]
            params = self.params_for(p, vartheta=Fraction(1, 12))
            out = refine_partition(f, p, Rectangle.of(rows, cols), params)
            assert out.report.mu_sym_diff <= 2 * params.theta
            assert out.report.sym_diff_bound_ok


class TestIncrementGuarantee:
    def test_vacuous_when_hypothesis_unmet(self, rng):
        f = rand_binary(rng, 8, 8, 0.5)
        p = RectPartition.trivial(8, 8)
        a = Rectangle.of(range(1, 5), range(1, 5))
        out = refine_partition(f, p, a, RefineParams.for_partition(
            vartheta=Fraction(1, 16), q=2.0, p_dagger=2.0, log_eta=-1e9, partition=p))
        # eps = 0.49 makes the residual-integral hypothesis unattainable here
        status = increment_guarantee_check(f, p, out.partition, a, 0.49)
        assert status == "hypothesis-not-met"

    def test_confirmed_along_engine_traces(self, rng):
        params = synthesize_params(0.2)
        statuses = []
        for kind in ("block", "corner", "stripes"):
            f = structured_matrix(kind, 8, rng)
            result = decompose(f, params)
            steps = result.trace.steps
            for prev, cur in zip(steps, steps[1:]):
                status = increment_guarantee_check(
                    f, prev.partition, cur.partition, prev.witness,
                    params.eps, a0=params.a0, p_dagger=float(params.p_dagger),
                )
                statuses.append(status)
                assert status != "breach"
        # every non-halting engine round meets the hypothesis by construction
        assert statuses and all(s == "confirmed" for s in statuses)
