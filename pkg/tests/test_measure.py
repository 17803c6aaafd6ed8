"""Core measure-space types, conditional expectations, exact cut norm."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_cut_norm, rand_binary
from cutdecomp.measure import (
    BinaryMatrix,
    DimensionLimitError,
    InvalidPartitionError,
    MatrixFormatError,
    RealMatrix,
    RectPartition,
    Rectangle,
    StepMatrix,
    conditional_expectation,
    cut_norm_exact,
    density,
    format_matrix_text,
    integral_over,
    parse_matrix_text,
    scaled_integral,
    step_difference,
    step_l1_norm_exact,
    step_lp_norm,
)


def identity2() -> BinaryMatrix:
    return BinaryMatrix.from_pairs(2, 2, [(1, 1), (2, 2)])


class TestBinaryMatrix:
    def test_from_pairs_rejects_duplicates(self):
        with pytest.raises(ValueError):
            BinaryMatrix.from_pairs(2, 2, [(1, 1), (1, 1)])

    def test_from_pairs_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            BinaryMatrix.from_pairs(2, 2, [(3, 1)])
        with pytest.raises(ValueError):
            BinaryMatrix.from_pairs(2, 2, [(0, 1)])

    def test_dense_round_trip(self, rng):
        f = rand_binary(rng, 5, 7, 0.4)
        assert BinaryMatrix.from_dense(f.to_dense()) == f

    def test_from_dense_rejects_non_binary(self):
        with pytest.raises(ValueError):
            BinaryMatrix.from_dense(np.array([[0, 2]]))

    def test_count_in(self):
        f = identity2()
        assert f.count_in(frozenset({1, 2}), frozenset({1})) == 1
        assert f.count_in(frozenset({1, 2}), frozenset({1, 2})) == 2

    def test_density(self):
        assert density(identity2()) == Fraction(1, 2)
        assert density(BinaryMatrix.from_pairs(3, 4, [])) == 0


class TestRectangle:
    def test_measure(self):
        r = Rectangle.of([1, 2], [3])
        assert r.measure(4, 4) == Fraction(2, 16)

    def test_intersect_and_contains(self):
        a = Rectangle.of([1, 2], [1, 2])
        b = Rectangle.of([2, 3], [2])
        assert a.intersect(b) == Rectangle.of([2], [2])
        assert a.contains(Rectangle.of([1], [2]))
        assert not b.contains(a)

    def test_key_orders_by_size_then_indices(self):
        assert Rectangle.of([1], [1]).key() < Rectangle.of([1, 2], [1]).key()
        assert Rectangle.of([1], [2]).key() < Rectangle.of([2], [1]).key()


class TestRectPartition:
    def test_trivial(self):
        p = RectPartition.trivial(3, 4)
        assert p.n_cells == 1
        assert p.iota() == 1

    def test_validation_rejects_overlap(self):
        cells = [Rectangle.of([1, 2], [1, 2]), Rectangle.of([2], [2])]
        with pytest.raises(InvalidPartitionError):
            RectPartition.build(cells, 2, 2)

    def test_validation_rejects_gap(self):
        with pytest.raises(InvalidPartitionError):
            RectPartition.build([Rectangle.of([1], [1])], 2, 2)

    def test_iota_minimum_side_density(self):
        cells = [
            Rectangle.of([1], [1, 2, 3, 4]),
            Rectangle.of([2, 3, 4], [1, 2, 3, 4]),
        ]
        p = RectPartition.build(cells, 4, 4)
        assert p.iota() == Fraction(1, 4)

    def test_refines(self):
        coarse = RectPartition.trivial(2, 2)
        fine = RectPartition.build(
            [Rectangle.of([1], [1, 2]), Rectangle.of([2], [1, 2])], 2, 2
        )
        assert fine.refines(coarse)
        assert not coarse.refines(fine)

    def test_cell_containing(self):
        p = RectPartition.build(
            [Rectangle.of([1], [1, 2]), Rectangle.of([2], [1, 2])], 2, 2
        )
        assert p.cell_containing(2, 1) == Rectangle.of([2], [1, 2])
        with pytest.raises(KeyError):
            p.cell_containing(3, 1)


class TestConditionalExpectation:
    def test_trivial_partition_gives_density(self):
        step = conditional_expectation(identity2(), RectPartition.trivial(2, 2))
        assert step.values == (Fraction(1, 2),)

    def test_single_one_cell_average(self):
        f = BinaryMatrix.from_pairs(2, 2, [(1, 1)])
        step = conditional_expectation(f, RectPartition.trivial(2, 2))
        assert step.values == (Fraction(1, 4),)

    def test_mass_is_preserved(self, rng):
        f = rand_binary(rng, 6, 6, 0.5)
        cells = [
            Rectangle.of([1, 2, 3], range(1, 7)),
            Rectangle.of([4, 5, 6], range(1, 7)),
        ]
        step = conditional_expectation(f, RectPartition.build(cells, 6, 6))
        total = sum(v * c.size for c, v in zip(step.partition.cells, step.values))
        assert total == len(f.ones)

    def test_integral_on_any_rectangle_of_own_cell_is_exact(self):
        f = identity2()
        p = RectPartition.trivial(2, 2)
        step = conditional_expectation(f, p)
        assert step.integral_on(Rectangle.of([1], [1])) == Fraction(1, 8)


class TestStepNorms:
    def test_lp_of_constant(self):
        step = conditional_expectation(identity2(), RectPartition.trivial(2, 2))
        for p in (1, 1.5, 2, math.inf):
            assert step_lp_norm(step, p) == pytest.approx(0.5, abs=1e-12)

    def test_linf_on_singletons(self):
        f = identity2()
        cells = [Rectangle.of([i], [j]) for i in (1, 2) for j in (1, 2)]
        step = conditional_expectation(f, RectPartition.build(cells, 2, 2))
        assert step_lp_norm(step, math.inf) == 1.0
        assert step_lp_norm(step, 2) == pytest.approx(math.sqrt(0.5), abs=1e-12)

    def test_l1_exact(self):
        step = conditional_expectation(identity2(), RectPartition.trivial(2, 2))
        assert step_l1_norm_exact(step) == Fraction(1, 2)


class TestStepDifference:
    def test_exact_values(self):
        f = identity2()
        coarse = conditional_expectation(f, RectPartition.trivial(2, 2))
        fine_p = RectPartition.build(
            [Rectangle.of([i], [j]) for i in (1, 2) for j in (1, 2)], 2, 2
        )
        fine = conditional_expectation(f, fine_p)
        diff = step_difference(fine, coarse)
        assert set(diff.values) == {Fraction(1, 2), Fraction(-1, 2)}

    def test_requires_refinement(self):
        f = identity2()
        rows = RectPartition.build(
            [Rectangle.of([1], [1, 2]), Rectangle.of([2], [1, 2])], 2, 2
        )
        cols = RectPartition.build(
            [Rectangle.of([1, 2], [1]), Rectangle.of([1, 2], [2])], 2, 2
        )
        a = conditional_expectation(f, rows)
        b = conditional_expectation(f, cols)
        with pytest.raises(InvalidPartitionError):
            step_difference(a, b)


class TestCutNormExact:
    def test_binary_matrix_norm_is_ones_count(self):
        f = BinaryMatrix.from_pairs(5, 7, [(1, 2), (3, 3), (5, 7)])
        value, witness = cut_norm_exact(f)
        assert value == 3.0  # exact float: scaled inside rational arithmetic
        assert witness.rows == frozenset({1, 3, 5})
        assert witness.cols == frozenset({2, 3, 7})

    def test_identity_residual(self):
        f = identity2()
        step = conditional_expectation(f, RectPartition.trivial(2, 2))
        value, witness = cut_norm_exact(RealMatrix.residual(f, step))
        assert value == 0.5
        assert witness == Rectangle.of([1], [1])

    def test_single_one_residual(self):
        f = BinaryMatrix.from_pairs(2, 2, [(1, 1)])
        step = conditional_expectation(f, RectPartition.trivial(2, 2))
        value, witness = cut_norm_exact(RealMatrix.residual(f, step))
        assert value == 0.75
        assert witness == Rectangle.of([1], [1])

    def test_zero_matrix_gives_empty_witness(self):
        value, witness = cut_norm_exact(BinaryMatrix.from_pairs(3, 3, []))
        assert value == 0.0
        assert witness.is_empty

    def test_limit_enforced(self):
        f = BinaryMatrix.from_pairs(30, 30, [(1, 1)])
        with pytest.raises(DimensionLimitError):
            cut_norm_exact(f, limit=22)

    def test_matches_independent_brute_force(self, rng):
        for _ in range(25):
            n1, n2 = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            dense = rng.integers(-2, 3, (n1, n2))
            g = RealMatrix.from_dense(dense.astype(float))
            want, (rows, cols) = brute_cut_norm(dense.tolist())
            got, witness = cut_norm_exact(g)
            assert got == pytest.approx(float(want), abs=1e-9)
            assert witness.sorted_rows() == rows
            assert witness.sorted_cols() == cols

    @settings(deadline=None, max_examples=60)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**36 - 1))
    def test_norm_of_binary_matrix_equals_ones(self, n1, n2, bits):
        pairs = [
            (i + 1, j + 1)
            for i in range(n1)
            for j in range(n2)
            if (bits >> (i * n2 + j)) & 1
        ]
        f = BinaryMatrix.from_pairs(n1, n2, pairs)
        value, _ = cut_norm_exact(f)
        assert value == float(len(pairs))

    def test_scaled_integral_is_exact_for_rationals(self):
        f = BinaryMatrix.from_pairs(5, 7, [(1, 1), (2, 2), (3, 3)])
        assert scaled_integral(f, Rectangle.of([1, 2, 3], [1, 2, 3])) == 3.0
        assert integral_over(f, Rectangle.of([1], [1])) == Fraction(1, 35)


class TestTextFormat:
    def test_round_trip(self, rng):
        f = rand_binary(rng, 6, 9, 0.3)
        assert parse_matrix_text(format_matrix_text(f)) == f

    def test_comments_and_blanks(self):
        text = "# header\n2 2\n\n1 1  # a one\n2 2\n"
        assert parse_matrix_text(text) == identity2()

    def test_errors(self):
        with pytest.raises(MatrixFormatError):
            parse_matrix_text("")
        with pytest.raises(MatrixFormatError):
            parse_matrix_text("2\n")
        with pytest.raises(MatrixFormatError):
            parse_matrix_text("2 2\n1 1\n1 1\n")
        with pytest.raises(MatrixFormatError):
            parse_matrix_text("2 2\n3 1\n")
        with pytest.raises(MatrixFormatError):
            parse_matrix_text("2 2\n1 a\n")

    @settings(deadline=None, max_examples=40)
    @given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**25 - 1))
    def test_format_parse_identity(self, n1, n2, bits):
        pairs = [
            (i + 1, j + 1)
            for i in range(n1)
            for j in range(n2)
            if (bits >> (i * n2 + j)) & 1
        ]
        f = BinaryMatrix.from_pairs(n1, n2, pairs)
        assert parse_matrix_text(format_matrix_text(f)) == f
