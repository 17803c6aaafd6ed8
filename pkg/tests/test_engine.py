"""Parameter synthesis, the decomposition loop, verification, martingale."""

import json
import math
from fractions import Fraction

import pytest

from conftest import rand_binary, structured_matrix
from cutdecomp.engine import (
    DecompositionResult,
    _log_eta,
    decompose,
    martingale_check,
    partition_from_json,
    synthesize_params,
    verify_result,
)
from cutdecomp.measure import BinaryMatrix, Rectangle, StepMatrix
from cutdecomp.oracle import OracleConfig


def identity2() -> BinaryMatrix:
    return BinaryMatrix.from_pairs(2, 2, [(1, 1), (2, 2)])


class TestSynthesize:
    def test_reference_schedule(self):
        # eps = 1/4, C = 1, p = 2, a0 = 1
        pr = synthesize_params(0.25, 1.0, 2.0, 1.0)
        assert pr.vartheta == Fraction(1, 64)
        assert pr.tau == 64
        assert pr.p_dagger == 2 and pr.q == 2

    def test_p_below_two(self):
        pr = synthesize_params(0.25, 1.0, 1.5, 1.0)
        assert pr.p_dagger == Fraction(3, 2)
        assert pr.q == 3
        assert pr.tau == math.ceil(4 / (0.5 * 0.0625))

    def test_p_infinite_clamps_to_two(self):
        assert synthesize_params(0.25, 1.0, math.inf).p_dagger == 2

    def test_eta_exponent_closed_form(self):
        # tau = 1, q = 2, r = 2: exponent 2 + 8 = 10
        le = _log_eta(Fraction(1, 64), Fraction(2), Fraction(2), 1)
        assert le == pytest.approx(10 * math.log(1 / 64), abs=1e-9)

    def test_log_eta_underflows_to_minus_inf(self):
        assert _log_eta(Fraction(1, 64), Fraction(2), Fraction(2), 10**6) == -math.inf

    def test_a0_scales_the_schedule(self):
        pr = synthesize_params(0.25, 1.0, 2.0, 0.5)
        assert pr.vartheta == Fraction(1, 128)
        assert pr.tau == 4 * 64

    def test_validation(self):
        for bad in (0.0, 0.5, 1.2):
            with pytest.raises(ValueError):
                synthesize_params(bad)
        with pytest.raises(ValueError):
            synthesize_params(0.25, C=0.5)
        with pytest.raises(ValueError):
            synthesize_params(0.25, p=1.0)
        with pytest.raises(ValueError):
            synthesize_params(0.25, a0=0.0)

    def test_json_dict_encodes_infinities(self):
        pr = synthesize_params(0.25, 1.0, math.inf)
        doc = pr.to_json_dict()
        assert doc["p"] == "inf"
        assert isinstance(doc["log_eta"], float)


class TestDecompose:
    def test_identity_halts_immediately_at_loose_eps(self):
        params = synthesize_params(0.3)
        result = decompose(identity2(), params)
        assert result.trace.halted
        assert len(result.trace.steps) == 1
        assert result.cut_matrices == (
            (Rectangle.of([1, 2], [1, 2]), Fraction(1, 2)),
        )
        assert result.certificate["status"] == "halted-certified"

    def test_identity_refines_once_at_tight_eps(self):
        params = synthesize_params(0.2)
        result = decompose(identity2(), params)
        assert result.trace.halted
        assert len(result.trace.steps) == 2
        assert result.partition.n_cells == 4
        values = dict(result.cut_matrices)
        assert values == {
            Rectangle.of([1], [1]): Fraction(1),
            Rectangle.of([2], [2]): Fraction(1),
        }

    def test_empty_matrix(self):
        result = decompose(BinaryMatrix.from_pairs(3, 4, []), synthesize_params(0.3))
        assert result.trace.halted and result.cut_matrices == ()

    def test_all_ones_single_cut_matrix(self):
        f = BinaryMatrix.from_pairs(3, 3, [(i, j) for i in range(1, 4) for j in range(1, 4)])
        result = decompose(f, synthesize_params(0.3))
        assert result.cut_matrices == ((Rectangle.of([1, 2, 3], [1, 2, 3]), Fraction(1)),)

    def test_oracle_claim_must_cover_schedule(self):
        params = synthesize_params(0.3, a0=0.5)
        with pytest.raises(ValueError):
            decompose(identity2(), params, OracleConfig.heuristic(alpha_claim=0.3))

    def test_trace_invariants_on_corpus(self, rng):
        params = synthesize_params(0.25)
        for kind in ("random", "block", "corner", "stripes"):
            f = structured_matrix(kind, 10, rng)
            result = decompose(f, params)
            steps = result.trace.steps
            assert result.trace.halted
            assert not result.trace.stalled and not result.trace.budget_exhausted
            for s in steps:
                assert s.n_cells <= 4**s.m
            for a, b in zip(steps, steps[1:]):
                assert b.n_cells > a.n_cells
                assert b.iota <= a.iota
                assert a.increment_lp is not None
            assert steps[-1].halted

    def test_halting_comparison_is_exact(self, rng):
        # the recorded scaled value at the halting step is at most the
        # threshold; at every earlier step it exceeds it
        params = synthesize_params(0.2)
        f = structured_matrix("block", 8, rng)
        result = decompose(f, params)
        threshold = params.a0 * params.eps * len(f.ones)
        for s in result.trace.steps:
            if s.halted:
                assert s.scaled_value <= threshold + 1e-9
            else:
                assert s.scaled_value > threshold - 1e-9


class TestVerify:
    def test_verified_on_corpus(self, rng):
        params = synthesize_params(0.3)
        for kind in ("random", "block", "sparse"):
            f = structured_matrix(kind, 9, rng)
            result = decompose(f, params)
            report = verify_result(f, result, params)
            assert report.status == "verified", report

    def test_tampered_value_fails(self):
        f = identity2()
        params = synthesize_params(0.3)
        result = decompose(f, params)
        bad = DecompositionResult(
            partition=result.partition,
            step=StepMatrix(result.partition, (Fraction(9, 10),)),
            cut_matrices=((result.partition.cells[0], Fraction(9, 10)),),
            trace=result.trace,
            certificate=result.certificate,
        )
        report = verify_result(f, bad, params)
        assert report.status == "failed"
        failed = {name for name, res, _ in report.clauses if res == "fail"}
        assert "step-matches" in failed

    def test_residual_bound_fails_for_coarse_step(self, rng):
        # claim the trivial average as a decomposition at a tiny eps
        f = structured_matrix("block", 8, rng)
        params = synthesize_params(0.01)
        loose = decompose(f, synthesize_params(0.45))
        report = verify_result(f, loose, params)
        assert report.status == "failed"
        failed = {name for name, res, _ in report.clauses if res == "fail"}
        assert "residual-cut-norm" in failed

    def test_oversize_matrix_reports_uncertified(self, rng):
        # the heuristic oracle avoids the exhaustive scan at this size; the
        # residual clause is then skipped by the verifier too
        f = rand_binary(rng, 26, 26, 0.4)
        params = synthesize_params(0.45, a0=0.3)
        result = decompose(f, params, OracleConfig.heuristic(alpha_claim=0.3, seed=1))
        report = verify_result(f, result, params, limit=24)
        assert report.status == "uncertified"
        assert any(res == "skipped" for _, res, _ in report.clauses)


class TestMartingale:
    @pytest.mark.parametrize("p", [1.5, 2.0, math.inf])
    def test_inequality_along_traces(self, p, rng):
        params = synthesize_params(0.2)
        for kind in ("block", "stripes", "random"):
            f = structured_matrix(kind, 8, rng)
            result = decompose(f, params)
            rep = martingale_check(f, result.trace.partitions, p)
            assert rep.holds
            assert rep.telescoping_ok
            assert rep.n_increments == len(result.trace.steps)

    def test_parseval_equality_at_p2(self, rng):
        f = structured_matrix("block", 8, rng)
        result = decompose(f, synthesize_params(0.2))
        rep = martingale_check(f, result.trace.partitions, 2.0)
        # orthogonal increments: the square function is an equality at p = 2
        assert rep.lhs == pytest.approx(rep.rhs, abs=1e-9)

    def test_requires_partitions(self):
        with pytest.raises(ValueError):
            martingale_check(identity2(), (), 2.0)


class TestJson:
    def test_partition_round_trip(self):
        result = decompose(identity2(), synthesize_params(0.2))
        doc = result.to_json_dict()
        assert partition_from_json(doc["partition"]) == result.partition
        # exact values survive as fraction strings
        assert all(Fraction(cm["value"]) for cm in doc["cut_matrices"])
        json.dumps(doc, sort_keys=True, allow_nan=False)
