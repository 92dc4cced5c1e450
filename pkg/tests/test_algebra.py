from fractions import Fraction

import pytest

from liesys.algebra import (
    closure_test,
    minimal_m,
    prune_independent,
    span_coefficients,
)
from liesys.errors import ClosureCapError
from liesys.expr import Chart, is_zero
from liesys.geometry import VectorField

LINE = Chart(("x",))
PLANE = Chart(("x", "y"))


def field(chart, *components):
    return VectorField.from_strings(chart, components)


def riccati():
    return [field(LINE, "1"), field(LINE, "x"), field(LINE, "x^2")]


def euclidean():
    return [field(PLANE, "1", "0"), field(PLANE, "0", "1"), field(PLANE, "y", "-x")]


class TestSpanCoefficients:
    def test_in_span(self):
        result = span_coefficients(field(LINE, "x"), [field(LINE, "1"), field(LINE, "x")])
        assert result.in_span
        assert result.coefficients == (Fraction(0), Fraction(1))

    def test_not_in_span_with_residual(self):
        result = span_coefficients(field(LINE, "2*x"), [field(LINE, "1"), field(LINE, "x^2")])
        assert not result.in_span
        assert result.residual is not None
        assert not all(is_zero(c).verdict == "zero" for c in result.residual.components)

    def test_riccati_bracket_coefficients(self):
        basis = riccati()
        from liesys.geometry import lie_bracket

        bracket = lie_bracket(basis[0], basis[2])
        result = span_coefficients(bracket, basis)
        assert result.coefficients == (Fraction(0), Fraction(2), Fraction(0))

    def test_rational_components(self):
        target = field(LINE, "3/x^2")
        result = span_coefficients(target, [field(LINE, "1/x^2")])
        assert result.in_span and result.coefficients == (Fraction(3),)


class TestClosure:
    def test_riccati_structure_constants_exact(self):
        report = closure_test(riccati())
        assert report.closed and report.dimension == 3
        assert report.constants[(0, 1)] == (Fraction(1), Fraction(0), Fraction(0))
        assert report.constants[(0, 2)] == (Fraction(0), Fraction(2), Fraction(0))
        assert report.constants[(1, 2)] == (Fraction(0), Fraction(0), Fraction(1))
        assert report.jacobi_residual() == 0

    def test_antisymmetry_through_accessor(self):
        report = closure_test(riccati())
        assert report.c(2, 0) == tuple(-v for v in report.c(0, 2))

    def test_bracket_reconstruction_is_zero(self):
        report = closure_test(riccati())
        for a in range(3):
            for b in range(3):
                if a == b:
                    continue
                residual = report.reconstruct_bracket_residual(a, b)
                assert all(is_zero(c).verdict == "zero" for c in residual.components)

    def test_incomplete_pair_fails_with_witness(self):
        report = closure_test([field(LINE, "1"), field(LINE, "x^2")])
        assert not report.closed
        a, b, bracket = report.witness
        assert span_coefficients(bracket, report.basis).in_span is False

    def test_completion_reaches_dimension_three(self):
        report = closure_test([field(LINE, "1"), field(LINE, "x^2")], complete=True)
        assert report.closed
        assert report.dimension == 3
        assert report.completion_trace == [2, 3]
        assert report.jacobi_residual() == 0

    def test_single_field_trivial_algebra(self):
        report = closure_test([field(LINE, "x^2")])
        assert report.closed and report.dimension == 1
        assert report.constants == {}

    def test_cap_exceeded(self):
        # translations against x^3 d/dx generate ever higher degrees
        with pytest.raises(ClosureCapError):
            closure_test([field(LINE, "1"), field(LINE, "x^3")], complete=True, cap=6)

    def test_dependent_input_pruned(self):
        fields = [field(LINE, "1"), field(LINE, "2"), field(LINE, "x")]
        report = closure_test(fields)
        assert report.dimension == 2

    def test_euclidean_algebra(self):
        report = closure_test(euclidean())
        assert report.closed and report.dimension == 3
        assert report.constants[(0, 1)] == (Fraction(0),) * 3
        assert report.constants[(0, 2)] == (Fraction(0), Fraction(-1), Fraction(0))
        assert report.constants[(1, 2)] == (Fraction(1), Fraction(0), Fraction(0))


class TestMinimalM:
    def test_riccati_needs_three(self):
        assert minimal_m(riccati(), seed=0).m == 3

    def test_euclidean_needs_two(self):
        assert minimal_m(euclidean(), seed=0).m == 2

    def test_single_nonvanishing_field(self):
        assert minimal_m([field(LINE, "1/x^2")], seed=0).m == 1

    def test_free_translation_on_plane(self):
        assert minimal_m([field(PLANE, "1", "0")], seed=0).m == 1

    def test_seed_stability(self):
        for fields, expected in ((riccati(), 3), (euclidean(), 2), ([field(LINE, "1/x^2")], 1)):
            assert {minimal_m(fields, seed=s).m for s in range(10)} == {expected}

    def test_m_bounded_by_r(self):
        for fields in (riccati(), euclidean()):
            report = minimal_m(fields, seed=1)
            assert report.m <= report.r

    def test_rank_profile_shape(self):
        report = minimal_m(riccati(), seed=2)
        assert [v.k for v in report.rank_profile] == [1, 2, 3]
        assert report.rank_profile[-1].modal_rank == 3
        assert report.rank_profile[-1].vote_fraction >= 0.9

    def test_dependent_input_rejected(self):
        with pytest.raises(ValueError):
            minimal_m([field(LINE, "1"), field(LINE, "2")])

    def test_prune_independent(self):
        kept = prune_independent([field(LINE, "1"), field(LINE, "2"), field(LINE, "x")])
        assert len(kept) == 2
