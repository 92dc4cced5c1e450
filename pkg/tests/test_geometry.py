import pytest
import sympy

from liesys.errors import ChartMismatchError
from liesys.expr import Chart, canonically_equal, is_zero, parse
from liesys.geometry import (
    ProductChart,
    VectorField,
    diagonal_prolongation,
    is_diagonal_prolongation,
    lie_bracket,
    permute_slots,
)

from conftest import random_polynomial

LINE = Chart(("x",))
PLANE = Chart(("x", "y"))


def field(chart, *components):
    return VectorField.from_strings(chart, components)


def fields_equal(a: VectorField, b: VectorField) -> bool:
    return a.chart.names == b.chart.names and all(
        canonically_equal(p, q) for p, q in zip(a.components, b.components)
    )


def zero_field(f: VectorField) -> bool:
    return all(is_zero(c).verdict == "zero" for c in f.components)


def random_field(rng, chart=PLANE):
    return VectorField(
        chart, tuple(random_polynomial(rng, chart.names) for _ in chart.names)
    )


class TestLieBracket:
    def test_translation_and_scaling(self):
        assert fields_equal(
            lie_bracket(field(LINE, "1"), field(LINE, "x")), field(LINE, "1")
        )

    def test_bracket_with_itself_vanishes(self, rng):
        for _ in range(10):
            x = random_field(rng)
            assert zero_field(lie_bracket(x, x))

    def test_rotation_bracket(self):
        got = lie_bracket(field(PLANE, "1", "0"), field(PLANE, "y", "-x"))
        assert fields_equal(got, field(PLANE, "0", "-1"))

    def test_chart_mismatch(self):
        with pytest.raises(ChartMismatchError):
            lie_bracket(field(LINE, "x"), field(PLANE, "x", "y"))

    def test_matches_sympy_oracle(self, rng):
        x, y = sympy.symbols("x y")
        for _ in range(15):
            a, b = random_field(rng), random_field(rng)
            got = lie_bracket(a, b)
            av = [sympy.sympify(str(c).replace("^", "**")) for c in a.components]
            bv = [sympy.sympify(str(c).replace("^", "**")) for c in b.components]
            for i in range(2):
                oracle = sum(
                    av[j] * sympy.diff(bv[i], v) - bv[j] * sympy.diff(av[i], v)
                    for j, v in enumerate((x, y))
                )
                mine = sympy.sympify(str(got.components[i]).replace("^", "**"))
                assert sympy.simplify(mine - oracle) == 0

    def test_antisymmetry_and_jacobi(self, rng):
        for _ in range(25):
            a, b, c = (random_field(rng) for _ in range(3))
            assert zero_field(lie_bracket(a, b) + lie_bracket(b, a))
            jacobi = (
                lie_bracket(lie_bracket(a, b), c)
                + lie_bracket(lie_bracket(b, c), a)
                + lie_bracket(lie_bracket(c, a), b)
            )
            assert zero_field(jacobi)


class TestDiagonalProlongation:
    def test_two_copies_of_translation(self):
        got = diagonal_prolongation(field(LINE, "1"), 2)
        assert got.chart.names == ("x_0", "x_1")
        assert [str(c) for c in got.components] == ["1", "1"]

    def test_three_copies_of_translation(self):
        got = diagonal_prolongation(field(LINE, "1"), 3)
        assert got.chart.names == ("x_0", "x_1", "x_2")
        assert [str(c) for c in got.components] == ["1", "1", "1"]

    def test_zero_field(self):
        assert zero_field(diagonal_prolongation(field(PLANE, "0", "0"), 3))

    def test_commutes_with_bracket(self, rng):
        for _ in range(15):
            a, b = random_field(rng), random_field(rng)
            copies = rng.choice([2, 3, 4])
            lhs = diagonal_prolongation(lie_bracket(a, b), copies)
            rhs = lie_bracket(
                diagonal_prolongation(a, copies), diagonal_prolongation(b, copies)
            )
            assert fields_equal(lhs, rhs)

    def test_slot_permutation_invariance(self, rng):
        for _ in range(10):
            prolonged = diagonal_prolongation(random_field(rng), 3)
            perm = [0, 1, 2]
            rng.shuffle(perm)
            assert fields_equal(permute_slots(prolonged, perm), prolonged)


class TestIsDiagonalProlongation:
    def test_functional_combination_is_still_a_prolongation(self):
        # x*y * (d/dx + d/dy) - (x+y) * (x d/dx + y d/dy) collapses to a
        # prolongation of -x^2 d/dx even though the coefficients are not
        # constant (the projections fail to be independent here)
        x1 = diagonal_prolongation(field(LINE, "1"), 2)
        x2 = diagonal_prolongation(field(LINE, "x"), 2)
        names = x1.chart.names
        combo = x1.scale(parse("x_0*x_1", names)) + x2.scale(parse("-(x_0 + x_1)", names))
        assert [str(c) for c in combo.components] == ["-x_0^2", "-x_1^2"]
        decision = is_diagonal_prolongation(combo)
        assert decision.is_prolongation
        assert fields_equal(decision.base, field(LINE, "-x^2"))

    def test_cross_slot_dependence_witnessed(self):
        chart = ProductChart.of(LINE, 2)
        bad = VectorField(chart, (parse("x_1", chart.names), parse("0", chart.names)))
        decision = is_diagonal_prolongation(bad)
        assert not decision.is_prolongation
        assert decision.witness_slots == (0, 1)

    def test_mismatched_slot_functions_witnessed(self):
        chart = ProductChart.of(LINE, 2)
        bad = VectorField(chart, (parse("x_0", chart.names), parse("x_1^2", chart.names)))
        decision = is_diagonal_prolongation(bad)
        assert not decision.is_prolongation
        assert decision.witness_slots == (0, 1)

    def test_round_trip(self, rng):
        for _ in range(10):
            f = random_field(rng)
            copies = rng.choice([2, 3, 4])
            decision = is_diagonal_prolongation(diagonal_prolongation(f, copies))
            assert decision.is_prolongation
            assert fields_equal(decision.base, f)

    def test_requires_product_chart(self):
        with pytest.raises(ChartMismatchError):
            is_diagonal_prolongation(field(PLANE, "x", "y"))
