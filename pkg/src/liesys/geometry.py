"""Vector fields on charts, Lie brackets, and diagonal prolongations.

A vector field is a tuple of expression components over a chart.  Diagonal
prolongations copy a field to every slot of a product chart; the converse
test (is a given field on a product a prolongation?) is decided symbolically
by canonical-form equality, never numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import expr as ex
from .errors import ChartMismatchError
from .expr import Chart, Const, Expr

__all__ = [
    "VectorField",
    "ProductChart",
    "lie_bracket",
    "diagonal_prolongation",
    "is_diagonal_prolongation",
    "ProlongationDecision",
    "permute_slots",
]


@dataclass(frozen=True)
class ProductChart(Chart):
    """Chart of m+1 copies of a base chart; slot a gets names `<var>_<a>`.

    Slot 0 is reserved for the reconstructed (unknown) solution.
    """

    base: Chart = None  # type: ignore[assignment]
    copies: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.base is None or self.copies < 1:
            raise ValueError("ProductChart needs a base chart and copies >= 1")

    @staticmethod
    def of(base: Chart, copies: int) -> "ProductChart":
        names = tuple(f"{v}_{a}" for a in range(copies) for v in base.names)
        return ProductChart(names=names, base=base, copies=copies)

    def slot_names(self, a: int) -> tuple[str, ...]:
        n = self.base.dim
        return self.names[a * n : (a + 1) * n]

    def slot_var(self, name: str, a: int) -> str:
        return f"{name}_{a}"

    def to_slot(self, e: Expr, a: int) -> Expr:
        """Rename base-chart variables into slot a."""
        return ex.rename_variables(e, {v: self.slot_var(v, a) for v in self.base.names})

    def from_slot(self, e: Expr, a: int) -> Expr:
        return ex.rename_variables(e, {self.slot_var(v, a): v for v in self.base.names})


@dataclass(frozen=True)
class VectorField:
    """n expression components over an n-dimensional chart."""

    chart: Chart
    components: tuple[Expr, ...]

    def __post_init__(self):
        if isinstance(self.components, list):
            object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != self.chart.dim:
            raise ValueError(
                f"{len(self.components)} components on a {self.chart.dim}-dimensional chart"
            )
        for c in self.components:
            extra = ex.free_variables(c) - set(self.chart.names)
            if extra:
                raise ValueError(f"component {c} uses non-chart variables {sorted(extra)}")

    @staticmethod
    def from_strings(chart: Chart, components: Iterable[str]) -> "VectorField":
        return VectorField(chart, tuple(ex.parse(s, chart) for s in components))

    def apply_to(self, f: Expr) -> Expr:
        """Directional derivative X(f) = sum_i X^i df/dx^i, canonicalized."""
        terms = [
            ex.Mul((c, ex.differentiate(f, v)))
            for v, c in zip(self.chart.names, self.components)
        ]
        return ex.canonical_expr(ex.Add(tuple(terms)))

    def evaluate(self, point: Mapping[str, object] | Sequence) -> list:
        env = point if isinstance(point, Mapping) else dict(zip(self.chart.names, point))
        return [ex.evaluate(c, env) for c in self.components]

    def is_zero_field(self) -> bool:
        return all(ex.is_zero(c).verdict == "zero" for c in self.components)

    def __add__(self, other: "VectorField") -> "VectorField":
        _require_same_chart(self, other)
        return VectorField(
            self.chart,
            tuple(ex.canonical_expr(a + b) for a, b in zip(self.components, other.components)),
        )

    def __neg__(self) -> "VectorField":
        return self.scale(Const(-1))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + (-other)

    def scale(self, factor: Expr | int | Fraction) -> "VectorField":
        f = factor if isinstance(factor, Expr) else Const(factor)
        return VectorField(
            self.chart, tuple(ex.canonical_expr(ex.Mul((f, c))) for c in self.components)
        )

    def to_json_dict(self) -> dict:
        return {"chart": list(self.chart.names), "components": [str(c) for c in self.components]}


def _require_same_chart(x: VectorField, y: VectorField):
    if x.chart.names != y.chart.names:
        raise ChartMismatchError(f"charts differ: {x.chart.names} vs {y.chart.names}")


def lie_bracket(x: VectorField, y: VectorField) -> VectorField:
    """[X,Y]^i = sum_j (X^j dY^i/dx^j - Y^j dX^i/dx^j), canonicalized."""
    _require_same_chart(x, y)
    names = x.chart.names
    comps = []
    for i in range(len(names)):
        terms = []
        for j, v in enumerate(names):
            terms.append(ex.Mul((x.components[j], ex.differentiate(y.components[i], v))))
            terms.append(
                ex.Mul((Const(-1), y.components[j], ex.differentiate(x.components[i], v)))
            )
        comps.append(ex.canonical_expr(ex.Add(tuple(terms))))
    return VectorField(x.chart, tuple(comps))


def diagonal_prolongation(x: VectorField, copies: int) -> VectorField:
    """Copy X into every slot of the product chart: slots stay uncoupled."""
    product = ProductChart.of(x.chart, copies)
    comps = []
    for a in range(copies):
        for c in x.components:
            comps.append(product.to_slot(c, a))
    return VectorField(product, tuple(comps))


@dataclass(frozen=True)
class ProlongationDecision:
    is_prolongation: bool
    base: VectorField | None = None
    witness_slots: tuple[int, int] | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.is_prolongation


def is_diagonal_prolongation(z: VectorField) -> ProlongationDecision:
    """Decide whether a field on a product chart is a diagonal prolongation.

    Yes iff every slot's components depend only on that slot's variables and
    all slots carry the same component functions after renaming (canonical
    equality).  Returns the base field on success, a witness slot pair
    otherwise.
    """
    chart = z.chart
    if not isinstance(chart, ProductChart):
        raise ChartMismatchError("is_diagonal_prolongation needs a field on a ProductChart")
    n = chart.base.dim
    slot_components: list[tuple[Expr, ...]] = []
    for a in range(chart.copies):
        comps = z.components[a * n : (a + 1) * n]
        allowed = set(chart.slot_names(a))
        for c in comps:
            foreign = ex.free_variables(c) - allowed
            if foreign:
                culprit = sorted(foreign)[0]
                b = next(
                    s for s in range(chart.copies) if culprit in chart.slot_names(s)
                )
                return ProlongationDecision(
                    False,
                    witness_slots=(a, b),
                    reason=f"slot-{a} components depend on slot-{b} variables ({culprit})",
                )
        slot_components.append(tuple(chart.from_slot(c, a) for c in comps))
    base_comps = slot_components[0]
    for a in range(1, chart.copies):
        for i in range(n):
            if not ex.canonically_equal(base_comps[i], slot_components[a][i]):
                return ProlongationDecision(
                    False,
                    witness_slots=(0, a),
                    reason=f"slot-0 and slot-{a} carry different component functions",
                )
    base = VectorField(chart.base, tuple(ex.canonical_expr(c) for c in base_comps))
    return ProlongationDecision(True, base=base)


def permute_slots(z: VectorField, permutation: Sequence[int]) -> VectorField:
    """Pull back a field on a product chart along a slot permutation."""
    chart = z.chart
    if not isinstance(chart, ProductChart):
        raise ChartMismatchError("permute_slots needs a field on a ProductChart")
    if sorted(permutation) != list(range(chart.copies)):
        raise ValueError(f"not a permutation of {chart.copies} slots: {permutation}")
    n = chart.base.dim
    renaming = {}
    for a, target in enumerate(permutation):
        for v in chart.base.names:
            renaming[chart.slot_var(v, a)] = chart.slot_var(v, target)
    new_components = [None] * (n * chart.copies)
    for a, target in enumerate(permutation):
        for i in range(n):
            comp = z.components[a * n + i]
            new_components[target * n + i] = ex.canonical_expr(
                ex.rename_variables(comp, renaming)
            )
    return VectorField(chart, tuple(new_components))
