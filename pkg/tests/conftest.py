import random
from fractions import Fraction

import pytest

from liesys.expr import Add, Call, Const, Div, Expr, Mul, Pow, Var

VARS = ("x", "y", "z")


def random_polynomial(rng: random.Random, names=VARS, max_degree=2, terms=3) -> Expr:
    """Random polynomial with small rational coefficients."""
    out = Const(Fraction(rng.randint(-3, 3)))
    for _ in range(rng.randint(1, terms)):
        factors = [Const(Fraction(rng.randint(-3, 3), rng.randint(1, 3)))]
        for name in rng.sample(names, k=rng.randint(1, len(names))):
            power = rng.randint(1, max_degree)
            factors.append(Pow(Var(name), power) if power > 1 else Var(name))
        out = out + Mul(tuple(factors))
    return out


def random_tree(rng: random.Random, names=VARS, depth=3, transcendental=False) -> Expr:
    """Random expression tree; guards against identically-zero denominators."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return Const(Fraction(rng.randint(-9, 9), rng.randint(1, 5)))
        return Var(rng.choice(names))
    kinds = ["add", "mul", "pow"]
    if transcendental:
        kinds.append("call")
    kinds.append("div")
    kind = rng.choice(kinds)
    if kind == "add":
        return Add(tuple(random_tree(rng, names, depth - 1, transcendental) for _ in range(2)))
    if kind == "mul":
        return Mul(tuple(random_tree(rng, names, depth - 1, transcendental) for _ in range(2)))
    if kind == "pow":
        return Pow(random_tree(rng, names, depth - 1, transcendental), rng.randint(2, 3))
    if kind == "call":
        fn = rng.choice(("sin", "cos", "exp"))
        return Call(fn, random_tree(rng, names, depth - 1, False))
    num = random_tree(rng, names, depth - 1, transcendental)
    den = Add((Pow(Var(rng.choice(names)), 2), Const(rng.randint(1, 4))))
    return Div(num, den)


@pytest.fixture
def rng():
    return random.Random(20240817)
