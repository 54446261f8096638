from __future__ import annotations

import cmath
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from singulyr.evaluation import evaluate, EvaluationError
from singulyr.expr import (Add, Cos, Div, Exp, ExprSyntaxError, Lit, Mul, Neg, NonIntegerExponentError, Pow, Sin,
                           Sub, UnknownIdentifierError, Var, Z, breve_transform, format_ast, invert_conjugate,
                           parse, random_ast, reciprocal)


def test_parse_exp_inv():
    assert parse("exp(1/z)") == Exp(Div(Lit(1), Var()))


def test_parse_z_exp_inv():
    assert parse("z*exp(1/z)") == Mul(Var(), Exp(Div(Lit(1), Var())))


def test_unclosed_paren_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("sin(1/z")
    assert info.value.offset == 8


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("z + log(z)")
    assert info.value.offset == 5


@pytest.mark.parametrize("src", ["z^0.5", "z^(1/2)", "z^65"])
def test_bad_exponents(src):
    with pytest.raises(NonIntegerExponentError):
        parse(src)


def test_empty_source():
    with pytest.raises(ExprSyntaxError):
        parse("   ")


def test_precedence():
    # ^ binds tighter than unary minus; left associative - and /
    assert parse("-z^2") == Neg(Pow(Var(), 2))
    assert parse("z-1-z") == Sub(Sub(Var(), Lit(1)), Var())
    assert parse("1/z/z") == Div(Div(Lit(1), Var()), Var())
    assert parse("z^-2") == Pow(Var(), -2)


def test_complex_literal():
    f = parse("(1+2i)*z + 3i")
    assert evaluate(f, 1j).value == pytest.approx((1 + 2j) * 1j + 3j)


@pytest.mark.parametrize("ast, text", [
    (Var(), "z"),
    (Mul(Lit(2), Var()), "(2*z)"),
    (Exp(Div(Lit(1), Var())), "exp((1/z))"),
])
def test_format_examples(ast, text):
    assert format_ast(ast) == text


def test_breve_examples():
    g = parse("exp(1/z)")
    assert breve_transform(g, 0) == Div(Exp(Div(Lit(1), Var())), Var())
    assert breve_transform(Var(), 0) == Div(Var(), Var())
    assert breve_transform(g, 1 + 0j) == Div(Sub(Exp(Div(Lit(1), Var())), Lit(1)), Sub(Var(), Lit(1)))


def test_invert_conjugate_examples():
    assert invert_conjugate(parse("exp(z)")) == Div(Lit(1), Exp(Div(Lit(1), Var())))
    assert invert_conjugate(Var()) == Div(Lit(1), Div(Lit(1), Var()))
    assert invert_conjugate(parse("z^2")) == Div(Lit(1), Pow(Div(Lit(1), Var()), 2))


def test_round_trip_random_asts():
    rng = random.Random(11)
    for _ in range(1000):
        a = random_ast(rng, rng.randint(0, 8))
        assert parse(format_ast(a)) == a


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=0, max_value=8))
def test_round_trip_property(seed, depth):
    a = random_ast(random.Random(seed), depth)
    assert parse(format_ast(a)) == a


def _random_point(rng: random.Random, lo: float, hi: float) -> complex:
    return cmath.rect(math.exp(rng.uniform(math.log(lo), math.log(hi))), rng.uniform(-math.pi, math.pi))


def test_breve_multiply_back():
    rng = random.Random(3)
    checked = 0
    while checked < 300:
        g = random_ast(rng, rng.randint(1, 5))
        v = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        z = v + _random_point(rng, 0.1, 3)
        try:
            direct = evaluate(g, z)
            breve = evaluate(breve_transform(g, v), z)
        except EvaluationError:
            continue
        if direct.overflowed or breve.overflowed or abs(direct.value) > 1e6:
            continue
        back = breve.value * (z - v) + v
        # relative to the larger of the two terms that g - v cancels
        assert abs(back - direct.value) <= 1e-12 * max(abs(direct.value), abs(v))
        checked += 1


def test_invert_conjugate_involution():
    rng = random.Random(5)
    checked = 0
    while checked < 300:
        f = random_ast(rng, rng.randint(1, 5))
        z = _random_point(rng, 0.1, 10)
        try:
            a = evaluate(f, z)
            b = evaluate(invert_conjugate(invert_conjugate(f)), z)
        except EvaluationError:
            continue
        if a.overflowed or b.overflowed or a.value == 0:
            continue
        assert abs(a.value - b.value) <= 1e-12 * abs(a.value)
        checked += 1


def test_reciprocal_rewrites_exp():
    assert reciprocal(parse("exp(1/z)")) == Exp(Neg(Div(Lit(1), Var())))
    f = parse("z*exp(1/z)/(z+1)")
    for z in (0.3 + 0.2j, -1.5j, 2.0):
        assert evaluate(reciprocal(f), z).value == pytest.approx(1 / evaluate(f, z).value, rel=1e-13)


def test_asts_are_hashable_and_shareable():
    assert {parse("sin(z)+cos(z)"), Add(Sin(Z), Cos(Z))} == {Add(Sin(Z), Cos(Z))}
