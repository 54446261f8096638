from __future__ import annotations

import cmath
import math
import random

import numpy as np
import pytest

from singulyr.evaluation import (EvaluationError, JetValue, SingularitySetup, evaluate, evaluate_iterate,
                                 iterate_array, jet_array, spherical_array, spherical_derivative)
from singulyr.expr import Div, Lit, parse, random_ast

E2 = math.exp(2)


def central_fd(f, z, h=1e-6):
    return (evaluate(f, z + h).value - evaluate(f, z - h).value) / (2 * h)


def test_square_at_one_plus_i():
    jet = evaluate(parse("z^2"), 1 + 1j)
    assert jet.value == 2j
    assert jet.derivative == 2 + 2j
    assert not jet.overflowed


def test_exp_inv_at_half():
    f = parse("exp(1/z)")
    jet = evaluate(f, 0.5)
    assert jet.value == pytest.approx(E2, rel=1e-15)
    assert jet.derivative == pytest.approx(-4 * E2, rel=1e-15)
    assert abs(central_fd(f, 0.5) - jet.derivative) <= 1e-5 * abs(jet.derivative)


def test_exp_inv_overflows_near_zero():
    assert evaluate(parse("exp(1/z)"), 1e-4).overflowed


def test_division_by_exact_zero():
    with pytest.raises(EvaluationError):
        evaluate(parse("1/z"), 0)
    with pytest.raises(EvaluationError):
        evaluate(parse("exp(1/z)"), 0j)


def test_power_overflow_flagged():
    assert evaluate(parse("z^64"), 1e10).overflowed


def test_negative_power():
    jet = evaluate(parse("z^-3"), 2.0)
    assert jet.value == pytest.approx(1 / 8)
    assert jet.derivative == pytest.approx(-3 / 16)


@pytest.mark.parametrize("src, z0, k, value, derivative", [
    ("z+1", 0, 2, 2, 1),
    ("z^2", 2, 2, 16, 32),
])
def test_iterate_examples(src, z0, k, value, derivative):
    jet = evaluate_iterate(parse(src), z0, k)
    assert jet.value == value and jet.derivative == derivative


def test_iterate_exp_inv_against_fd():
    f = parse("exp(1/z)")
    jet = evaluate_iterate(f, 0.5, 2)
    # g(g(1/2)) = exp(exp(-2))
    assert jet.value == pytest.approx(math.exp(math.exp(-2)), rel=1e-14)
    h = 1e-6
    fd = (evaluate_iterate(f, 0.5 + h, 2).value - evaluate_iterate(f, 0.5 - h, 2).value) / (2 * h)
    assert abs(fd - jet.derivative) <= 1e-6 * abs(jet.derivative)


def test_iterate_reports_failing_stage():
    # g(2) = 1 and g fails at 1 = g^1(2)
    with pytest.raises(EvaluationError) as info:
        evaluate_iterate(parse("1/(z-1)"), 2.0, 3)
    assert info.value.iterate == 1
    assert info.value.z == 1


def test_iterate_same_code_path():
    rng = random.Random(1)
    f = parse("sin(1/z)")
    for _ in range(50):
        z = cmath.rect(rng.uniform(0.05, 1), rng.uniform(-math.pi, math.pi))
        one = evaluate(f, z)
        two = evaluate(f, one.value)
        it = evaluate_iterate(f, z, 2)
        assert it.value == two.value
        prod = one.derivative * two.derivative
        assert abs(it.derivative - prod) <= 1e-12 * abs(prod)


def test_jet_array_matches_scalar():
    f = parse("z*exp(1/z) + cos(z)^2")
    zs = np.array([0.3 + 0.1j, -0.7j, 1.5, 0j])
    arr = jet_array(f, zs)
    assert arr.zero_division.tolist() == [False, False, False, True]
    for j, z in enumerate(zs[:3]):
        s = evaluate(f, z)
        assert arr.value[j] == pytest.approx(s.value, rel=1e-14)
        assert arr.derivative[j] == pytest.approx(s.derivative, rel=1e-14)
    it = iterate_array(f, zs[:3], 2)
    assert it.value[1] == pytest.approx(evaluate_iterate(f, zs[1], 2).value, rel=1e-14)


def test_spherical_identity_at_zero():
    assert spherical_derivative(parse("z"), 0) == 1.0


@pytest.mark.parametrize("z", [0.5, 3j, -2 + 1j])
def test_spherical_constant(z):
    assert spherical_derivative(parse("(2+3i)"), z) == 0.0


def test_spherical_exp_inv_on_imaginary_axis():
    # |f| = 1 and |f'/f| = 1/|z|^2 on the imaginary axis
    assert spherical_derivative(parse("exp(1/z)"), 1e-3j) == pytest.approx(5e5, rel=1e-12)


def test_spherical_through_inverse_channel():
    # exp(1/z) overflows at 1e-3 on the positive axis; the value follows from exp(-1/z)
    f = parse("exp(1/z)")
    z = 1e-3
    assert evaluate(f, z).overflowed
    expected = math.exp(-1000) / z**2  # |f'|/(1+|f|^2) ~ |f'|/|f|^2 = e^{-1/z}/z^2
    assert spherical_derivative(f, z) == pytest.approx(expected, rel=1e-12)


def test_spherical_large_value_branch():
    # |f| ~ e^{30}: above the rearrangement threshold, below overflow
    f = parse("exp(1/z)")
    z = 1 / 30
    w = math.exp(30)
    expected = (w / z**2) / (1 + w * w)
    assert spherical_derivative(f, z) == pytest.approx(expected, rel=1e-13)


def test_spherical_pole():
    # 1/z at 0 divides by zero; the inverse channel z gives 1
    assert spherical_derivative(parse("1/z"), 0) == 1.0


def test_spherical_array_nan_when_both_channels_fail():
    f = parse("exp(1/z) + exp(-1/z)")
    out = spherical_array(f, np.array([1e-4 + 0j, 0.5 + 0j]))
    assert math.isnan(out[0]) and math.isfinite(out[1])
    with pytest.raises(EvaluationError):
        spherical_derivative(f, 1e-4)


def test_spherical_inversion_invariance():
    rng = random.Random(9)
    checked = 0
    while checked < 200:
        f = random_ast(rng, rng.randint(1, 6))
        z = cmath.rect(math.exp(rng.uniform(math.log(0.2), math.log(5))), rng.uniform(-math.pi, math.pi))
        try:
            a = spherical_derivative(f, z)
            b = spherical_derivative(Div(Lit(1), f), z)
        except EvaluationError:
            continue
        assert a == b or abs(a - b) <= 1e-10 * max(a, b)
        checked += 1


def test_setup_validation():
    with pytest.raises(ValueError):
        SingularitySetup(parse("z"), 0j, 0.0)


def test_omitted_value_never_hit():
    setup = SingularitySetup(parse("exp(1/z)"), 0j, 1.0, omitted=0j)
    rng = np.random.default_rng(4)
    z = rng.uniform(0.01, 1, 5000) * np.exp(1j * rng.uniform(-np.pi, np.pi, 5000))
    vals = jet_array(setup.g, z)
    ok = ~vals.bad
    assert ok.sum() > 4000
    assert np.all(vals.value[ok] != setup.omitted)


def test_jetvalue_is_frozen():
    jet = JetValue(1, 2)
    with pytest.raises(AttributeError):
        jet.value = 3
