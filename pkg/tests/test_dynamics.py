from __future__ import annotations

import cmath
import math
from functools import lru_cache

import numpy as np
import pytest

from singulyr.dynamics import (CycleRecord, DegenerateInvolution, FixedPointRecord, classify, damped_newton, dedupe,
                               divergence_check, find_fixed_points, find_preimages, find_two_cycles, shells)
from singulyr.evaluation import JetArray, SingularitySetup, evaluate, evaluate_iterate, iterate_array
from singulyr.expr import invert_conjugate, parse

TWO_PI = 2 * math.pi


def setup_for(src: str, radius: float = 1.0, omitted=None) -> SingularitySetup:
    return SingularitySetup(parse(src), 0j, radius, omitted)


@lru_cache(maxsize=None)
def exp_inv_points():
    return find_fixed_points(setup_for("exp(1/z)"), 1e-5, 1.0)


@lru_cache(maxsize=None)
def sin_cycles():
    return find_two_cycles(setup_for("sin(1/z)"), 1e-3, 0.5)


def test_shells_chain():
    assert shells(1e-3, 1.0) == [(0.1, 1.0), (pytest.approx(0.01), 0.1), (pytest.approx(1e-3), pytest.approx(0.01))]
    assert shells(0.5, 1.0) == [(0.5, 1.0)]
    with pytest.raises(ValueError):
        shells(1.0, 0.5)


def test_classify():
    assert classify(0.5) == "attracting"
    assert classify(cmath.exp(0.3j)) == "indifferent"
    assert classify(1 + 1e-10) == "indifferent"
    assert classify(2j) == "repelling"


def test_z_exp_inv_fixed_points():
    recs = find_fixed_points(setup_for("z*exp(1/z)"), 1e-3, 1.0)
    for k in [k for j in range(1, 9) for k in (j, -j)]:
        q = 1 / (TWO_PI * 1j * k)
        near = min(recs, key=lambda r: abs(r.q - q))
        assert abs(near.q - q) <= 1e-10
        assert abs(near.multiplier - (1 - TWO_PI * 1j * k)) <= 1e-10
        assert abs(near.multiplier) == pytest.approx(math.sqrt(1 + 4 * math.pi**2 * k * k), rel=1e-12)
        assert near.classification == "repelling"
    # every record is some 1/(2 pi i k)
    for r in recs:
        k = round((1 / (TWO_PI * 1j * r.q)).real)
        assert abs(r.q - 1 / (TWO_PI * 1j * k)) <= 1e-12 * abs(r.q) * 10


def test_exp_inv_fixed_points_multiplier_identity():
    recs = exp_inv_points()
    assert len(recs) >= 6
    for r in recs:
        assert abs(abs(r.multiplier) * abs(r.q) - 1) <= 1e-8
        assert r.residual <= 1e-10 * (1 + abs(r.q))


def test_records_sorted_and_separated():
    recs = exp_inv_points()
    d = [abs(r.q) for r in recs]
    assert d == sorted(d, reverse=True)
    for a, b in zip(recs, recs[1:]):
        assert abs(a.q - b.q) > 1e-9 * abs(a.q)


def test_fixed_points_fresh_reevaluation():
    g = parse("exp(1/z)")
    for r in exp_inv_points():
        jet = evaluate(g, r.q)
        assert abs(jet.value - r.q) == pytest.approx(r.residual, rel=1e-12, abs=1e-300)
        assert abs(jet.derivative - r.multiplier) <= 1e-12 * abs(r.multiplier)


def test_half_z_has_no_fixed_points():
    assert find_fixed_points(setup_for("z/2"), 1e-6, 1.0) == []


def test_annulus_precondition():
    with pytest.raises(ValueError):
        find_fixed_points(setup_for("exp(1/z)"), 0.1, 2.0)


def test_square_two_cycle():
    recs = find_two_cycles(setup_for("z^2", radius=2.0), 0.5, 2.0)
    assert len(recs) == 1
    (c,) = recs
    pts = {complex(round(c.q.real, 12), round(c.q.imag, 12)), complex(round(c.partner.real, 12), round(c.partner.imag, 12))}
    w = cmath.exp(TWO_PI * 1j / 3)
    assert all(min(abs(p - w), abs(p - w.conjugate())) <= 1e-12 for p in pts)
    assert c.multiplier == pytest.approx(4, abs=1e-12)
    assert c.classification == "repelling"


def test_involution_flagged():
    with pytest.raises(DegenerateInvolution) as info:
        find_two_cycles(setup_for("-z"), 1e-3, 1.0)
    assert info.value.fraction > 0.9


def test_sin_inv_cycles():
    recs = sin_cycles()
    good = [c for c in recs if c.residual <= 1e-9]
    assert len(good) >= 3
    assert all(abs(c.multiplier) > 1 for c in recs)
    for c in recs:
        assert abs(c.partner - c.q) > 1e-6 * (1 + abs(c.q))
        assert abs(c.q) <= abs(c.partner) * (1 + 1e-9)


def test_sin_inv_cycles_independent_residual():
    # recomputed with the standard library, then a dense local scan of |g(g(z)) - z| around q
    for c in sin_cycles()[:40]:
        p = cmath.sin(1 / c.q)
        assert abs(cmath.sin(1 / p) - c.q) <= 1e-9
        h = 1e-4 * abs(c.q)
        t = np.linspace(-h, h, 21)
        grid = c.q + t[None, :] + 1j * t[:, None]
        G = np.abs(np.sin(1 / np.sin(1 / grid)) - grid)
        j = np.unravel_index(np.argmin(G), G.shape)
        assert abs(grid[j] - c.q) <= 1.5 * (t[1] - t[0])


def test_cycle_chain_rule_and_symmetry():
    g = parse("sin(1/z)")

    def G(z):
        jet = iterate_array(g, z, 2)
        return JetArray(jet.value - z, jet.derivative - 1, jet.zero_division, jet.overflowed)

    recs = sin_cycles()
    # Newton on g∘g - id seeded from the partner's image g(p) must land back on q
    seeds = np.array([evaluate(g, c.partner).value for c in recs])
    back, _, _, alive = damped_newton(G, seeds, lambda p: np.abs(p))
    for c, q_back, ok in zip(recs, back, alive):
        d1 = evaluate(g, c.q).derivative
        d2 = evaluate(g, c.partner).derivative
        assert abs(c.multiplier - d1 * d2) <= 1e-12 * abs(c.multiplier)
        it = evaluate_iterate(g, c.q, 2).derivative
        assert abs(it - d1 * d2) <= 1e-12 * abs(it)
        assert ok and abs(q_back - c.q) <= 1e-12 * abs(c.q)
        at_partner = d2 * evaluate(g, complex(q_back)).derivative
        assert abs(at_partner - c.multiplier) <= 1e-12 * abs(c.multiplier)


def test_sin_inv_preimages():
    pre = find_preimages(setup_for("sin(1/z)"), 0j, 1e-2, 0.5)
    ks = sorted(round((1 / m.w).real / math.pi) for m in pre.members)
    assert ks == [k for k in range(-31, 32) if k != 0]
    for m in pre.members:
        k = round((1 / m.w).real / math.pi)
        assert abs(m.w - 1 / (k * math.pi)) <= 1e-12 * abs(m.w)
        expected = -math.cos(k * math.pi) * (k * math.pi) ** 2
        assert m.derivative == pytest.approx(expected, rel=1e-9)
        assert not m.critical
    assert len(pre.noncritical) == len(pre.members)


def test_exp_inv_preimages_of_omitted_value():
    assert find_preimages(setup_for("exp(1/z)"), 0j, 1e-3, 1.0).members == []


def test_exp_inv_preimages_of_one():
    pre = find_preimages(setup_for("exp(1/z)"), 1 + 0j, 1e-2, 1.0)
    assert len(pre.members) == 30  # k = +-1..+-15 have 1/(2 pi |k|) >= 1e-2
    for m in pre.members:
        k = round((1 / (TWO_PI * 1j * m.w)).real)
        assert abs(m.w - 1 / (TWO_PI * 1j * k)) <= 1e-12 * abs(m.w)


def test_critical_preimage_flagged():
    pre = find_preimages(SingularitySetup(parse("(z-0.5)^2"), 0j, 1.0), 0j, 0.1, 1.0)
    assert pre.members and all(m.critical for m in pre.members)
    assert all(abs(m.w - 0.5) <= 1e-9 for m in pre.members)


def test_divergence_exp_inv():
    rep = divergence_check(exp_inv_points())
    assert rep.strictly_increasing and rep.diverging
    assert rep.slope == pytest.approx(-1, abs=0.05)


def test_divergence_z_exp_inv():
    recs = find_fixed_points(setup_for("z*exp(1/z)"), 1e-2, 1.0)
    rep = divergence_check(recs)
    assert rep.diverging and rep.strictly_increasing


def test_divergence_constant_multipliers():
    recs = [FixedPointRecord(complex(r), 0.0, 3 + 0j, "repelling", 0) for r in (0.5, 0.1, 0.01, 0.001)]
    rep = divergence_check(recs)
    assert not rep.diverging and not rep.strictly_increasing
    assert rep.ratio == 1.0


def test_divergence_needs_three():
    with pytest.raises(ValueError):
        divergence_check(exp_inv_points()[:2])


def test_divergence_ignores_equal_distance_ties():
    recs = [CycleRecord(q, q, 0.0, m, "repelling", 0) for q, m in
            [(0.5j, 2), (-0.5j, 3), (0.1j, 5), (-0.1j, 4), (0.01j, 9)]]
    assert divergence_check(recs).strictly_increasing


def test_conjugation_invariance():
    f = parse("exp(z)")
    g = invert_conjugate(f)
    recs = find_fixed_points(SingularitySetup(g, 0j, 1.0, 0j), 1e-3, 1.0)
    assert len(recs) >= 4
    for r in recs:
        s = 1 / r.q
        fs = evaluate(f, s)
        assert abs(fs.value - s) <= 1e-9 * abs(s)  # s is a fixed point of f
        assert abs(r.multiplier - fs.derivative) <= 1e-8 * abs(fs.derivative)
        assert abs(fs.derivative - s) <= 1e-8 * abs(s)


def test_dedupe_keeps_smallest_residual():
    items = [(1.0 + 0j, 1e-12), (1.0 + 1e-12j, 1e-14), (0.5 + 0j, 1e-13)]
    out = dedupe(items, lambda t: t[0], lambda t: t[1], 0j)
    assert out == [(1.0 + 1e-12j, 1e-14), (0.5 + 0j, 1e-13)]


def test_threads_do_not_change_results(monkeypatch):
    monkeypatch.setenv("SINGULYR_THREADS", "1")
    serial = find_fixed_points(setup_for("exp(1/z)"), 1e-3, 1.0)
    monkeypatch.setenv("SINGULYR_THREADS", "3")
    threaded = find_fixed_points(setup_for("exp(1/z)"), 1e-3, 1.0)
    assert serial == threaded
