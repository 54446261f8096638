"""Exit criteria of the toolkit, each checked against an analytic oracle.

``run_all()`` returns one :class:`CriterionResult` per criterion; the test
suite and ``singulyr verify`` both print one PASS/FAIL line per result.
"""

from __future__ import annotations

import cmath
import math
import random
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import presets
from .dynamics import divergence_check, find_fixed_points, find_preimages, find_two_cycles
from .evaluation import (EvaluationError, SingularitySetup, evaluate, evaluate_iterate,
                         spherical_derivative)
from .expr import Div, Lit, breve_transform, invert_conjugate, parse, random_ast
from .metric_lemma import random_instance, select, verify_conditions
from .zalcman import (circle_growth, convergence_report, pole_escape_ratio, renormalize)

TWO_PI = 2 * math.pi


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / abs(b)


@lru_cache(maxsize=None)
def _sin_cycles():
    setup = SingularitySetup(parse(presets.SIN_INV), 0j, 1.0)
    return setup, find_two_cycles(setup, 1e-3, 0.5)


def exp_inv_fixed_points() -> tuple[bool, str]:
    setup = SingularitySetup(parse(presets.EXP_INV), 0j, 1.0, omitted=0j)
    recs = find_fixed_points(setup, 1e-5, 1.0)
    if len(recs) < 6:
        return False, f"only {len(recs)} fixed points"
    mods = [abs(r.q) for r in recs]
    decades = math.log10(max(mods) / min(mods))
    # e^{1/q} = q  =>  g'(q) = -1/q
    worst = max(abs(abs(r.multiplier) * abs(r.q) - 1) for r in recs)
    report = divergence_check(recs)
    repelling = all(r.classification == "repelling" for r in recs if abs(r.q) < 1)
    ok = decades >= 2 and worst <= 1e-8 and report.strictly_increasing and repelling
    return ok, (f"{len(recs)} points spanning {decades:.2f} decades, max rel err |m||q|-1 = {worst:.1e}, "
                f"increasing={report.strictly_increasing}, all repelling={repelling}")


def z_exp_inv_fixed_points() -> tuple[bool, str]:
    setup = SingularitySetup(parse(presets.Z_EXP_INV), 0j, 1.0, omitted=0j)
    recs = find_fixed_points(setup, 1e-3, 1.0)
    worst_q = worst_m = 0.0
    for k in [k for j in range(1, 9) for k in (j, -j)]:
        q = 1 / (TWO_PI * 1j * k)
        nearest = min(recs, key=lambda r: abs(r.q - q))
        worst_q = max(worst_q, abs(nearest.q - q))
        worst_m = max(worst_m, abs(nearest.multiplier - (1 - TWO_PI * 1j * k)))
    report = divergence_check(recs)
    ok = worst_q <= 1e-10 and worst_m <= 1e-10 and report.diverging
    return ok, (f"k=±1..±8: max |q-1/(2πik)| = {worst_q:.1e}, max |m-(1-2πik)| = {worst_m:.1e}; "
                f"{len(recs)} points, diverging={report.diverging}")


def exp_conjugation() -> tuple[bool, str]:
    f = parse(presets.EXP)
    g = invert_conjugate(f)
    setup = SingularitySetup(g, 0j, 1.0, omitted=0j)
    recs = find_fixed_points(setup, 1e-3, 1.0)
    if len(recs) < 4:
        return False, f"only {len(recs)} fixed points of 1/f(1/z)"
    worst = 0.0
    for r in recs:
        s = 1 / r.q
        fs = evaluate(f, s)
        # s is a fixed point of exp and f'(s) = e^s = s
        worst = max(worst, _rel(r.multiplier, s), _rel(r.multiplier, fs.derivative))
    return worst <= 1e-8, f"{len(recs)} fixed points near 0, max rel |g'(q) - f'(1/q)| = {worst:.1e}"


def sin_inv_two_cycles() -> tuple[bool, str]:
    setup, cycles = _sin_cycles()
    good = [c for c in cycles if c.residual <= 1e-9]
    all_repelling = all(abs(c.multiplier) > 1 for c in cycles)
    # one branch of the sequence q_n -> 0 whose partners accumulate at the preimage 1/pi
    w = 1 / math.pi
    family = [c for c in good if abs(c.partner - w) <= 1e-2 and c.q.real > 0]
    fam_ok = len(family) >= 3 and divergence_check(family).strictly_increasing
    # preimages crowd like pi*r^2 near 0, so the census needs a finer radial grid than the default
    pre = find_preimages(setup, 0j, 1e-3, 0.5, radii=800, angles=64)
    ks = sorted(round((1 / m.w).real / math.pi) for m in pre.members)
    analytic = all(abs(m.w - 1 / (k * math.pi)) <= 1e-12 * abs(m.w) for m, k in zip(
        sorted(pre.members, key=lambda m: round((1 / m.w).real / math.pi)), ks))
    kmax = math.floor(1 / (1e-3 * math.pi))
    expected = [k for k in range(-kmax, kmax + 1) if k != 0]
    complete = ks == expected
    noncritical = bool(pre.members) and len(pre.noncritical) == len(pre.members)
    ok = len(good) >= 3 and all_repelling and fam_ok and noncritical and analytic and complete
    return ok, (f"{len(good)} cycles with residual <= 1e-9, all |m|>1={all_repelling}, "
                f"branch at w=1/π: {len(family)} cycles, increasing={fam_ok}; "
                f"preimages of 0: {len(pre.members)}/{len(expected)} of 1/(kπ) found, exact={analytic}, "
                f"all non-critical={noncritical}")


def renormalization() -> tuple[bool, str]:
    lambdas = [10.0, 1e2, 1e3, 1e4]
    setup = SingularitySetup(parse(presets.EXP_INV), 0j, 1.0, omitted=0j)
    steps = renormalize(setup, lambdas)
    report = convergence_report(steps, setup, compact_radius=1.0)
    h0 = max(abs(x - 1 / 3) for x in report.h_sharp_at_zero)
    sup = max(report.sup_spherical_on_disk)
    gap = min(report.omitted_value_gap)
    breve = SingularitySetup(breve_transform(setup.g, 0j), 0j, 1.0, omitted=0j)
    bsteps = renormalize(breve, lambdas)
    ratios = [pole_escape_ratio(s, breve) for s in bsteps]
    ok = h0 <= 1e-9 and sup <= 2 + 1e-6 and gap > 0 and ratios[-1] > ratios[0]
    return ok, (f"max |h#(0)-1/3| = {h0:.1e}, max sup h# = {sup:.4f}, min omitted gap = {gap:.2e}, "
                f"breve |v-v_n|/r_n: {ratios[0]:.3g} -> {ratios[-1]:.3g}")


def growth_diagnostic() -> tuple[bool, str]:
    setup = SingularitySetup(parse(presets.EXP_INV), 0j, 1.0)
    parts, ok = [], True
    for r in (1e-1, 1e-2, 1e-3, 1e-4):
        best, _ = circle_growth(setup, r)
        ok &= best >= 1 / (3 * r)
        parts.append(f"r={r:g}: {best:.4g} (need {1 / (3 * r):.4g})")
    return ok, "; ".join(parts)


def metric_lemma_suite(n: int = 200, seed: int = 20240501) -> tuple[bool, str]:
    failures = 0
    sharp_held = 0
    chains = 0
    for policy in ("max_weight", "nearest"):
        rng = np.random.default_rng(seed)
        for _ in range(n):
            problem = random_instance(rng)
            try:
                res = select(problem, policy=policy)
            except Exception:
                failures += 1
                continue
            rep = verify_conditions(problem, res.w)
            m_u = problem.weight(problem.start)
            length_ok = res.trace_length <= 2 / (problem.sigma * m_u)
            doubling_ok = all(b > 2 * a for a, b in zip(res.trace_weights, res.trace_weights[1:]))
            if not (rep.passed and length_ok and doubling_ok):
                failures += 1
            sharp_held += rep.distance_sharp
            chains += res.iterations > 0
    return failures == 0, (f"{n} instances x 2 tie-break policies, {failures} failures, {chains} runs moved; "
                           f"(i) also held with the sharper constant in {sharp_held}/{2 * n}")


def _tame_samples(rng: random.Random, count: int, predicate: Callable) -> list:
    out = []
    while len(out) < count:
        f = random_ast(rng, rng.randint(1, 6))
        z = cmath.rect(math.exp(rng.uniform(math.log(0.2), math.log(5))), rng.uniform(-math.pi, math.pi))
        try:
            jet = evaluate(f, z)
        except EvaluationError:
            continue
        if jet.overflowed or not predicate(f, z, jet):
            continue
        out.append((f, z, jet))
    return out


def numerics_suite(seed: int = 7) -> tuple[bool, str]:
    rng = random.Random(seed)
    h = 1e-6
    # AD vs central differences, on samples where |f|, |f'| <= 1e4 (FD is meaningless near poles)
    fd_fail = 0
    for f, z, jet in _tame_samples(rng, 500, lambda f, z, j: abs(j.value) <= 1e4 and abs(j.derivative) <= 1e4):
        try:
            fd = (evaluate(f, z + h).value - evaluate(f, z - h).value) / (2 * h)
        except EvaluationError:
            fd = complex("nan")
        if not abs(jet.derivative - fd) <= 1e-5 * (1 + abs(jet.derivative)):
            fd_fail += 1

    inv_fail = 0
    for f, z, jet in _tame_samples(rng, 200, lambda f, z, j: j.value != 0 and abs(j.value) < 1e100):
        try:
            a = spherical_derivative(f, z)
            b = spherical_derivative(Div(Lit(1), f), z)
        except EvaluationError:
            inv_fail += 1
            continue
        if not (a == b or abs(a - b) <= 1e-10 * max(a, b)):
            inv_fail += 1

    setup, cycles = _sin_cycles()
    chain_fail = 0
    for c in cycles:
        it = evaluate_iterate(setup.g, c.q, 2)
        d1 = evaluate(setup.g, c.q)
        d2 = evaluate(setup.g, d1.value)
        prod = d1.derivative * d2.derivative
        if _rel(it.derivative, prod) > 1e-12 or _rel(c.multiplier, prod) > 1e-12:
            chain_fail += 1
    ok = fd_fail == 0 and inv_fail == 0 and chain_fail == 0 and len(cycles) > 0
    return ok, (f"AD vs FD: {fd_fail}/500 failures; spherical inversion: {inv_fail}/200 failures; "
                f"chain rule: {chain_fail}/{len(cycles)} cycles")


CRITERIA: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("exp(1/z) repelling fixed points, |g'(q)| = 1/|q|", exp_inv_fixed_points),
    ("z*exp(1/z) fixed points 1/(2πik), multipliers 1-2πik", z_exp_inv_fixed_points),
    ("exp(z) through 1/f(1/z): multipliers preserved", exp_conjugation),
    ("sin(1/z) repelling 2-cycles and non-critical preimages", sin_inv_two_cycles),
    ("renormalisation diagnostics h#(0)=1/3, h#<=2, omitted gap, pole escape", renormalization),
    ("growth |z|g#(z) >= 1/(3r) on circles", growth_diagnostic),
    ("metric-lemma selection on 200 random instances", metric_lemma_suite),
    ("AD, spherical inversion and chain-rule numerics", numerics_suite),
]


def run_criterion(number: int) -> CriterionResult:
    name, fn = CRITERIA[number - 1]
    t0 = time.perf_counter()
    passed, detail = fn()
    return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - t0)


def run_all(echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    results = []
    for n in range(1, len(CRITERIA) + 1):
        res = run_criterion(n)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
