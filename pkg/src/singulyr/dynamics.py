"""Fixed points, 2-cycles and preimages of g on annuli around its singularity.

Seeds sit on a log-polar grid; annuli are chained geometrically from the
outer radius toward v. Each seed runs a damped Newton iteration (vectorised
across seeds); converged roots are kept when they stay in their own shell,
then deduplicated and classified by their multiplier.
"""

from __future__ import annotations

import bisect
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .evaluation import JetArray, SingularitySetup, iterate_array, jet_array

NEWTON_MAX_ITER = 64
NEWTON_MAX_HALVINGS = 20
DEDUPE_RTOL = 1e-9
INDIFFERENT_BAND = 1e-9
SEPARATION_RTOL = 1e-6
CRITICAL_TOL = 1e-10
# a root is accepted when the last full Newton step is this small relative to |z - v|
STEP_RTOL = 1e-9


def residual_tolerance(q: complex) -> float:
    return 1e-10 * (1 + abs(q))


def classify(multiplier: complex) -> str:
    m = abs(multiplier)
    if abs(m - 1) <= INDIFFERENT_BAND:
        return "indifferent"
    return "attracting" if m < 1 else "repelling"


@dataclass(frozen=True)
class FixedPointRecord:
    q: complex
    residual: float
    multiplier: complex
    classification: str
    annulus: int


@dataclass(frozen=True)
class CycleRecord:
    """2-cycle {q, partner}; ``q`` is the point nearer to the singularity."""

    q: complex
    partner: complex
    residual: float
    multiplier: complex
    classification: str
    annulus: int


@dataclass(frozen=True)
class Preimage:
    w: complex
    derivative: complex
    critical: bool


@dataclass
class PreimageSet:
    target: complex
    members: list[Preimage]

    @property
    def noncritical(self) -> list[Preimage]:
        return [m for m in self.members if not m.critical]


@dataclass
class DivergenceReport:
    count: int
    strictly_increasing: bool
    ratio: float  # |m| nearest v over |m| farthest from v
    slope: float  # fitted d log|m| / d log|q - v|
    diverging: bool


class DegenerateInvolution(RuntimeError):
    """g∘g is (numerically) the identity on most seeds; no isolated 2-cycles."""

    def __init__(self, fraction: float):
        super().__init__(f"{fraction:.0%} of seeds satisfy g(g(z)) = z identically; g looks like an involution")
        self.fraction = fraction


# -- seeding and Newton ------------------------------------------------------


def shells(inner: float, outer: float, ratio: float = 10.0) -> list[tuple[float, float]]:
    """Chain of annuli [a, b] from ``outer`` down to ``inner`` with b/a <= ratio."""
    if not 0 < inner < outer:
        raise ValueError("need 0 < inner < outer")
    out = []
    b = outer
    while b > inner * (1 + 1e-12):
        a = max(inner, b / ratio)
        out.append((a, b))
        b = a
    return out


def seed_grid(v: complex, a: float, b: float, radii: int = 48, angles: int = 256) -> np.ndarray:
    rad = np.geomspace(a, b, radii)
    ang = 2 * np.pi * np.arange(angles) / angles
    return (v + np.outer(rad, np.exp(1j * ang))).ravel()


def damped_newton(fun: Callable[[np.ndarray], JetArray], z0: np.ndarray, scale: Callable[[np.ndarray], np.ndarray],
                  max_iter: int = NEWTON_MAX_ITER, max_halvings: int = NEWTON_MAX_HALVINGS):
    """Vectorised damped Newton on F with jets from ``fun``.

    Steps are halved (up to ``max_halvings`` times) until |F| decreases; a
    seed stops when its step falls below 1e-15 * scale(z) or it cannot make
    progress. Returns the final points, residuals |F|, the last full Newton
    step size, and a mask of seeds that stayed admissible.
    """
    z = np.array(z0, dtype=complex)
    jet = fun(z)
    F, dF = jet.value, jet.derivative
    alive = ~jet.bad & (dF != 0)
    res = np.where(alive, np.abs(F), np.inf)
    done = ~alive
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            idx = np.flatnonzero(~done)
            if idx.size == 0:
                break
            step = F[idx] / dF[idx]
            t = np.ones(idx.size)
            pending = np.ones(idx.size, dtype=bool)
            for _ in range(max_halvings + 1):
                p = np.flatnonzero(pending)
                if p.size == 0:
                    break
                trial = z[idx[p]] - t[p] * step[p]
                tj = fun(trial)
                rt = np.abs(tj.value)
                ok = ~tj.bad & (tj.derivative != 0) & (rt < res[idx[p]])
                acc = p[ok]
                gi = idx[acc]
                z[gi] = trial[ok]
                F[gi] = tj.value[ok]
                dF[gi] = tj.derivative[ok]
                res[gi] = rt[ok]
                pending[acc] = False
                t[p[~ok]] *= 0.5
            # seeds that could not decrease |F| are finished
            done[idx[pending]] = True
            moved = idx[~pending]
            tiny = np.abs(t[~pending] * step[~pending]) <= 1e-15 * scale(z[moved])
            done[moved[tiny | (res[moved] == 0)]] = True
        last = np.where(alive, np.abs(F / np.where(dF == 0, 1, dF)), np.inf)
        last[dF == 0] = np.where(res[dF == 0] == 0, 0.0, np.inf)
    return z, res, last, alive


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SINGULYR_THREADS", "")))
    except ValueError:
        return min(4, os.cpu_count() or 1)


def _per_shell(work: Callable[[int, float, float], list], inner: float, outer: float) -> list:
    chain = shells(inner, outer)
    tasks = [(i, a, b) for i, (a, b) in enumerate(chain)]
    n = min(_threads(), len(tasks))
    if n <= 1:
        parts = [work(*t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            parts = list(pool.map(lambda t: work(*t), tasks))
    out = []
    for part in parts:  # shell order keeps the merge deterministic
        out.extend(part)
    return out


def _check_annulus(setup: SingularitySetup, inner: float, outer: float):
    if not 0 < inner < outer <= setup.domain_radius * (1 + 1e-12):
        raise ValueError("need 0 < inner < outer <= domain_radius")


def _roots(setup, fun, inner, outer, radii, angles):
    """(root, residual, shell) triples of F from per-shell Newton runs."""
    v = setup.v

    def work(i, a, b):
        seeds = seed_grid(v, a, b, radii, angles)
        z, res, last, alive = damped_newton(fun, seeds, lambda p: np.maximum(np.abs(p - v), 1e-300))
        d = np.abs(z - v)
        keep = (alive & np.isfinite(res) & (d >= a) & (d <= b)
                & (last <= STEP_RTOL * d) & (res <= 1e-10 * (1 + np.abs(z))))
        return [(complex(q), float(r), i) for q, r in zip(z[keep], res[keep])]

    return _per_shell(work, inner, outer)


def dedupe(items: list, key_point: Callable, key_residual: Callable, v: complex, rtol: float = DEDUPE_RTOL) -> list:
    """Merge entries whose points agree within rtol * |q - v|; keep the smallest residual.

    Output is sorted by decreasing |q - v|.
    """
    ordered = sorted(items, key=lambda it: (-abs(key_point(it) - v), key_residual(it),
                                            key_point(it).real, key_point(it).imag))
    kept: list = []
    neg_dist: list[float] = []  # ascending, parallel to kept
    for it in ordered:
        q = key_point(it)
        d = abs(q - v)
        tol = rtol * max(d, 1e-300)
        lo = bisect.bisect_left(neg_dist, -d - tol)
        dup = None
        for j in range(lo, len(kept)):
            if neg_dist[j] > -d + tol:
                break
            if abs(key_point(kept[j]) - q) <= tol:
                dup = j
                break
        if dup is None:
            pos = bisect.bisect_right(neg_dist, -d)
            kept.insert(pos, it)
            neg_dist.insert(pos, -d)
        elif key_residual(it) < key_residual(kept[dup]):
            kept[dup] = it
    return kept


# -- fixed points ------------------------------------------------------------


def find_fixed_points(setup: SingularitySetup, inner: float, outer: float, *, radii: int = 48,
                      angles: int = 256) -> list[FixedPointRecord]:
    """Repelling/attracting fixed points of g with inner <= |q - v| <= outer."""
    _check_annulus(setup, inner, outer)
    g = setup.g

    def fun(z):
        jet = jet_array(g, z)
        return JetArray(jet.value - z, jet.derivative - 1, jet.zero_division, jet.overflowed)

    roots = _roots(setup, fun, inner, outer, radii, angles)
    roots = dedupe(roots, lambda r: r[0], lambda r: r[1], setup.v)
    if not roots:
        return []
    q = np.array([r[0] for r in roots])
    jet = jet_array(g, q)
    return [
        FixedPointRecord(complex(qq), float(abs(val - qq)), complex(m), classify(complex(m)), shell)
        for (qq, _, shell), val, m in zip(roots, jet.value, jet.derivative)
    ]


# -- 2-cycles ----------------------------------------------------------------


def find_two_cycles(setup: SingularitySetup, inner: float, outer: float, *, radii: int = 48,
                    angles: int = 256, involution_fraction: float = 0.9) -> list[CycleRecord]:
    """Genuine 2-cycles {q, g(q)} with q (the point nearer v) in the annulus.

    Raises :class:`DegenerateInvolution` when g∘g - id vanishes to first
    order on more than ``involution_fraction`` of the seeds.
    """
    _check_annulus(setup, inner, outer)
    g = setup.g
    v = setup.v

    probe = np.concatenate([seed_grid(v, a, b, 8, 32) for a, b in shells(inner, outer)])
    pj = iterate_array(g, probe, 2)
    ok = ~pj.bad
    if ok.any():
        flat = ok & (np.abs(pj.value - probe) <= 1e-12 * (1 + np.abs(probe))) & (np.abs(pj.derivative - 1) <= 1e-9)
        frac = flat.sum() / probe.size
        if frac > involution_fraction:
            raise DegenerateInvolution(float(frac))

    def fun(z):
        jet = iterate_array(g, z, 2)
        return JetArray(jet.value - z, jet.derivative - 1, jet.zero_division, jet.overflowed)

    roots = _roots(setup, fun, inner, outer, radii, angles)
    if not roots:
        return []
    z = np.array([r[0] for r in roots])
    partner = jet_array(g, z).value
    # canonical member of each cycle: nearer to v, ties broken by (re, im)
    swap = np.array([_partner_first(complex(q), complex(p), v) for q, p in zip(z, partner)])
    z = np.where(swap, partner, z)
    if swap.any():
        # q = g(root) carries the rounding of g amplified by |g'|; polish it as a root of G
        polished, _, _, alive = damped_newton(fun, z[swap], lambda p: np.maximum(np.abs(p - v), 1e-300))
        z[swap] = np.where(alive, polished, z[swap])
    shell_of = [r[2] for r in roots]
    first = jet_array(g, z)
    second = jet_array(g, first.value)
    records = []
    for q, shell, p, d1, gp, d2, bad in zip(z, shell_of, first.value, first.derivative, second.value,
                                            second.derivative, first.bad | second.bad):
        q, p = complex(q), complex(p)
        if bad or abs(p - q) <= SEPARATION_RTOL * (1 + abs(q)):
            continue  # fixed point of g
        if not inner <= abs(q - v) <= outer:
            continue
        m = complex(d1 * d2)
        records.append(CycleRecord(q, p, float(abs(complex(gp) - q)), m, classify(m), shell))
    return dedupe(records, lambda r: r.q, lambda r: r.residual, v)


def _partner_first(q: complex, p: complex, v: complex, rtol: float = 1e-9) -> bool:
    """Should ``p`` rather than ``q`` represent the cycle {q, p}?"""
    dq, dp = abs(q - v), abs(p - v)
    tol = rtol * max(dq, dp)
    if abs(dq - dp) > tol:
        return dp < dq
    if abs(q.real - p.real) > tol:
        return p.real < q.real
    return p.imag < q.imag


# -- preimages ---------------------------------------------------------------


def find_preimages(setup: SingularitySetup, target: complex, inner: float, outer: float, *, radii: int = 48,
                   angles: int = 256) -> PreimageSet:
    """Solutions of g(w) = target in the annulus, with criticality flags."""
    _check_annulus(setup, inner, outer)
    g = setup.g
    target = complex(target)

    def fun(z):
        jet = jet_array(g, z)
        return JetArray(jet.value - target, jet.derivative, jet.zero_division, jet.overflowed)

    roots = _roots(setup, fun, inner, outer, radii, angles)
    roots = dedupe(roots, lambda r: r[0], lambda r: r[1], setup.v)
    if not roots:
        return PreimageSet(target, [])
    w = np.array([r[0] for r in roots])
    jet = jet_array(g, w)
    members = [Preimage(complex(ww), complex(d), bool(abs(d) <= CRITICAL_TOL))
               for ww, val, d in zip(w, jet.value, jet.derivative)
               if abs(val - target) <= 1e-10]
    return PreimageSet(target, members)


# -- divergence --------------------------------------------------------------


def divergence_check(records: Sequence[FixedPointRecord | CycleRecord], v: complex = 0j,
                     tie_rtol: float = 1e-12) -> DivergenceReport:
    """Does |multiplier| grow as the points approach v?

    Records at (relatively) equal distance from v, e.g. complex-conjugate
    pairs, are not compared with each other.
    """
    if len(records) < 3:
        raise ValueError("divergence_check needs at least 3 records")
    v = complex(v)
    rows = sorted(((abs(r.q - v), abs(r.multiplier)) for r in records), key=lambda t: -t[0])
    increasing = True
    level_max = rows[0][1]  # largest |m| among records at the current distance level
    prev_level_max = -math.inf
    level_d = rows[0][0]
    for d, m in rows[1:]:
        if level_d - d > tie_rtol * level_d:
            prev_level_max = level_max
            level_d, level_max = d, m
        else:
            level_max = max(level_max, m)
        if not m > prev_level_max:
            increasing = False
    dist = np.array([r[0] for r in rows])
    mags = np.array([r[1] for r in rows])
    if np.ptp(np.log(dist)) > 0:
        slope = float(np.polyfit(np.log(dist), np.log(mags), 1)[0])
    else:
        slope = float("nan")
    ratio = float(mags[-1] / mags[0])
    return DivergenceReport(len(rows), increasing, ratio, slope, bool(increasing and ratio > 1))
