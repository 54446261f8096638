"""Rescaling sequences h_n(z) = g(v_n + r_n z) around an essential singularity.

For each target growth level lambda, a point xi with
|xi - v| * g#(xi) >= lambda is located; the doubling selection of
:mod:`singulyr.metric_lemma` (weight g#, forbidden set {v}, sigma = 3/lambda)
then moves it to v_n, and r_n = 1/(3 g#(v_n)). By construction
h_n#(0) = 1/3 and h_n# <= 2 on the disk |z| <= lambda (up to the
searcher's resolution).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .evaluation import (JetValue, SingularitySetup, jet_array, spherical_array,
                         spherical_derivative)
from .expr import reciprocal
from .metric_lemma import ConditionReport, SelectionProblem, select, verify_conditions

DEFAULT_LAMBDAS = (10.0, 1e2, 1e3, 1e4)


class GrowthNotReached(RuntimeError):
    """No sampled point reached the requested growth level.

    Either the sampling is too coarse or ``g`` has no essential singularity
    at ``v`` (then |z - v| * g#(z) stays bounded).
    """

    def __init__(self, target: float, best: float, best_point: complex):
        super().__init__(f"growth target {target:g} not reached; best |z-v|*g# = {best:.6g} at {best_point!r}")
        self.target = target
        self.best = best
        self.best_point = best_point


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class GrowthPoint:
    target: float
    xi: complex
    achieved: float


@dataclass
class RenormStep:
    lam: float
    xi: complex
    vn: complex
    rn: float
    spherical_at_vn: float
    spherical_at_xi: float
    iterations: int = 0
    conditions: Optional[ConditionReport] = None
    # closed disk D(v_n, |xi - v|/3) misses v
    scaled_disk_clear: bool = True


@dataclass
class StepDiagnostics:
    lam: float
    h_sharp_at_zero: float
    sup_spherical_on_disk: float
    omitted_gap: Optional[float]
    sample_radius: float


@dataclass
class ConvergenceReport:
    steps: list[StepDiagnostics]
    cauchy_deltas: list[float]
    deltas_decreasing: bool
    compact_radius: float = 0.0

    @property
    def h_sharp_at_zero(self) -> list[float]:
        return [s.h_sharp_at_zero for s in self.steps]

    @property
    def sup_spherical_on_disk(self) -> list[float]:
        return [s.sup_spherical_on_disk for s in self.steps]

    @property
    def omitted_value_gap(self) -> list[Optional[float]]:
        return [s.omitted_gap for s in self.steps]


# -- growth points -----------------------------------------------------------


def growth_field(setup: SingularitySetup, z) -> np.ndarray:
    """|z - v| * g#(z) on an array of points (NaN where both channels fail)."""
    z = np.asarray(z, dtype=complex)
    return np.abs(z - setup.v) * spherical_array(setup.g, z, reciprocal(setup.g))


def _refine_angle(setup: SingularitySetup, radius: float, theta: float, width: float, rounds: int) -> tuple[float, float]:
    g_inv = reciprocal(setup.g)

    def neg_field(t: float) -> float:
        z = np.array([setup.v + radius * np.exp(1j * t)])
        val = float(np.abs(z[0] - setup.v) * spherical_array(setup.g, z, g_inv)[0])
        return -val if math.isfinite(val) else 0.0

    best_t, best_val = theta, -neg_field(theta)
    for _ in range(rounds):
        res = minimize_scalar(neg_field, bounds=(best_t - width, best_t + width), method="bounded",
                              options={"xatol": width * 1e-6})
        if -res.fun > best_val:
            best_t, best_val = float(res.x), float(-res.fun)
        width /= 10.0
    return best_t, best_val


def circle_growth(setup: SingularitySetup, radius: float, angles: int = 512, refine_rounds: int = 3) -> tuple[float, complex]:
    """Max of |z - v| * g#(z) over the circle |z - v| = radius (sampled, then refined)."""
    theta = 2 * np.pi * np.arange(angles) / angles
    z = setup.v + radius * np.exp(1j * theta)
    vals = np.nan_to_num(growth_field(setup, z), nan=0.0)
    j = int(np.argmax(vals))
    t, best = float(theta[j]), float(vals[j])
    if refine_rounds:
        t, best = _refine_angle(setup, radius, t, 2 * np.pi / angles, refine_rounds)
    return best, setup.v + radius * complex(np.cos(t), np.sin(t))


def find_growth_points(
    setup: SingularitySetup,
    lambda_targets: Sequence[float] = DEFAULT_LAMBDAS,
    *,
    radii_per_decade: int = 12,
    decades: int = 6,
    angles: int = 512,
    refine_rounds: int = 3,
) -> list[GrowthPoint]:
    """For each target, the outermost sampled circle reaching it, refined in angle.

    Circles are |z - v| = R * 10^(-j/radii_per_decade), R the domain radius.
    Raises :class:`GrowthNotReached` for the first target no circle reaches.
    """
    targets = [float(t) for t in lambda_targets]
    if any(t <= 0 for t in targets) or targets != sorted(targets):
        raise PreconditionError("lambda targets must be positive and increasing")
    radii = setup.domain_radius * 10.0 ** (-np.arange(1, radii_per_decade * decades + 1) / radii_per_decade)
    out: list[GrowthPoint] = []
    best_seen, best_point = 0.0, complex(setup.v + radii[0])
    j0 = 0
    for target in targets:
        found = None
        for j in range(j0, len(radii)):
            val, point = circle_growth(setup, float(radii[j]), angles, refine_rounds)
            if val > best_seen:
                best_seen, best_point = val, point
            if val >= target:
                found = GrowthPoint(target, point, val)
                j0 = j
                break
        if found is None:
            raise GrowthNotReached(target, best_seen, best_point)
        out.append(found)
    return out


# -- renormalisation ---------------------------------------------------------


def log_polar_ball(center: complex, radius: float, rings: int = 32, spokes: int = 64, depth: float = 1e-3) -> np.ndarray:
    """rings*spokes candidates in the closed disk D(center, radius), log-spaced radially."""
    rad = radius * depth ** (np.arange(rings) / (rings - 1))
    ang = 2 * np.pi * np.arange(spokes) / spokes
    return (center + np.outer(rad, np.exp(1j * ang))).ravel()


def make_problem(setup: SingularitySetup, xi: complex, lam: float, candidates: int = 2048) -> SelectionProblem:
    """Selection instance: closed domain disk, Y = {v}, M = g#, sigma = 3/lambda, u = xi."""
    g_inv = reciprocal(setup.g)
    spokes = 64
    rings = max(2, candidates // spokes)

    def batch(points):
        return spherical_array(setup.g, np.asarray(points, dtype=complex), g_inv)

    def searcher(center: complex, radius: float):
        pts = log_polar_ball(center, radius, rings, spokes)
        inside = (np.abs(pts - setup.v) <= setup.domain_radius) & (pts != setup.v)
        pts = pts[inside]
        m = batch(pts)
        return [complex(p) for p in pts[np.isfinite(m)]]

    return SelectionProblem(
        distance=lambda a, b: abs(a - b),
        forbidden=[setup.v],
        weight=lambda p: spherical_derivative(setup.g, p),
        sigma=3.0 / lam,
        start=complex(xi),
        searcher=searcher,
        batch_weight=lambda pts: batch(pts),
        sort_key=lambda p: (p.real, p.imag),
    )


def renorm_step(setup: SingularitySetup, xi: complex, lam: float, *, candidates: int = 2048,
                max_doublings: int = 64) -> RenormStep:
    """One rescaling datum (lambda, xi, v_n, r_n) with the selection's condition report."""
    xi = complex(xi)
    m_xi = spherical_derivative(setup.g, xi)
    level = abs(xi - setup.v) * m_xi
    if not level >= lam * (1 - 1e-6):
        raise PreconditionError(f"|xi - v| * g#(xi) = {level:.6g} is below lambda = {lam:g}")
    problem = make_problem(setup, xi, lam, candidates)
    result = select(problem, max_doublings=max_doublings)
    vn = complex(result.w)
    m_vn = spherical_derivative(setup.g, vn)
    return RenormStep(
        lam=float(lam),
        xi=xi,
        vn=vn,
        rn=1.0 / (3.0 * m_vn),
        spherical_at_vn=m_vn,
        spherical_at_xi=m_xi,
        iterations=result.iterations,
        conditions=verify_conditions(problem, vn),
        scaled_disk_clear=abs(vn - setup.v) > abs(xi - setup.v) / 3,
    )


def renormalize(setup: SingularitySetup, lambda_targets: Sequence[float] = DEFAULT_LAMBDAS, **kwargs) -> list[RenormStep]:
    growth = find_growth_points(setup, lambda_targets)
    return [renorm_step(setup, gp.xi, gp.target, **kwargs) for gp in growth]


def sample_h(step: RenormStep, setup: SingularitySetup, points) -> list[JetValue]:
    """Jets of h_n(z) = g(v_n + r_n z); derivatives carry the factor r_n."""
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    if np.any(np.abs(z) > step.lam):
        raise PreconditionError(f"sample outside the guaranteed disk |z| <= {step.lam:g}")
    jet = jet_array(setup.g, step.vn + step.rn * z)
    return [JetValue(complex(v), complex(d) * step.rn, bool(o))
            for v, d, o in zip(jet.value, jet.derivative, jet.bad)]


def h_spherical(step: RenormStep, setup: SingularitySetup, points) -> np.ndarray:
    """h_n#(z) = r_n * g#(v_n + r_n z)."""
    z = np.asarray(points, dtype=complex)
    return step.rn * spherical_array(setup.g, step.vn + step.rn * z, reciprocal(setup.g))


def disk_grid(radius: float, n: int = 41) -> np.ndarray:
    """Points of an n x n grid on [-radius, radius]^2 lying in the closed disk."""
    t = np.linspace(-radius, radius, n)
    grid = (t[None, :] + 1j * t[:, None]).ravel()
    return grid[np.abs(grid) <= radius * (1 + 1e-12)]


def step_diagnostics(step: RenormStep, setup: SingularitySetup, grid_n: int = 41, max_radius: float = 10.0) -> StepDiagnostics:
    radius = min(step.lam, max_radius)
    grid = disk_grid(radius, grid_n)
    sharp = h_spherical(step, setup, grid)
    h0 = float(h_spherical(step, setup, np.array([0j]))[0])
    gap = None
    if setup.omitted is not None:
        vals = jet_array(setup.g, step.vn + step.rn * grid).value
        gap = float(np.min(np.abs(vals - setup.omitted)))
    return StepDiagnostics(step.lam, h0, float(np.nanmax(sharp)), gap, radius)


def convergence_report(steps: Sequence[RenormStep], setup: SingularitySetup, compact_radius: float,
                       grid_n: int = 21) -> ConvergenceReport:
    """Sampled Cauchy deltas sup|h_{n+1} - h_n| on |z| <= compact_radius, plus per-step checks."""
    if len(steps) < 2:
        raise PreconditionError("convergence_report needs at least two steps")
    if compact_radius > min(s.lam for s in steps) / 3:
        raise PreconditionError("compact radius must not exceed min(lambda_n)/3")
    grid = disk_grid(compact_radius, grid_n)
    values = [jet_array(setup.g, s.vn + s.rn * grid).value for s in steps]
    deltas = [float(np.max(np.abs(b - a))) for a, b in zip(values, values[1:])]
    decreasing = all(b <= a for a, b in zip(deltas, deltas[1:]))
    return ConvergenceReport(
        steps=[step_diagnostics(s, setup) for s in steps],
        cauchy_deltas=deltas,
        deltas_decreasing=decreasing,
        compact_radius=compact_radius,
    )


def pole_escape_ratio(step: RenormStep, setup: SingularitySetup) -> float:
    """|v - v_n| / r_n: distance of the rescaled singularity from the origin."""
    return abs(setup.v - step.vn) / step.rn
