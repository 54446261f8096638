"""Doubling selection over a searchable metric space.

Given a weight ``M``, a forbidden set ``Y`` and a scale ``sigma``, start at
``u`` and keep jumping to a point of the closed ball of radius
``1/(sigma*M(v))`` where the weight more than doubles. When no candidate
doubles, the current point ``w`` satisfies:

(i)   d(u, w) <= 2/(sigma*M(u))   (and often the sharper 1/(sigma*M(u)))
(ii)  M(w) >= M(u)
(iii) the closed ball of radius 1/(sigma*M(w)) around w misses Y
(iv)  M <= 2*M(w) on that ball, relative to the points the searcher offers.

The searcher is the honest stand-in for completeness of the space: property
(iv) is certified only against the candidates it returns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Generic, Hashable, Iterable, Sequence, TypeVar

import numpy as np

P = TypeVar("P")


class SelectionError(RuntimeError):
    pass


class HypothesisViolated(SelectionError):
    """The start point is too close to the forbidden set: d(Y,u) <= 2/(sigma*M(u))."""


class DoublingLimitExceeded(SelectionError):
    """The weight kept doubling; it looks unbounded along the search."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


@dataclass
class SelectionProblem(Generic[P]):
    distance: Callable[[P, P], float]
    forbidden: Sequence[P]
    weight: Callable[[P], float]
    sigma: float
    start: P
    # searcher(center, radius) -> candidates (closed ball; may over-report)
    searcher: Callable[[P, float], Iterable[P]]
    # optional vectorised weight; must agree with ``weight`` pointwise
    batch_weight: Callable[[list[P]], Sequence[float]] | None = None
    sort_key: Callable[[P], Any] = lambda p: p

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def weights(self, points: list[P]) -> list[float]:
        if not points:
            return []
        if self.batch_weight is not None:
            return [float(m) for m in self.batch_weight(points)]
        return [float(self.weight(p)) for p in points]

    def distance_to_forbidden(self, p: P) -> float:
        if not self.forbidden:
            return math.inf
        return min(self.distance(y, p) for y in self.forbidden)

    def radius(self, m: float) -> float:
        return 1.0 / (self.sigma * m)

    def ball(self, center: P, radius: float) -> tuple[list[P], list[float], list[float]]:
        """Searcher candidates within the closed ball, with distances and weights."""
        pts, dists = [], []
        for x in self.searcher(center, radius):
            d = self.distance(center, x)
            if d <= radius:
                pts.append(x)
                dists.append(d)
        return pts, dists, self.weights(pts)


@dataclass
class SelectionResult(Generic[P]):
    w: P
    iterations: int
    trace: list[P]
    trace_weights: list[float] = field(default_factory=list)
    trace_length: float = 0.0


@dataclass
class ConditionReport:
    distance: float
    bound_sharp: float  # 1/(sigma*M(u))
    bound_doubled: float  # 2/(sigma*M(u))
    distance_sharp: bool  # (i) with the sharper constant
    distance_doubled: bool  # (i) with the doubled constant
    weight_monotone: bool  # (ii)
    ball_misses_forbidden: bool  # (iii)
    local_bound: bool  # (iv), relative to searcher candidates
    candidates_checked: int
    worst_ratio: float  # max M(x)/M(w) over checked candidates

    @property
    def passed(self) -> bool:
        """All four conditions, (i) taken with the doubled constant 2/(sigma*M(u))."""
        return self.distance_doubled and self.weight_monotone and self.ball_misses_forbidden and self.local_bound

    @property
    def distance_label(self) -> str:
        if self.distance_sharp:
            return "sharp"
        return "doubled" if self.distance_doubled else "none"


def _pick(problem: SelectionProblem, pts, dists, weights, policy: str) -> int:
    if policy == "max_weight":
        key = lambda j: (-weights[j], dists[j], problem.sort_key(pts[j]))
    elif policy == "nearest":
        key = lambda j: (dists[j], -weights[j], problem.sort_key(pts[j]))
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return min(range(len(pts)), key=key)


def select(problem: SelectionProblem[P], max_doublings: int = 64, policy: str = "max_weight") -> SelectionResult[P]:
    """Run the doubling iteration from ``problem.start``.

    Among several doubling candidates ``policy="max_weight"`` takes the one
    with the largest weight (then the nearest, then the smallest sort key);
    ``policy="nearest"`` takes the nearest first.
    """
    u = problem.start
    (m_u,) = problem.weights([u])
    if not m_u > 0:
        raise HypothesisViolated(f"weight at start must be positive, got {m_u}")
    d_yu = problem.distance_to_forbidden(u)
    if not d_yu > 2 * problem.radius(m_u):
        raise HypothesisViolated(
            f"d(Y,u)={d_yu:.6g} is not > 2/(sigma*M(u))={2 * problem.radius(m_u):.6g}"
        )
    current, m_cur = u, m_u
    trace, trace_w = [u], [m_u]
    length = 0.0
    for step in range(max_doublings + 1):
        pts, dists, weights = problem.ball(current, problem.radius(m_cur))
        better = [j for j, m in enumerate(weights) if m > 2 * m_cur]
        if not better:
            return SelectionResult(current, step, trace, trace_w, length)
        if step == max_doublings:
            break
        j = _pick(problem, [pts[j] for j in better], [dists[j] for j in better], [weights[j] for j in better], policy)
        j = better[j]
        length += dists[j]
        current, m_cur = pts[j], weights[j]
        trace.append(current)
        trace_w.append(m_cur)
    raise DoublingLimitExceeded(
        f"weight more than doubled {max_doublings} times (last M={m_cur:.6g}); unbounded along the search",
        trace,
    )


def verify_conditions(problem: SelectionProblem[P], w: P) -> ConditionReport:
    """Check (i)-(iv) for a proposed ``w``; (iv) against searcher candidates only."""
    u = problem.start
    m_u, m_w = problem.weights([u, w])
    d_uw = problem.distance(u, w)
    b1 = problem.radius(m_u)
    r_w = problem.radius(m_w)
    pts, _, weights = problem.ball(w, r_w)
    worst = max(weights, default=0.0) / m_w
    return ConditionReport(
        distance=d_uw,
        bound_sharp=b1,
        bound_doubled=2 * b1,
        distance_sharp=d_uw <= b1,
        distance_doubled=d_uw <= 2 * b1,
        weight_monotone=m_w >= m_u,
        ball_misses_forbidden=problem.distance_to_forbidden(w) > r_w,
        local_bound=all(m <= 2 * m_w for m in weights),
        candidates_checked=len(pts),
        worst_ratio=worst,
    )


# -- finite spaces -----------------------------------------------------------


@dataclass
class FiniteSpace:
    """Points of R^n with Euclidean distance, addressed by id."""

    coords: dict[Hashable, np.ndarray]
    weights: dict[Hashable, float]

    def __post_init__(self):
        self._ids = list(self.coords)
        self._xyz = np.array([self.coords[i] for i in self._ids], dtype=float)

    def distance(self, a: Hashable, b: Hashable) -> float:
        return float(np.linalg.norm(self.coords[a] - self.coords[b]))

    def searcher(self, center: Hashable, radius: float) -> list[Hashable]:
        d = np.linalg.norm(self._xyz - self.coords[center], axis=1)
        return [self._ids[j] for j in np.flatnonzero(d <= radius)]

    def problem(self, forbidden: Sequence[Hashable], sigma: float, start: Hashable) -> SelectionProblem:
        return SelectionProblem(
            distance=self.distance,
            forbidden=list(forbidden),
            weight=lambda p: self.weights[p],
            sigma=sigma,
            start=start,
            searcher=self.searcher,
            sort_key=lambda p: tuple(self.coords[p]) + (str(p),),
        )


def load_problem(path: str | Path) -> SelectionProblem:
    """Load a finite instance from JSON.

    Layout::

        {"points": [{"id": "a", "coords": [0, 0]}, ...],
         "weights": {"a": 1.0, ...},
         "forbidden": ["y"], "sigma": 1.0, "start": "a"}

    Forbidden points may omit their weight; they never enter a ball.
    """
    doc = json.loads(Path(path).read_text())
    return problem_from_dict(doc)


def problem_from_dict(doc: dict) -> SelectionProblem:
    for key in ("points", "weights", "forbidden", "sigma", "start"):
        if key not in doc:
            raise ValueError(f"metric-lemma instance: missing field {key!r}")
    coords = {p["id"]: np.asarray(p["coords"], dtype=float) for p in doc["points"]}
    weights = {k: float(m) for k, m in doc["weights"].items()}
    forbidden = list(doc["forbidden"])
    for pid in coords:
        if pid not in weights:
            if pid in forbidden:
                weights[pid] = 0.0
            else:
                raise ValueError(f"metric-lemma instance: no weight for point {pid!r}")
    for pid in forbidden + [doc["start"]]:
        if pid not in coords:
            raise ValueError(f"metric-lemma instance: unknown point id {pid!r}")
    return FiniteSpace(coords, weights).problem(forbidden, float(doc["sigma"]), doc["start"])


def random_instance(rng: np.random.Generator, max_points: int = 500, scales: Sequence[float] = (1.0, 3.0, 10.0, 30.0),
                    max_tries: int = 100) -> SelectionProblem:
    """Random planar instance satisfying the hypothesis at its start point.

    Weights are either independent log-uniform draws on [1, 100] or a
    random Gaussian bump rising from 1 to 100 (spatially coherent, so the
    doubling climb runs for several steps). Half of the instances start at
    the lightest admissible point.
    """
    for _ in range(max_tries):
        n = int(rng.integers(5, max_points + 1))
        scale = float(rng.choice(scales))
        xyz = rng.uniform(0, scale, size=(n, 2))
        if rng.random() < 0.5:
            m = np.exp(rng.uniform(0, np.log(100), size=n))
        else:
            peak = rng.uniform(0, scale, size=2)
            width = scale * rng.uniform(0.05, 0.3)
            m = 1 + 99 * np.exp(-np.sum((xyz - peak) ** 2, axis=1) / (2 * width**2))
        sigma = float(rng.choice([0.5, 1.0, 3.0]))
        n_forbidden = int(rng.integers(1, max(2, n // 50) + 1))
        forbidden = rng.choice(n, size=n_forbidden, replace=False)
        dy = np.min(np.linalg.norm(xyz[:, None, :] - xyz[None, forbidden, :], axis=2), axis=1)
        ok = np.flatnonzero(dy > 2.0 / (sigma * m))
        if ok.size == 0:
            continue
        if rng.random() < 0.5:
            start = int(ok[np.argmin(m[ok])])
        else:
            start = int(rng.choice(ok))
        space = FiniteSpace({j: xyz[j] for j in range(n)}, {j: float(m[j]) for j in range(n)})
        return space.problem([int(j) for j in forbidden], sigma, start)
    raise RuntimeError("could not draw an instance satisfying the hypothesis")
