"""Forward-mode jet evaluation of expression ASTs.

Every node is evaluated to a pair (value, derivative) over a numpy array of
sample points. Flags for division by exact zero and for magnitudes beyond
:data:`OVERFLOW` are accumulated per point, so one pass serves both scalar
queries and the vectorised Newton/grid searches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .expr import (Add, Cos, Div, Exp, FunctionAst, Lit, Mul, Neg, Pow, Sin,
                   Sub, Var, reciprocal)

OVERFLOW = 1e150
# above this |f| the spherical derivative goes through |f'/f|
LARGE_VALUE = 1e8


class EvaluationError(ArithmeticError):
    """Raised when a point is not admissible (e.g. division by exact zero).

    ``iterate`` is set by :func:`evaluate_iterate` to the index of the
    failing stage.
    """

    def __init__(self, message: str, z: complex, iterate: int | None = None):
        where = f" at iterate {iterate}" if iterate is not None else ""
        super().__init__(f"{message} at z={z!r}{where}")
        self.z = z
        self.iterate = iterate


@dataclass(frozen=True)
class JetValue:
    value: complex
    derivative: complex
    overflowed: bool = False


@dataclass(frozen=True)
class SingularitySetup:
    """Function ``g`` around its isolated essential singularity ``v``.

    ``domain_radius`` is the radius of the closed neighbourhood searched
    around ``v``; ``omitted`` is a value known to be omitted there, if any.
    """

    g: FunctionAst
    v: complex = 0j
    domain_radius: float = 1.0
    omitted: Optional[complex] = None

    def __post_init__(self):
        if not self.domain_radius > 0:
            raise ValueError("domain_radius must be positive")
        object.__setattr__(self, "v", complex(self.v))
        if self.omitted is not None:
            object.__setattr__(self, "omitted", complex(self.omitted))


@dataclass
class JetArray:
    """Vectorised jet: values, derivatives and per-point failure masks."""

    value: np.ndarray
    derivative: np.ndarray
    zero_division: np.ndarray
    overflowed: np.ndarray

    @property
    def bad(self) -> np.ndarray:
        return self.zero_division | self.overflowed


class _Flags:
    def __init__(self, shape):
        self.zero = np.zeros(shape, dtype=bool)
        self.over = np.zeros(shape, dtype=bool)

    def check(self, val, der):
        self.over |= ~(np.isfinite(val) & np.isfinite(der))
        self.over |= (np.abs(val) > OVERFLOW) | (np.abs(der) > OVERFLOW)
        return val, der


def _jet(node: FunctionAst, z: np.ndarray, fl: _Flags):
    match node:
        case Lit(value=c):
            return np.full(z.shape, c, dtype=complex), np.zeros(z.shape, dtype=complex)
        case Var():
            return z, np.ones(z.shape, dtype=complex)
        case Neg(arg=a):
            v, d = _jet(a, z, fl)
            return -v, -d
        case Add(left=a, right=b):
            v1, d1 = _jet(a, z, fl)
            v2, d2 = _jet(b, z, fl)
            return fl.check(v1 + v2, d1 + d2)
        case Sub(left=a, right=b):
            v1, d1 = _jet(a, z, fl)
            v2, d2 = _jet(b, z, fl)
            return fl.check(v1 - v2, d1 - d2)
        case Mul(left=a, right=b):
            v1, d1 = _jet(a, z, fl)
            v2, d2 = _jet(b, z, fl)
            return fl.check(v1 * v2, v1 * d2 + d1 * v2)
        case Div(left=a, right=b):
            v1, d1 = _jet(a, z, fl)
            v2, d2 = _jet(b, z, fl)
            zero = v2 == 0
            fl.zero |= zero
            den = np.where(zero, 1.0, v2)
            q = v1 / den
            return fl.check(q, (d1 - q * d2) / den)
        case Pow(base=b, k=k):
            v, d = _jet(b, z, fl)
            if k == 0:
                return np.ones(z.shape, dtype=complex), np.zeros(z.shape, dtype=complex)
            if k < 0:
                zero = v == 0
                fl.zero |= zero
                v = np.where(zero, 1.0, v)
            prev = _ipow(v, k - 1)
            return fl.check(prev * v, k * prev * d)
        case Exp(arg=a):
            v, d = _jet(a, z, fl)
            e = np.exp(v)
            return fl.check(e, e * d)
        case Sin(arg=a):
            v, d = _jet(a, z, fl)
            return fl.check(np.sin(v), np.cos(v) * d)
        case Cos(arg=a):
            v, d = _jet(a, z, fl)
            return fl.check(np.cos(v), -np.sin(v) * d)
    raise TypeError(f"not an expression node: {node!r}")


def _ipow(v: np.ndarray, k: int) -> np.ndarray:
    # exact repeated squaring; numpy's complex power goes through exp/log
    if k < 0:
        return 1.0 / _ipow(v, -k)
    result = np.ones(v.shape, dtype=complex)
    base = v
    while k:
        if k & 1:
            result = result * base
        k >>= 1
        if k:
            base = base * base
    return result


def jet_array(f: FunctionAst, z) -> JetArray:
    """Evaluate ``f`` and ``f'`` at every point of ``z`` (any shape)."""
    z = np.asarray(z, dtype=complex)
    fl = _Flags(z.shape)
    with np.errstate(all="ignore"):
        v, d = _jet(f, z, fl)
        v = np.broadcast_to(v, z.shape).copy()
        d = np.broadcast_to(d, z.shape).copy()
        fl.check(v, d)
    return JetArray(v, d, fl.zero, fl.over)


def evaluate(f: FunctionAst, z: complex) -> JetValue:
    """Value and derivative of ``f`` at ``z``.

    Raises :class:`EvaluationError` on division by exact zero. Overflow is
    not an error; it is reported through ``JetValue.overflowed``.
    """
    z = complex(z)
    jet = jet_array(f, np.array([z]))
    if jet.zero_division[0]:
        raise EvaluationError("division by zero", z)
    return JetValue(complex(jet.value[0]), complex(jet.derivative[0]), bool(jet.overflowed[0]))


def evaluate_iterate(f: FunctionAst, z: complex, k: int) -> JetValue:
    """``f`` composed with itself ``k`` times, derivative by the chain rule.

    A failure reports ``iterate=j`` when evaluation at ``f^j(z)`` fails.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    point = complex(z)
    derivative = 1 + 0j
    overflowed = False
    for j in range(k):
        try:
            jet = evaluate(f, point)
        except EvaluationError as exc:
            raise EvaluationError("division by zero", exc.z, iterate=j) from None
        derivative *= jet.derivative
        overflowed |= jet.overflowed
        point = jet.value
    return JetValue(point, derivative, overflowed)


def iterate_array(f: FunctionAst, z, k: int) -> JetArray:
    """Vectorised :func:`evaluate_iterate`; failed points are masked, not raised."""
    z = np.asarray(z, dtype=complex)
    point = z
    derivative = np.ones(z.shape, dtype=complex)
    zero = np.zeros(z.shape, dtype=bool)
    over = np.zeros(z.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(k):
            jet = jet_array(f, point)
            derivative = derivative * jet.derivative
            zero |= jet.zero_division
            over |= jet.overflowed | ~np.isfinite(derivative) | (np.abs(derivative) > OVERFLOW)
            point = jet.value
    return JetArray(point, derivative, zero, over)


def _spherical_from_jet(val: np.ndarray, der: np.ndarray) -> np.ndarray:
    a = np.abs(val)
    with np.errstate(all="ignore"):
        direct = np.abs(der) / (1.0 + a * a)
        # |f|/(1+|f|^2) * |f'/f|, written to keep |f|^2 out of the picture
        large = (1.0 / (a + 1.0 / a)) * (np.abs(der) / a)
    return np.where(a > LARGE_VALUE, large, direct)


def spherical_array(f: FunctionAst, z, f_inv: FunctionAst | None = None) -> np.ndarray:
    """Spherical derivative |f'|/(1+|f|^2) at every point of ``z``.

    Points where ``f`` overflows or hits a zero division are retried through
    ``1/f`` (the chordal metric is invariant under inversion). Points where
    both channels fail come back as NaN.
    """
    z = np.asarray(z, dtype=complex)
    jet = jet_array(f, z)
    out = _spherical_from_jet(jet.value, jet.derivative)
    retry = jet.bad
    if retry.any():
        if f_inv is None:
            f_inv = reciprocal(f)
        inv = jet_array(f_inv, z[retry])
        alt = _spherical_from_jet(inv.value, inv.derivative)
        alt[inv.bad] = np.nan
        out[retry] = alt
    return out


def spherical_derivative(f: FunctionAst, z: complex) -> float:
    """f#(z) = |f'(z)| / (1 + |f(z)|^2), via the 1/f channel on overflow."""
    value = spherical_array(f, np.array([complex(z)]))[0]
    if np.isnan(value):
        raise EvaluationError("both the f and 1/f channels failed", complex(z))
    return float(value)
