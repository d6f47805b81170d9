"""Validated model parameters and closed-form scalars derived from (d, p).

``d`` is the branching degree of the rooted tree, ``p`` the per-step
probability that an active frog moves toward the root. Everything else
(the loop-erasure drift ``pstar``, the one-dimensional ascent probability
``rho``, the up-continuation probability ``alpha``, and the affine argument
maps ``c_map``) is a closed form of these two numbers. Passing ``p`` as a
:class:`fractions.Fraction` keeps every derived quantity exact, which the
polynomial and operator tests rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from .errors import InvalidParameterError

Number = Union[int, float, Fraction]

#: Transience threshold of the dominating branching random walk, (2 - sqrt 2)/4.
QSTAR = (2.0 - math.sqrt(2.0)) / 4.0


def _half(like: Number) -> Number:
    return Fraction(1, 2) if isinstance(like, Fraction) else 0.5


def _check_d(d: int) -> None:
    if not isinstance(d, int) or d < 2:
        raise InvalidParameterError(f"branching degree d must be an integer >= 2, got {d!r}")


def _check_p(p: Number, *, force: bool = False) -> None:
    if not 0 <= p <= 1:
        raise InvalidParameterError(f"drift p must lie in [0, 1], got {p!r}")
    if not force and p > _half(p):
        raise InvalidParameterError(
            f"drift p={p!r} exceeds 1/2; every supported statement assumes p <= 1/2 "
            "(pass force=True to explore anyway)"
        )


def pstar(d: int, p: Number, *, force: bool = False) -> Number:
    """Drift of the non-backtracking model matching the loop-erasure of a p-walk.

    Returns p(d-1) / (d - (d+1)p); exact when ``p`` is a Fraction.
    """
    _check_d(d)
    _check_p(p, force=force)
    den = d - (d + 1) * p
    if den <= 0:
        raise InvalidParameterError(f"pstar undefined: d - (d+1)p = {den!r} <= 0")
    out = p * (d - 1) / den
    if not 0 <= out <= 1:
        raise InvalidParameterError(f"pstar({d}, {p!r}) = {out!r} outside [0, 1]")
    return out


def rho(p: Number) -> Number:
    """Probability that a p-biased walk on the integers ever gains one level
    against its drift: p / (1-p)."""
    if not 0 <= p < 1:
        raise InvalidParameterError(f"rho requires 0 <= p < 1, got {p!r}")
    return p / (1 - p)


def alpha(d: int, p: Number, *, force: bool = False) -> Number:
    """Up-continuation probability of the non-backtracking walk:
    p / (p + (1-p)(d-1)/d). Also the success probability of the root-ascent
    binomial."""
    _check_d(d)
    _check_p(p, force=force)
    if isinstance(p, Fraction):
        den = p + (1 - p) * Fraction(d - 1, d)
    else:
        den = p + (1 - p) * (d - 1) / d
    if den == 0:
        raise InvalidParameterError(f"alpha undefined at d={d}, p={p!r}")
    return p / den


@dataclass(frozen=True)
class AffineMap:
    """x -> slope * x + intercept, mapping [0, 1] into [0, 1].

    slope == 0 only occurs in the degenerate p = 0 case, where every argument
    map collapses to a constant.
    """

    slope: Number
    intercept: Number

    def __post_init__(self):
        if self.slope < 0:
            raise InvalidParameterError(f"AffineMap slope must be >= 0, got {self.slope!r}")
        if self.intercept < 0 or self.slope + self.intercept > 1 + 1e-12:
            raise InvalidParameterError(
                f"AffineMap({self.slope!r}, {self.intercept!r}) does not map [0,1] into [0,1]"
            )

    def __call__(self, x):
        return self.slope * x + self.intercept


def c_map(d: int, p: Number, k: int, *, force: bool = False) -> AffineMap:
    """Affine argument map x -> (px + (1-p)k/d) / (p + (1-p)(d-1)/d).

    For p = (d-1)/(2d-1) this reduces exactly to x/2 + k/(2(d-1)); the
    reduction is bit-exact when p is given as a Fraction.
    """
    _check_d(d)
    _check_p(p, force=force)
    if not 0 <= k <= d - 1:
        raise InvalidParameterError(f"c_map index k must lie in 0..d-1, got {k}")
    if isinstance(p, Fraction):
        den = p + (1 - p) * Fraction(d - 1, d)
        num_const = (1 - p) * Fraction(k, d)
    else:
        den = p + (1 - p) * (d - 1) / d
        num_const = (1 - p) * k / d
    if den == 0:
        raise InvalidParameterError(f"c_map undefined at d={d}, p={p!r}")
    return AffineMap(p / den, num_const / den)


@dataclass(frozen=True)
class ModelParams:
    """Branching degree and drift, plus every derived scalar.

    ``force=True`` lifts the p <= 1/2 cap for exploration; all shipped
    verification suites stay within the capped range.
    """

    d: int
    p: Number
    force: bool = field(default=False, compare=False)

    def __post_init__(self):
        _check_d(self.d)
        _check_p(self.p, force=self.force)

    @property
    def pstar(self) -> Number:
        return pstar(self.d, self.p, force=self.force)

    @property
    def rho(self) -> Number:
        return rho(self.p)

    @property
    def alpha(self) -> Number:
        return alpha(self.d, self.p, force=self.force)

    @property
    def qstar(self) -> float:
        return QSTAR

    def c_map(self, k: int) -> AffineMap:
        return c_map(self.d, self.p, k, force=self.force)

    def star_params(self) -> "ModelParams":
        """Parameters of the matching non-backtracking model: (d, pstar)."""
        return ModelParams(self.d, self.pstar, force=self.force)

    def as_floats(self) -> "ModelParams":
        return ModelParams(self.d, float(self.p), force=self.force)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "p": float(self.p),
            "pstar": float(self.pstar),
            "rho": float(self.rho),
            "alpha": float(self.alpha),
            "qstar": self.qstar,
            "c_maps": [
                {"k": k, "slope": float(self.c_map(k).slope), "intercept": float(self.c_map(k).intercept)}
                for k in range(self.d)
            ],
        }


def critical_drift(d: int) -> Fraction:
    """The drift (d-1)/(2d-1), i.e. pstar(d, 1/3), at which the self-similar
    model is recurrent for every d."""
    _check_d(d)
    return Fraction(d - 1, 2 * d - 1)
