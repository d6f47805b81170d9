"""Exact sparse polynomials for the subtree-activation recursions.

Two families are built recursively with integer coefficients:

* the P-family, seeded by P1(z1) = z1, describing activation cascades that
  start from a single externally entered branch, and
* the Q-family, seeded by Q2(z1, z2) = z2^2, describing cascades in which a
  second branch is entered directly from the parent vertex.

Both satisfy, for k >= their base index,

    P_{k+1} = z_{k+1}^{k+1} - sum_{l=1}^{k} C(k, l-1)   z_{k+1}^{k+1-l} P_l
    Q_{k+1} = z_{k+1}^{k+1} - sum_{l=2}^{k} C(k-1, l-2) z_{k+1}^{k+1-l} Q_l

where each lower-order polynomial keeps its own argument list z_1..z_l.
(The recursion's printed source is ambiguous about that argument list; the
z_1..z_l reading is the only one consistent with the low-order cases, and is
what this module implements.)

Polynomials are immutable and canonically ordered, so equal polynomials
compare equal term by term. Coefficients are Python integers, hence exact at
every order; a configurable cap keeps the combinatorial growth in check.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from math import comb
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError, ResourceLimitError

DEFAULT_ORDER_CAP = 16

Exponents = Tuple[int, ...]
TermMap = dict  # Exponents -> int coefficient


@dataclass(frozen=True)
class MultiPoly:
    """Sparse polynomial in variables z1..z_nvars with integer coefficients.

    ``terms`` is sorted high-variable-first by descending exponent (the order
    in which the families are conventionally printed); no zero coefficients,
    no duplicate exponent vectors. Within one family every term has the same
    total degree, so this order is also graded.
    """

    nvars: int
    terms: Tuple[Tuple[Exponents, int], ...]

    @staticmethod
    def from_map(nvars: int, terms: TermMap) -> "MultiPoly":
        clean = {e: c for e, c in terms.items() if c != 0}
        order = sorted(clean, key=lambda e: tuple(reversed(e)), reverse=True)
        return MultiPoly(nvars, tuple((e, clean[e]) for e in order))

    @property
    def total_degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def evaluate(self, z: Sequence) -> object:
        """Evaluate at a point. Accepts numbers (int/float/Fraction stay exact
        where the inputs are exact) or numpy arrays, which broadcast."""
        if len(z) != self.nvars:
            raise DimensionMismatchError(
                f"polynomial in {self.nvars} variables evaluated at {len(z)} values"
            )
        total = None
        for exps, coeff in self.terms:
            term = coeff
            for zi, e in zip(z, exps):
                if e == 1:
                    term = term * zi
                elif e > 1:
                    term = term * zi**e
            total = term if total is None else total + term
        if total is None:
            return 0 if not any(isinstance(zi, np.ndarray) for zi in z) else np.zeros(())
        return total

    def __call__(self, *z):
        return self.evaluate(z)


def eval_poly(poly: MultiPoly, z: Sequence) -> object:
    """Functional alias for :meth:`MultiPoly.evaluate`."""
    return poly.evaluate(z)


# -- construction helpers (only what the recursions need) --------------------


def _extended(poly: MultiPoly, nvars: int) -> TermMap:
    pad = nvars - poly.nvars
    return {e + (0,) * pad: c for e, c in poly.terms}


def _single_power(nvars: int, var_index: int, power: int) -> Exponents:
    e = [0] * nvars
    e[var_index] = power
    return tuple(e)


def _add_scaled_shifted(acc: TermMap, poly_terms: TermMap, scale: int, shift: Exponents) -> None:
    for e, c in poly_terms.items():
        key = tuple(a + b for a, b in zip(e, shift))
        acc[key] = acc.get(key, 0) + scale * c


_cache_lock = threading.Lock()
_p_cache: dict = {}
_q_cache: dict = {}


def build_P(k: int, order_cap: int = DEFAULT_ORDER_CAP) -> MultiPoly:
    """k-th polynomial of the P-family, P1(z1) = z1."""
    if k < 1:
        raise InvalidParameterError(f"P-family index must be >= 1, got {k}")
    if k > order_cap:
        raise ResourceLimitError(f"P_{k} exceeds the order cap {order_cap}")
    got = _p_cache.get(k)
    if got is not None:
        return got
    if k == 1:
        poly = MultiPoly.from_map(1, {(1,): 1})
    else:
        n = k  # build P_{k} from P_1..P_{k-1} via the recursion with k+1 -> n
        acc: TermMap = {_single_power(n, n - 1, n): 1}
        for l in range(1, n):
            lower = _extended(build_P(l, order_cap), n)
            shift = _single_power(n, n - 1, n - l)
            _add_scaled_shifted(acc, lower, -comb(n - 1, l - 1), shift)
        poly = MultiPoly.from_map(n, acc)
    with _cache_lock:
        _p_cache.setdefault(k, poly)
    return _p_cache[k]


def build_Q(k: int, order_cap: int = DEFAULT_ORDER_CAP) -> MultiPoly:
    """k-th polynomial of the Q-family, Q2(z1, z2) = z2^2."""
    if k < 2:
        raise InvalidParameterError(f"Q-family index must be >= 2, got {k}")
    if k > order_cap:
        raise ResourceLimitError(f"Q_{k} exceeds the order cap {order_cap}")
    got = _q_cache.get(k)
    if got is not None:
        return got
    if k == 2:
        poly = MultiPoly.from_map(2, {(0, 2): 1})
    else:
        n = k
        acc: TermMap = {_single_power(n, n - 1, n): 1}
        for l in range(2, n):
            lower = _extended(build_Q(l, order_cap), n)
            shift = _single_power(n, n - 1, n - l)
            _add_scaled_shifted(acc, lower, -comb(n - 2, l - 2), shift)
        poly = MultiPoly.from_map(n, acc)
    with _cache_lock:
        _q_cache.setdefault(k, poly)
    return _q_cache[k]


def build(family: str, k: int, order_cap: int = DEFAULT_ORDER_CAP) -> MultiPoly:
    if family == "P":
        return build_P(k, order_cap)
    if family == "Q":
        return build_Q(k, order_cap)
    raise InvalidParameterError(f"unknown polynomial family {family!r}")


def p_unit_sum(d: int) -> int:
    """sum_{k=1..d} C(d-1, k-1) P_k(1,...,1), exactly. Equals 1 for every d."""
    return sum(comb(d - 1, k - 1) * build_P(k).evaluate([1] * k) for k in range(1, d + 1))


def q_unit_sum(d: int) -> int:
    """sum_{k=2..d} C(d-2, k-2) Q_k(1,...,1), exactly. Equals 1 for every d >= 2."""
    return sum(comb(d - 2, k - 2) * build_Q(k).evaluate([1] * k) for k in range(2, d + 1))


# -- text / json round trip ---------------------------------------------------


def _format_monomial(exps: Exponents, coeff: int) -> str:
    factors = []
    if abs(coeff) != 1 or not any(exps):
        factors.append(str(abs(coeff)))
    for i, e in enumerate(exps):
        if e == 0:
            continue
        factors.append(f"z{i + 1}" if e == 1 else f"z{i + 1}^{e}")
    return "*".join(factors)


def to_text(poly: MultiPoly, name: str = "") -> str:
    """Render like ``P3 = z3^3 - z1*z3^2 - 2*z2^2*z3 + 2*z1*z2*z3``."""
    if not poly.terms:
        body = "0"
    else:
        parts = []
        for i, (exps, coeff) in enumerate(poly.terms):
            mono = _format_monomial(exps, coeff)
            if i == 0:
                parts.append(mono if coeff > 0 else f"-{mono}")
            else:
                parts.append(f"{'+' if coeff > 0 else '-'} {mono}")
        body = " ".join(parts)
    return f"{name} = {body}" if name else body


_TOKEN = re.compile(r"\s*([+-])\s*")
_FACTOR = re.compile(r"^(?:(\d+)|z(\d+)(?:\^(\d+))?)$")


def parse_text(text: str, nvars: int | None = None) -> MultiPoly:
    """Parse the :func:`to_text` format back into canonical form."""
    if "=" in text:
        text = text.split("=", 1)[1]
    text = text.strip()
    if text == "0":
        return MultiPoly.from_map(nvars or 0, {})
    pieces = _TOKEN.split(text)
    if pieces[0] == "":
        pieces = pieces[1:]
    else:
        pieces = ["+"] + pieces
    terms: list[tuple[int, dict]] = []
    max_var = 0
    for sign, mono in zip(pieces[0::2], pieces[1::2]):
        coeff = 1 if sign == "+" else -1
        powers: dict[int, int] = {}
        for factor in mono.split("*"):
            m = _FACTOR.match(factor.strip())
            if not m:
                raise InvalidParameterError(f"cannot parse polynomial factor {factor!r}")
            if m.group(1) is not None:
                coeff *= int(m.group(1))
            else:
                var = int(m.group(2)) - 1
                powers[var] = powers.get(var, 0) + int(m.group(3) or 1)
                max_var = max(max_var, var + 1)
        terms.append((coeff, powers))
    n = nvars if nvars is not None else max_var
    acc: TermMap = {}
    for coeff, powers in terms:
        e = tuple(powers.get(i, 0) for i in range(n))
        acc[e] = acc.get(e, 0) + coeff
    return MultiPoly.from_map(n, acc)


def to_json_dict(poly: MultiPoly, family: str = "", k: int | None = None) -> dict:
    out = {
        "nvars": poly.nvars,
        "terms": [{"coeff": c, "exponents": list(e)} for e, c in poly.terms],
    }
    if family:
        out["family"] = family
    if k is not None:
        out["k"] = k
    return out


def from_json_dict(data: dict) -> MultiPoly:
    acc: TermMap = {}
    for term in data["terms"]:
        e = tuple(term["exponents"])
        acc[e] = acc.get(e, 0) + int(term["coeff"])
    return MultiPoly.from_map(int(data["nvars"]), acc)
