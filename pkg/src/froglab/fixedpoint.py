"""The nonlinear operator whose fixed point is the root-visit generating
function of the self-similar frog model, together with its iteration, the
d = 2 closed form, and an exact evaluator on dyadic rationals.

For parameters (d, p) the operator maps a nondecreasing h: [0,1) -> [0,1] to

    (px + (1-p)/d) * sum_{k=1..d} C(d-1, k-1) P_k(z_1, ..., z_k)
    + (d-1)(1-p)/d * sum_{k=2..d} C(d-2, k-2) Q_k(z_1, ..., z_k)

with z_k = h(c^{(k-1)}(x)) and the affine maps c from :mod:`froglab.params`.
Applying it to h == 1 gives px + 1 - p; h == 0 is a fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .errors import InvalidParameterError, ResourceLimitError
from .gridfn import DEFAULT_GRID_SIZE, GridFunction
from .params import ModelParams, critical_drift
from .polynomials import build_P, build_Q

DYADIC_COST_CAP = 26


def _as_query_array(x):
    q = np.asarray(x, dtype=float)
    if np.any(q < 0) or np.any(q >= 1):
        raise InvalidParameterError("operator arguments must lie in [0, 1)")
    return q


class VisitOperator:
    """Application and iteration of the visit-generating-function operator."""

    def __init__(self, params: ModelParams):
        self.params = params.as_floats()
        d = self.params.d
        p = self.params.p
        self._maps = [self.params.c_map(k) for k in range(d)]
        self._p_polys = [build_P(k) for k in range(1, d + 1)]
        self._q_polys = [build_Q(k) for k in range(2, d + 1)]
        self._p_weights = [comb(d - 1, k - 1) for k in range(1, d + 1)]
        self._q_weights = [comb(d - 2, k - 2) for k in range(2, d + 1)]
        self._lead = lambda x: p * x + (1 - p) / d
        self._q_factor = (d - 1) * (1 - p) / d

    def argument_points(self, x):
        """The d composition arguments c^{(0)}(x), ..., c^{(d-1)}(x)."""
        q = _as_query_array(x)
        return np.stack([m.slope * q + m.intercept for m in self._maps])

    def apply(self, h, x):
        """Evaluate the operator applied to h at x (scalar or array).

        ``h`` is a GridFunction or any callable accepting arrays.
        """
        q = _as_query_array(x)
        scalar = q.ndim == 0
        q = np.atleast_1d(q)
        z = [h(arg) for arg in self.argument_points(q)]
        p_sum = sum(
            w * poly.evaluate(z[: poly.nvars])
            for w, poly in zip(self._p_weights, self._p_polys)
        )
        q_sum = sum(
            w * poly.evaluate(z[: poly.nvars])
            for w, poly in zip(self._q_weights, self._q_polys)
        )
        out = self._lead(q) * p_sum + self._q_factor * q_sum
        return float(out[0]) if scalar else out

    def partial_sums(self, h, x):
        """The two polynomial mixtures entering the operator, evaluated at the
        composition arguments of h. Used by the domination checks."""
        q = np.atleast_1d(_as_query_array(x))
        z = [h(arg) for arg in self.argument_points(q)]
        p_sum = sum(
            w * poly.evaluate(z[: poly.nvars])
            for w, poly in zip(self._p_weights, self._p_polys)
        )
        q_sum = sum(
            w * poly.evaluate(z[: poly.nvars])
            for w, poly in zip(self._q_weights, self._q_polys)
        )
        return np.asarray(p_sum, dtype=float), np.asarray(q_sum, dtype=float), z

    def apply_to_grid(self, h: GridFunction) -> tuple[GridFunction, float]:
        """One Jacobi-style application on h's own grid (all outputs computed
        from the frozen input), clamped and monotonized.

        Returns (new function, largest monotonization repair).
        """
        raw = self.apply(h, h.grid)
        out = GridFunction(np.clip(raw, 0.0, 1.0))
        return out.monotonized()

    def iterate(self, h0: GridFunction, n: int) -> "IterateTrace":
        if n < 1:
            raise InvalidParameterError(f"iteration count must be >= 1, got {n}")
        funcs = [h0]
        sups = [h0.sup()]
        repairs = [0.0]
        interp_bounds = [0.0]
        h = h0
        for _ in range(n):
            h, repair = self.apply_to_grid(h)
            funcs.append(h)
            sups.append(h.sup())
            repairs.append(repair)
            interp_bounds.append(h.interp_error_estimate())
        return IterateTrace(
            n=n,
            functions=funcs,
            sup_values=np.asarray(sups),
            repairs=np.asarray(repairs),
            interp_bounds=np.asarray(interp_bounds),
        )


@dataclass
class IterateTrace:
    """Snapshots of operator iteration; index 0 is the starting function."""

    n: int
    functions: list
    sup_values: np.ndarray
    repairs: np.ndarray = field(default=None)
    interp_bounds: np.ndarray = field(default=None)

    def cumulative_interp_bound(self, upto: int | None = None) -> float:
        """Accumulated interpolation-error budget after ``upto`` applications
        (the operator is at worst mildly expansive on these inputs, so the
        per-application curvature bounds are summed)."""
        upto = self.n if upto is None else upto
        return float(np.sum(self.interp_bounds[: upto + 1]))


def apply_binary_closed(h, x):
    """Closed form of the operator at d = 2, p = 1/3:

        ((x+2)/3) h((x+1)/2)^2 + ((x+1)/3) h(x/2) (1 - h((x+1)/2)).
    """
    q = _as_query_array(x)
    scalar = q.ndim == 0
    q = np.atleast_1d(q)
    hi = h((q + 1) / 2)
    lo = h(q / 2)
    out = (q + 2) / 3 * hi**2 + (q + 1) / 3 * lo * (1 - hi)
    return float(out[0]) if scalar else out


def exact_dyadic_iterate(n: int, x, cost_cap: int = DYADIC_COST_CAP) -> float:
    """Value at a dyadic rational of the n-th iterate of the d=2, p=1/3
    operator started from h == 1, computed by exact recursive expansion
    through x/2 and (x+1)/2 (floating round-off only, no interpolation).

    ``x`` may be a Fraction or an (numerator, 2**m denominator) pair.
    """
    if n < 0:
        raise InvalidParameterError("iteration count must be >= 0")
    if isinstance(x, tuple):
        num, den = x
    else:
        frac = Fraction(x)
        num, den = frac.numerator, frac.denominator
    if den <= 0 or den & (den - 1):
        raise InvalidParameterError(f"{x!r} is not a dyadic rational in [0, 1)")
    m = den.bit_length() - 1
    if not 0 <= num < den:
        raise InvalidParameterError(f"dyadic argument {x!r} outside [0, 1)")
    if n + m > cost_cap:
        raise ResourceLimitError(
            f"exact dyadic evaluation needs n + log2(denominator) <= {cost_cap}, got {n + m}"
        )

    memo: dict = {}

    def value(level: int, nm: int, mm: int) -> float:
        while mm > 0 and nm % 2 == 0:
            nm //= 2
            mm -= 1
        key = (level, nm, mm)
        got = memo.get(key)
        if got is not None:
            return got
        if level == 0:
            memo[key] = 1.0
            return 1.0
        xx = nm / (1 << mm)
        hi = value(level - 1, nm + (1 << mm), mm + 1)
        lo = value(level - 1, nm, mm + 1)
        out = (xx + 2) / 3 * hi * hi + (xx + 1) / 3 * lo * (1 - hi)
        memo[key] = out
        return out

    return value(n, num, m)


def check_vanishing(
    n_max: int = 500,
    tol: float = 0.05,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> dict:
    """Iterate the d=2, p=1/3 operator from h == 1 and report the first n at
    which the grid supremum drops below ``tol``, asserting pointwise monotone
    decrease along the way (valid since the first iterate is <= 1 and the
    operator is monotone).

    Note the decay is pointwise, not uniform: the true iterates stay close to
    1 near the right endpoint, where the grid dynamics under-approximate them
    through the clamped-linear edge extension. The reported supremum is the
    supremum of the grid iterate, and ``edge_note`` records the caveat.
    """
    op = VisitOperator(ModelParams(2, Fraction(1, 3)))
    h = GridFunction.constant(1.0, grid_size)
    first_n = None
    worst_violation = 0.0
    interp_budget = 0.0
    sups = [h.sup()]
    n_reached = 0
    for n in range(1, n_max + 1):
        new, _ = op.apply_to_grid(h)
        interp_budget += new.interp_error_estimate()
        violation = float(np.max(new.values - h.values, initial=0.0))
        worst_violation = max(worst_violation, violation)
        h = new
        sups.append(h.sup())
        n_reached = n
        if first_n is None and h.sup() <= tol:
            first_n = n
            break
    mono_tol = interp_budget + 1e-12
    return {
        "tol": tol,
        "grid_size": grid_size,
        "n_max": n_max,
        "first_n": first_n,
        "attained": first_n is not None,
        "sup_at_stop": sups[-1],
        "n_reached": n_reached,
        "max_monotone_violation": worst_violation,
        "monotone_tolerance": mono_tol,
        "monotone_ok": worst_violation <= mono_tol,
        "sup_values": sups,
        "edge_note": (
            "decay of the true iterates is pointwise, not uniform; values at "
            "arguments near 1 remain near 1 and the grid sup reflects the "
            "discretized dynamics"
        ),
    }


def check_operator_domination(
    d: int,
    g_hat: GridFunction,
    xs=None,
) -> dict:
    """Compare the degree-d operator at drift (d-1)/(2d-1) against the d=2
    closed form on the same input, and check the two intermediate polynomial
    mixture bounds at the composition arguments:

        P-mixture <= z_1 + z_d^2 - z_d z_1      Q-mixture <= z_d^2

    Violations are reported with magnitudes; nothing is asserted here.
    """
    if xs is None:
        xs = g_hat.grid
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    op = VisitOperator(ModelParams(d, critical_drift(d)))
    lhs = np.asarray(op.apply(g_hat, xs), dtype=float)
    rhs = np.asarray(apply_binary_closed(g_hat, xs), dtype=float)
    p_sum, q_sum, z = op.partial_sums(g_hat, xs)
    z1 = np.asarray(z[0], dtype=float)
    zd = np.asarray(z[-1], dtype=float)
    p_bound = z1 + zd**2 - zd * z1
    q_bound = zd**2
    return {
        "d": d,
        "p": float(critical_drift(d)),
        "max_violation": float(np.max(lhs - rhs, initial=0.0)),
        "max_p_mixture_violation": float(np.max(p_sum - p_bound, initial=0.0)),
        "max_q_mixture_violation": float(np.max(q_sum - q_bound, initial=0.0)),
        "n_points": int(xs.size),
    }
