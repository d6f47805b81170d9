"""Biased random walks on the levelled homogeneous tree, loop erasure, and
the per-frog pattern law of the non-backtracking model.

The rooted d-ary tree embeds in a homogeneous tree in which every vertex has
one parent and d children; levels extend upward past the root (the root's
parent has level -1, and so on). A transient walk started below the root is
sampled until its escape is certified, loop-erased chronologically, truncated
at its first root visit, and classified by the number k1 of initial upward
steps of the erased path. The matching closed-form law has

    P(k1 = 0)        = 1 - pstar
    P(k1 = k)        = pstar * alpha^(k-1) * (1 - alpha),   1 <= k <= depth-1
    P(root was hit)  = pstar * alpha^(depth-1)

with alpha evaluated at the non-backtracking drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, literally

from .errors import InvalidParameterError, MalformedPathError
from .params import ModelParams, alpha as up_continuation, pstar as drift_transform, rho as ascent_prob
from .rng import Stream

TERMINAL_ESCAPED = "escaped"
TERMINAL_HIT_ROOT = "hit-root"
TERMINAL_TRUNCATED = "truncated"

DEFAULT_STEP_BUDGET = 10_000_000
ESCAPE_RETURN_BOUND = 1e-9


@dataclass(frozen=True)
class TreeVertex:
    """Vertex of the levelled homogeneous tree.

    ``up`` counts generations above the walk origin's root; ``path`` lists
    child indices downward from that ancestor. The child of each above-root
    ancestor that leads back toward the root carries index 0, which makes the
    representation canonical after stripping leading zeros.
    """

    up: int
    path: tuple

    def __post_init__(self):
        up, path = self.up, tuple(self.path)
        while up > 0 and path and path[0] == 0:
            up -= 1
            path = path[1:]
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "path", path)

    @property
    def level(self) -> int:
        return len(self.path) - self.up

    @property
    def is_root(self) -> bool:
        return self.up == 0 and not self.path

    def parent(self) -> "TreeVertex":
        if self.path:
            return TreeVertex(self.up, self.path[:-1])
        return TreeVertex(self.up + 1, ())

    def child(self, c: int) -> "TreeVertex":
        return TreeVertex(self.up, self.path + (c,))

    def ancestry(self, height: int) -> tuple:
        """Child-index address of this vertex seen from its ancestor ``height``
        generations above the root-origin (prepends the canonical 0-chain)."""
        return (0,) * (height - self.up) + self.path


ROOT = TreeVertex(0, ())


def vertex_at_depth(depth: int) -> TreeVertex:
    """Canonical start vertex at a given depth below the root."""
    if depth < 0:
        raise InvalidParameterError("depth must be >= 0")
    return TreeVertex(0, (0,) * depth)


@dataclass
class WalkPath:
    vertices: list
    terminal: str
    steps_used: int = 0


def escape_margin_for(p: float, return_bound: float = ESCAPE_RETURN_BOUND) -> int:
    """Levels of certified descent after which the walk's probability of ever
    climbing back above its stopping frontier is below ``return_bound``."""
    if p <= 0:
        return 1
    r = float(ascent_prob(p))
    return max(1, math.ceil(math.log(return_bound) / math.log(r)))


def sample_biased_walk(
    params: ModelParams,
    start: TreeVertex,
    escape_margin: int | None = None,
    stream: Stream | None = None,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> WalkPath:
    """Walk on the homogeneous tree (up with probability p, else to a uniform
    child) until its escape downward is certified.

    The walk stops once its level is at least ``escape_margin`` below both the
    highest level it ever reached and its start level; the remaining
    probability that the infinite continuation would alter the loop-erased
    pattern is at most rho**margin per path.
    """
    p = float(params.p)
    if not p < 0.5:
        raise InvalidParameterError("walk sampling requires p < 1/2 (transience)")
    if escape_margin is None:
        escape_margin = escape_margin_for(p)
    if escape_margin < 1:
        raise InvalidParameterError("escape_margin must be >= 1")
    if stream is None:
        stream = Stream.seeded(0)
    d = params.d
    v = start
    vertices = [v]
    min_level = v.level
    start_level = v.level
    for steps in range(1, step_budget + 1):
        u = stream.unit()
        if u < p:
            v = v.parent()
        else:
            t = (u - p) / (1 - p)
            c = int(t * d)
            if c >= d:
                c = d - 1
            v = v.child(c)
        vertices.append(v)
        if v.level < min_level:
            min_level = v.level
        if v.level >= min_level + escape_margin and v.level > start_level + escape_margin:
            return WalkPath(vertices, TERMINAL_ESCAPED, steps)
    return WalkPath(vertices, TERMINAL_TRUNCATED, step_budget)


def loop_erase(path: WalkPath) -> WalkPath:
    """Chronological loop erasure followed by truncation at the first root
    visit. On a tree the result is the geodesic from the start to the walk's
    final vertex, trimmed at the root."""
    if path.terminal != TERMINAL_ESCAPED:
        raise MalformedPathError("loop erasure requires an escape-certified path")
    erased: list = []
    position: dict = {}
    for v in path.vertices:
        if v in position:
            cut = position[v] + 1
            for dropped in erased[cut:]:
                del position[dropped]
            del erased[cut:]
        else:
            position[v] = len(erased)
            erased.append(v)
    for i, v in enumerate(erased):
        if v.is_root:
            erased = erased[: i + 1]
            terminal = TERMINAL_HIT_ROOT
            break
    else:
        terminal = TERMINAL_ESCAPED
    return WalkPath(erased, terminal, path.steps_used)


def geodesic(a: TreeVertex, b: TreeVertex) -> list:
    """Unique self-avoiding path between two vertices; independent oracle for
    loop erasure on a tree."""
    height = max(a.up, b.up)
    addr_a = a.ancestry(height)
    addr_b = b.ancestry(height)
    common = 0
    for x, y in zip(addr_a, addr_b):
        if x != y:
            break
        common += 1
    out = [a]
    v = a
    for _ in range(len(addr_a) - common):
        v = v.parent()
        out.append(v)
    for c in addr_b[common:]:
        v = v.child(c)
        out.append(v)
    return out


def pattern_of(path: WalkPath, start_depth: int) -> int:
    """Number of initial upward steps of a loop-erased path, with the value
    ``start_depth`` standing for 'reached the root'."""
    if not path.vertices:
        raise MalformedPathError("empty path")
    if path.terminal == TERMINAL_HIT_ROOT:
        return start_depth
    k1 = 0
    prev = path.vertices[0]
    for v in path.vertices[1:]:
        if v.level < prev.level:
            k1 += 1
            prev = v
        else:
            break
    if k1 >= start_depth:
        return start_depth
    return k1


@dataclass(frozen=True)
class PatternLaw:
    """Distribution of the loop-erased pattern for a start at ``start_depth``:
    probs[k] = P(k1 = k) for k < start_depth, probs[start_depth] = P(root hit).
    """

    d: int
    pstar: float
    start_depth: int
    probs: np.ndarray

    def __post_init__(self):
        total = float(np.sum(self.probs))
        if abs(total - 1.0) > 1e-12:
            raise InvalidParameterError(f"pattern pmf sums to {total}, not 1")


def nbfm_pattern_pmf(d: int, pstar_value: float, start_depth: int) -> PatternLaw:
    """Closed-form pattern law of the non-backtracking model at drift
    ``pstar_value``."""
    if start_depth < 1:
        raise InvalidParameterError("start_depth must be >= 1")
    if not 0 <= pstar_value <= 1:
        raise InvalidParameterError(f"pstar must lie in [0, 1], got {pstar_value!r}")
    a = float(up_continuation(d, pstar_value, force=True))
    ps = float(pstar_value)
    probs = np.zeros(start_depth + 1)
    probs[0] = 1 - ps
    for k in range(1, start_depth):
        probs[k] = ps * a ** (k - 1) * (1 - a)
    probs[start_depth] = ps * a ** (start_depth - 1)
    return PatternLaw(d, ps, start_depth, probs)


def verify_series_identities(d: int, p, k1_max: int = 6, tail_tol: float = 1e-12) -> dict:
    """Sum the three escape-pattern series of the loop-erasure argument until
    their tails drop below ``tail_tol`` and compare with the closed forms at
    the transformed drift. Returns per-case discrepancies."""
    p = float(p)
    if not p < 0.5:
        raise InvalidParameterError("series identities need p < 1/2")
    r = float(ascent_prob(p))
    ps = float(drift_transform(d, p))
    a = float(up_continuation(d, ps, force=True)) if ps > 0 else 0.0

    # case (a): sum_l rho^l (1-rho) d^-l  ==  1 - pstar
    total = 0.0
    l = 0
    while True:
        term = r**l * (1 - r) * d**-l
        total += term
        tail = (r / d) ** (l + 1) * (1 - r) / (1 - r / d) if r > 0 else 0.0
        if tail < tail_tol:
            break
        l += 1
    disc_a = abs(total - (1 - ps))

    # case (b): sum_l rho^{k1+l} (1-rho) d^-l (d-1)/d  ==  pstar alpha^{k1-1}(1-alpha)
    disc_b = 0.0
    for k1 in range(1, k1_max + 1):
        total = 0.0
        l = 0
        while True:
            term = r ** (k1 + l) * (1 - r) * d**-l * (d - 1) / d
            total += term
            tail = r**k1 * (r / d) ** (l + 1) * (1 - r) / (1 - r / d) if r > 0 else 0.0
            if tail < tail_tol:
                break
            l += 1
        closed = ps * a ** (k1 - 1) * (1 - a) if ps > 0 else 0.0
        disc_b = max(disc_b, abs(total - closed))

    # case (c): sum_l rho^{|v|+l} (1-rho) sum_{m<=l} d^-m (d-1)/d == pstar alpha^{|v|-1}
    disc_c = 0.0
    for depth in range(1, k1_max + 1):
        total = 0.0
        l = 0
        while True:
            inner = sum(d**-m * (d - 1) / d for m in range(l + 1))
            total += r ** (depth + l) * (1 - r) * inner
            tail = r ** (depth + l + 1)  # inner sums are < 1
            if tail < tail_tol:
                break
            l += 1
        closed = ps * a ** (depth - 1) if ps > 0 else 0.0
        disc_c = max(disc_c, abs(total - closed))

    worst = max(disc_a, disc_b, disc_c)
    return {
        "d": d,
        "p": p,
        "pstar": ps,
        "case_a_discrepancy": disc_a,
        "case_b_discrepancy": disc_b,
        "case_c_discrepancy": disc_c,
        "max_discrepancy": worst,
        "tail_tol": tail_tol,
        "k1_max": k1_max,
    }


# -- bulk pattern sampling (fused walk + loop erasure) ------------------------
#
# The walk's loop erasure reduces to stack operations: on a tree, a revisit
# can only be an immediate backtrack of the current erased path, so each step
# either extends the stack or pops it. Steps are encoded as ints: 0..d-1 for
# a downward move into that child, d + c for an upward move that left a
# vertex which was child c of its parent. The canonical all-zeros start makes
# every fresh up-step leave a child-0 vertex.

from .engine import stream_state, unit_next  # numba helpers shared with the frog engines


@njit(cache=True, error_model="numpy")
def _pattern_kernel(d, p, start_depth, reps, master, margin, step_budget, out_pattern, out_steps):
    literally(d)
    stack = np.empty(step_budget + 4, dtype=np.int32)
    for rep in range(reps):
        st = stream_state(master, rep)
        top = 0
        ups = 0
        level = start_depth
        min_level = start_depth
        steps = 0
        pattern = -1
        while steps < step_budget:
            st, u = unit_next(st)
            steps += 1
            if u < p:
                # upward move
                if top > 0 and stack[top - 1] < d:
                    top -= 1  # backtrack of a down-step
                else:
                    came_from = 0 if top == 0 else 0  # canonical 0-chain start
                    stack[top] = d + came_from
                    top += 1
                    ups += 1
                level -= 1
                if level < min_level:
                    min_level = level
            else:
                t = (u - p) / (1 - p)
                c = int(t * d)
                if c >= d:
                    c = d - 1
                if top > 0 and stack[top - 1] >= d and (stack[top - 1] - d) == c:
                    top -= 1  # descending back into the vertex we came up from
                    ups -= 1
                else:
                    stack[top] = c
                    top += 1
                level += 1
            if level >= min_level + margin and level > start_depth + margin:
                pattern = ups if ups < start_depth else start_depth
                break
        out_pattern[rep] = pattern
        out_steps[rep] = steps
    return 0


def sample_patterns(
    d: int,
    p,
    start_depth: int,
    reps: int,
    seed: int = 0,
    escape_margin: int | None = None,
    step_budget: int = 1_000_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``reps`` loop-erased walk patterns (values 0..start_depth, with
    start_depth meaning the root was hit; -1 flags a truncated walk).

    Equivalent in law to sample_biased_walk + loop_erase + pattern_of from the
    canonical start vertex; the tests pin draw-for-draw agreement.
    """
    p = float(p)
    if not p < 0.5:
        raise InvalidParameterError("pattern sampling requires p < 1/2")
    if start_depth < 1:
        raise InvalidParameterError("start_depth must be >= 1")
    if not 0 <= seed < 2**63:
        raise InvalidParameterError("seed must fit a non-negative 63-bit integer")
    if escape_margin is None:
        escape_margin = escape_margin_for(p)
    patterns = np.empty(reps, dtype=np.int64)
    steps = np.empty(reps, dtype=np.int64)
    _pattern_kernel(d, p, start_depth, reps, seed, escape_margin, step_budget, patterns, steps)
    return patterns, steps
