from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from froglab.errors import InvalidParameterError, MalformedPathError
from froglab.params import ModelParams, pstar
from froglab.rng import Stream
from froglab.walks import (
    ROOT,
    TERMINAL_ESCAPED,
    TERMINAL_HIT_ROOT,
    TreeVertex,
    WalkPath,
    escape_margin_for,
    geodesic,
    loop_erase,
    nbfm_pattern_pmf,
    pattern_of,
    sample_biased_walk,
    sample_patterns,
    verify_series_identities,
    vertex_at_depth,
)


def test_vertex_canonicalization_and_moves():
    v = TreeVertex(2, (0, 0, 1, 2))
    assert v.up == 0 and v.path == (1, 2)
    w = vertex_at_depth(3)
    assert w.level == 3
    assert w.parent().parent().parent() == ROOT
    assert ROOT.parent().level == -1
    assert ROOT.parent().child(0) == ROOT
    assert ROOT.parent().child(1) != ROOT
    assert w.child(2).path == (0, 0, 0, 2)


def test_geodesic_endpoints_and_length():
    a = TreeVertex(0, (1, 2, 0))
    b = TreeVertex(1, (2,))
    path = geodesic(a, b)
    assert path[0] == a and path[-1] == b
    for u, w in zip(path, path[1:]):
        assert u.parent() == w or w.parent() == u
    assert len(set(path)) == len(path)


def test_walk_p_zero_is_straight_ray():
    par = ModelParams(3, Fraction(0))
    w = sample_biased_walk(par, vertex_at_depth(2), escape_margin=3, stream=Stream.seeded(1))
    levels = [v.level for v in w.vertices]
    assert levels == list(range(2, levels[-1] + 1))
    le = loop_erase(w)
    assert le.vertices == w.vertices
    assert pattern_of(le, 2) == 0


def test_walk_first_step_frequency():
    par = ModelParams(2, Fraction(1, 3))
    ups = 0
    n = 4000
    for rep in range(n):
        w = sample_biased_walk(par, vertex_at_depth(4), stream=Stream.seeded(5, rep))
        ups += w.vertices[1].level < 4
    se = (1 / 3 * 2 / 3 / n) ** 0.5
    assert abs(ups / n - 1 / 3) < 4 * se


def test_walk_reaches_level_above_with_prob_rho():
    # probability the walk ever climbs one level above its start is p/(1-p)
    par = ModelParams(3, Fraction(1, 3))
    hits = 0
    n = 4000
    for rep in range(n):
        w = sample_biased_walk(par, vertex_at_depth(6), stream=Stream.seeded(9, rep))
        hits += any(v.level < 6 for v in w.vertices)
    se = (0.5 * 0.5 / n) ** 0.5
    assert abs(hits / n - 0.5) < 4 * se


def test_loop_erase_examples():
    v = vertex_at_depth(3)
    up = v.parent()
    down = v.child(1)
    path = WalkPath([v, up, v, down], TERMINAL_ESCAPED)
    le = loop_erase(path)
    assert le.vertices == [v, down]
    no_revisit = WalkPath([v, down, down.child(0)], TERMINAL_ESCAPED)
    assert loop_erase(no_revisit).vertices == no_revisit.vertices
    with pytest.raises(MalformedPathError):
        loop_erase(WalkPath([v], "truncated"))


def test_loop_erase_equals_trimmed_geodesic():
    par = ModelParams(3, Fraction(1, 3))
    start = vertex_at_depth(4)
    for rep in range(800):
        w = sample_biased_walk(par, start, stream=Stream.seeded(123, rep))
        le = loop_erase(w)
        geo = geodesic(start, w.vertices[-1])
        for i, v in enumerate(geo):
            if v.is_root:
                geo = geo[: i + 1]
                break
        assert le.vertices == geo
        assert len(set(le.vertices)) == len(le.vertices)
        assert le.vertices[0] == start


def test_pattern_of_constructed_paths():
    v = vertex_at_depth(3)
    down_path = WalkPath([v, v.child(0), v.child(0).child(1)], TERMINAL_ESCAPED)
    assert pattern_of(down_path, 3) == 0
    to_root = WalkPath([v, v.parent(), v.parent().parent(), ROOT], TERMINAL_HIT_ROOT)
    assert pattern_of(to_root, 3) == 3
    v5 = vertex_at_depth(5)
    up2 = WalkPath(
        [v5, v5.parent(), v5.parent().parent(), v5.parent().parent().child(2)],
        TERMINAL_ESCAPED,
    )
    assert pattern_of(up2, 5) == 2


def test_pattern_pmf_examples():
    law = nbfm_pattern_pmf(3, 0.4, 1)
    assert np.allclose(law.probs, [0.6, 0.4])
    law0 = nbfm_pattern_pmf(4, 0.0, 5)
    assert law0.probs[0] == 1.0 and np.all(law0.probs[1:] == 0)


@given(
    d=st.integers(2, 10),
    ps=st.floats(0.0, 1.0, allow_nan=False),
    depth=st.integers(1, 12),
)
def test_pattern_pmf_sums_to_one(d, ps, depth):
    law = nbfm_pattern_pmf(d, ps, depth)
    assert abs(law.probs.sum() - 1.0) < 1e-12
    assert np.all(law.probs >= 0)


def test_series_identities_sweep():
    for d in (2, 3, 5, 10):
        for p in (0.05, 0.1, 1 / 3, 0.45):
            rep = verify_series_identities(d, p, k1_max=6, tail_tol=1e-12)
            assert rep["max_discrepancy"] < 1e-10
    collapsed = verify_series_identities(4, 0.0)
    assert collapsed["max_discrepancy"] < 1e-15


def test_escape_margin_values():
    assert escape_margin_for(0.0) == 1
    assert escape_margin_for(1 / 3) == 30
    assert escape_margin_for(0.45) == 104


def test_fused_sampler_matches_path_pipeline():
    for d, p, depth in ((2, 1 / 3, 4), (3, 0.25, 3), (4, 0.1, 5)):
        par = ModelParams(d, p)
        pats, steps = sample_patterns(d, p, depth, 200, seed=77)
        start = vertex_at_depth(depth)
        for rep in range(200):
            w = sample_biased_walk(par, start, stream=Stream.seeded(77, rep))
            assert pattern_of(loop_erase(w), depth) == pats[rep]
            assert w.steps_used == steps[rep]


def test_sampled_patterns_stay_in_law_support():
    pats, _ = sample_patterns(3, 1 / 3, 4, 5000, seed=3)
    law = nbfm_pattern_pmf(3, float(pstar(3, Fraction(1, 3))), 4)
    assert set(np.unique(pats)) <= set(range(law.start_depth + 1))


@settings(max_examples=50, deadline=None)
@given(moves=st.lists(st.integers(0, 3), min_size=1, max_size=60), seed=st.integers(0, 10))
def test_loop_erase_self_avoiding_on_arbitrary_walks(moves, seed):
    # drive a deterministic walk on the 3-ary tree from depth 4; move code 3
    # means 'up', otherwise descend into that child
    v = vertex_at_depth(4)
    vertices = [v]
    for m in moves:
        v = v.parent() if m == 3 else v.child(m)
        vertices.append(v)
    path = WalkPath(vertices, TERMINAL_ESCAPED)
    le = loop_erase(path)
    assert len(set(le.vertices)) == len(le.vertices)
    assert le.vertices[0] == vertices[0]
    if not any(u.is_root for u in le.vertices):
        assert le.vertices == geodesic(vertices[0], vertices[-1])


def test_sampler_validation():
    with pytest.raises(InvalidParameterError):
        sample_patterns(3, 0.5, 4, 10)
    with pytest.raises(InvalidParameterError):
        sample_patterns(3, 0.2, 0, 10)
