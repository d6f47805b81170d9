import warnings
from fractions import Fraction

import numpy as np
import pytest

from froglab import engine
from froglab.errors import InvalidParameterError
from froglab.frogsim import (
    SimConfig,
    estimate_pgf,
    pgf_point,
    run_batch,
    simulate_fm,
    simulate_nbfm,
    simulate_rsfm,
    simulate_sfm,
)
from froglab.params import ModelParams
from froglab.stats import hoeffding_halfwidth


def cfg(d=3, p=0.2, model="sfm", depth=6, reps=500, seed=0, **kw):
    return SimConfig(ModelParams(d, p), model, depth=depth, reps=reps, seed=seed, **kw)


def test_determinism():
    a = run_batch(cfg(seed=5))
    b = run_batch(cfg(seed=5))
    assert np.array_equal(a.root_visits, b.root_visits)
    assert np.array_equal(a.flow_mask, b.flow_mask)
    r1 = simulate_sfm(cfg(seed=5), 17)
    r2 = simulate_sfm(cfg(seed=5), 17)
    assert r1 == r2


def test_nbfm_depth_one_law():
    # only the first branching vertex exists below the root; its frog reaches
    # the root with probability p
    c = cfg(d=2, p=Fraction(1, 3), model="nbfm", depth=1, reps=120_000, seed=11)
    b = run_batch(c)
    assert set(np.unique(b.root_visits)) <= {0, 1}
    se = (1 / 3 * 2 / 3 / c.reps) ** 0.5
    assert abs(b.root_visits.mean() - 1 / 3) < 4 * se


def test_p_zero_cases():
    for model in ("fm", "nbfm", "sfm"):
        b = run_batch(cfg(p=Fraction(0), model=model, reps=300, seed=2))
        assert b.root_visits.max() == 0
    b = run_batch(cfg(p=Fraction(0), model="sfm", reps=300, seed=3))
    expected = (np.int64(1) << b.first_child) | np.where(
        b.fprime_move >= 0, np.int64(1) << np.maximum(b.fprime_move, 0), 0
    )
    assert np.array_equal(b.activated_mask, expected)
    r = run_batch(cfg(p=Fraction(0), model="rsfm", reps=300, seed=4))
    assert np.all(r.activated_mask == (1 << 3) - 1)  # stage two fills in the rest
    assert r.root_visits.max() == 0


def test_record_fields_and_invariants():
    c = cfg(reps=200, seed=9)
    b = run_batch(c)
    for rec in b:
        assert rec.decomposition_holds()
        assert rec.first_child in rec.activated
        for i, flows in enumerate(rec.flow_sets):
            if flows:
                assert i in rec.activated
        assert rec.root_visits == int(rec.fprime_to_root) + sum(rec.sub_to_root)
    rec = b.record(0)
    assert rec.b_event(0, set()) is True
    with pytest.raises(InvalidParameterError):
        rec.b_event(1, {1})


def test_rsfm_stage_flags():
    c = cfg(d=3, p=0.3, model="rsfm", depth=6, reps=500, seed=6)
    b = run_batch(c)
    assert np.all(b.activated_mask == 7)
    # stage one's activation is a subset of the final activation, and whenever
    # stage one saw everything the stage count equals the degree
    assert np.all((b.stage1_mask & ~b.activated_mask) == 0)
    full = b.stage1_mask == 7
    recs = [b.record(i) for i in np.nonzero(full)[0][:10]]
    assert all(len(r.stage1_activated) == 3 for r in recs)


def test_truncation_monotone_coupling_nbfm_pathwise():
    # same seed at two depths: the vertex-keyed randomness couples replicates,
    # and without killing the visit count is pathwise nondecreasing in depth
    base = cfg(d=3, p=0.35, model="nbfm", depth=6, reps=3000, seed=21)
    deep = base.with_depth(8)
    vb = run_batch(base).root_visits
    vd = run_batch(deep).root_visits
    assert np.all(vb <= vd)


def test_truncation_monotone_sfm_estimates_within_ci():
    xs = [0.0, 0.5]
    shallow = cfg(d=3, p=0.35, model="sfm", depth=6, reps=20_000, seed=22)
    deeper = shallow.with_depth(8)
    es = estimate_pgf(shallow, xs)
    ed = estimate_pgf(deeper, xs)
    for a, b in zip(es, ed):
        assert b.mean <= a.mean + a.halfwidth + b.halfwidth


def test_estimate_pgf_conventions():
    c = cfg(d=2, p=0.25, depth=6, reps=5000, seed=30)
    b = run_batch(c)
    est0 = estimate_pgf(c, [0.0], batch=b)[0]
    assert est0.mean == (b.root_visits == 0).mean()
    c0 = cfg(d=2, p=Fraction(0), depth=6, reps=1000, seed=31)
    est = estimate_pgf(c0, [0.0, 0.5, 0.9])
    assert all(e.mean == 1.0 for e in est)
    assert abs(hoeffding_halfwidth(100_000, 1e-3) - 0.0062) < 2e-4


def test_fm_solo_return_probability_birth_death_oracle():
    # single walker from depth 1 with the exact floor collapse; compare the
    # chance of ever reaching the root against the absorbing-chain solve
    d, p, depth = 3, 0.3, 8
    c = SimConfig(ModelParams(d, p), "fm", depth=depth, reps=40_000, seed=33, solo=True)
    b = run_batch(c)
    got = (b.root_visits >= 1).mean()

    rho = p / (1 - p)
    up_floor = p / (p + (1 - p) * (1 - rho))
    n = depth  # states 1..depth; absorbing success at 0, failure below floor
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    for k in range(1, depth):
        i = k - 1
        A[i, i] = 1.0
        if k == 1:
            rhs[i] += p
        else:
            A[i, i - 1] -= p
        A[i, i + 1] -= 1 - p
    i = depth - 1
    A[i, i] = 1.0
    if depth == 1:
        rhs[i] += up_floor
    else:
        A[i, i - 1] -= up_floor
    want = np.linalg.solve(A, rhs)[0]
    se = (want * (1 - want) / c.reps) ** 0.5
    assert abs(got - want) < 4 * se


def test_fm_horizon_flagging():
    c = SimConfig(ModelParams(2, 0.45), "fm", depth=4, reps=50, seed=1, step_horizon=3)
    b = run_batch(c)
    assert b.horizon_exhausted.sum() > 0


def test_python_mirror_matches_jitted_engine():
    # the kernels are plain nopython numba; their .py_func runs the same
    # arithmetic in the interpreter (helper calls still dispatch through jit)
    d, depth, reps = 3, 4, 40
    p = 0.3
    par = ModelParams(d, p)
    nvert = engine.tree_size(d, depth)

    def alloc():
        return dict(
            entered=np.zeros(nvert, dtype=np.int32),
            stack=np.empty(nvert + 8, dtype=np.int32),
            stack_depth=np.empty(nvert + 8, dtype=np.int8),
            root=np.zeros(reps, dtype=np.int64),
            s2r=np.zeros((reps, d), dtype=np.int64),
            s2v=np.zeros((reps, d), dtype=np.int64),
            flow=np.zeros((reps, d), dtype=np.int64),
            act=np.zeros(reps, dtype=np.int64),
            first=np.full(reps, -1, dtype=np.int64),
            fpm=np.full(reps, -2, dtype=np.int64),
            stage1=np.zeros(reps, dtype=np.int64),
            viol=np.zeros(reps, dtype=np.int64),
        )

    for kill, stage2 in ((False, False), (True, False), (True, True)):
        jit_arrays = alloc()
        engine.descend_batch(
            d, depth, p, float(par.alpha), reps, 77, kill, stage2,
            *jit_arrays.values(),
        )
        py_arrays = alloc()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            engine.descend_batch.py_func(
                d, depth, p, float(par.alpha), reps, 77, kill, stage2,
                *py_arrays.values(),
            )
        for key in jit_arrays:
            assert np.array_equal(jit_arrays[key], py_arrays[key]), (kill, stage2, key)


def test_python_mirror_matches_jitted_fm():
    d, depth, reps = 2, 3, 30
    p = 0.3
    rho = p / (1 - p)
    upf = p / (p + (1 - p) * (1 - rho))
    nvert = engine.tree_size(d, depth)

    def alloc():
        return dict(
            visited=np.zeros((nvert + 63) // 64, dtype=np.uint64),
            stack=np.empty(nvert + 8, dtype=np.int32),
            stack_depth=np.empty(nvert + 8, dtype=np.int8),
            root=np.zeros(reps, dtype=np.int64),
            exhausted=np.zeros(reps, dtype=np.int64),
            woken=np.zeros(reps, dtype=np.int64),
            first=np.full(reps, -1, dtype=np.int64),
        )

    jit_arrays = alloc()
    engine.fm_batch(d, depth, p, upf, reps, 5, 10_000, False, *jit_arrays.values())
    py_arrays = alloc()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        engine.fm_batch.py_func(d, depth, p, upf, reps, 5, 10_000, False, *py_arrays.values())
    for key in jit_arrays:
        assert np.array_equal(jit_arrays[key], py_arrays[key]), key


def test_single_replicate_wrappers_dispatch():
    assert simulate_sfm(cfg(model="sfm", reps=3, seed=1), 2).model == "sfm"
    assert simulate_nbfm(cfg(model="nbfm", reps=3, seed=1), 0).model == "nbfm"
    assert simulate_rsfm(cfg(model="rsfm", reps=3, seed=1), 1).model == "rsfm"
    assert simulate_fm(cfg(model="fm", reps=3, seed=1), 0).model == "fm"
    with pytest.raises(InvalidParameterError):
        simulate_sfm(cfg(model="nbfm", reps=3), 0)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        cfg(model="sfm", depth=1)
    with pytest.raises(InvalidParameterError):
        cfg(model="bogus")
    with pytest.raises(InvalidParameterError):
        cfg(p=0.5)
    with pytest.raises(InvalidParameterError):
        cfg(reps=0)
    with pytest.raises(InvalidParameterError):
        SimConfig(ModelParams(2, 0.2), "sfm", depth=4, reps=10, solo=True)
    with pytest.raises(InvalidParameterError):
        pgf_point(np.array([1]), 1.0)


def test_mean_ordering_small_scale():
    # one-sided sanity at small scale: the self-similar model never beats the
    # non-backtracking one, which never beats the classic model
    d, p = 3, Fraction(1, 3)
    ps = float(p * (d - 1) / (d - (d + 1) * p))
    depth, reps = 6, 4000
    m_sfm = run_batch(SimConfig(ModelParams(d, ps), "sfm", depth=depth, reps=reps, seed=1)).root_visits.mean()
    m_nb = run_batch(SimConfig(ModelParams(d, ps), "nbfm", depth=depth, reps=reps, seed=2)).root_visits.mean()
    m_fm = run_batch(SimConfig(ModelParams(d, p), "fm", depth=depth, reps=reps, seed=3)).root_visits.mean()
    assert m_sfm <= m_nb + 0.2
    assert m_nb <= m_fm + 0.2
