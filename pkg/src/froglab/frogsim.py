"""Truncated simulators for the four frog processes with per-replicate event
bookkeeping.

Models:

* ``fm``    classic frog model: backtracking biased walks, reflecting root.
* ``nbfm``  non-backtracking model: two-phase trajectories, killed at the root.
* ``sfm``   self-similar model: nbfm plus the once-per-downward-edge rule,
            applied at every level so each entered subtree is a replica of
            the whole process.
* ``rsfm``  sfm plus a re-activation stage that forces entry into every
            branch of the first branching vertex missed by the first stage.

Sleeping frogs exist down to the truncation depth; downward rays stop there.
Truncation only removes visits, so generating-function estimates are upper
bounds that decrease toward the untruncated value as the depth grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from math import comb
from typing import Iterable, Optional, Sequence

import numpy as np

from . import engine
from .errors import InvalidParameterError
from .params import ModelParams
from .stats import EstimateWithCI, hoeffding_halfwidth

MODELS = ("fm", "nbfm", "sfm", "rsfm")


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    model: str
    depth: int
    reps: int
    seed: int = 0
    step_horizon: int = 1_000_000  # per-frog cap, fm only
    solo: bool = False  # fm diagnostic: single walker, no sleepers

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidParameterError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.model in ("sfm", "rsfm") and self.depth < 2:
            raise InvalidParameterError("sfm/rsfm need depth >= 2 (the level-2 events)")
        if self.depth < 1:
            raise InvalidParameterError("depth must be >= 1")
        if self.reps < 1:
            raise InvalidParameterError("reps must be >= 1")
        if not float(self.params.p) < 0.5:
            raise InvalidParameterError("simulation requires p < 1/2 (transient walks)")
        if self.solo and self.model != "fm":
            raise InvalidParameterError("solo mode is an fm diagnostic")
        if not 0 <= self.seed < 2**63:
            raise InvalidParameterError("seed must fit a non-negative 63-bit integer")

    def with_depth(self, depth: int) -> "SimConfig":
        return replace(self, depth=depth)


@dataclass(frozen=True)
class VisitRecord:
    """Outcome of one replicate.

    ``flow_sets[i]`` holds the branch indices at the first branching vertex
    that frogs originating in branch i chose to enter (attempts count whether
    or not the once-per-edge rule killed the jump). ``fprime_child`` is -1
    when the frog at the first branching vertex moved up to the root instead.
    """

    model: str
    root_visits: int
    sub_to_root: tuple
    sub_to_vprime: tuple
    activated: frozenset
    flow_sets: tuple
    first_child: int
    fprime_child: int
    fprime_to_root: bool
    stage1_activated: Optional[frozenset] = None
    horizon_exhausted: int = 0
    woken: int = 0

    @property
    def d1(self) -> bool:
        """First-branching-vertex frog went up, or toward the branch already
        entered from above."""
        return self.fprime_to_root or self.fprime_child == self.first_child

    @property
    def stage1_count(self) -> Optional[int]:
        return None if self.stage1_activated is None else len(self.stage1_activated)

    def b_event(self, j: int, avoid: Iterable[int]) -> bool:
        """Indicator that no frog from branch j ever chose a branch in
        ``avoid``."""
        avoid = frozenset(avoid)
        if j in avoid:
            raise InvalidParameterError("the avoided set may not contain the source branch")
        return not (self.flow_sets[j] & avoid)

    def decomposition_holds(self) -> bool:
        """Total root visits match the per-branch decomposition plus the
        first-branching-vertex frog's direct ascent."""
        return self.root_visits == int(self.fprime_to_root) + sum(self.sub_to_root)


def _mask_to_set(mask: int) -> frozenset:
    return frozenset(i for i in range(64) if mask >> i & 1)


@dataclass
class SimBatch:
    """Column-oriented results of ``reps`` replicates."""

    cfg: SimConfig
    root_visits: np.ndarray
    sub_to_root: np.ndarray
    sub_to_vprime: np.ndarray
    activated_mask: np.ndarray
    flow_mask: np.ndarray
    first_child: np.ndarray
    fprime_move: np.ndarray
    stage1_mask: Optional[np.ndarray] = None
    horizon_exhausted: Optional[np.ndarray] = None
    woken: Optional[np.ndarray] = None

    @property
    def reps(self) -> int:
        return self.root_visits.size

    @property
    def d1(self) -> np.ndarray:
        return (self.fprime_move == -1) | (self.fprime_move == self.first_child)

    @property
    def activated_count(self) -> np.ndarray:
        d = self.cfg.params.d
        return sum((self.activated_mask >> i) & 1 for i in range(d))

    def record(self, i: int) -> VisitRecord:
        d = self.cfg.params.d
        return VisitRecord(
            model=self.cfg.model,
            root_visits=int(self.root_visits[i]),
            sub_to_root=tuple(int(x) for x in self.sub_to_root[i]),
            sub_to_vprime=tuple(int(x) for x in self.sub_to_vprime[i]),
            activated=_mask_to_set(int(self.activated_mask[i])),
            flow_sets=tuple(_mask_to_set(int(self.flow_mask[i, j])) for j in range(d)),
            first_child=int(self.first_child[i]),
            fprime_child=int(self.fprime_move[i]) if self.fprime_move[i] >= 0 else -1,
            fprime_to_root=bool(self.fprime_move[i] == -1),
            stage1_activated=(
                None if self.stage1_mask is None else _mask_to_set(int(self.stage1_mask[i]))
            ),
            horizon_exhausted=(
                0 if self.horizon_exhausted is None else int(self.horizon_exhausted[i])
            ),
            woken=0 if self.woken is None else int(self.woken[i]),
        )

    def __iter__(self):
        return (self.record(i) for i in range(self.reps))


def _flow_closure(batch: SimBatch) -> np.ndarray:
    """Bitmask closure of the branch flow relation started from first_child."""
    d = batch.cfg.params.d
    cur = (np.int64(1) << batch.first_child.astype(np.int64)).astype(np.int64)
    for _ in range(d):
        nxt = cur.copy()
        for j in range(d):
            has_j = (cur >> j) & 1
            nxt |= batch.flow_mask[:, j] * has_j
        if np.array_equal(nxt, cur):
            break
        cur = nxt
    return cur


def _validate_batch(batch: SimBatch) -> None:
    """Engine invariants asserted on every replicate.

    * root visits equal the branch decomposition plus the direct ascent;
    * on the event that the first-branching-vertex frog stayed in the entered
      branch (or went up), the activated set is exactly the flow closure.
    """
    direct = (batch.fprime_move == -1).astype(np.int64)
    total = direct + batch.sub_to_root.sum(axis=1)
    if not np.array_equal(total, batch.root_visits):
        bad = int(np.nonzero(total != batch.root_visits)[0][0])
        raise AssertionError(f"root-visit decomposition failed at replicate {bad}")
    if batch.cfg.depth >= 2 and batch.cfg.model in ("nbfm", "sfm"):
        closure = _flow_closure(batch)
        d1 = batch.d1
        ok = ~d1 | (closure == batch.activated_mask)
        if not np.all(ok):
            bad = int(np.nonzero(~ok)[0][0])
            raise AssertionError(f"activation/flow-closure mismatch at replicate {bad}")


def run_batch(cfg: SimConfig, validate: bool = True) -> SimBatch:
    """Run all replicates of a configuration; deterministic in (cfg, seed)."""
    d = cfg.params.d
    depth = cfg.depth
    reps = cfg.reps
    p = float(cfg.params.p)
    nvert = engine.tree_size(d, depth)
    entered = np.zeros(nvert, dtype=np.int32)
    stack = np.empty(nvert + 8, dtype=np.int32)

    if cfg.model == "fm":
        rho = p / (1 - p)
        up_at_floor = p / (p + (1 - p) * (1 - rho)) if p > 0 else 0.0
        visited_bits = np.zeros((nvert + 63) // 64, dtype=np.uint64)
        fm_stack = np.empty(nvert + 8, dtype=np.int32)
        fm_stack_depth = np.empty(nvert + 8, dtype=np.int8)
        root = np.zeros(reps, dtype=np.int64)
        exhausted = np.zeros(reps, dtype=np.int64)
        woken = np.zeros(reps, dtype=np.int64)
        first = np.full(reps, -1, dtype=np.int64)
        engine.fm_batch(
            d, depth, p, up_at_floor, reps, cfg.seed, cfg.step_horizon, cfg.solo,
            visited_bits, fm_stack, fm_stack_depth, root, exhausted, woken, first,
        )
        zeros_i64 = np.zeros((reps, d), dtype=np.int64)
        return SimBatch(
            cfg=cfg,
            root_visits=root,
            sub_to_root=zeros_i64,
            sub_to_vprime=zeros_i64.copy(),
            activated_mask=np.zeros(reps, dtype=np.int64),
            flow_mask=np.zeros((reps, d), dtype=np.int64),
            first_child=first,
            fprime_move=np.full(reps, -2, dtype=np.int64),
            horizon_exhausted=exhausted,
            woken=woken,
        )

    alpha_up = float(cfg.params.alpha)
    stack_depth = np.empty(nvert + 8, dtype=np.int8)
    root = np.zeros(reps, dtype=np.int64)
    s2r = np.zeros((reps, d), dtype=np.int64)
    s2v = np.zeros((reps, d), dtype=np.int64)
    flow = np.zeros((reps, d), dtype=np.int64)
    act = np.zeros(reps, dtype=np.int64)
    first = np.full(reps, -1, dtype=np.int64)
    fpm = np.full(reps, -2, dtype=np.int64)
    stage1 = np.zeros(reps, dtype=np.int64)
    viol = np.zeros(reps, dtype=np.int64)
    engine.descend_batch(
        d, depth, p, alpha_up, reps, cfg.seed,
        cfg.model in ("sfm", "rsfm"), cfg.model == "rsfm",
        entered, stack, stack_depth,
        root, s2r, s2v, flow, act, first, fpm, stage1, viol,
    )
    if int(viol.sum()) != 0:
        raise AssertionError("engine re-entered a branch it had recorded as missed")
    batch = SimBatch(
        cfg=cfg,
        root_visits=root,
        sub_to_root=s2r,
        sub_to_vprime=s2v,
        activated_mask=act,
        flow_mask=flow,
        first_child=first,
        fprime_move=fpm,
        stage1_mask=stage1 if cfg.model == "rsfm" else None,
    )
    if validate:
        _validate_batch(batch)
    return batch


def _single(cfg: SimConfig, model: str, replicate: int) -> VisitRecord:
    if cfg.model != model:
        raise InvalidParameterError(f"config is for model {cfg.model!r}, expected {model!r}")
    if not 0 <= replicate < cfg.reps:
        raise InvalidParameterError("replicate index out of range")
    one = replace(cfg, reps=replicate + 1)
    return run_batch(one).record(replicate)


def simulate_sfm(cfg: SimConfig, replicate: int = 0) -> VisitRecord:
    """One self-similar replicate (replicates are keyed, so any index of the
    configured batch can be reproduced on its own)."""
    return _single(cfg, "sfm", replicate)


def simulate_nbfm(cfg: SimConfig, replicate: int = 0) -> VisitRecord:
    return _single(cfg, "nbfm", replicate)


def simulate_fm(cfg: SimConfig, replicate: int = 0) -> VisitRecord:
    return _single(cfg, "fm", replicate)


def simulate_rsfm(cfg: SimConfig, replicate: int = 0) -> VisitRecord:
    return _single(cfg, "rsfm", replicate)


def pgf_point(root_visits: np.ndarray, x: float) -> np.ndarray:
    """x**V with the 0**0 = 1 convention, elementwise."""
    if not 0 <= x < 1:
        raise InvalidParameterError("generating-function arguments must lie in [0, 1)")
    if x == 0.0:
        return (root_visits == 0).astype(float)
    return np.power(x, root_visits.astype(float))


def estimate_pgf(
    cfg: SimConfig,
    xs: Sequence[float],
    delta: float = 1e-3,
    batch: Optional[SimBatch] = None,
) -> list[EstimateWithCI]:
    """Monte Carlo estimate of E[x**V] at each x, with distribution-free
    (Hoeffding) half-widths.

    Truncation can only remove visits, so each estimate is an upper bound on
    the untruncated value and decreases as the depth grows.
    """
    if batch is None:
        batch = run_batch(cfg)
    hw = hoeffding_halfwidth(batch.reps, delta)
    out = []
    for x in xs:
        mean = float(pgf_point(batch.root_visits, float(x)).mean())
        out.append(EstimateWithCI(mean=mean, halfwidth=hw, reps=batch.reps, delta=delta))
    return out
