"""Event-driven numba kernels for the frog processes on the depth-truncated
d-ary tree.

Tree encoding: heap indices, root = 0, children of v are v*d + 1 + c for
c in 0..d-1, parent is (v-1)//d. A vertex's index does not depend on the
truncation depth, which is what makes the per-frog randomness reusable when
the same replicate is run at several depths (coupled-truncation checks).

Randomness: every frog draws from a splitmix64 stream keyed by
(master seed, replicate index, wake vertex), mirroring froglab.rng bit for
bit. Draw layout per frog: one reserved leading draw, the up-run Bernoulli
chain, then one draw per descent step. Trajectories are two-phase (an upward
run followed by a uniform downward ray), which is the exact law of the
non-backtracking walk, so no step-by-step walking is needed.

Scheduling note: frogs are processed from a stack, not in wall-clock order.
All recorded statistics are scheduling-invariant: which frog wins a contested
first crossing only relabels an exchangeable continuation.
"""

from __future__ import annotations

import numpy as np
from numba import njit, literally

from .errors import InvalidParameterError, ResourceLimitError

U64_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_U64_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U64_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

#: Stream keys for frogs injected in the re-activation stage (depth-independent).
STAGE2_KEY_BASE = 1 << 48

#: Default cap on the number of tree vertices a single run may allocate.
MAX_TREE_VERTICES = 16_000_000


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _U64_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U64_MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def child_state(state, key):
    """Fold an integer key into a stream state (matches rng.derive_state)."""
    return _mix64(state ^ _mix64(np.uint64(key) + U64_GOLDEN))


@njit(cache=True, inline="always")
def stream_state(master, key):
    """State of Stream.seeded(master, key)."""
    return child_state(_mix64(np.uint64(master)), key)


@njit(cache=True, inline="always")
def unit_next(state):
    """Advance a stream; return (new state, uniform double in [0, 1))."""
    state = state + U64_GOLDEN
    return state, float((_mix64(state) >> np.uint64(11))) * _INV53


@njit(cache=True)
def stream_draws(master, key, out):
    """Fill ``out`` with the unit draws of Stream.seeded(master, key); used to
    pin python/kernel stream equivalence."""
    st = stream_state(master, key)
    for i in range(out.size):
        st, u = unit_next(st)
        out[i] = u
    return 0


def tree_size(d: int, depth: int) -> int:
    n = (d ** (depth + 1) - 1) // (d - 1)
    if n > MAX_TREE_VERTICES:
        raise ResourceLimitError(
            f"tree with d={d}, depth={depth} has {n} vertices (cap {MAX_TREE_VERTICES})"
        )
    return n


@njit(cache=True, error_model="numpy")
def descend_batch(
    d,
    depth,
    p,
    alpha_up,
    reps,
    master,
    kill_on_reentry,
    do_stage2,
    entered,
    stack,
    stack_depth,
    out_root,
    out_s2r,
    out_s2v,
    out_flow,
    out_act,
    out_first,
    out_fpm,
    out_stage1,
    out_viol,
):
    """Non-backtracking / self-similar / re-activated engines.

    kill_on_reentry=True is the self-similar rule: every parent-to-child edge
    is crossable once, later attempts kill the attempting frog. do_stage2
    adds the re-activation stage (forces entry into every branch the first
    stage missed).
    """
    literally(d)  # specialize per degree: turns the //d chains into shifts
    for rep in range(reps):
        tag = rep + 1
        rstate = stream_state(master, rep)
        rv = 0
        vprime = -1
        first_child = -1
        fpm = -2
        stack_n = 0

        # frog initially at the root: a uniform downward ray
        st = child_state(rstate, 0)
        st, u = unit_next(st)  # reserved slot
        v = 0
        dep = 0
        while dep < depth:
            st, u = unit_next(st)
            c = int(u * d)
            if c >= d:
                c = d - 1
            w = v * d + 1 + c
            if dep == 0:
                vprime = w
            elif dep == 1:
                first_child = c
            entered[w] = tag
            if dep + 1 == depth:
                # floor wake: a frog that starts downward has no effect at
                # all, so peek its first draw and skip the push in that case
                # (survivors replay the identical draw when popped)
                fst = child_state(rstate, w)
                fst, fu = unit_next(fst)
                if fu < p:
                    stack[stack_n] = w
                    stack_depth[stack_n] = dep + 1
                    stack_n += 1
            else:
                stack[stack_n] = w
                stack_depth[stack_n] = dep + 1
                stack_n += 1
            v = w
            dep += 1

        stage = 0
        while True:
            while stack_n > 0:
                stack_n -= 1
                wake = stack[stack_n]
                dep = np.int64(stack_depth[stack_n])

                st = child_state(rstate, wake)
                st, u = unit_next(st)
                k = 0
                if u < p:
                    k = 1
                    while k < dep:
                        st, u = unit_next(st)
                        if u < alpha_up:
                            k += 1
                        else:
                            break

                # branch of origin, needed only for frogs that ascend
                origin = -1
                if k > 0 and dep >= 2:
                    t = wake
                    for _ in range(dep - 2):
                        t = (t - 1) // d
                    origin = t - (vprime * d + 1)

                # upward run: arrivals at ancestors (all already entered)
                died = False
                t = wake
                came_from = -1
                for j in range(1, k + 1):
                    came_from = (t - 1) % d
                    t = (t - 1) // d
                    adep = dep - j
                    if adep == 1 and origin >= 0:
                        out_s2v[rep, origin] += 1
                    elif adep == 0:
                        rv += 1
                        if origin >= 0:
                            out_s2r[rep, origin] += 1
                        elif wake == vprime:
                            fpm = -1
                        died = True
                if died:
                    continue

                # downward ray from the turn vertex to the floor
                cur = t
                cdep = dep - k
                first_after_up = k > 0
                while cdep < depth:
                    nch = d - 1 if first_after_up else d
                    st, u = unit_next(st)
                    c = int(u * nch)
                    if c >= nch:
                        c = nch - 1
                    if first_after_up and c >= came_from:
                        c += 1
                    w = cur * d + 1 + c
                    if cdep == 1:
                        if origin >= 0:
                            out_flow[rep, origin] |= 1 << c
                        elif wake == vprime:
                            fpm = c
                    if entered[w] == tag:
                        if kill_on_reentry:
                            break
                    else:
                        entered[w] = tag
                        if cdep + 1 == depth:
                            fst = child_state(rstate, w)
                            fst, fu = unit_next(fst)
                            if fu < p:
                                stack[stack_n] = w
                                stack_depth[stack_n] = cdep + 1
                                stack_n += 1
                        else:
                            stack[stack_n] = w
                            stack_depth[stack_n] = cdep + 1
                            stack_n += 1
                    cur = w
                    cdep += 1
                    first_after_up = False

            if stage == 1 or not do_stage2 or depth < 2:
                break
            # re-activation stage: force entry into every missed branch
            stage = 1
            s1 = 0
            for c in range(d):
                w = vprime * d + 1 + c
                if entered[w] == tag:
                    s1 |= 1 << c
            out_stage1[rep] = s1
            for i in range(d):
                if s1 & (1 << i):
                    continue
                st = child_state(rstate, STAGE2_KEY_BASE + i)
                st, u = unit_next(st)  # reserved slot
                w = vprime * d + 1 + i
                if entered[w] == tag:
                    out_viol[rep] += 1
                entered[w] = tag
                if depth == 2:
                    fst = child_state(rstate, w)
                    fst, fu = unit_next(fst)
                    if fu < p:
                        stack[stack_n] = w
                        stack_depth[stack_n] = 2
                        stack_n += 1
                else:
                    stack[stack_n] = w
                    stack_depth[stack_n] = 2
                    stack_n += 1
                cur = w
                cdep = 2
                while cdep < depth:
                    st, u = unit_next(st)
                    c = int(u * d)
                    if c >= d:
                        c = d - 1
                    w2 = cur * d + 1 + c
                    if entered[w2] == tag:
                        if kill_on_reentry:
                            break
                    else:
                        entered[w2] = tag
                        if cdep + 1 == depth:
                            fst = child_state(rstate, w2)
                            fst, fu = unit_next(fst)
                            if fu < p:
                                stack[stack_n] = w2
                                stack_depth[stack_n] = cdep + 1
                                stack_n += 1
                        else:
                            stack[stack_n] = w2
                            stack_depth[stack_n] = cdep + 1
                            stack_n += 1
                    cur = w2
                    cdep += 1

        out_root[rep] = rv
        out_first[rep] = first_child
        out_fpm[rep] = fpm
        act = 0
        if depth >= 2:
            for c in range(d):
                w = vprime * d + 1 + c
                if entered[w] == tag:
                    act |= 1 << c
        out_act[rep] = act
    return 0


@njit(cache=True, error_model="numpy")
def fm_batch(
    d,
    depth,
    p,
    up_at_floor,
    reps,
    master,
    horizon,
    solo,
    visited,
    stack,
    stack_depth,
    out_root,
    out_exhausted,
    out_woken,
    out_first,
):
    """Classic frog model: full backtracking biased walks, reflecting root.

    Excursions below the truncation depth are collapsed exactly: from a floor
    vertex the walk eventually moves up with probability
    p / (p + (1-p)(1 - rho)) and otherwise never returns above the floor, by
    the strong Markov property along the unique re-entry vertex.

    First visits always arrive from the parent, so waking is checked on
    downward arrivals only. ``visited`` is a bit set (one uint64 word per 64
    vertices, reset per replicate) and the stack carries (vertex, depth)
    pairs, keeping the hot state cache-resident.
    """
    literally(d)
    child_scale = d / (1.0 - p) if p < 1.0 else 0.0
    one = np.uint64(1)
    mask6 = np.uint64(63)
    for rep in range(reps):
        rstate = stream_state(master, rep)
        rv = 0
        exhausted = 0
        woken = 0
        first_child = -1
        stack_n = 0
        visited[:] = np.uint64(0)
        visited[0] = one  # the root holds no sleeper
        if solo:
            visited[0] |= one << np.uint64(1)
            stack[0] = 1  # child 0 of the root; no sleepers anywhere
            stack_depth[0] = 1
            stack_n = 1
        else:
            stack[0] = 0
            stack_depth[0] = 0
            stack_n = 1
        while stack_n > 0:
            stack_n -= 1
            wake = stack[stack_n]
            st = child_state(rstate, wake)
            v = np.int64(wake)
            vdep = np.int64(stack_depth[stack_n])
            steps = 0
            while steps < horizon:
                st, u = unit_next(st)
                steps += 1
                if vdep == depth:
                    if u < up_at_floor:
                        v = (v - 1) // d
                        vdep -= 1
                        if vdep == 0:
                            rv += 1
                    else:
                        break  # escaped below the floor for good
                elif vdep == 0:
                    c = int(u * d)
                    if c >= d:
                        c = d - 1
                    v = v * d + 1 + c
                    vdep = 1
                    bit = one << (np.uint64(v) & mask6)
                    if visited[v >> 6] & bit == np.uint64(0):
                        visited[v >> 6] |= bit
                        if not solo:
                            woken += 1
                            if vdep == depth:
                                # floor frog: peek its first (and possibly only)
                                # decision; if it escapes at once, skip the push.
                                # Survivors replay the same draw when popped.
                                fst = child_state(rstate, v)
                                fst, fu = unit_next(fst)
                                if fu < up_at_floor:
                                    stack[stack_n] = v
                                    stack_depth[stack_n] = vdep
                                    stack_n += 1
                            else:
                                stack[stack_n] = v
                                stack_depth[stack_n] = vdep
                                stack_n += 1
                elif u < p:
                    v = (v - 1) // d
                    vdep -= 1
                    if vdep == 0:
                        rv += 1
                else:
                    c = int((u - p) * child_scale)
                    if c >= d:
                        c = d - 1
                    v = v * d + 1 + c
                    vdep += 1
                    bit = one << (np.uint64(v) & mask6)
                    if visited[v >> 6] & bit == np.uint64(0):
                        visited[v >> 6] |= bit
                        if not solo:
                            woken += 1
                            if vdep == depth:
                                fst = child_state(rstate, v)
                                fst, fu = unit_next(fst)
                                if fu < up_at_floor:
                                    stack[stack_n] = v
                                    stack_depth[stack_n] = vdep
                                    stack_n += 1
                            else:
                                stack[stack_n] = v
                                stack_depth[stack_n] = vdep
                                stack_n += 1
                    if wake == 0 and vdep == 2 and first_child == -1:
                        first_child = (v - 1) % d
            else:
                exhausted += 1
        out_root[rep] = rv
        out_exhausted[rep] = exhausted
        out_woken[rep] = woken
        out_first[rep] = first_child
    return 0
