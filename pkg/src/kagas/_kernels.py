"""Numba-compiled inner loops: RNG, exchange-rate catalog, KMC core, search moves.

Sites are flat indices into row-major occupancy arrays.  Ordered bonds are
encoded as ``bid = site * 2d + dir`` with direction order +e1,-e1,+e2,-e2,...
An extra virtual site (index V) with a fixed occupancy models the exterior of
box domains; torus tables never reference it.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# -- geometry -----------------------------------------------------------------


def neighbor_table(dims: tuple[int, ...]) -> np.ndarray:
    """Torus neighbor table, shape (V, 2d), direction order +e1,-e1,+e2,-e2,..."""
    d = len(dims)
    V = int(np.prod(dims))
    coords = np.indices(dims).reshape(d, V)
    nbr = np.empty((V, 2 * d), dtype=np.int64)
    for axis in range(d):
        for k, sign in enumerate((+1, -1)):
            shifted = coords.copy()
            shifted[axis] = (shifted[axis] + sign) % dims[axis]
            nbr[:, 2 * axis + k] = np.ravel_multi_index(shifted, dims)
    return nbr


def box_neighbor_table(dims: tuple[int, ...]) -> np.ndarray:
    """Box neighbor table; out-of-box neighbors point at the virtual site V."""
    d = len(dims)
    V = int(np.prod(dims))
    coords = np.indices(dims).reshape(d, V)
    nbr = np.empty((V, 2 * d), dtype=np.int64)
    for axis in range(d):
        for k, sign in enumerate((+1, -1)):
            shifted = coords.copy()
            shifted[axis] = shifted[axis] + sign
            valid = (shifted[axis] >= 0) & (shifted[axis] < dims[axis])
            idx = np.full(V, V, dtype=np.int64)
            if valid.any():
                idx[valid] = np.ravel_multi_index(shifted[:, valid].clip(min=0), dims)
            nbr[:, 2 * axis + k] = idx
    return nbr


# -- xoshiro256** --------------------------------------------------------------


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, inline="always")
def _next_u64(state):
    result = _rotl(state[1] * np.uint64(5), 7) * np.uint64(9)
    t = state[1] << np.uint64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@njit(cache=True, inline="always")
def _rand_exp(state):
    # uniform strictly inside (0,1): exponential variates are finite and positive
    u = np.float64(_next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0) + 5.0e-17
    return -np.log(u)


@njit(cache=True, inline="always")
def _rand_below(state, n):
    return np.int64(_next_u64(state) % np.uint64(n))


# -- KA constraint and rate catalog --------------------------------------------


@njit(cache=True, inline="always")
def _empty_neighbors(occ, nbr, site):
    c = 0
    for k in range(nbr.shape[1]):
        c += 1 - occ[nbr[site, k]]
    return c


@njit(cache=True)
def build_nbemp(occ, nbr):
    """Per-site empty-neighbor counts (slot-counted, exterior reads included)."""
    V = nbr.shape[0]
    nbemp = np.zeros(V + 1, dtype=np.int16)
    for x in range(V):
        nbemp[x] = _empty_neighbors(occ, nbr, x)
    return nbemp


@njit(cache=True, inline="always")
def _bond_allowed(occ, nbr, s, x, dir_):
    y = nbr[x, dir_]
    if occ[x] != 1 or occ[y] != 0:
        return False
    if _empty_neighbors(occ, nbr, y) < s - 1:
        return False
    return _empty_neighbors(occ, nbr, x) >= s


@njit(cache=True, inline="always")
def _bond_allowed_fast(occ, nbemp, nbr, s, x, dir_):
    y = nbr[x, dir_]
    return (occ[x] == 1 and occ[y] == 0
            and nbemp[y] >= s - 1 and nbemp[x] >= s)


@njit(cache=True)
def catalog_build(occ, nbr, s, movable):
    """Exhaustive scan of allowed ordered bonds.

    movable[site]=0 masks sites whose bonds may not move (exterior, or sites
    outside the active region); the constraint still reads their occupancy.
    Returns (cat, pos, K).
    """
    V = nbr.shape[0]
    nd = nbr.shape[1]
    cat = np.empty(V * nd, dtype=np.int64)
    pos = np.full(V * nd, -1, dtype=np.int64)
    K = 0
    for x in range(V):
        if movable[x] == 0:
            continue
        for k in range(nd):
            y = nbr[x, k]
            if movable[y] == 0:
                continue
            if _bond_allowed(occ, nbr, s, x, k):
                bid = x * nd + k
                pos[bid] = K
                cat[K] = bid
                K += 1
    return cat, pos, K


@njit(cache=True, inline="always")
def _cat_set(cat, pos, K, bid, want):
    """Insert or remove one bond; returns the new catalog size."""
    have = pos[bid] >= 0
    if want and not have:
        pos[bid] = K
        cat[K] = bid
        K += 1
    elif have and not want:
        i = pos[bid]
        last = cat[K - 1]
        cat[i] = last
        pos[last] = i
        pos[bid] = -1
        K -= 1
    return K


@njit(cache=True)
def _update_around(occ, nbemp, nbr, s, movable, cat, pos, K, x, y, cross):
    """Apply the count deltas of the swap (x, y) and refresh the catalog.

    Only bonds incident to x, y, or to a neighbor whose empty-count crossed
    the thresholds s or s-1 can change allowed-state; everything else keeps
    its catalog entry.  The occ flips must already be applied; this routine
    updates nbemp itself.  ``cross`` is scratch of size >= 2*nd + 2.
    """
    V = nbr.shape[0]
    nd = nbr.shape[1]
    cross[0] = x
    cross[1] = y
    ncross = 2
    for j in range(nd):
        w = nbr[x, j]
        old = nbemp[w]
        nbemp[w] = old + 1
        if (old + 1 == s or old + 1 == s - 1) and w != x and w != y:
            cross[ncross] = w
            ncross += 1
    for j in range(nd):
        w = nbr[y, j]
        old = nbemp[w]
        nbemp[w] = old - 1
        if (old == s or old == s - 1) and w != x and w != y:
            cross[ncross] = w
            ncross += 1
    for i in range(ncross):
        w = cross[i]
        if w >= V or movable[w] == 0:
            continue
        for k in range(nd):
            v = nbr[w, k]
            if v >= V or movable[v] == 0:
                continue
            # bond out of w
            want = (occ[w] == 1 and occ[v] == 0
                    and nbemp[v] >= s - 1 and nbemp[w] >= s)
            bid = w * nd + k
            have = pos[bid] >= 0
            if want and not have:
                pos[bid] = K
                cat[K] = bid
                K += 1
            elif have and not want:
                i2 = pos[bid]
                last = cat[K - 1]
                cat[i2] = last
                pos[last] = i2
                pos[bid] = -1
                K -= 1
            # bond into w
            want = (occ[v] == 1 and occ[w] == 0
                    and nbemp[w] >= s - 1 and nbemp[v] >= s)
            back = k + 1 if k % 2 == 0 else k - 1
            bid = v * nd + back
            have = pos[bid] >= 0
            if want and not have:
                pos[bid] = K
                cat[K] = bid
                K += 1
            elif have and not want:
                i2 = pos[bid]
                last = cat[K - 1]
                cat[i2] = last
                pos[last] = i2
                pos[bid] = -1
                K -= 1
    return K


@njit(cache=True)
def kmc_chunk(occ, nbemp, nbr, s, movable, cat, pos, K, t, t_max, state,
              tracer, disp, dirsteps,
              sample_times, samples, si,
              ev_t, ev_x, ev_y, record, max_steps):
    """Run up to max_steps rejection-free events; stop at t_max or when blocked.

    Mutates occ/nbemp/cat/pos/state/disp/samples in place.  Returns
    (t, K, tracer, si, n_done, finished) where finished means t_max reached
    or catalog empty.
    """
    nd = nbr.shape[1]
    n_done = 0
    ns = sample_times.shape[0]
    cross = np.empty(2 * nd + 2, dtype=np.int64)
    while n_done < max_steps:
        if K == 0:
            # blocked: nothing ever moves again, flush remaining samples
            while si < ns:
                for a in range(disp.shape[0]):
                    samples[si, a] = disp[a]
                si += 1
            t = t_max
            return t, K, tracer, si, n_done, True
        dt = _rand_exp(state) / K
        t_new = t + dt
        if t_new >= t_max:
            while si < ns:
                for a in range(disp.shape[0]):
                    samples[si, a] = disp[a]
                si += 1
            t = t_max
            return t, K, tracer, si, n_done, True
        while si < ns and sample_times[si] < t_new:
            for a in range(disp.shape[0]):
                samples[si, a] = disp[a]
            si += 1
        t = t_new
        bid = cat[_rand_below(state, K)]
        x = bid // nd
        k = bid % nd
        y = nbr[x, k]
        occ[x] = 0
        occ[y] = 1
        if x == tracer:
            tracer = y
            axis = k // 2
            disp[axis] += dirsteps[k]
        if record:
            ev_t[n_done] = t
            ev_x[n_done] = x
            ev_y[n_done] = y
        n_done += 1
        K = _update_around(occ, nbemp, nbr, s, movable, cat, pos, K, x, y, cross)
    return t, K, tracer, si, n_done, False


@njit(cache=True)
def search_moves(occ, nbr, s, movable, out):
    """All allowed ordered bonds with both endpoints movable; returns count."""
    V = nbr.shape[0]
    nd = nbr.shape[1]
    n = 0
    for x in range(V):
        if movable[x] == 0 or occ[x] != 1:
            continue
        ex = 0
        for k in range(nd):
            ex += 1 - occ[nbr[x, k]]
        if ex < s:
            continue
        for k in range(nd):
            y = nbr[x, k]
            if movable[y] == 0 or occ[y] != 0:
                continue
            ey = 0
            for j in range(nd):
                ey += 1 - occ[nbr[y, j]]
            if ey >= s - 1:
                out[n] = x * nd + k
                n += 1
    return n
