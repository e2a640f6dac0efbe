"""Compiled hot loops.

States are uint64 word arrays; the RNG is xoshiro256** held in a uint64[4]
array and must match :class:`pbnsim.rng.Xoshiro256` draw for draw.
Draw order per step: perturbation draws, the leaf check (only when not
perturbed and leaves exist), then one alias draw per multi-function
node or group.
"""

import numpy as np
from numba import njit

U1 = np.uint64(1)
U5 = np.uint64(5)
U7 = np.uint64(7)
U9 = np.uint64(9)
U11 = np.uint64(11)
U17 = np.uint64(17)
U45 = np.uint64(45)
U64 = np.uint64(64)
TWO_M53 = 1.0 / 9007199254740992.0

KMAX = 32  # largest thinning interval tracked for the two-state chain fit
RING = 2 * KMAX + 1
BLOCK = 1024  # checkpoint stride for cumulative predicate hits


@njit(inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (U64 - k))


@njit
def next_double(rs):
    s0 = rs[0]
    s1 = rs[1]
    s2 = rs[2]
    s3 = rs[3]
    result = _rotl(s1 * U5, U7) * U9
    t = s1 << U17
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, U45)
    rs[0] = s0
    rs[1] = s1
    rs[2] = s2
    rs[3] = s3
    return np.float64(result >> U11) * TWO_M53


@njit
def alias_pick(prob, alias, start, size, rs):
    u1 = next_double(rs)
    u2 = next_double(rs)
    i = np.int64(u1 * size)
    if i >= size:
        i = size - 1
    if u2 < prob[start + i]:
        return i
    return alias[start + i]


@njit(inline="always")
def _bit(words, q):
    return np.int64((words[q >> 6] >> np.uint64(q & 63)) & U1)


@njit(inline="always")
def _xor_bits(words, off, c, width):
    w = off >> 6
    sh = off & 63
    words[w] ^= np.uint64(c) << np.uint64(sh)
    if sh + width > 64:
        words[w + 1] ^= np.uint64(c) >> np.uint64(64 - sh)


@njit
def step_reference(data, state, scratch, rs):
    (n, p, t, nfunc, alias_start, alias_prob, alias_idx,
     fstart, par_start, arity, par_idx, tab_start, tab) = data
    perturbed = False
    for i in range(n):
        if next_double(rs) < p:
            state[i >> 6] ^= U1 << np.uint64(i & 63)
            perturbed = True
    if perturbed:
        return
    if t < 1.0 and next_double(rs) > t:
        return
    for w in range(len(scratch)):
        scratch[w] = 0
    for i in range(n):
        k = 0
        if nfunc[i] > 1:
            k = alias_pick(alias_prob, alias_idx, alias_start[i], nfunc[i], rs)
        f = fstart[i] + k
        v = 0
        base = par_start[f]
        for j in range(arity[f]):
            v |= _bit(state, par_idx[base + j]) << j
        if tab[tab_start[f] + v]:
            scratch[i >> 6] |= U1 << np.uint64(i & 63)
    for w in range(len(state)):
        state[w] = scratch[w]


@njit
def step_grouped(data, state, scratch, rs):
    (pt_prob, pt_alias, k, g, mask, t,
     g_off, g_width, g_nfunc, g_alias_start, g_par_start, g_npar, g_tab_start,
     par_pos, alias_prob, alias_idx, tab) = data
    size = len(pt_prob)
    perturbed = False
    for i in range(g):
        c = alias_pick(pt_prob, pt_alias, 0, size, rs)
        if i == g - 1:
            c &= mask
        if c != 0:
            _xor_bits(state, i * k, c, k)
            perturbed = True
    if perturbed:
        return
    if t < 1.0 and next_double(rs) > t:
        return
    for w in range(len(scratch)):
        scratch[w] = 0
    for gi in range(len(g_off)):
        c = 0
        if g_nfunc[gi] > 1:
            c = alias_pick(alias_prob, alias_idx, g_alias_start[gi], g_nfunc[gi], rs)
        npar = g_npar[gi]
        base = g_par_start[gi]
        v = 0
        for j in range(npar):
            v |= _bit(state, par_pos[base + j]) << j
        out = tab[g_tab_start[gi] + (c << npar) + v]
        if out != 0:
            _xor_bits(scratch, g_off[gi], out, g_width[gi])
    for w in range(len(state)):
        state[w] = scratch[w]


@njit
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return np.int64((x * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(nogil=True)
def run(step, data, state, rs, steps, t0, track, since, ones, prev,
        use_pred, pmask, pval, pstats, ring, tcounts, ckpt):
    """Advance ``steps`` steps from global step ``t0``.

    ``since``/``ones`` keep per-bit run-length statistics (bit ``i`` was 1
    for ``ones[i]`` completed steps; its current run began at ``since[i]``).
    With ``use_pred`` the conjunction ``(state & pmask) == pval`` is fed into
    hit counts, thinned triple counts and block checkpoints.
    """
    scratch = np.zeros_like(state)
    nw = len(state)
    for step_no in range(steps):
        tg = t0 + step_no + 1
        if track:
            for w in range(nw):
                prev[w] = state[w]
        step(data, state, scratch, rs)
        if track:
            for w in range(nw):
                diff = prev[w] ^ state[w]
                while diff != 0:
                    low = diff & (~diff + U1)
                    b = w * 64 + _popcount(low - U1)
                    if prev[w] & low:
                        ones[b] += tg - since[b]
                    since[b] = tg
                    diff ^= low
        if use_pred:
            z = 1
            for w in range(nw):
                if (state[w] & pmask[w]) != pval[w]:
                    z = 0
                    break
            pstats[0] += z
            ring[tg % RING] = z
            for kk in range(1, KMAX + 1):
                if tg % kk == 0 and tg >= 3 * kk:
                    a = ring[(tg - 2 * kk) % RING]
                    b2 = ring[(tg - kk) % RING]
                    tcounts[kk, a * 4 + b2 * 2 + z] += 1
            if tg % BLOCK == 0:
                ckpt[tg // BLOCK] = pstats[0]


@njit
def build_alias_arrays(probs):
    """Two-worklist alias construction; same arithmetic as ``sampling.build_alias``."""
    n = len(probs)
    scaled = probs * n
    prob = np.ones(n)
    alias = np.arange(n)
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(n - 1, -1, -1):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        lo = small[ns]
        nl -= 1
        hi = large[nl]
        prob[lo] = scaled[lo]
        alias[lo] = hi
        scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
        if scaled[hi] < 1.0:
            small[ns] = hi
            ns += 1
        else:
            large[nl] = hi
            nl += 1
    return prob, alias
