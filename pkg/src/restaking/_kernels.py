"""Integer search kernels.

The same source serves both backends. Under numba the arrays are int64 and the
caller has checked that no product can reach 2**62. On the fallback path the
arrays hold Python ints (dtype=object), so every comparison is exact whatever
the magnitude. Boolean arrays are plain ``np.bool_`` in both cases.

Attack test used throughout: ``held * den[j] > thr[j]`` where ``thr[j]`` is
``alpha_num * total_stake_on_j`` and ``den[j]`` is ``alpha_den``.
"""

from __future__ import annotations

import numpy as np

try:
    from numba.extending import register_jitable
except ImportError:  # pragma: no cover - numba is optional
    def register_jitable(fn):
        return fn


@register_jitable
def _gain(att, value, thr, den):
    g = 0
    for j in range(value.shape[0]):
        if att[j] * den[j] > thr[j]:
            g += value[j]
    return g


@register_jitable
def _live_gain(att, rem, value, thr, den):
    g = 0
    for j in range(value.shape[0]):
        if (att[j] + rem[j]) * den[j] > thr[j]:
            g += value[j]
    return g


@register_jitable
def _helps(adj, v, att, rem, thr, den):
    # v only matters if it touches a service that is still attackable but not yet attacked
    for j in range(adj.shape[1]):
        if adj[v, j] and att[j] * den[j] <= thr[j] and (att[j] + rem[j]) * den[j] > thr[j]:
            return True
    return False


def coalition_search(stake, value, adj, thr, den, order, exhaustive):
    """Branch and bound over validator subsets for a profitable coalition.

    Depth ``k`` decides validator ``order[k]``, include branch first. A subtree
    is cut when the value of every still-attackable service minus the stake
    already committed cannot beat ``best`` (0 unless ``exhaustive``).

    Returns ``(found, mask, profit)``; ``mask`` is indexed by validator.
    """
    n = stake.shape[0]
    m = value.shape[0]
    att = np.zeros_like(value)
    rem = np.zeros_like(value)
    for i in range(n):
        for j in range(m):
            if adj[i, j]:
                rem[j] += stake[i]
    chosen = np.zeros(n, dtype=np.bool_)
    best_mask = np.zeros(n, dtype=np.bool_)
    stage = np.zeros(n + 1, dtype=np.int64)
    best = 0
    found = False
    cost = 0
    k = 0
    while k >= 0:
        if stage[k] == 0:
            stage[k] = 1
            if k == n or _live_gain(att, rem, value, thr, den) - cost <= best:
                stage[k] = 3
            else:
                v = order[k]
                if _helps(adj, v, att, rem, thr, den):
                    chosen[v] = True
                    cost += stake[v]
                    for j in range(m):
                        if adj[v, j]:
                            att[j] += stake[v]
                            rem[j] -= stake[v]
                    profit = _gain(att, value, thr, den) - cost
                    if profit > best:
                        best = profit
                        found = True
                        best_mask[:] = chosen
                        if not exhaustive:
                            return found, best_mask, best
                    k += 1
                    stage[k] = 0
                    continue
        if stage[k] == 1:
            v = order[k]
            if chosen[v]:
                chosen[v] = False
                cost -= stake[v]
                for j in range(m):
                    if adj[v, j]:
                        att[j] -= stake[v]
            else:
                for j in range(m):
                    if adj[v, j]:
                        rem[j] -= stake[v]
            stage[k] = 2
            k += 1
            stage[k] = 0
            continue
        if stage[k] == 2:
            v = order[k]
            for j in range(m):
                if adj[v, j]:
                    rem[j] += stake[v]
        k -= 1
    return found, best_mask, best


def coalition_enumerate(stake, value, adj, thr, den):
    """Plain scan of every mask in increasing order; first profitable mask or -1."""
    n = stake.shape[0]
    m = value.shape[0]
    att = np.zeros_like(value)
    for mask in range(1, 1 << n):
        for j in range(m):
            att[j] = 0
        cost = 0
        for i in range(n):
            if (mask >> i) & 1:
                cost += stake[i]
                for j in range(m):
                    if adj[i, j]:
                        att[j] += stake[i]
        if _gain(att, value, thr, den) - cost > 0:
            return mask
    return -1


def coalition_enumerate_numpy(stake, value, adj, thr, den, chunk=4096):
    """Vectorised twin of :func:`coalition_enumerate` for the no-numba path."""
    n = stake.shape[0]
    shifts = np.arange(n, dtype=np.int64)
    weighted = adj.astype(object) * stake.astype(object)[:, None]
    value = value.astype(object)
    for start in range(1, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        member = ((masks[:, None] >> shifts) & 1).astype(object)
        held = member.dot(weighted)
        cost = member.dot(stake.astype(object))
        hit = (held * den.astype(object) > thr.astype(object)).astype(object)
        profit = hit.dot(value) - cost
        idx = np.flatnonzero(profit > 0)
        if idx.size:
            return int(masks[idx[0]])
    return -1


@register_jitable
def _cheapest_exceeding(c, thr, den, limit, chosen, best_mask, stage, suffix):
    # cheapest subset with sum*den > thr and sum < limit; index order, include first
    d = c.shape[0]
    suffix[d] = 0
    for i in range(d - 1, -1, -1):
        suffix[i] = suffix[i + 1] + c[i]
    for i in range(d + 1):
        stage[i] = 0
    for i in range(d):
        chosen[i] = False
    best = limit
    found = False
    cost = 0
    k = 0
    while k >= 0:
        if stage[k] == 0:
            stage[k] = 1
            if k == d or (cost + suffix[k]) * den <= thr or cost >= best:
                stage[k] = 3
            else:
                cost += c[k]
                chosen[k] = True
                if cost * den > thr:
                    if cost < best:
                        best = cost
                        found = True
                        best_mask[:] = chosen
                    # supersets only cost more: go straight to the exclude branch
                else:
                    k += 1
                    stage[k] = 0
                    continue
        if stage[k] == 1:
            if chosen[k]:
                chosen[k] = False
                cost -= c[k]
            stage[k] = 2
            k += 1
            stage[k] = 0
            continue
        k -= 1
    return found, best


def min_exceeding_subset(c, thr, den):
    """Cheapest subset of ``c`` whose sum times ``den`` exceeds ``thr``.

    Returns ``(found, mask, cost)``. Ties go to the subset met first in
    include-first index order.
    """
    d = c.shape[0]
    chosen = np.zeros(d, dtype=np.bool_)
    best_mask = np.zeros(d, dtype=np.bool_)
    stage = np.zeros(d + 1, dtype=np.int64)
    suffix = np.zeros(d + 1, dtype=c.dtype)
    total = 0
    for i in range(d):
        total += c[i]
    found, best = _cheapest_exceeding(c, thr, den, total + 1, chosen, best_mask, stage, suffix)
    return found, best_mask, best


def min_incidence_cover(adj):
    """Exact min-max-incidence cover by Gray-code scan over service subsets.

    ``adj`` is services x validators. Returns ``(mask, K)``; ties prefer fewer
    services, then the smaller mask. ``(-1, -1)`` when no cover exists.
    """
    m = adj.shape[0]
    n = adj.shape[1]
    if n == 0:
        return 0, 0
    counts = np.zeros(n, dtype=np.int64)
    uncovered = n
    best_k = -1
    best_size = 0
    best_mask = -1
    mask = 0
    size = 0
    for i in range(1, 1 << m):
        b = 0
        t = i
        while t & 1 == 0:
            t >>= 1
            b += 1
        if (mask >> b) & 1:
            mask ^= 1 << b
            size -= 1
            for v in range(n):
                if adj[b, v]:
                    counts[v] -= 1
                    if counts[v] == 0:
                        uncovered += 1
        else:
            mask |= 1 << b
            size += 1
            for v in range(n):
                if adj[b, v]:
                    if counts[v] == 0:
                        uncovered -= 1
                    counts[v] += 1
        if uncovered == 0:
            k = 0
            for v in range(n):
                if counts[v] > k:
                    k = counts[v]
            if (best_k < 0 or k < best_k or (k == best_k and size < best_size)
                    or (k == best_k and size == best_size and mask < best_mask)):
                best_k = k
                best_size = size
                best_mask = mask
    return best_mask, best_k


def grid_secure_table(lo, hi, stride, cap_total, anum, aden, limit, key_size):
    """Scan grid allocations for one service and tabulate the secure ones.

    Coordinates run over ``lo[i]..hi[i]`` with coordinate sum at most
    ``cap_total``. Coordinates with ``stride[i] > 0`` are shared validators and
    form the table key ``sum((c[i]-lo[i])*stride[i])``; the rest are private and
    the table keeps, per key, the cheapest private sum among secure vectors
    (-1 if none) and the vector achieving it. A vector is secure when no
    subset with share above alpha costs less than ``limit`` units.
    """
    d = lo.shape[0]
    best = np.full(key_size, -1, dtype=np.int64)
    arg = np.zeros((key_size, d), dtype=np.int64)
    c = lo.copy()
    s = 0
    for i in range(d):
        s += c[i]
    if s > cap_total:
        return best, arg
    chosen = np.zeros(d, dtype=np.bool_)
    best_mask = np.zeros(d, dtype=np.bool_)
    stage = np.zeros(d + 1, dtype=np.int64)
    suffix = np.zeros(d + 1, dtype=lo.dtype)
    while True:
        secure = True
        if limit > 0:
            if s == 0:
                secure = False
            elif s * anum < limit * aden:
                found, _ = _cheapest_exceeding(c, anum * s, aden, limit, chosen, best_mask, stage, suffix)
                secure = not found
        if secure:
            key = 0
            priv = 0
            for i in range(d):
                if stride[i] > 0:
                    key += (c[i] - lo[i]) * stride[i]
                else:
                    priv += c[i]
            if best[key] < 0 or priv < best[key]:
                best[key] = priv
                arg[key, :] = c
        i = 0
        while i < d:
            if c[i] < hi[i] and s < cap_total:
                c[i] += 1
                s += 1
                break
            s -= c[i] - lo[i]
            c[i] = lo[i]
            i += 1
        if i == d:
            break
    return best, arg
