"""Compiled inner loops: path searches, acceptability scans, 2-opt.

Graphs are dense: ``adj`` is a uint8 (n, n) adjacency matrix and ``w`` the
matching distance matrix.  Local node indices are ordered by node id, so
"lexicographically smallest" on indices equals the same on ids.

Path order rule: among minimum-delay paths prefer fewer hops, then the
lexicographically smallest node sequence read from the lower-index endpoint.
Searches run from the higher-index endpoint and the path is read back by a
greedy walk from the lower one, which yields exactly that sequence.

Status codes: 0 ok, 1 no primary, 2 no secondary, 3 primary too long,
4 secondary too long.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OK = 0
NO_PRIMARY = 1
NO_SECONDARY = 2
PRIMARY_DELAY = 3
SECONDARY_DELAY = 4

_BIG = 1 << 30


@njit(cache=True)
def link(adj, nbr, deg, i, j):
    if adj[i, j]:
        return
    adj[i, j] = 1
    adj[j, i] = 1
    nbr[i, deg[i]] = j
    deg[i] += 1
    nbr[j, deg[j]] = i
    deg[j] += 1


@njit(cache=True)
def unlink(adj, nbr, deg, i, j):
    if not adj[i, j]:
        return
    adj[i, j] = 0
    adj[j, i] = 0
    for a, b in ((i, j), (j, i)):
        for k in range(deg[a]):
            if nbr[a, k] == b:
                deg[a] -= 1
                nbr[a, k] = nbr[a, deg[a]]
                break


@njit(cache=True)
def build_lists(adj):
    n = adj.shape[0]
    nbr = np.zeros((n, n), np.int64)
    deg = np.zeros(n, np.int64)
    for i in range(n):
        for j in range(n):
            if adj[i, j]:
                nbr[i, deg[i]] = j
                deg[i] += 1
    return nbr, deg


@njit(cache=True)
def _push(hk, hn, size, key, node):
    i = size
    hk[i] = key
    hn[i] = node
    while i > 0:
        parent = (i - 1) >> 1
        if hk[parent] <= hk[i]:
            break
        hk[parent], hk[i] = hk[i], hk[parent]
        hn[parent], hn[i] = hn[i], hn[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _pop(hk, hn, size):
    key = hk[0]
    node = hn[0]
    size -= 1
    hk[0] = hk[size]
    hn[0] = hn[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        if left + 1 < size and hk[left + 1] < hk[left]:
            c = left + 1
        if hk[i] <= hk[c]:
            break
        hk[c], hk[i] = hk[i], hk[c]
        hn[c], hn[i] = hn[i], hn[c]
        i = c
    return key, node, size


@njit(cache=True)
def sssp(nbr, deg, w, removed, ban_a, ban_b, src, stop, bound, eps, dist, hops, done, hk, hn):
    """Dijkstra from `src` recording (delay, hops) keys.

    Ties within `eps` on delay keep the smaller hop count.  Links are longer
    than `eps`, so settling order among near-equal delays never matters.
    Stops once `stop` is settled (-1 settles everything) or once the
    smallest open delay exceeds `bound`.  `hk`/`hn` are heap scratch arrays
    with room for every link twice plus every node.
    """
    n = nbr.shape[0]
    for i in range(n):
        dist[i] = np.inf
        hops[i] = _BIG
        done[i] = False
    dist[src] = 0.0
    hops[src] = 0
    size = _push(hk, hn, 0, 0.0, src)
    while size > 0:
        key, u, size = _pop(hk, hn, size)
        if done[u] or key > dist[u]:
            continue
        if key > bound:
            return
        done[u] = True
        if u == stop:
            return
        du = dist[u]
        hu = hops[u] + 1
        for k in range(deg[u]):
            j = nbr[u, k]
            if removed[j] or done[j]:
                continue
            if (u == ban_a and j == ban_b) or (u == ban_b and j == ban_a):
                continue
            nd = du + w[u, j]
            dj = dist[j]
            if nd < dj - eps:
                dist[j] = nd
                hops[j] = hu
                size = _push(hk, hn, size, nd, j)
            elif nd <= dj + eps and hu < hops[j]:
                hops[j] = hu
                if nd < dj:
                    dist[j] = nd
                    size = _push(hk, hn, size, nd, j)


@njit(cache=True)
def guided(nbr, deg, w, removed, ban_a, ban_b, src, target, bound, eps, dist, hops, done, hk, hn):
    """A* from `src` to `target`, straight-line distance as the heuristic.

    Finds the same delay as `sssp` but settles far fewer nodes, and gives
    up as soon as no path can fit within `bound`.  Among equal-delay paths
    it may settle a different one, so it only serves searches where the
    delay alone matters.
    """
    n = nbr.shape[0]
    for i in range(n):
        dist[i] = np.inf
        hops[i] = _BIG
        done[i] = False
    dist[src] = 0.0
    hops[src] = 0
    size = _push(hk, hn, 0, w[src, target], src)
    while size > 0:
        key, u, size = _pop(hk, hn, size)
        if done[u] or key > dist[u] + w[u, target]:
            continue
        if key > bound:
            return
        done[u] = True
        if u == target:
            return
        du = dist[u]
        hu = hops[u] + 1
        for k in range(deg[u]):
            j = nbr[u, k]
            if removed[j] or done[j]:
                continue
            if (u == ban_a and j == ban_b) or (u == ban_b and j == ban_a):
                continue
            nd = du + w[u, j]
            dj = dist[j]
            if nd < dj - eps:
                dist[j] = nd
                hops[j] = hu
                size = _push(hk, hn, size, nd + w[j, target], j)
            elif nd <= dj + eps and hu < hops[j]:
                hops[j] = hu
                if nd < dj:
                    dist[j] = nd
                    size = _push(hk, hn, size, nd + w[j, target], j)


@njit(cache=True)
def walk(nbr, deg, w, removed, ban_a, ban_b, dist, hops, done, start, target, eps, out):
    """Read the preferred path from `start` to the search source `target`.

    Returns the number of nodes written to `out`, or -1 if `start` was not
    settled.
    """
    if not done[start]:
        return -1
    cur = start
    k = 0
    out[0] = start
    while cur != target:
        nxt = -1
        for q in range(deg[cur]):
            x = nbr[cur, q]
            if removed[x] or not done[x] or (nxt != -1 and x > nxt):
                continue
            if (cur == ban_a and x == ban_b) or (cur == ban_b and x == ban_a):
                continue
            if hops[x] == hops[cur] - 1 and abs(w[cur, x] + dist[x] - dist[cur]) <= eps:
                nxt = x
        if nxt == -1:
            # float slack broke the hop bookkeeping; fall back to the tightest predecessor
            slack = np.inf
            for q in range(deg[cur]):
                x = nbr[cur, q]
                if removed[x] or not done[x]:
                    continue
                if (cur == ban_a and x == ban_b) or (cur == ban_b and x == ban_a):
                    continue
                if dist[x] < dist[cur]:
                    s = abs(w[cur, x] + dist[x] - dist[cur])
                    if s < slack:
                        slack = s
                        nxt = x
            if nxt == -1:
                return -1
        k += 1
        out[k] = nxt
        cur = nxt
    return k + 1


@njit(cache=True)
def scratch(n):
    """Work arrays for one search: removed, dist, hops, done, heap keys, heap nodes."""
    cap = n * n + n + 1
    return (np.zeros(n, np.bool_), np.empty(n), np.empty(n, np.int64), np.empty(n, np.bool_),
            np.empty(cap), np.empty(cap, np.int64))


@njit(cache=True)
def path_delay(w, path, length):
    total = 0.0
    for i in range(length - 1):
        total += w[path[i], path[i + 1]]
    return total


@njit(cache=True)
def _mark_interior(removed, path, length):
    for i in range(removed.shape[0]):
        removed[i] = False
    for i in range(1, length - 1):
        removed[path[i]] = True


@njit(cache=True)
def _clear(removed):
    for i in range(removed.shape[0]):
        removed[i] = False


@njit(cache=True)
def secondary_for(nbr, deg, w, lo, hi, ppath, plen, bound, eps, sc, out, fast=False):
    """Secondary path given the primary; returns (length, delay), length -1 if none within bound.

    With `fast` the search is A*, which returns a shortest secondary but
    not necessarily the preferred one among equal-delay candidates.
    """
    removed, dist, hops, done, hk, hn = sc
    _mark_interior(removed, ppath, plen)
    ba = -1
    bb = -1
    if plen == 2:
        ba = lo
        bb = hi
    if fast:
        guided(nbr, deg, w, removed, ba, bb, hi, lo, bound, eps, dist, hops, done, hk, hn)
    else:
        sssp(nbr, deg, w, removed, ba, bb, hi, lo, bound, eps, dist, hops, done, hk, hn)
    if not done[lo]:
        _clear(removed)
        return -1, np.inf
    slen = walk(nbr, deg, w, removed, ba, bb, dist, hops, done, lo, hi, eps, out)
    _clear(removed)
    return slen, dist[lo]


@njit(cache=True)
def pair_paths(adj, w, lo, hi, eps, ppath, spath):
    """Unbounded primary and secondary paths of one pair.

    Returns (plen, pdelay, slen, sdelay); a length of -1 means no such path.
    """
    nbr, deg = build_lists(adj)
    sc = scratch(adj.shape[0])
    removed, dist, hops, done, hk, hn = sc
    sssp(nbr, deg, w, removed, -1, -1, hi, lo, np.inf, eps, dist, hops, done, hk, hn)
    plen = walk(nbr, deg, w, removed, -1, -1, dist, hops, done, lo, hi, eps, ppath)
    if plen < 0:
        return -1, np.inf, -1, np.inf
    pdelay = dist[lo]
    slen, sdelay = secondary_for(nbr, deg, w, lo, hi, ppath, plen, np.inf, eps, sc, spath)
    return plen, pdelay, slen, sdelay


@njit(cache=True)
def secondary_given(adj, w, lo, hi, ppath, plen, eps, spath):
    nbr, deg = build_lists(adj)
    sc = scratch(adj.shape[0])
    return secondary_for(nbr, deg, w, lo, hi, ppath, plen, np.inf, eps, sc, spath)


@njit(cache=True)
def _status_after_primary(nbr, deg, w, bound, eps, lo, hi, plen, pdelay, ppath, spath, exact, sc2):
    """Status of a pair whose primary (maybe absent) is already known."""
    if plen < 0:
        return NO_PRIMARY, -1, np.inf
    if pdelay > bound:
        return PRIMARY_DELAY, -1, np.inf
    cut = np.inf if exact else bound
    slen, sdelay = secondary_for(nbr, deg, w, lo, hi, ppath, plen, cut, eps, sc2, spath, not exact)
    if slen < 0:
        if exact:
            return NO_SECONDARY, -1, np.inf
        return SECONDARY_DELAY, -1, np.inf
    if sdelay > bound:
        return SECONDARY_DELAY, slen, sdelay
    return OK, slen, sdelay


@njit(cache=True)
def scan(nbr, deg, w, bound, eps, collect_all, exact, pidx,
         pcache, plens, pdelays, scache, slens, sdelays, bad, bad_codes):
    """Check every pair, filling the path caches as it goes.

    Writes violating pair indices into `bad` (codes into `bad_codes`) and
    returns their count.  Stops at the first violation unless `collect_all`.
    With `exact` False, secondary searches are cut at the bound, so a
    missing secondary may be reported as too long.
    """
    n = nbr.shape[0]
    sc = scratch(n)
    sc2 = scratch(n)
    removed, dist, hops, done, hk, hn = sc
    nbad = 0
    for hi in range(1, n):
        sssp(nbr, deg, w, removed, -1, -1, hi, -1, np.inf, eps, dist, hops, done, hk, hn)
        for lo in range(hi):
            p = pidx[lo, hi]
            plen = walk(nbr, deg, w, removed, -1, -1, dist, hops, done, lo, hi, eps, pcache[p])
            plens[p] = plen
            pdelays[p] = dist[lo]
            code, slen, sdelay = _status_after_primary(nbr, deg, w, bound, eps, lo, hi, plen, dist[lo],
                                                       pcache[p], scache[p], exact, sc2)
            slens[p] = slen
            sdelays[p] = sdelay
            if code != OK:
                bad[nbad] = p
                bad_codes[nbad] = code
                nbad += 1
                if not collect_all:
                    return nbad
    return nbad


@njit(cache=True)
def first_violating(nbr, deg, w, bound, eps, los, his, start):
    """Index of the first pair in los/his[start:] that still fails, or len(los)."""
    n = nbr.shape[0]
    sc = scratch(n)
    sc2 = scratch(n)
    removed, dist, hops, done, hk, hn = sc
    ppath = np.empty(n, np.int64)
    spath = np.empty(n, np.int64)
    for k in range(start, los.shape[0]):
        lo = los[k]
        hi = his[k]
        sssp(nbr, deg, w, removed, -1, -1, hi, lo, np.inf, eps, dist, hops, done, hk, hn)
        plen = walk(nbr, deg, w, removed, -1, -1, dist, hops, done, lo, hi, eps, ppath)
        code, _, _ = _status_after_primary(nbr, deg, w, bound, eps, lo, hi, plen, dist[lo],
                                           ppath, spath, False, sc2)
        if code != OK:
            return k
    return los.shape[0]


@njit(cache=True)
def _uses(path, length, a, b):
    for i in range(length - 1):
        x = path[i]
        y = path[i + 1]
        if (x == a and y == b) or (x == b and y == a):
            return True
    return False


@njit(cache=True)
def _patch_secondary(adj, nbr, deg, w, a, b, lo, hi, ppath, plen, spath, slen, bound, sc, out):
    """Reroute a secondary around removed link (a, b) through one extra node.

    The result is a valid secondary certificate (simple, avoids the primary
    interior, within bound) but not necessarily the shortest one.  Returns
    (length, delay), length -1 if no single-node detour works.
    """
    removed = sc[0]
    _mark_interior(removed, ppath, plen)
    pos = -1
    for i in range(slen - 1):
        x = spath[i]
        y = spath[i + 1]
        if (x == a and y == b) or (x == b and y == a):
            pos = i
            break
    if pos < 0:
        _clear(removed)
        return -1, np.inf
    x = spath[pos]
    y = spath[pos + 1]
    best = -1
    best_cost = np.inf
    for q in range(deg[x]):
        c = nbr[x, q]
        if c == y or removed[c] or not adj[c, y]:
            continue
        if plen == 2 and ((x == lo and c == hi) or (x == hi and c == lo)
                          or (c == lo and y == hi) or (c == hi and y == lo)):
            continue
        cost = w[x, c] + w[c, y]
        if cost < best_cost:
            best_cost = cost
            best = c
    _clear(removed)
    if best < 0:
        return -1, np.inf
    # splice x-best-y in; if best is already on the path, cut out the loop instead
    j = -1
    for i in range(slen):
        if spath[i] == best:
            j = i
            break
    k = 0
    if j < 0:
        for i in range(pos + 1):
            out[k] = spath[i]
            k += 1
        out[k] = best
        k += 1
        for i in range(pos + 1, slen):
            out[k] = spath[i]
            k += 1
    elif j < pos:
        for i in range(j + 1):
            out[k] = spath[i]
            k += 1
        for i in range(pos + 1, slen):
            out[k] = spath[i]
            k += 1
    else:
        for i in range(pos + 1):
            out[k] = spath[i]
            k += 1
        for i in range(j, slen):
            out[k] = spath[i]
            k += 1
    delay = path_delay(w, out, k)
    if delay > bound:
        return -1, np.inf
    return k, delay


@njit(cache=True)
def try_remove(adj, nbr, deg, w, bound, eps, a, b, plo, phi,
               pcache, plens, pdelays, scache, slens, sdelays):
    """Remove link (a, b) if every pair stays acceptable.

    The caches must describe an acceptable network.  Only pairs whose
    primary or secondary path crosses the link can change, so only those
    are recomputed.  On success the link stays removed and the caches are
    updated; otherwise nothing changes.
    """
    n = nbr.shape[0]
    npairs = plo.shape[0]
    sec_only = np.empty(npairs, np.int64)
    prim = np.empty(npairs, np.int64)
    ns = 0
    npr = 0
    for p in range(npairs):
        if _uses(pcache[p], plens[p], a, b):
            prim[npr] = p
            npr += 1
        elif _uses(scache[p], slens[p], a, b):
            sec_only[ns] = p
            ns += 1
    unlink(adj, nbr, deg, a, b)
    sc = scratch(n)
    sc2 = scratch(n)
    removed, dist, hops, done, hk, hn = sc
    new_s = np.empty((ns + npr, n), np.int64)
    new_sl = np.empty(ns + npr, np.int64)
    new_sd = np.empty(ns + npr)
    new_p = np.empty((npr, n), np.int64)
    new_pl = np.empty(npr, np.int64)
    new_pd = np.empty(npr)
    ok = True
    # secondary-only pairs are the likeliest to break, check them first
    for k in range(ns):
        p = sec_only[k]
        slen, sdelay = _patch_secondary(adj, nbr, deg, w, a, b, plo[p], phi[p], pcache[p], plens[p],
                                        scache[p], slens[p], bound, sc2, new_s[k])
        if slen < 0:
            slen, sdelay = secondary_for(nbr, deg, w, plo[p], phi[p], pcache[p], plens[p], bound, eps,
                                         sc2, new_s[k], True)
        if slen < 0 or sdelay > bound:
            ok = False
            break
        new_sl[k] = slen
        new_sd[k] = sdelay
    if ok and npr > 0:
        # group primary recomputations by search source
        order = np.argsort(phi[prim[:npr]], kind="mergesort")
        last_hi = -1
        for q in range(npr):
            k = order[q]
            p = prim[k]
            lo = plo[p]
            hi = phi[p]
            if hi != last_hi:
                sssp(nbr, deg, w, removed, -1, -1, hi, -1, np.inf, eps, dist, hops, done, hk, hn)
                last_hi = hi
            plen = walk(nbr, deg, w, removed, -1, -1, dist, hops, done, lo, hi, eps, new_p[k])
            code, slen, sdelay = _status_after_primary(nbr, deg, w, bound, eps, lo, hi, plen, dist[lo],
                                                       new_p[k], new_s[ns + k], False, sc2)
            if code != OK:
                ok = False
                break
            new_pl[k] = plen
            new_pd[k] = dist[lo]
            new_sl[ns + k] = slen
            new_sd[ns + k] = sdelay
    if not ok:
        link(adj, nbr, deg, a, b)
        return False
    for k in range(ns):
        p = sec_only[k]
        scache[p, :] = new_s[k]
        slens[p] = new_sl[k]
        sdelays[p] = new_sd[k]
    for k in range(npr):
        p = prim[k]
        pcache[p, :] = new_p[k]
        plens[p] = new_pl[k]
        pdelays[p] = new_pd[k]
        scache[p, :] = new_s[ns + k]
        slens[p] = new_sl[ns + k]
        sdelays[p] = new_sd[ns + k]
    return True


@njit(cache=True)
def all_primary_paths(adj, w, eps, pidx, pcache, plens, pdelays):
    """Primary path of every pair (no secondary work)."""
    n = adj.shape[0]
    nbr, deg = build_lists(adj)
    removed, dist, hops, done, hk, hn = scratch(n)
    for hi in range(1, n):
        sssp(nbr, deg, w, removed, -1, -1, hi, -1, np.inf, eps, dist, hops, done, hk, hn)
        for lo in range(hi):
            p = pidx[lo, hi]
            plens[p] = walk(nbr, deg, w, removed, -1, -1, dist, hops, done, lo, hi, eps, pcache[p])
            pdelays[p] = dist[lo]


# ---- tours -----------------------------------------------------------------

@njit(cache=True)
def tour_length(w, tour):
    n = tour.shape[0]
    total = 0.0
    for i in range(n):
        total += w[tour[i], tour[(i + 1) % n]]
    return total


@njit(cache=True)
def nearest_neighbor_tour(w, start):
    n = w.shape[0]
    tour = np.empty(n, np.int64)
    seen = np.zeros(n, np.bool_)
    tour[0] = start
    seen[start] = True
    cur = start
    for k in range(1, n):
        best = -1
        bd = np.inf
        for j in range(n):
            if not seen[j] and w[cur, j] < bd:
                bd = w[cur, j]
                best = j
        tour[k] = best
        seen[best] = True
        cur = best
    return tour


@njit(cache=True)
def two_opt(w, tour, eps):
    """First-improvement 2-opt until no move shortens the tour by more than eps."""
    n = tour.shape[0]
    improved = True
    while improved:
        improved = False
        for i in range(n - 2):
            a = tour[i]
            b = tour[i + 1]
            jmax = n if i > 0 else n - 1
            for j in range(i + 2, jmax):
                c = tour[j]
                d = tour[(j + 1) % n]
                delta = w[a, c] + w[b, d] - w[a, b] - w[c, d]
                if delta < -eps:
                    lo = i + 1
                    hi = j
                    while lo < hi:
                        t = tour[lo]
                        tour[lo] = tour[hi]
                        tour[hi] = t
                        lo += 1
                        hi -= 1
                    improved = True
                    b = tour[i + 1]
    return tour


@njit(cache=True)
def best_two_opt_gain(w, tour):
    """Largest cost reduction any single 2-opt move achieves (<= 0 if none)."""
    n = tour.shape[0]
    best = -np.inf
    for i in range(n - 2):
        a = tour[i]
        b = tour[i + 1]
        jmax = n if i > 0 else n - 1
        for j in range(i + 2, jmax):
            c = tour[j]
            d = tour[(j + 1) % n]
            gain = w[a, b] + w[c, d] - w[a, c] - w[b, d]
            if gain > best:
                best = gain
    return best
