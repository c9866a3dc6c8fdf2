"""Compiled inner loops: union-find labelling, off-edge connectivity, sweeps."""

import numpy as np
from numba import njit

# ---------------------------------------------------------------- union-find


@njit(cache=True, inline="always")
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, inline="always")
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return False
    if ra < rb:
        parent[rb] = ra
    else:
        parent[ra] = rb
    return True


@njit(cache=True)
def label_components(n, eu, ev, active):
    """Labels of the components of (V, active edges); label = smallest vertex id."""
    parent = np.arange(n)
    for e in range(eu.shape[0]):
        if active[e]:
            _union(parent, eu[e], ev[e])
    for v in range(n):
        parent[v] = _find(parent, v)
    return parent


@njit(cache=True)
def count_clusters(n, eu, ev, active, boundary_mask, wired):
    parent = np.arange(n)
    k = n
    for e in range(eu.shape[0]):
        if active[e]:
            if _union(parent, eu[e], ev[e]):
                k -= 1
    if wired:
        first = -1
        for v in range(n):
            if boundary_mask[v]:
                if first < 0:
                    first = v
                elif _union(parent, first, v):
                    k -= 1
    return k


@njit(cache=True)
def enum_cluster_counts(n, eu, ev, start, count, boundary_mask, wired):
    """k(omega) for configuration indices start..start+count-1 (bit e = edge e)."""
    m = eu.shape[0]
    out = np.empty(count, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    first = -1
    if wired:
        for v in range(n):
            if boundary_mask[v]:
                first = v
                break
    for i in range(count):
        c = start + i
        for v in range(n):
            parent[v] = v
        k = n
        for e in range(m):
            if (c >> e) & 1:
                if _union(parent, eu[e], ev[e]):
                    k -= 1
        if wired and first >= 0:
            for v in range(n):
                if boundary_mask[v] and v != first:
                    if _union(parent, first, v):
                        k -= 1
        out[i] = k
    return out


@njit(cache=True)
def enum_labels(n, eu, ev, start, count, active_mask):
    """Component labels of ``config & active_mask`` for a range of configuration indices."""
    m = eu.shape[0]
    out = np.empty((count, n), dtype=np.int32)
    parent = np.empty(n, dtype=np.int64)
    for i in range(count):
        c = (start + i) & active_mask
        for v in range(n):
            parent[v] = v
        for e in range(m):
            if (c >> e) & 1:
                _union(parent, eu[e], ev[e])
        for v in range(n):
            out[i, v] = _find(parent, v)
    return out


@njit(cache=True)
def bits_labels(n, eu, ev, bits2d, active):
    """Component labels for a batch of configurations given as a (N, E) 0/1 array."""
    N = bits2d.shape[0]
    m = eu.shape[0]
    out = np.empty((N, n), dtype=np.int32)
    parent = np.empty(n, dtype=np.int64)
    for i in range(N):
        for v in range(n):
            parent[v] = v
        for e in range(m):
            if bits2d[i, e] and active[e]:
                _union(parent, eu[e], ev[e])
        for v in range(n):
            out[i, v] = _find(parent, v)
    return out


@njit(cache=True)
def sets_joined(labels2d, amask, bmask):
    """Row-wise: does some vertex of A share a label with some vertex of B."""
    N, n = labels2d.shape
    out = np.zeros(N, dtype=np.bool_)
    seen = np.zeros(n, dtype=np.int64)
    stamp = 0
    for i in range(N):
        stamp += 1
        for v in range(n):
            if amask[v]:
                seen[labels2d[i, v]] = stamp
        for v in range(n):
            if bmask[v] and seen[labels2d[i, v]] == stamp:
                out[i] = True
                break
    return out


# ------------------------------------------------------- hypercube distances


@njit(cache=True)
def hamming_to_set(member, n_bits):
    """Exact Hamming distance from every configuration index to the set ``member``.

    Coordinate-wise min-plus relaxation; exact because the l1 metric on the
    cube is a sum over coordinates.  Unreachable (empty set) entries stay at
    ``n_bits + 1``.
    """
    N = member.shape[0]
    big = n_bits + 1
    H = np.empty(N, dtype=np.int16)
    for c in range(N):
        H[c] = 0 if member[c] else big
    for b in range(n_bits):
        bit = 1 << b
        for c in range(N):
            if c & bit:
                a = H[c]
                o = H[c ^ bit]
                if o + 1 < a:
                    H[c] = o + 1
                elif a + 1 < o:
                    H[c ^ bit] = a + 1
    return H


# --------------------------------------------------------- off-edge connectivity


@njit(cache=True)
def connected_avoiding(indptr, nbr, nbr_edge, omega, src, dst, skip, markA, markB,
                       qa, qb, token):
    """True iff src and dst are joined by open edges other than ``skip``.

    Interleaved bidirectional breadth-first search; stops as soon as one
    frontier is exhausted or the two searches meet.  Edge id -1 marks the
    always-open ghost edges of the wired boundary.
    """
    if src == dst:
        return True
    markA[src] = token
    markB[dst] = token
    qa[0] = src
    qb[0] = dst
    ha, ta, hb, tb = 0, 1, 0, 1
    while ha < ta and hb < tb:
        # advance the smaller frontier by one vertex
        if ta - ha <= tb - hb:
            u = qa[ha]
            ha += 1
            for k in range(indptr[u], indptr[u + 1]):
                e = nbr_edge[k]
                if e == skip:
                    continue
                if e >= 0 and omega[e] == 0:
                    continue
                w = nbr[k]
                if markB[w] == token:
                    return True
                if markA[w] != token:
                    markA[w] = token
                    qa[ta] = w
                    ta += 1
        else:
            u = qb[hb]
            hb += 1
            for k in range(indptr[u], indptr[u + 1]):
                e = nbr_edge[k]
                if e == skip:
                    continue
                if e >= 0 and omega[e] == 0:
                    continue
                w = nbr[k]
                if markA[w] == token:
                    return True
                if markB[w] != token:
                    markB[w] = token
                    qb[tb] = w
                    tb += 1
    return False


@njit(cache=True)
def heat_bath_sweep(indptr, nbr, nbr_edge, eu, ev, omega, p_edge, q, uniforms,
                    markA, markB, qa, qb, token0, stats):
    """Resample every edge once, in edge-id order, from its exact conditional law.

    ``stats[0]`` counts connectivity queries, ``stats[1]`` counts queries that
    found the endpoints connected.  Returns the next free search token.
    """
    m = eu.shape[0]
    token = token0
    for e in range(m):
        pe = p_edge[e]
        if q == 1.0:
            prob = pe
        else:
            token += 1
            conn = connected_avoiding(indptr, nbr, nbr_edge, omega, eu[e], ev[e], e,
                                      markA, markB, qa, qb, token)
            stats[0] += 1
            if conn:
                stats[1] += 1
                prob = pe
            else:
                prob = pe / (pe + q * (1.0 - pe))
        omega[e] = 1 if uniforms[e] < prob else 0
    return token


@njit(cache=True)
def swendsen_wang_step(n, eu, ev, omega, p_edge, boundary_mask, wired, colors, uniforms):
    """Colour the clusters of omega, then reopen concordant edges with probability p_e.

    ``colors`` holds one uniform colour candidate per vertex; the colour of a
    cluster is the candidate of its root.  Under wired boundary conditions the
    boundary cluster is pinned to colour 0.
    """
    m = eu.shape[0]
    parent = np.arange(n)
    for e in range(m):
        if omega[e]:
            _union(parent, eu[e], ev[e])
    first = -1
    if wired:
        for v in range(n):
            if boundary_mask[v]:
                if first < 0:
                    first = v
                else:
                    _union(parent, first, v)
    col = np.empty(n, dtype=np.int64)
    ghost_root = _find(parent, first) if first >= 0 else -1
    for v in range(n):
        r = _find(parent, v)
        col[v] = 0 if r == ghost_root else colors[r]
    for e in range(m):
        if col[eu[e]] == col[ev[e]] and uniforms[e] < p_edge[e]:
            omega[e] = 1
        else:
            omega[e] = 0


# ------------------------------------------------------------ cluster queries


@njit(cache=True)
def region_labels(n, eu, ev, omega, vmask):
    """Labels of omega restricted to the vertex set ``vmask``; -1 outside."""
    parent = np.arange(n)
    for e in range(eu.shape[0]):
        if omega[e] and vmask[eu[e]] and vmask[ev[e]]:
            _union(parent, eu[e], ev[e])
    out = np.empty(n, dtype=np.int64)
    for v in range(n):
        out[v] = _find(parent, v) if vmask[v] else -1
    return out


@njit(cache=True)
def region_joined(n, eu, ev, omega, vmask, amask, bmask):
    lab = region_labels(n, eu, ev, omega, vmask)
    seen = np.zeros(n, dtype=np.bool_)
    for v in range(n):
        if amask[v] and vmask[v]:
            seen[lab[v]] = True
    for v in range(n):
        if bmask[v] and vmask[v] and seen[lab[v]]:
            return True
    return False


@njit(cache=True)
def cluster_radius(indptr, nbr, nbr_edge, omega, sources, vx, vy, ox, oy, n):
    """Largest l1 base distance from (ox, oy) reached by the cluster of ``sources``.

    Ghost entries (edge id -1) are ignored, so the search stays on real edges.
    """
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    best = 0
    for s in sources:
        if not seen[s]:
            seen[s] = True
            stack[top] = s
            top += 1
    while top > 0:
        top -= 1
        u = stack[top]
        d = abs(vx[u] - ox) + abs(vy[u] - oy)
        if d > best:
            best = d
        for k in range(indptr[u], indptr[u + 1]):
            e = nbr_edge[k]
            if e < 0 or omega[e] == 0:
                continue
            w = nbr[k]
            if not seen[w]:
                seen[w] = True
                stack[top] = w
                top += 1
    return best


@njit(cache=True)
def heat_bath_run(indptr, nbr, nbr_edge, eu, ev, omega, p_edge, q, uniforms2d,
                  markA, markB, qa, qb, token0, stats, record):
    """Several heat-bath sweeps; ``record[i]`` receives the configuration index after sweep i.

    Recording is skipped when ``record`` is empty (graphs with more than 62 edges).
    """
    token = token0
    m = eu.shape[0]
    do_record = record.shape[0] == uniforms2d.shape[0]
    for i in range(uniforms2d.shape[0]):
        token = heat_bath_sweep(indptr, nbr, nbr_edge, eu, ev, omega, p_edge, q,
                                uniforms2d[i], markA, markB, qa, qb, token, stats)
        if do_record:
            c = 0
            for e in range(m):
                if omega[e]:
                    c |= 1 << e
            record[i] = c
    return token


@njit(cache=True)
def config_index(omega):
    c = 0
    for e in range(omega.shape[0]):
        if omega[e]:
            c |= 1 << e
    return c


# --------------------------------------------------------- strong separation


@njit(cache=True)
def separation_greedy(lab, rmask, bmask, tmask, base_id, n_base, vx, vy, witness):
    """Greedy family of vertically crossing clusters with pairwise disjoint fattened label sets.

    ``lab`` are labels of omega restricted to the rectangle (-1 outside).
    Candidates are visited by leftmost base column, then lowest base y there,
    then label.  Accepted cluster labels are written to ``witness``; returns K.
    """
    n = lab.shape[0]
    hitb = np.zeros(n, dtype=np.bool_)
    hitt = np.zeros(n, dtype=np.bool_)
    for v in range(n):
        if rmask[v]:
            if bmask[v]:
                hitb[lab[v]] = True
            if tmask[v]:
                hitt[lab[v]] = True
    big = np.int64(1) << 40
    minx = np.full(n, big, dtype=np.int64)
    miny = np.full(n, big, dtype=np.int64)
    ncand = 0
    for v in range(n):
        if rmask[v]:
            r = lab[v]
            if hitb[r] and hitt[r]:
                if minx[r] == big:
                    ncand += 1
                if vx[v] < minx[r] or (vx[v] == minx[r] and vy[v] < miny[r]):
                    minx[r] = vx[v]
                    miny[r] = vy[v]
    if ncand == 0:
        return 0
    cands = np.empty(ncand, dtype=np.int64)
    keys = np.empty(ncand, dtype=np.int64)
    k = 0
    for r in range(n):
        if minx[r] != big:
            cands[k] = r
            keys[k] = ((minx[r] + 65536) * 262144 + (miny[r] + 65536)) * 1048576 * 64 + r
            k += 1
    order = np.argsort(keys)
    used = np.zeros(n, dtype=np.bool_)
    basemark = np.zeros(n_base, dtype=np.int64)
    inset = np.zeros(n, dtype=np.int64)
    members = np.empty(n, dtype=np.int64)
    K = 0
    for oi in range(ncand):
        r = cands[order[oi]]
        stamp = oi + 1
        for v in range(n):
            if rmask[v] and lab[v] == r:
                basemark[base_id[v]] = stamp
        nm = 0
        clash = False
        for w in range(n):
            if rmask[w] and basemark[base_id[w]] == stamp:
                lw = lab[w]
                if used[lw]:
                    clash = True
                    break
                if inset[lw] != stamp:
                    inset[lw] = stamp
                    members[nm] = lw
                    nm += 1
        if not clash:
            for i in range(nm):
                used[members[i]] = True
            witness[K] = r
            K += 1
    return K


@njit(cache=True)
def enum_separation(n, eu, ev, rmask, bmask, tmask, base_id, n_base, vx, vy, count):
    """Greedy K for every configuration index 0..count-1."""
    m = eu.shape[0]
    omega = np.zeros(m, dtype=np.uint8)
    out = np.empty(count, dtype=np.int64)
    witness = np.empty(n, dtype=np.int64)
    for c in range(count):
        for e in range(m):
            omega[e] = (c >> e) & 1
        lab = region_labels(n, eu, ev, omega, rmask)
        out[c] = separation_greedy(lab, rmask, bmask, tmask, base_id, n_base, vx, vy, witness)
    return out


# ----------------------------------------------------------------- gluing


@njit(cache=True)
def glue_flags(labD, labDp, dmask, dpmask, a0, a1, a2, b1, b2):
    """(A, B, X, Y1, Y2) for one configuration from its D- and D'-restricted labels."""
    n = labD.shape[0]
    hasA1 = np.zeros(n, dtype=np.bool_)
    hasA2 = np.zeros(n, dtype=np.bool_)
    hasB1 = np.zeros(n, dtype=np.bool_)
    hasB2 = np.zeros(n, dtype=np.bool_)
    a0p = np.zeros(n, dtype=np.bool_)
    for v in range(n):
        if dpmask[v] and a0[v]:
            a0p[labDp[v]] = True
    conn0 = np.zeros(n, dtype=np.bool_)
    for v in range(n):
        if dmask[v]:
            r = labD[v]
            if a1[v]:
                hasA1[r] = True
            if a2[v]:
                hasA2[r] = True
            if b1[v]:
                hasB1[r] = True
            if b2[v]:
                hasB2[r] = True
            if a0p[labDp[v]]:
                conn0[r] = True
    A = False
    B = False
    X = False
    q1 = False
    q2 = False
    for r in range(n):
        cross_a = hasA1[r] and hasA2[r] and conn0[r]
        if cross_a:
            A = True
            if not hasB1[r]:
                q1 = True
            if not hasB2[r]:
                q2 = True
        if hasB1[r] and hasB2[r]:
            B = True
            if conn0[r]:
                X = True
    Y = A and B and not X
    return A, B, X, Y and q1, Y and q2


@njit(cache=True)
def glue_flags_batch(labD2, labDp2, dmask, dpmask, a0, a1, a2, b1, b2):
    N = labD2.shape[0]
    out = np.zeros((N, 5), dtype=np.bool_)
    for i in range(N):
        A, B, X, Y1, Y2 = glue_flags(labD2[i], labDp2[i], dmask, dpmask, a0, a1, a2, b1, b2)
        out[i, 0] = A
        out[i, 1] = B
        out[i, 2] = X
        out[i, 3] = Y1
        out[i, 4] = Y2
    return out


@njit(cache=True)
def _orank(e, u, eu, rank_fwd, rank_bwd):
    return rank_fwd[e] if u == eu[e] else rank_bwd[e]


@njit(cache=True)
def _reaches(indptr, nbr, nbr_edge, omega, dmask, target, visited, stamp, seen, queue, w):
    """Open path from w to ``target`` inside dmask avoiding vertices with visited == stamp."""
    if target[w]:
        return True
    seen[w] = stamp
    queue[0] = w
    h, t = 0, 1
    while h < t:
        u = queue[h]
        h += 1
        for k in range(indptr[u], indptr[u + 1]):
            e = nbr_edge[k]
            if e < 0 or omega[e] == 0:
                continue
            x = nbr[k]
            if not dmask[x] or visited[x] == stamp or seen[x] == stamp:
                continue
            if target[x]:
                return True
            seen[x] = stamp
            queue[t] = x
            t += 1
    return False


@njit(cache=True)
def lexmin_path(indptr, nbr, nbr_edge, omega, eu, rank_fwd, rank_bwd, dmask, src, dst):
    """Lexicographically least open self-avoiding path in dmask from src-set to dst-set.

    Paths are compared by the ranks of their oriented edges, a proper prefix
    being smaller; so the minimum stops at its first visit of ``dst``.
    Returns the vertex sequence, or an empty array when no such path exists.
    """
    n = dmask.shape[0]
    for v in range(n):
        if dmask[v] and src[v] and dst[v]:
            out = np.empty(1, dtype=np.int64)
            out[0] = v
            return out
    visited = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    path = np.empty(n, dtype=np.int64)
    stamp = 1
    # first edge: over all open oriented edges leaving the source set
    cnt = 0
    for v in range(n):
        if dmask[v] and src[v]:
            cnt += indptr[v + 1] - indptr[v]
    cr = np.empty(cnt, dtype=np.int64)
    cu = np.empty(cnt, dtype=np.int64)
    cw = np.empty(cnt, dtype=np.int64)
    m = 0
    for v in range(n):
        if dmask[v] and src[v]:
            for k in range(indptr[v], indptr[v + 1]):
                e = nbr_edge[k]
                if e < 0 or omega[e] == 0 or not dmask[nbr[k]]:
                    continue
                cr[m] = _orank(e, v, eu, rank_fwd, rank_bwd)
                cu[m] = v
                cw[m] = nbr[k]
                m += 1
    order = np.argsort(cr[:m])
    found = False
    L = 0
    for oi in range(m):
        i = order[oi]
        stamp += 1
        visited[cu[i]] = stamp
        if _reaches(indptr, nbr, nbr_edge, omega, dmask, dst, visited, stamp, seen, queue, cw[i]):
            path[0] = cu[i]
            path[1] = cw[i]
            L = 2
            found = True
            break
    if not found:
        return np.empty(0, dtype=np.int64)
    # fix the stamp for the committed path
    stamp += 1
    pstamp = stamp
    visited[path[0]] = pstamp
    visited[path[1]] = pstamp
    while not dst[path[L - 1]]:
        u = path[L - 1]
        best = -1
        bestr = np.int64(1) << 62
        # candidates sorted lazily: repeatedly take the smallest untried rank
        deg = indptr[u + 1] - indptr[u]
        tried = np.zeros(deg, dtype=np.bool_)
        while True:
            pick = -1
            pr = np.int64(1) << 62
            for j in range(deg):
                k = indptr[u] + j
                if tried[j]:
                    continue
                e = nbr_edge[k]
                if e < 0 or omega[e] == 0:
                    continue
                x = nbr[k]
                if not dmask[x] or visited[x] == pstamp:
                    continue
                r = _orank(e, u, eu, rank_fwd, rank_bwd)
                if r < pr:
                    pr = r
                    pick = j
            if pick < 0:
                break
            tried[pick] = True
            x = nbr[indptr[u] + pick]
            stamp += 1
            # seen uses a fresh stamp; visited keeps the committed path
            if _reaches_avoid(indptr, nbr, nbr_edge, omega, dmask, dst, visited, pstamp,
                              seen, stamp, queue, x):
                best = x
                bestr = pr
                break
        if best < 0:
            return np.empty(0, dtype=np.int64)
        path[L] = best
        L += 1
        visited[best] = pstamp
    return path[:L].copy()


@njit(cache=True)
def _reaches_avoid(indptr, nbr, nbr_edge, omega, dmask, target, visited, vstamp, seen,
                   sstamp, queue, w):
    if target[w]:
        return True
    seen[w] = sstamp
    queue[0] = w
    h, t = 0, 1
    while h < t:
        u = queue[h]
        h += 1
        for k in range(indptr[u], indptr[u + 1]):
            e = nbr_edge[k]
            if e < 0 or omega[e] == 0:
                continue
            x = nbr[k]
            if not dmask[x] or visited[x] == vstamp or seen[x] == sstamp:
                continue
            if target[x]:
                return True
            seen[x] = sstamp
            queue[t] = x
            t += 1
    return False


@njit(cache=True)
def reach_set(indptr, nbr, nbr_edge, omega, allowed, sources):
    """Vertices joined to ``sources`` by open paths inside ``allowed`` (sources outside ignored)."""
    n = allowed.shape[0]
    seen = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    t = 0
    for v in range(n):
        if sources[v] and allowed[v]:
            seen[v] = True
            queue[t] = v
            t += 1
    h = 0
    while h < t:
        u = queue[h]
        h += 1
        for k in range(indptr[u], indptr[u + 1]):
            e = nbr_edge[k]
            if e < 0 or omega[e] == 0:
                continue
            x = nbr[k]
            if allowed[x] and not seen[x]:
                seen[x] = True
                queue[t] = x
                t += 1
    return seen


# ------------------------------------------------- heat bath conditioned on reach


@njit(cache=True)
def _real_joined_avoiding(indptr, nbr, nbr_edge, omega, src, dst, skip, mark, queue, token):
    """Are src and dst joined by open real edges other than ``skip``?  Ghosts are ignored."""
    mark[src] = token
    queue[0] = src
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(indptr[u], indptr[u + 1]):
            e = nbr_edge[k]
            if e < 0 or e == skip or omega[e] == 0:
                continue
            w = nbr[k]
            if w == dst:
                return True
            if mark[w] != token:
                mark[w] = token
                queue[tail] = w
                tail += 1
    return False


@njit(cache=True)
def _mark_cluster(indptr, nbr, nbr_edge, omega, sources, vx, vy, ox, oy, in_c, members, count):
    """Mark the real-edge cluster of ``sources`` (appending to ``members``); returns
    (new count, l1 radius of the marked set)."""
    top = count
    best = 0
    for s in sources:
        if not in_c[s]:
            in_c[s] = True
            members[top] = s
            top += 1
    i = count
    while i < top:
        u = members[i]
        i += 1
        d = abs(vx[u] - ox) + abs(vy[u] - oy)
        if d > best:
            best = d
        for k in range(indptr[u], indptr[u + 1]):
            e = nbr_edge[k]
            if e < 0 or omega[e] == 0:
                continue
            w = nbr[k]
            if not in_c[w]:
                in_c[w] = True
                members[top] = w
                top += 1
    return top, best


@njit(cache=True)
def conditioned_heat_bath_run(indptr, nbr, nbr_edge, eu, ev, omega, p_edge, q, uniforms2d,
                              markA, markB, qa, qb, token0, sources, vx, vy, ox, oy, level,
                              radii):
    """Heat-bath sweeps restricted to configurations whose source cluster reaches l1
    distance ``level``; an update that would break the event is refused.

    The starting omega must satisfy the event.  ``radii[i]`` receives the cluster
    radius after sweep i.  Returns the next free search token.
    """
    n = vx.shape[0]
    m = eu.shape[0]
    in_c = np.zeros(markA.shape[0], dtype=np.bool_)
    members = np.empty(markA.shape[0], dtype=np.int64)
    srcs = np.empty(1, dtype=np.int64)
    count, radius = _mark_cluster(indptr, nbr, nbr_edge, omega, sources, vx, vy, ox, oy,
                                  in_c, members, 0)
    token = token0
    for i in range(uniforms2d.shape[0]):
        uni = uniforms2d[i]
        for e in range(m):
            pe = p_edge[e]
            if q == 1.0:
                prob = pe
            else:
                token += 1
                conn = connected_avoiding(indptr, nbr, nbr_edge, omega, eu[e], ev[e], e,
                                          markA, markB, qa, qb, token)
                prob = pe if conn else pe / (pe + q * (1.0 - pe))
            new = 1 if uni[e] < prob else 0
            if new == omega[e]:
                continue
            u = eu[e]
            v = ev[e]
            if new == 1:
                omega[e] = 1
                if in_c[u] != in_c[v]:
                    srcs[0] = v if in_c[u] else u
                    count, r = _mark_cluster(indptr, nbr, nbr_edge, omega, srcs, vx, vy, ox,
                                             oy, in_c, members, count)
                    if r > radius:
                        radius = r
                continue
            if not in_c[u]:
                omega[e] = 0
                continue
            token += 1
            if _real_joined_avoiding(indptr, nbr, nbr_edge, omega, u, v, e, markA, qa, token):
                omega[e] = 0
                continue
            # closing a bridge of the source cluster: keep it only if the event survives
            omega[e] = 0
            for j in range(count):
                in_c[members[j]] = False
            count, r = _mark_cluster(indptr, nbr, nbr_edge, omega, sources, vx, vy, ox, oy,
                                     in_c, members, 0)
            if r >= level:
                radius = r
            else:
                omega[e] = 1
                for j in range(count):
                    in_c[members[j]] = False
                count, radius = _mark_cluster(indptr, nbr, nbr_edge, omega, sources, vx, vy,
                                              ox, oy, in_c, members, 0)
        radii[i] = radius
    return token
