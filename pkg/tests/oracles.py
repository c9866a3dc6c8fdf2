"""Slow, dependency-free reference implementations used to check the package.

Nothing here imports the package's kernels: graphs are plain edge lists and
every quantity is computed by looping over configurations in pure Python.
"""

from __future__ import annotations

import itertools
import math
from collections import deque


def clusters(n, edges, open_edges, wired=()):
    """Number of connected components, with the ``wired`` vertices merged into one."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for (u, v), o in zip(edges, open_edges):
        if o:
            union(u, v)
    wired = list(wired)
    for w in wired[1:]:
        union(wired[0], w)
    return len({find(x) for x in range(n)})


def configs(m):
    return itertools.product((0, 1), repeat=m)


def rc_weight(n, edges, omega, p, q, wired=()):
    pe = p if isinstance(p, (list, tuple)) else [p] * len(edges)
    w = 1.0
    for o, pp in zip(omega, pe):
        w *= pp if o else 1 - pp
    return w * q ** clusters(n, edges, omega, wired)


def rc_probability(n, edges, p, q, predicate, wired=()):
    num = den = 0.0
    for omega in configs(len(edges)):
        w = rc_weight(n, edges, omega, p, q, wired)
        den += w
        if predicate(omega):
            num += w
    return num / den


def rc_partition(n, edges, p, q, wired=()):
    return sum(rc_weight(n, edges, omega, p, q, wired) for omega in configs(len(edges)))


def joined(n, edges, omega, A, B, allowed=None):
    """Open path with every vertex in ``allowed`` from a vertex of A to a vertex of B."""
    allowed = set(range(n)) if allowed is None else set(allowed)
    adj = {v: [] for v in range(n)}
    for (u, v), o in zip(edges, omega):
        if o and u in allowed and v in allowed:
            adj[u].append(v)
            adj[v].append(u)
    start = [a for a in A if a in allowed]
    targets = {b for b in B if b in allowed}
    seen = set(start)
    queue = deque(start)
    while queue:
        u = queue.popleft()
        if u in targets:
            return True
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return False


def potts_correlation(n, edges, q, beta, x, y):
    """E[sigma_x . sigma_y] with simplex spins, over all q^n colourings."""
    def dot(a, b):
        return 1.0 if a == b else -1.0 / (q - 1)

    num = den = 0.0
    for spins in itertools.product(range(q), repeat=n):
        w = math.exp(beta * sum(dot(spins[u], spins[v]) for u, v in edges))
        den += w
        num += w * dot(spins[x], spins[y])
    return num / den


def hamming_distance(m, member):
    """Distance to the set {omega : member(omega)} for every omega (BFS on the hypercube)."""
    dist = {}
    queue = deque()
    for omega in configs(m):
        if member(omega):
            dist[omega] = 0
            queue.append(omega)
    while queue:
        w = queue.popleft()
        for e in range(m):
            v = w[:e] + (1 - w[e],) + w[e + 1:]
            if v not in dist:
                dist[v] = dist[w] + 1
                queue.append(v)
    return dist


def slab(x0, x1, y0, y1, fiber_n, fiber_edges):
    """Vertices (x, y, s) and edges of the slab window, independently of the package."""
    verts = [(x, y, s) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)
             for s in range(fiber_n)]
    idx = {v: i for i, v in enumerate(verts)}
    edges = []
    for (x, y, s) in verts:
        if x < x1:
            edges.append((idx[(x, y, s)], idx[(x + 1, y, s)]))
        if y < y1:
            edges.append((idx[(x, y, s)], idx[(x, y + 1, s)]))
    for x in range(x0, x1 + 1):
        for y in range(y0, y1 + 1):
            for a, b in fiber_edges:
                edges.append((idx[(x, y, a)], idx[(x, y, b)]))
    return verts, idx, edges


def crossing(verts, idx, edges, omega, rect, direction):
    """Fattened-side crossing of rect = (a, b, c, d) inside the fattened rectangle."""
    a, b, c, d = rect
    inside = [i for i, (x, y, s) in enumerate(verts) if a <= x <= b and c <= y <= d]
    if direction == "horizontal":
        A = [i for i in inside if verts[i][0] == a]
        B = [i for i in inside if verts[i][0] == b]
    else:
        A = [i for i in inside if verts[i][1] == c]
        B = [i for i in inside if verts[i][1] == d]
    return joined(len(verts), edges, omega, A, B, inside)
