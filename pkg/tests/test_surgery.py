import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fkslab.geometry import BaseWindow, FiberGraph, RectRegion, build_slab
from fkslab.measure_oracle import ModelParams
from fkslab.surgery import (EdgeOrdering, GluingInstance, InstanceError, SurgeryFailure,
                            almost_overlap_witnesses, beta_from, brute_force_lex_min,
                            certify_topological_condition, check_surgery, connecting_surgery,
                            exact_gluing, glue_events, glue_status, gluing_estimate, lex_less,
                            minimal_path, ordering_trial, overlap_points, scan)

import oracles

K2 = FiberGraph.path(2)


def ref_status(inst, w):
    """A, B, X from their definitions with plain BFS (no package kernels)."""
    g = inst.graph
    n = g.n_vertices
    edges = [tuple(map(int, e)) for e in g.edges]
    pts = {v: g.base_point(v) for v in range(n)}
    D = [v for v in range(n) if pts[v] in inst.D]
    Dp = [v for v in range(n) if pts[v] in inst.Dp]
    sel = lambda S: [v for v in range(n) if pts[v] in S]
    A0, A1, A2, B1, B2 = (sel(getattr(inst, k)) for k in ("A0", "A1", "A2", "B1", "B2"))

    def clusters_in(region):
        region = set(region)
        adj = {v: [] for v in region}
        for (u, v), o in zip(edges, w):
            if o and u in region and v in region:
                adj[u].append(v)
                adj[v].append(u)
        lab = {}
        for s in region:
            if s in lab:
                continue
            stack = [s]
            lab[s] = s
            while stack:
                u = stack.pop()
                for x in adj[u]:
                    if x not in lab:
                        lab[x] = s
                        stack.append(x)
        return lab

    labD, labDp = clusters_in(D), clusters_in(Dp)
    a0 = {labDp[v] for v in A0}

    def crosses(S1, S2):
        # D-clusters touching both sides whose D'-cluster meets A0
        c = {labD[v] for v in S1} & {labD[v] for v in S2}
        return any(labDp[r] in a0 for r in c), bool(c)

    A, _ = crosses(A1, A2)
    X, B = crosses(B1, B2)
    return A, B, X


@pytest.fixture(scope="module")
def small():
    return GluingInstance.standard(2, K2, margin=0)


@given(st.integers(0, 2**32 - 1), st.floats(0.3, 0.7))
def test_glue_status_matches_definitions(seed, p):
    inst = GluingInstance.standard(2, K2, margin=1)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        w = (rng.random(inst.graph.n_edges) < p).astype(np.uint8)
        st_ = glue_status(inst, w)
        assert (st_.A, st_.B, st_.X) == ref_status(inst, w)
        assert not st_.X or st_.B
        assert (st_.Y1 or st_.Y2) <= st_.Y


def test_glue_events_match_single_status():
    inst = GluingInstance.standard(1, FiberGraph.trivial(), margin=0)
    from fkslab.measure_oracle import oracle_for
    orc = oracle_for(inst.graph)
    ev = glue_events(inst)
    tabs = {k: orc.table(e) for k, e in ev.items()}
    for c in range(orc.n_configs):
        w = np.array([(c >> e) & 1 for e in range(inst.graph.n_edges)], dtype=np.uint8)
        st_ = glue_status(inst, w)
        assert (tabs["A"][c], tabs["B"][c], tabs["X"][c], tabs["Y1"][c], tabs["Y2"][c]) == \
            (st_.A, st_.B, st_.X, st_.Y1, st_.Y2)


def test_instance_validation():
    g = build_slab(BaseWindow(0, 3, 0, 3), K2)
    D = RectRegion(0, 2, 0, 2)
    with pytest.raises(InstanceError):
        GluingInstance(g, D.points(), D.points(), [(3, 3)], D.side("left"), D.side("right"),
                       D.side("bottom"), D.side("top"))
    with pytest.raises(InstanceError):
        GluingInstance.standard(0, K2)
    inst = GluingInstance.standard(3, K2)
    assert inst.certificate == "rectangle"


def test_topological_condition_scan_and_failure():
    g = build_slab(BaseWindow(0, 3, 0, 3), K2)
    # an L-shaped D has no rectangle shortcut: the path scan certifies it
    D = [(x, y) for x in range(3) for y in range(3) if not (x == 2 and y == 2)]
    inst = GluingInstance(g, D, D, [(0, 1)], [(0, 0), (0, 1), (0, 2)], [(2, 0), (2, 1)],
                          [(0, 0), (1, 0), (2, 0)], [(0, 2), (1, 2)])
    assert inst.certificate.startswith("scan:")
    # A's on the bottom, B's on the left/right do not force an intersection with A's
    # placed on the same side
    with pytest.raises(InstanceError):
        GluingInstance(g, RectRegion(0, 2, 0, 2).points(), RectRegion(0, 2, 0, 2).points(),
                       [(0, 0)], [(0, 0)], [(1, 0)], [(0, 1)], [(2, 1)])


def test_lex_less_prefix_rule():
    assert lex_less((1, 2), (1, 2, 0))
    assert lex_less((0, 9), (1,))
    assert not lex_less((1, 2), (1, 2))


@given(st.integers(0, 2**32 - 1), st.floats(0.45, 0.8), st.sampled_from([1, 2]))
def test_minimal_path_equals_enumeration(seed, p, which):
    inst = GluingInstance.standard(2, K2, margin=0)
    g = inst.graph
    rng = np.random.default_rng(seed)
    w = (rng.random(g.n_edges) < p).astype(np.uint8)
    o = EdgeOrdering.random(g.n_edges, rng)
    s, t = inst.sides(which)
    got = minimal_path(inst, w, o, which)
    ref = brute_force_lex_min(g, w, o, inst.masks["D"], s, t)
    assert got == ref
    if got is not None:
        assert all(w[g.edge_id(a, b)] for a, b in zip(got, got[1:]))
        assert len(set(got)) == len(got)


def _y_samples(inst, which, count, p, seed, max_draws=400_000):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_draws):
        w = (rng.random(inst.graph.n_edges) < p).astype(np.uint8)
        st_ = glue_status(inst, w)
        if st_.Y1 if which == 1 else st_.Y2:
            out.append(w)
            if len(out) == count:
                break
    return out


def test_overlap_points_exist_on_y():
    inst = GluingInstance.standard(3, K2, margin=1)
    for w in _y_samples(inst, 1, 30, 0.5, 2):
        o = EdgeOrdering.identity(inst.graph.n_edges)
        sc = scan(inst, w, o)
        assert sc.W, "every configuration in Y1 has an overlap point"
        assert sc.V <= sc.U
        assert sc.W <= {inst.graph.base_point(v) for v in sc.gamma}


@pytest.mark.parametrize("n,fiber,which", [(3, K2, 1), (3, K2, 2), (3, FiberGraph.path(3), 1),
                                           (2, FiberGraph.complete(3), 1)])
def test_surgery_lands_in_x_with_concatenated_path(n, fiber, which):
    inst = GluingInstance.standard(n, fiber, margin=1)
    rng = np.random.default_rng(n)
    for w in _y_samples(inst, which, 40, 0.5, 10 + n):
        o = EdgeOrdering.random(inst.graph.n_edges, rng)
        res = connecting_surgery(inst, w, o, which)
        chk = check_surgery(inst, w, res, o, which)
        assert chk.ok, chk
        assert res.expected[:res.i] == res.gamma[:res.i]
        assert res.expected[len(res.expected) - (len(res.gamma) - res.j - 1):] == \
            res.gamma[res.j + 1:]


def test_surgery_rejects_configurations_outside_y():
    inst = GluingInstance.standard(2, K2, margin=0)
    w = np.ones(inst.graph.n_edges, dtype=np.uint8)
    with pytest.raises(ValueError):
        connecting_surgery(inst, w, EdgeOrdering.identity(inst.graph.n_edges))


def test_surgery_failure_carries_local_configuration():
    err = SurgeryFailure("x", {"gamma": [1, 2]})
    assert err.local["gamma"] == [1, 2]


def test_ordering_trial_on_a_rich_configuration():
    inst = GluingInstance.standard(6, K2, margin=0)
    rng = np.random.default_rng(1)
    E = inst.graph.n_edges
    while True:
        w = (rng.random(E) < 0.45).astype(np.uint8)
        if not glue_status(inst, w).B:
            continue
        gam = minimal_path(inst, w, EdgeOrdering.identity(E))
        if len(almost_overlap_witnesses(inst, w, 1, gam)) >= 4:
            break
    tr = ordering_trial(inst, w, 100, np.random.default_rng(0))
    assert tr.eligible > 0 and tr.frequency >= 0.25 - 3 * tr.stderr


def test_beta_from():
    assert beta_from(0.5, 0.5, 0.5) == math.inf
    assert math.isnan(beta_from(0.1, 1.0, 0.5))
    b = beta_from(0.2, 0.5, 0.5)
    assert math.isclose(0.5 * 0.5 - 0.5 ** b, 0.2)


def test_exact_gluing_agrees_with_monte_carlo():
    inst = GluingInstance.standard(1, K2, margin=0)
    params = ModelParams(0.45, 1.0)
    ex = exact_gluing(inst, params)
    est = gluing_estimate(inst, params, 40_000, seed=3)
    for key in ("X", "A", "B"):
        rec = getattr(est, key)
        assert abs(rec.mean - ex[key]) <= 3 * rec.stderr + 1e-9
    assert abs(est.c_hat - ex["ratio"]) <= 3 * est.c_se
    assert math.isclose(ex["Y1"] + ex["Y2"] - 0, ex["Y1"] + ex["Y2"])
    assert ex["X"] <= min(ex["A"], ex["B"])


def test_gluing_estimate_with_heat_bath_and_log():
    inst = GluingInstance.standard(2, K2, margin=0)
    est = gluing_estimate(inst, ModelParams(0.45, 1.5), 300, seed=1, burn_in=50, keep_log=True)
    assert len(est.log) == 300
    assert 0 <= est.X.mean <= min(est.A.mean, est.B.mean)
