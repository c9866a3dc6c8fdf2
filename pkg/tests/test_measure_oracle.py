import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from fkslab.geometry import (BaseWindow, CouplingJ, FiberGraph, Graph, build_long_range,
                             build_slab, builtin_graph, builtin_graphs)
from fkslab.measure_oracle import (EnumerationCapError, Event, ExactOracle, ModelParams,
                                   all_increasing_tables, all_open, any_open, brute_force_hamming,
                                   cluster_count, config_weight, connection, edge_open,
                                   es_p_of_beta, exact_event_probability, exact_expectation,
                                   exact_potts_two_point, hamming_table, long_range_weight,
                                   monotonicity, oracle_for, partition_function, table_to_member,
                                   two_point, verify_builtin_suite, verify_inequalities,
                                   verify_monotone_family)

import oracles


@st.composite
def small_graphs(draw, max_vertices=5, max_edges=7):
    n = draw(st.integers(2, max_vertices))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=min(max_edges, len(pairs)),
                          unique=True))
    boundary = draw(st.lists(st.integers(0, n - 1), max_size=n, unique=True))
    return Graph(n, edges, boundary, "hyp")


def edge_list(g):
    return [tuple(map(int, e)) for e in g.edges]


probs = st.floats(0.05, 0.95)
qs = st.floats(1.0, 4.0)


@given(small_graphs(), probs, qs, st.sampled_from(["free", "wired"]))
def test_partition_function_matches_reference(g, p, q, bc):
    wired = list(g.boundary) if bc == "wired" else ()
    ref = oracles.rc_partition(g.n_vertices, edge_list(g), p, q, wired)
    got = ExactOracle(g, bc).partition_function(ModelParams(p, q, bc))
    assert math.isclose(got, ref, rel_tol=1e-12)


@given(small_graphs(), probs, qs, st.sampled_from(["free", "wired"]))
def test_two_point_matches_reference(g, p, q, bc):
    wired = list(g.boundary) if bc == "wired" else ()
    x, y = 0, g.n_vertices - 1
    ref = oracles.rc_probability(g.n_vertices, edge_list(g), p, q,
                                 lambda w: oracles.joined(g.n_vertices, edge_list(g), w, [x], [y]),
                                 wired)
    got = exact_event_probability(g, ModelParams(p, q, bc), two_point(g, x, y))
    assert math.isclose(got, ref, rel_tol=1e-10, abs_tol=1e-14)


@given(small_graphs(), st.lists(probs, min_size=7, max_size=7), qs)
def test_per_edge_weights(g, pe, q):
    pe = pe[:g.n_edges]
    ref = oracles.rc_probability(g.n_vertices, edge_list(g), list(pe), q, lambda w: w[0] == 1)
    got = exact_event_probability(g, ModelParams(np.array(pe), q), edge_open(0))
    assert math.isclose(got, ref, rel_tol=1e-10)


@given(small_graphs(), probs, qs)
def test_config_weight_and_cluster_count(g, p, q):
    rng = np.random.default_rng(0)
    for _ in range(5):
        w = rng.integers(0, 2, g.n_edges)
        assert cluster_count(g, w) == oracles.clusters(g.n_vertices, edge_list(g), w)
        ref = oracles.rc_weight(g.n_vertices, edge_list(g), tuple(w), p, q)
        assert math.isclose(config_weight(g, w, ModelParams(p, q)), ref, rel_tol=1e-12)


@given(small_graphs(), probs)
def test_bernoulli_product_formula(g, p):
    """At q = 1 an event's probability is the sum of products of edge marginals."""
    E = g.n_edges
    ev = all_open([0, E - 1]) | edge_open(E // 2)
    got = exact_event_probability(g, ModelParams(p, 1.0), ev)
    ref = 0.0
    for w in oracles.configs(E):
        if (w[0] and w[E - 1]) or w[E // 2]:
            ref += math.prod(p if o else 1 - p for o in w)
    assert abs(got - ref) <= 1e-12


def test_endpoints_of_p():
    g = builtin_graph("square")
    assert exact_event_probability(g, ModelParams(0.0, 2.0), edge_open(0)) == 0.0
    assert exact_event_probability(g, ModelParams(1.0, 2.0), all_open(range(4))) == 1.0


def test_params_validation():
    with pytest.raises(ValueError, match="q must be >= 1"):
        ModelParams(0.5, 0.5)
    with pytest.raises(ValueError):
        ModelParams(1.2, 1.0)
    with pytest.raises(ValueError):
        ModelParams(0.5, 1.0, "periodic")


def test_enumeration_cap():
    g = build_slab(BaseWindow(0, 4, 0, 4), FiberGraph.trivial())   # 40 edges
    with pytest.raises(EnumerationCapError):
        partition_function(g, ModelParams(0.5, 1.0))
    with pytest.raises(EnumerationCapError):
        exact_potts_two_point(builtin_graph("grid3x3"), 5, 0.5, 0, 8)


def test_square_closed_form():
    """Square at q = 2: the four-cycle has one independent cycle, so Z is a short polynomial."""
    g = builtin_graph("square")
    p, q = 0.3, 2.0
    ref = 0.0
    for k in range(5):
        # clusters: 4 - k for a forest (k <= 3), 1 when all four edges are open
        clusters = 4 - k if k < 4 else 1
        ref += math.comb(4, k) * p ** k * (1 - p) ** (4 - k) * q ** clusters
    assert math.isclose(partition_function(g, ModelParams(p, q)), ref, rel_tol=1e-14)


@pytest.mark.parametrize("name", ["triangle", "square", "diamond", "K4", "ladder3"])
@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("beta", [0.2, 1.0])
def test_edwards_sokal_against_reference_potts(name, q, beta):
    g = builtin_graph(name)
    x, y = 0, g.n_vertices - 1
    spin = oracles.potts_correlation(g.n_vertices, edge_list(g), q, beta, x, y)
    assert math.isclose(exact_potts_two_point(g, q, beta, x, y), spin, rel_tol=1e-12)
    fk = exact_event_probability(g, ModelParams(es_p_of_beta(beta, q), q), two_point(g, x, y))
    assert abs(fk - spin) <= 1e-10


def test_es_p_of_beta():
    assert es_p_of_beta(0.0, 2) == 0.0
    assert math.isclose(es_p_of_beta(1.0, 2), 1 - math.exp(-2.0))
    with pytest.raises(ValueError):
        es_p_of_beta(1.0, 1.0)


def test_long_range_weight_is_proportional():
    g = build_long_range(BaseWindow(0, 1, 0, 1), CouplingJ.radial({1: 1.0, 2: 0.5}))
    beta, q = 0.8, 2.0
    mp = ModelParams.long_range(g, beta, q)
    ratios = []
    rng = np.random.default_rng(3)
    for _ in range(10):
        w = rng.integers(0, 2, g.n_edges)
        ratios.append(long_range_weight(g, w, beta, q) / config_weight(g, w, mp))
    assert np.allclose(ratios, ratios[0], rtol=1e-12)


@given(st.integers(1, 8), st.data())
def test_hamming_table_matches_bfs(m, data):
    member = np.array(data.draw(st.lists(st.booleans(), min_size=1 << m, max_size=1 << m)))
    assume(member.any())
    got = hamming_table(member, m)
    ref = oracles.hamming_distance(m, lambda w: member[sum(b << e for e, b in enumerate(w))])
    for w, d in ref.items():
        assert got[sum(b << e for e, b in enumerate(w))] == d
    assert np.array_equal(got, brute_force_hamming(member, m))


def test_hamming_table_of_empty_set():
    assert np.all(hamming_table(np.zeros(8, dtype=bool), 3) == 4)


@pytest.mark.parametrize("n,count", [(0, 2), (1, 3), (2, 6), (3, 20), (4, 168), (5, 7581)])
def test_dedekind_numbers(n, count):
    tabs = all_increasing_tables(n)
    assert len(tabs) == count
    if n <= 4:
        for t in tabs[::7]:
            assert monotonicity(table_to_member(int(t), n), n) in ("increasing", "constant")


def test_monotonicity_scan():
    g = builtin_graph("square")
    orc = oracle_for(g)
    inc = orc.table(two_point(g, 0, 3))
    assert monotonicity(inc, 4) == "increasing"
    assert monotonicity(~inc, 4) == "decreasing"
    assert monotonicity(orc.table(edge_open(0)) ^ orc.table(edge_open(1)), 4) is None


def test_event_algebra_and_from_predicate():
    g = builtin_graph("path3")
    orc = oracle_for(g)
    both = orc.table(edge_open(0) & edge_open(1))
    pred = orc.table(Event.from_predicate(lambda w: bool(w[0] and w[1])))
    assert np.array_equal(both, pred)
    assert np.array_equal(orc.table(~edge_open(0)), ~orc.table(edge_open(0)))
    assert (~edge_open(0)).monotone == "decreasing"


def test_connection_within_region():
    g = builtin_graph("square")       # vertices (0,0),(0,1),(1,0),(1,1) in slab order
    ev_all = connection(g, [0], [3])
    ev_cut = connection(g, [0], [3], within=[0, 1, 3])
    p = ModelParams(0.5, 1.0)
    assert exact_event_probability(g, p, ev_cut) < exact_event_probability(g, p, ev_all)


def test_exact_expectation():
    g = builtin_graph("square")
    orc = oracle_for(g)
    cnt = orc.open_count.astype(float)
    assert math.isclose(exact_expectation(g, ModelParams(0.3, 1.0), cnt), 1.2)


@pytest.mark.parametrize("q", [1.5, 2.0])
@pytest.mark.parametrize("name", ["square", "K4"])
def test_inequalities_on_standard_events(name, q):
    g = builtin_graph(name)
    evs = [edge_open(0), any_open([0, 1]), two_point(g, 0, g.n_vertices - 1),
           ~two_point(g, 0, g.n_vertices - 1)]
    rep = verify_inequalities(g, 0.3, 0.5, q, evs)
    assert rep.ok, rep.violations
    assert rep.events_checked == 4


def test_false_monotone_claim_is_reported():
    g = builtin_graph("square")
    lying = Event(lambda b: ~edge_open(0)(b), "closed0", "increasing")
    rep = verify_inequalities(g, 0.3, 0.5, 2.0, [lying])
    assert not rep.ok and rep.violations[0].check_name == "monotone_claim"


def test_family_check_on_square():
    rep = verify_monotone_family(builtin_graph("square"), 0.3, 0.5, 1.5)
    assert rep.ok
    assert rep.events_checked == 2 * 168 - 2


def test_builtin_suite_without_families():
    rep = verify_builtin_suite(families=False)
    assert rep.ok
    names = {r.check_name for r in rep.rows}
    assert {"product_marginal", "edwards_sokal", "finite_energy_lower",
            "hamming_increasing"} <= names
