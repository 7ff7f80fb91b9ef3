import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import PathOracle, has_cycle, random_admg

from jcitransfer.admg import (
    Admg,
    GraphError,
    JciBackground,
    SeparationQuery,
    VarId,
    admg_from_json,
    admg_to_json,
    all_queries,
    batched_separation,
    edge_arrays,
    enumerate_admgs,
    implied_statements,
    is_acyclic,
    m_separated,
    make_universe,
    satisfies_background,
)

Q = SeparationQuery


def test_is_acyclic_basic():
    assert is_acyclic([], 3)
    assert not is_acyclic([(0, 1), (1, 2), (2, 0)], 3)
    with pytest.raises(GraphError):
        is_acyclic([(0, 3)], 3)


def test_is_acyclic_counts_all_three_node_graphs():
    pairs = list(itertools.permutations(range(3), 2))
    accepted = 0
    for mask in range(1 << len(pairs)):
        edges = [p for i, p in enumerate(pairs) if mask >> i & 1]
        assert is_acyclic(edges, 3) == (not has_cycle(edges, 3))
        accepted += is_acyclic(edges, 3)
    assert accepted == 25


def test_admg_invariants():
    u = make_universe(["C1"], ["X1", "X2"])
    with pytest.raises(GraphError):
        Admg(u, frozenset({(1, 1)}))
    with pytest.raises(GraphError):
        Admg(u, frozenset(), frozenset({(2, 2)}))
    with pytest.raises(GraphError):
        Admg(u, frozenset({(1, 2), (2, 1)}))
    # a directed and a bidirected edge may share a pair
    g = Admg(u, frozenset({(1, 2)}), frozenset({(2, 1)}))
    assert g.bidirected == {(1, 2)}


def test_universe_must_be_dense():
    with pytest.raises(GraphError):
        Admg((VarId(0, "context"), VarId(2, "system")))


def test_query_invariants():
    with pytest.raises(GraphError):
        Q(1, 1)
    with pytest.raises(GraphError):
        Q(0, 1, frozenset({1}))
    assert Q(3, 1, frozenset({0})).canonical() == Q(1, 3, frozenset({0}))


def test_collider_examples(shift_graph):
    # C1 _||_ X2 | X1 holds; adding X3 opens the collider C1 -> X3 <- X2
    assert m_separated(shift_graph, Q(0, 2, frozenset({1})))
    assert not m_separated(shift_graph, Q(0, 2, frozenset({1, 3})))


def test_edgeless_graph_separates_everything():
    u = make_universe(["C1", "C2"], ["X1", "X2"])
    g = Admg(u)
    assert all(implied_statements(g, 2).values())


def test_bidirected_edge_connects():
    u = make_universe([], ["A", "B", "C"])
    g = Admg(u, frozenset({(0, 2)}), frozenset({(1, 2)}))
    # A -> C <-> B: collider at C
    assert m_separated(g, Q(0, 1))
    assert not m_separated(g, Q(0, 1, frozenset({2})))


def test_malformed_query_rejected(shift_graph):
    with pytest.raises(GraphError):
        m_separated(shift_graph, Q(0, 9))


@pytest.mark.parametrize("seed", range(40))
def test_m_separation_matches_path_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    u = make_universe([], [f"V{i}" for i in range(n)])
    g = random_admg(rng, u)
    oracle = PathOracle(g)
    for q in all_queries(n, 3):
        assert m_separated(g, q) == oracle.separated(q), (str(g), q)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_m_separation_symmetric(seed):
    rng = np.random.default_rng(seed)
    u = make_universe([], [f"V{i}" for i in range(5)])
    g = random_admg(rng, u)
    for q in all_queries(5, 3):
        assert m_separated(g, q) == m_separated(g, Q(q.b, q.a, q.cond))


def test_satisfies_background(chain_graph, chain_bg):
    assert satisfies_background(chain_graph, chain_bg)
    # X1 -> C2 would close a cycle with C2 -> X1; X2 -> C1 breaks exogeneity acyclically
    assert not satisfies_background(chain_graph.with_edges(directed=[(3, 0)]), chain_bg)
    assert not satisfies_background(chain_graph.with_edges(directed=[(0, 3)]), chain_bg)
    assert not satisfies_background(chain_graph.with_edges(bidirected=[(1, 4)]), chain_bg)
    assert not satisfies_background(Admg(chain_graph.universe, chain_graph.directed), chain_bg)
    assert satisfies_background(
        chain_graph.with_edges(directed=[(0, 3)]), JciBackground(0, 3, forbid_c1_to_y=False)
    )


def test_background_requires_roles(five_vars):
    with pytest.raises(GraphError):
        list(enumerate_admgs(five_vars, JciBackground(c1=2, y=3)))


def test_enumeration_counts(five_vars):
    closed_form = 25 * 2**6 * 2**3
    free = list(enumerate_admgs(five_vars, JciBackground(0, 3, forbid_c1_to_y=False)))
    assert len(free) == closed_form == 12800
    forbidden = list(enumerate_admgs(five_vars, JciBackground(0, 3)))
    assert len(forbidden) == 25 * 2**5 * 2**3 == 6400
    assert len(set(forbidden)) == len(forbidden)


def test_enumeration_single_pair():
    u = make_universe(["C1"], ["X1"])
    graphs = list(enumerate_admgs(u, JciBackground(0, 1)))
    assert graphs == [Admg(u)]


def test_enumeration_cap():
    u = make_universe(["C1", "C2"], [f"X{i}" for i in range(6)])
    with pytest.raises(GraphError):
        next(enumerate_admgs(u, JciBackground(0, 2)))


def test_enumeration_is_sound_and_deterministic(five_vars, chain_bg):
    first = list(enumerate_admgs(five_vars, chain_bg))
    assert first == list(enumerate_admgs(five_vars, chain_bg))
    assert all(satisfies_background(g, chain_bg) for g in first)


@pytest.mark.parametrize("forbid", [False, True])
def test_enumeration_complete_against_rejection_sampling(five_vars, forbid):
    bg = JciBackground(0, 3, forbid_c1_to_y=forbid)
    space = set(enumerate_admgs(five_vars, bg))
    rng = np.random.default_rng(11)
    pairs = list(itertools.permutations(range(5), 2))
    bipairs = list(itertools.combinations(range(5), 2))
    hits = 0
    for _ in range(40000):
        d = {p for p in pairs if rng.random() < 0.15}
        b = {p for p in bipairs if rng.random() < 0.3}
        if not is_acyclic(d, 5):
            continue
        g = Admg(five_vars, frozenset(d), frozenset(b))
        if satisfies_background(g, bg):
            hits += 1
            assert g in space
    assert hits > 100


def test_implied_statements(chain_graph):
    facts = implied_statements(chain_graph, 3)
    assert facts[Q(1, 3, frozenset({2}))] is True
    assert facts[Q(1, 3)] is False
    # C2 <-> C1 -> X3 stays open; the source-domain fact needs C1 in the conditioning set
    assert facts[Q(1, 4, frozenset({3}))] is False
    assert facts[Q(1, 4, frozenset({3, 0}))] is True
    assert len(facts) == 80
    for q, v in facts.items():
        assert v == m_separated(chain_graph, q)


def test_implied_statements_two_nodes():
    g = Admg(make_universe([], ["A", "B"]))
    assert implied_statements(g, 0) == {Q(0, 1): True}


def test_batched_separation_matches_scalar(five_vars, chain_bg):
    dadj, bi, pairs = edge_arrays(five_vars, chain_bg)
    graphs = list(enumerate_admgs(five_vars, chain_bg))
    rng = np.random.default_rng(0)
    picks = rng.choice(len(graphs), size=200, replace=False)
    for q in all_queries(5, 3):
        col = batched_separation(dadj[picks], bi[picks], pairs, q)
        assert col.tolist() == [m_separated(graphs[i], q) for i in picks]


def test_graph_json_round_trip(chain_graph):
    text = admg_to_json(chain_graph)
    assert json.loads(text)["bidirected"] == [["C1", "C2"]]
    assert admg_from_json(text) == chain_graph
    with pytest.raises(GraphError):
        admg_from_json('{"context": ["C1"], "system": ["X1"], "directed": [["C1", "Z"]]}')
