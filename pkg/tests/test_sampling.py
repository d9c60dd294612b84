from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coreforge.errors import ArityMismatch, PoolTooSmall, Unsatisfiable
from coreforge.sampling import (
    ConversationFlow,
    Kind,
    SamplingStrategy,
    build_edges,
    pair_trees,
    sample_flow,
    title_index,
)
from conftest import outline_tree
from oracles import enumerate_flows

ABC = ("A", [("B", []), ("C", [])])


def ref(tree, title):
    return tree.tree_id, next(n.node_id for n in tree.nodes.values() if n.title == title)


def named_edges(tree, graph):
    name = {(tree.tree_id, nid): n.title for nid, n in tree.nodes.items()}
    return {(name[a], name[b]) for a, b in graph.edges}


def oracle_adjacency(trees, kind: Kind) -> tuple[dict, set]:
    """Move lists written straight from the strategy rules, without the library."""
    adj: dict = {}
    for t in trees:
        for nid, node in t.nodes.items():
            me = (t.tree_id, nid)
            out = adj.setdefault(me, [])
            out += [(t.tree_id, c) for c in node.children]
            if kind in (Kind.STRW, Kind.DTRW) and node.parent is not None:
                out.append((t.tree_id, node.parent))
            if kind is not Kind.LDS and node.parent is not None:
                out += [(t.tree_id, s) for s in t.nodes[node.parent].children if s != nid]
    bridges = set()
    if kind is Kind.DTRW:
        a, b = trees
        for src, dst in ((a, b), (b, a)):
            for s in src.nodes:
                for d in dst.nodes:
                    if dst.depth(d) <= 2:
                        bridges.add(((src.tree_id, s), (dst.tree_id, d)))
                        adj[(src.tree_id, s)].append((dst.tree_id, d))
    return adj, bridges


# -- edge sets -------------------------------------------------------------------

def test_lds_chain():
    tree = outline_tree(("A", [("B", [("C", [])])]))
    g = build_edges(tree, "LDS")
    assert named_edges(tree, g) == {("A", "B"), ("B", "C")}


def test_sids_edges():
    tree = outline_tree(ABC)
    assert named_edges(tree, build_edges(tree, "SIDS")) == {("A", "B"), ("A", "C"), ("B", "C"), ("C", "B")}


def test_strw_adds_upward_edges():
    tree = outline_tree(ABC)
    assert named_edges(tree, build_edges(tree, "STRW")) == {
        ("A", "B"), ("A", "C"), ("B", "C"), ("C", "B"), ("B", "A"), ("C", "A")}


def test_dtrw_bridges_reach_only_shallow_nodes():
    t1 = outline_tree(("A", [("B", [("D", [])])]), "https://x.org/1")
    t2 = outline_tree(("P", [("Q", [("R", [])])]), "https://x.org/2")
    g = build_edges([t1, t2], "DTRW")
    targets = {b for _, b in g.bridge_edges}
    assert ref(t2, "R") not in targets and ref(t1, "D") not in targets
    assert {ref(t2, "P"), ref(t2, "Q"), ref(t1, "A"), ref(t1, "B")} <= targets
    assert len(g.bridge_edges) == 3 * 2 * 2


def test_arity_mismatch():
    t = outline_tree(ABC)
    with pytest.raises(ArityMismatch):
        build_edges([t, t], "SIDS")
    with pytest.raises(ArityMismatch):
        build_edges([t], "DTRW")


def test_ineligible_section_drops_its_subtree():
    tree = outline_tree(("A", [("B", [("B1", [])]), ("References", [("Notes", [])])]))
    g = build_edges(tree, "STRW")
    names = {tree.nodes[nid].title for _, nid in g.nodes}
    assert names == {"A", "B", "B1"}


# -- pairing ---------------------------------------------------------------------

def pool():
    outlines = {
        "https://w.org/Albania": ("Albania", [("History", []), ("Geography", []), ("Sport", [])]),
        "https://w.org/Baseball": ("Baseball", [("History", []), ("Sport", [])]),
        "https://w.org/Cheese": ("Cheese", [("Types", [])]),
    }
    return [outline_tree(o, url) for url, o in outlines.items()]


def test_pairing_picks_best_title_match():
    trees = pool()
    index = title_index(trees)
    assert pair_trees("Albania", trees, index).title == "Baseball"


def test_pairing_single_candidate():
    trees = pool()[:2]
    assert pair_trees("Albania", trees, title_index(trees)).title == "Baseball"


def test_pairing_tie_goes_to_smaller_url():
    trees = [outline_tree(("Q", [("Zzz", [])]), "https://w.org/Q"),
             outline_tree(("M", [("Aaa", [])]), "https://w.org/M"),
             outline_tree(("L", [("Bbb", [])]), "https://w.org/L")]
    assert pair_trees("Q", trees, title_index(trees)).page_url == "https://w.org/L"


def test_pairing_needs_two_trees():
    trees = pool()[:1]
    with pytest.raises(PoolTooSmall):
        pair_trees("Albania", trees, title_index(trees))


# -- walking ---------------------------------------------------------------------

def test_sids_three_node_flows():
    tree = outline_tree(ABC)
    g = build_edges(tree, "SIDS")
    seen = set()
    for seed in range(200):
        flow = sample_flow(g, SamplingStrategy(Kind.SIDS, 3, 3, seed))
        seen.add(tuple(tree.nodes[n].title for _, n in flow.steps))
    assert seen == {("A", "B", "C"), ("A", "C", "B")}


def test_dtrw_two_small_trees_all_lengths_four():
    t1 = outline_tree(("A", [("B", [])]), "https://x.org/1")
    t2 = outline_tree(("P", [("Q", [])]), "https://x.org/2")
    g = build_edges([t1, t2], "DTRW")
    for seed in range(1000):
        flow = sample_flow(g, SamplingStrategy(Kind.DTRW, 4, 4, seed))
        assert len(flow) == 4
        assert flow.steps[0] == ref(t1, "A")
        assert flow.source_trees == [t1.tree_id, t2.tree_id]
        crossings = sum(1 for a, b in zip(flow.steps, flow.steps[1:]) if a[0] != b[0])
        assert crossings == 1


def test_dtrw_crossing_is_forced_near_the_end():
    t1 = outline_tree(("A", [("B", [("C", [("D", [])])])]), "https://x.org/1")
    t2 = outline_tree(("P", []), "https://x.org/2")
    g = build_edges([t1, t2], "DTRW")
    for seed in range(200):
        flow = sample_flow(g, SamplingStrategy(Kind.DTRW, 3, 5, seed))
        # P has no moves of its own, so reaching it always ends the walk
        assert flow.steps[-1] == ref(t2, "P")


def test_unsatisfiable_when_tree_too_small():
    tree = outline_tree(("A", [("B", [])]))
    with pytest.raises(Unsatisfiable):
        sample_flow(build_edges(tree, "LDS"), SamplingStrategy(Kind.LDS, 3, 6))


def test_kind_mismatch_rejected():
    tree = outline_tree(ABC)
    with pytest.raises(ValueError):
        sample_flow(build_edges(tree, "LDS"), SamplingStrategy(Kind.SIDS, 1, 2))


def test_sampling_is_deterministic():
    tree = outline_tree(("A", [("B", [("D", []), ("E", [])]), ("C", [("F", [])])]))
    g = build_edges(tree, "STRW")
    s = SamplingStrategy(Kind.STRW, 3, 6, 42)
    assert sample_flow(g, s).steps == sample_flow(g, s).steps


def test_default_bounds():
    assert (SamplingStrategy.default("LDS").min_turns, SamplingStrategy.default("LDS").max_turns) == (3, 6)
    assert SamplingStrategy.default("STRW", long=True).max_turns == 20
    with pytest.raises(ValueError):
        SamplingStrategy.default("LDS", long=True)
    with pytest.raises(ValueError):
        SamplingStrategy(Kind.LDS, 4, 3)


def test_flow_round_trip():
    flow = ConversationFlow(SamplingStrategy(Kind.SIDS, 6, 10, 3), [("u", "n0"), ("u", "n1")], ["u"])
    assert ConversationFlow.from_dict(flow.to_dict()) == flow


# -- membership against brute-force enumeration ------------------------------------

outline_st = st.recursive(
    st.just([]),
    lambda kids: st.lists(st.tuples(st.just("x"), kids), max_size=3),
    max_leaves=8,
)


def numbered(children, counter):
    out = []
    for _, kids in children:
        counter[0] += 1
        out.append((f"S{counter[0]}", numbered(kids, counter)))
    return out


@settings(max_examples=60, deadline=None)
@given(outline_st, st.sampled_from(["LDS", "SIDS", "STRW"]), st.integers(0, 2**32), st.integers(1, 4))
def test_single_tree_flows_are_enumerated_paths(children, kind, seed, lo):
    tree = outline_tree(("Root", numbered(children, [0])))
    if len(tree.nodes) > 12:
        return
    kind = Kind(kind)
    g = build_edges(tree, kind)
    adj, _ = oracle_adjacency([tree], kind)
    strategy = SamplingStrategy(kind, lo, lo + 2, seed)
    valid = enumerate_flows(adj, (tree.tree_id, tree.root), lo, lo + 2)
    if not valid:
        with pytest.raises(Unsatisfiable):
            sample_flow(g, strategy)
        return
    try:
        flow = sample_flow(g, strategy)
    except Unsatisfiable:
        return  # every restart got stuck short of ``lo``; legal for a random walk
    assert tuple(flow.steps) in valid


@settings(max_examples=40, deadline=None)
@given(outline_st, outline_st, st.integers(0, 2**32))
def test_dual_tree_flows_are_enumerated_paths(c1, c2, seed):
    t1 = outline_tree(("R1", numbered(c1, [0])), "https://x.org/1")
    t2 = outline_tree(("R2", numbered(c2, [100])), "https://x.org/2")
    if len(t1.nodes) + len(t2.nodes) > 12:
        return
    g = build_edges([t1, t2], "DTRW")
    adj, bridges = oracle_adjacency([t1, t2], Kind.DTRW)
    valid = enumerate_flows(adj, (t1.tree_id, t1.root), 2, 5, bridges, need_crossing=True)
    try:
        flow = sample_flow(g, SamplingStrategy(Kind.DTRW, 2, 5, seed))
    except Unsatisfiable:
        return
    assert tuple(flow.steps) in valid
