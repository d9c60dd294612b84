"""Conversation-flow sampling over title trees.

Four strategies, each defined by which moves it allows:

LDS   parent -> child only
SIDS  parent -> child, sibling <-> sibling
STRW  parent <-> child, sibling <-> sibling
DTRW  two STRW graphs joined by bridge edges; a flow crosses exactly once

Every walk starts at the root (tree A's root for DTRW), never revisits a node
and stops at a target length drawn uniformly from [min_turns, max_turns], or
earlier if it is stuck after reaching min_turns.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Sequence

from .errors import ArityMismatch, PoolTooSmall, Unsatisfiable
from .ingest import TitleNode, TitleTree, is_boilerplate
from .retrieval import Bm25Index, build_index

NodeRef = tuple[str, str]  # (tree_id, node_id)
Edge = tuple[NodeRef, NodeRef]

DEFAULT_RESTARTS = 32
BRIDGE_MAX_DEPTH = 2


class Kind(str, Enum):
    LDS = "LDS"
    SIDS = "SIDS"
    STRW = "STRW"
    DTRW = "DTRW"


DEFAULT_BOUNDS = {Kind.LDS: (3, 6), Kind.SIDS: (6, 10), Kind.STRW: (6, 10), Kind.DTRW: (6, 10)}
LONG_BOUNDS = (11, 20)


@dataclass(frozen=True)
class SamplingStrategy:
    kind: Kind
    min_turns: int
    max_turns: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not 1 <= self.min_turns <= self.max_turns:
            raise ValueError(f"need 1 <= min_turns <= max_turns, got {self.min_turns}, {self.max_turns}")

    @classmethod
    def default(cls, kind: Kind | str, seed: int = 0, long: bool = False) -> "SamplingStrategy":
        kind = Kind(kind)
        if long:
            if kind is Kind.LDS:
                raise ValueError("LDS has no long variant")
            lo, hi = LONG_BOUNDS
        else:
            lo, hi = DEFAULT_BOUNDS[kind]
        return cls(kind, lo, hi, seed)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "min_turns": self.min_turns, "max_turns": self.max_turns, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingStrategy":
        return cls(Kind(d["kind"]), int(d["min_turns"]), int(d["max_turns"]), int(d["seed"]))


@dataclass(frozen=True)
class FlowGraph:
    kind: Kind
    nodes: frozenset[NodeRef]
    edges: frozenset[Edge]
    bridge_edges: frozenset[Edge] = frozenset()
    roots: tuple[NodeRef, ...] = ()

    @cached_property
    def _adjacency(self) -> dict[NodeRef, list[tuple[NodeRef, bool]]]:
        adj: dict[NodeRef, list[tuple[NodeRef, bool]]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            adj[a].append((b, False))
        for a, b in self.bridge_edges:
            adj[a].append((b, True))
        for moves in adj.values():
            moves.sort()
        return adj

    def moves(self, node: NodeRef) -> list[tuple[NodeRef, bool]]:
        """Sorted ``(target, is_bridge)`` pairs leaving ``node``."""
        return self._adjacency.get(node, [])


@dataclass
class ConversationFlow:
    strategy: SamplingStrategy
    steps: list[NodeRef]
    source_trees: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.to_dict(),
            "steps": [list(s) for s in self.steps],
            "source_trees": list(self.source_trees),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConversationFlow":
        return cls(
            SamplingStrategy.from_dict(d["strategy"]),
            [(a, b) for a, b in d["steps"]],
            list(d["source_trees"]),
        )


def _default_eligible(node: TitleNode) -> bool:
    return not is_boilerplate(node)


def _eligible_nodes(tree: TitleTree, eligible: Callable[[TitleNode], bool]) -> list[TitleNode]:
    """Nodes passing ``eligible`` whose ancestors all pass too, in document order."""
    keep: set[str] = set()
    out = []
    for node in tree.in_document_order():
        if node.parent is not None and node.parent not in keep:
            continue
        if eligible(node):
            keep.add(node.node_id)
            out.append(node)
    return out


def _tree_edges(tree: TitleTree, nodes: list[TitleNode], kind: Kind) -> set[Edge]:
    tid = tree.tree_id
    ids = {n.node_id for n in nodes}
    edges: set[Edge] = set()
    for node in nodes:
        kids = [c for c in node.children if c in ids]
        for c in kids:
            edges.add(((tid, node.node_id), (tid, c)))
            if kind in (Kind.STRW, Kind.DTRW):
                edges.add(((tid, c), (tid, node.node_id)))
        if kind is not Kind.LDS:
            for a in kids:
                for b in kids:
                    if a != b:
                        edges.add(((tid, a), (tid, b)))
    return edges


def build_edges(
    trees: TitleTree | Sequence[TitleTree],
    kind: Kind | str,
    eligible: Callable[[TitleNode], bool] | None = None,
) -> FlowGraph:
    """Build the move graph for ``kind``.

    ``eligible`` filters nodes (default: drop References/See also style
    sections); an excluded node takes its whole subtree with it. DTRW bridges
    run from every node of one tree to every node of depth <= 2 (root and its
    children) of the other, in both directions.
    """
    kind = Kind(kind)
    if isinstance(trees, TitleTree):
        trees = [trees]
    trees = list(trees)
    expected = 2 if kind is Kind.DTRW else 1
    if len(trees) != expected:
        raise ArityMismatch(f"{kind.value} needs {expected} tree(s), got {len(trees)}")
    eligible = eligible or _default_eligible

    all_nodes: set[NodeRef] = set()
    edges: set[Edge] = set()
    per_tree: list[list[TitleNode]] = []
    for tree in trees:
        nodes = _eligible_nodes(tree, eligible)
        per_tree.append(nodes)
        all_nodes.update((tree.tree_id, n.node_id) for n in nodes)
        edges |= _tree_edges(tree, nodes, kind)

    bridges: set[Edge] = set()
    if kind is Kind.DTRW:
        for (src_tree, src_nodes), (dst_tree, dst_nodes) in (
            ((trees[0], per_tree[0]), (trees[1], per_tree[1])),
            ((trees[1], per_tree[1]), (trees[0], per_tree[0])),
        ):
            shallow = [n for n in dst_nodes if dst_tree.depth(n.node_id) <= BRIDGE_MAX_DEPTH]
            for a in src_nodes:
                for b in shallow:
                    bridges.add(((src_tree.tree_id, a.node_id), (dst_tree.tree_id, b.node_id)))

    roots = tuple(
        (t.tree_id, t.root) for t in trees if (t.tree_id, t.root) in all_nodes
    )
    return FlowGraph(kind, frozenset(all_nodes), frozenset(edges), frozenset(bridges), roots)


def _subseed(seed: int, attempt: int) -> int:
    return seed ^ (attempt * 0x9E3779B97F4A7C15)


def sample_flow(graph: FlowGraph, strategy: SamplingStrategy, restarts: int = DEFAULT_RESTARTS) -> ConversationFlow:
    """Seeded random walk over ``graph``; a pure function of its arguments."""
    if graph.kind is not strategy.kind:
        raise ValueError(f"graph built for {graph.kind.value}, strategy is {strategy.kind.value}")
    if not graph.roots:
        raise Unsatisfiable("root node is not eligible", kind=strategy.kind.value)
    dual = strategy.kind is Kind.DTRW
    start = graph.roots[0]
    for attempt in range(restarts):
        rng = random.Random(_subseed(strategy.seed, attempt))
        target = rng.randint(strategy.min_turns, strategy.max_turns)
        path = [start]
        visited = {start}
        crossed = False
        while len(path) < target:
            moves = [(n, br) for n, br in graph.moves(path[-1]) if n not in visited and not (br and crossed)]
            if dual and not crossed and len(path) == target - 1:
                moves = [m for m in moves if m[1]]
            if not moves:
                break
            nxt, is_bridge = rng.choice(moves)
            crossed = crossed or is_bridge
            path.append(nxt)
            visited.add(nxt)
        if len(path) >= strategy.min_turns and (crossed or not dual):
            trees = list(dict.fromkeys(tid for tid, _ in path))
            return ConversationFlow(strategy, path, trees)
    raise Unsatisfiable(
        f"no flow of length >= {strategy.min_turns} after {restarts} attempts",
        kind=strategy.kind.value,
        root=str(start),
    )


# ---------------------------------------------------------------------------
# DTRW tree pairing
# ---------------------------------------------------------------------------


def title_index(pool: Sequence[TitleTree]) -> Bm25Index:
    """BM25 over each tree's root title plus its top-level section titles."""
    docs = {}
    for tree in pool:
        root = tree.nodes[tree.root]
        tops = [tree.nodes[c].title for c in root.children if not is_boilerplate(tree.nodes[c])]
        docs[tree.page_url] = " ".join([root.title, *tops])
    return build_index(docs)


def pair_trees(
    root_title: str,
    tree_pool: Sequence[TitleTree],
    index: Bm25Index,
    exclude_url: str | None = None,
) -> TitleTree:
    """Best BM25 match for ``root_title`` among the other trees.

    The query's own tree is the one at ``exclude_url`` or, when that is not
    given, any tree whose root title equals ``root_title``. Ties go to the
    lexicographically smaller page URL.
    """
    if len(tree_pool) < 2:
        raise PoolTooSmall(f"need at least 2 trees, pool has {len(tree_pool)}")
    if exclude_url is not None:
        candidates = [t for t in tree_pool if t.page_url != exclude_url]
    else:
        candidates = [t for t in tree_pool if t.title != root_title]
    if not candidates:
        raise PoolTooSmall("no tree other than the query's own")
    scores = index.score_all(root_title)
    return min(candidates, key=lambda t: (-scores.get(t.page_url, 0.0), t.page_url))
