"""Sample one conversation flow per strategy from the bundled fixture pages and print the section path.

    python demos/sample_flows.py [seed]
"""

from __future__ import annotations

import sys
from importlib import resources

from coreforge.ingest import extract_title_tree, load_pages
from coreforge.sampling import Kind, SamplingStrategy, build_edges, pair_trees, sample_flow, title_index


def main(seed: int = 7) -> None:
    trees = [extract_title_tree(p) for p in load_pages(resources.files("coreforge") / "fixtures" / "pages")]
    by_id = {t.tree_id: t for t in trees}
    start = trees[seed % len(trees)]
    partner = pair_trees(start.title, trees, title_index(trees), exclude_url=start.page_url)

    for kind in Kind:
        group = [start, partner] if kind is Kind.DTRW else [start]
        flow = sample_flow(build_edges(group, kind), SamplingStrategy.default(kind, seed))
        print(f"{kind.value} ({len(flow)} turns)")
        for tid, nid in flow.steps:
            node = by_id[tid].nodes[nid]
            print(f"  {'  ' * (node.level - 1)}{node.title}  [{by_id[tid].title}]")
        print()


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 7)
