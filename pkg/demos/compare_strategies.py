"""Build the fixture benchmark offline and compare the four history-compression strategies.

Runs every stage with the mock gateway in a temporary workspace, then prints
one row per strategy with retrieval scores, response overlap, citation
quality and mean prompt length.

    python demos/compare_strategies.py
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from coreforge import stages as st
from coreforge.cli import run_all
from coreforge.config import load_config
from coreforge.jsonl import read_json, read_jsonl

COLUMNS = ("mrr", "ndcg_at_3", "recall_at_20", "rouge_l", "citation_recall", "citation_precision")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        cfg = load_config("fixture")
        cfg.paths.workspace = Path(tmp)
        cfg.gateway.mode = "mock"
        ws = st.Workspace(tmp)
        # run_all prints each report; the summary below is the interesting part
        run_all(cfg, ws)

        print(f"\n{'strategy':<9}" + "".join(f"{c:>20}" for c in COLUMNS) + f"{'prompt tokens':>15}")
        for s in cfg.pipeline.strategies:
            agg = read_json(ws.path(st.report_file(s)))["aggregate"]
            tokens = [r["prompt_tokens"] for _, r in read_jsonl(ws.path(st.run_file(s)))]
            print(f"{s:<9}" + "".join(f"{agg[c]:>20.4f}" for c in COLUMNS) + f"{sum(tokens) / len(tokens):>15.1f}")


if __name__ == "__main__":
    main()
