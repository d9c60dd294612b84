"""Score a tiny hand-written turn with the ranking, overlap and citation metrics.

    python demos/score_by_hand.py
"""

from __future__ import annotations

from coreforge import metrics
from coreforge.citations import LexicalJudge, citation_precision, citation_recall
from coreforge.dataset import PassageCorpus
from coreforge.ingest import Passage
from coreforge.pipeline import GeneratedResponse, parse_statements
from coreforge.retrieval import build_index, search

texts = {
    1: "The 72nd Primetime Emmy Awards were held virtually on September 20, 2020.",
    2: "Jimmy Kimmel hosted the ceremony from the Staples Center in Los Angeles.",
    3: "Schitt's Creek won all seven comedy awards, a record for a comedy series.",
    4: "The Baseball Hall of Fame is in Cooperstown, New York.",
}
corpus = PassageCorpus({pid: Passage(pid, t, "demo", len(t.split()), 1.0) for pid, t in texts.items()})
golden = {2}
golden_response = "Jimmy Kimmel hosted the ceremony from the Staples Center.[2]"

ranked = search(build_index(texts), "who hosted the Emmy ceremony", 4)
ids = ranked.ids()
print("ranking:", ids)
print(f"mrr={metrics.mrr(ids, golden):.4f}  ndcg@3={metrics.ndcg_at_3(ids, golden):.4f}  "
      f"recall@20={metrics.recall_at_k(ids, golden, 20):.4f}")

# [3] and [4] were never retrieved, so they count against precision
answer = "Jimmy Kimmel hosted it from the Staples Center.[2] Schitt's Creek swept comedy.[3][4]"
response = GeneratedResponse(answer, parse_statements(answer, ids))
judge = LexicalJudge(0.6)
print(f"bleu1={metrics.bleu1(answer, golden_response):.4f}  rouge_l={metrics.rouge_l(answer, golden_response):.4f}")
print(f"citation recall={citation_recall(response, corpus, judge):.4f}  "
      f"precision={citation_precision(response, corpus, judge):.4f}")
