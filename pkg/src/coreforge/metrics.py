"""Ranking metrics with binary relevance, and unigram/LCS text overlap."""

from __future__ import annotations

import math
from collections import Counter
from typing import Collection, Sequence

from .retrieval import RankedList

DEFAULT_DEPTH = 100


def _ids(ranked: RankedList | Sequence, depth: int | None) -> list:
    ids = ranked.ids() if isinstance(ranked, RankedList) else list(ranked)
    return ids if depth is None else ids[:depth]


def _check(relevant: Collection) -> set:
    rel = set(relevant)
    if not rel:
        raise ValueError("relevant set must be non-empty")
    return rel


def mrr(ranked, relevant, depth: int | None = DEFAULT_DEPTH) -> float:
    rel = _check(relevant)
    for i, pid in enumerate(_ids(ranked, depth), 1):
        if pid in rel:
            return 1.0 / i
    return 0.0


def average_precision(ranked, relevant, depth: int | None = DEFAULT_DEPTH) -> float:
    rel = _check(relevant)
    hits, total = 0, 0.0
    for i, pid in enumerate(_ids(ranked, depth), 1):
        if pid in rel:
            hits += 1
            total += hits / i
    return total / len(rel)


# the metric list names it MAP; per query it is average precision
map = average_precision  # noqa: A001


def ndcg_at_3(ranked, relevant) -> float:
    rel = _check(relevant)
    dcg = sum(1.0 / math.log2(i + 1) for i, pid in enumerate(_ids(ranked, 3), 1) if pid in rel)
    ideal = sum(1.0 / math.log2(i + 1) for i in range(1, min(len(rel), 3) + 1))
    return dcg / ideal


def recall_at_k(ranked, relevant, k: int) -> float:
    rel = _check(relevant)
    return len(rel & set(_ids(ranked, k))) / len(rel)


def _tokens(text: str) -> list[str]:
    return text.lower().split()


def bleu1(candidate: str, reference: str) -> float:
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand or not ref:
        return 0.0
    ref_counts = Counter(ref)
    clipped = sum(min(n, ref_counts[t]) for t, n in Counter(cand).items())
    precision = clipped / len(cand)
    bp = math.exp(min(0.0, 1.0 - len(ref) / len(cand)))
    return precision * bp


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(cand), lcs / len(ref)
    return 2 * p * r / (p + r)
