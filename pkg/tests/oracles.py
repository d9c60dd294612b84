"""Slow, obviously-correct reference implementations used to check the fast code.

Nothing here imports the metric, BM25 or sampling code under test.
"""

from __future__ import annotations

import math
import re

STOP = None  # filled lazily from the bundled list so tokenization matches by definition


def _stopwords():
    global STOP
    if STOP is None:
        from coreforge.textutil import STOPWORDS
        STOP = STOPWORDS
    return STOP


def tokenize(text: str) -> list[str]:
    return [t for t in re.findall(r"[^\W_]+", text.lower()) if t not in _stopwords()]


# -- ranking metrics, straight from the definitions ------------------------------

def brute_mrr(ranking, relevant, depth=100):
    best = 0.0
    for pos in range(min(len(ranking), depth)):
        if ranking[pos] in relevant:
            best = max(best, 1.0 / (pos + 1))
    return best


def brute_ap(ranking, relevant, depth=100):
    cut = ranking[:depth]
    total = 0.0
    for r in relevant:
        if r in cut:
            k = cut.index(r) + 1
            prec = sum(1 for x in cut[:k] if x in relevant) / k
            total += prec
    return total / len(relevant)


def brute_ndcg3(ranking, relevant):
    gains = [1.0 if x in relevant else 0.0 for x in ranking[:3]]
    dcg = 0.0
    for i, g in enumerate(gains):
        dcg += g / math.log2(i + 2)
    ideal_gains = sorted([1.0] * len(relevant) + [0.0] * 3, reverse=True)[:3]
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal_gains))
    return dcg / idcg


def brute_recall(ranking, relevant, k):
    return sum(1 for r in relevant if r in ranking[:k]) / len(relevant)


# -- BM25 by direct evaluation -----------------------------------------------------

def brute_bm25(docs: dict, query: str, k1=0.9, b=0.4) -> dict:
    """Score every document containing a query term, recomputing all statistics per query."""
    toks = {d: tokenize(t) for d, t in docs.items()}
    n = len(docs)
    avgdl = sum(len(v) for v in toks.values()) / n
    out = {}
    for d, dt in toks.items():
        s = 0.0
        matched = False
        for q in tokenize(query):
            tf = dt.count(q)
            if tf == 0:
                continue
            matched = True
            df = sum(1 for other in toks.values() if q in other)
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(dt) / avgdl))
        if matched:
            out[d] = s
    return out


# -- flows -------------------------------------------------------------------------

def enumerate_flows(adjacency: dict, start, min_len: int, max_len: int, bridges: set | None = None,
                    need_crossing: bool = False) -> set[tuple]:
    """Every simple path from ``start`` with length in [min_len, max_len].

    ``adjacency`` maps node -> iterable of successors (bridges included). With
    ``need_crossing`` a path must use exactly one edge from ``bridges``.
    """
    bridges = bridges or set()
    found = set()

    def walk(path, crossings):
        if crossings > 1:
            return
        if min_len <= len(path) <= max_len and (not need_crossing or crossings == 1):
            found.add(tuple(path))
        if len(path) == max_len:
            return
        for nxt in adjacency.get(path[-1], ()):
            if nxt in path:
                continue
            walk(path + [nxt], crossings + ((path[-1], nxt) in bridges))

    walk([start], 0)
    return found
