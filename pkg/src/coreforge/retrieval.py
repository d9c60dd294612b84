"""Okapi BM25 over a passage corpus, plus TREC qrels I/O.

Scoring, for a query with (possibly repeated) terms t:

    score(d) = sum_t idf(t) * tf(t, d) * (k1 + 1) / (tf(t, d) + k1 * (1 - b + b * |d| / avgdl))
    idf(t)   = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))

Only documents matching at least one query term are ranked. Ties are broken
by ascending passage id.
"""

from __future__ import annotations

import json
import math
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping

from .errors import EmptyCorpus, ForgeError
from .jsonl import file_sha256, write_json
from .textutil import terms

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4
INDEX_VERSION = 1
_MAGIC = b"CFBM25\x00"

DocId = Hashable


@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[DocId, int]]]
    doc_lengths: dict[DocId, int]
    avg_doc_length: float
    doc_count: int
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def score_all(self, query: str) -> dict[DocId, float]:
        """Score of every matching document (non-matching documents are absent)."""
        scores: dict[DocId, float] = defaultdict(float)
        k1, b, avgdl = self.k1, self.b, self.avg_doc_length
        for term in terms(query):
            plist = self.postings.get(term)
            if not plist:
                continue
            idf = self.idf(term)
            for doc_id, tf in plist:
                norm = k1 * (1.0 - b + b * self.doc_lengths[doc_id] / avgdl) if avgdl else k1
                scores[doc_id] += idf * tf * (k1 + 1.0) / (tf + norm)
        return dict(scores)


@dataclass
class RankedList:
    entries: list[tuple[DocId, float]] = field(default_factory=list)

    def ids(self) -> list[DocId]:
        return [pid for pid, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def to_list(self) -> list[list]:
        return [[pid, score] for pid, score in self.entries]

    @classmethod
    def from_list(cls, rows: Iterable) -> "RankedList":
        return cls([(pid, float(score)) for pid, score in rows])


def _corpus_texts(corpus) -> Mapping[DocId, str]:
    passages = getattr(corpus, "passages", None)
    if passages is not None:
        return {pid: p.text for pid, p in passages.items()}
    return corpus


def build_index(corpus, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    """Index a PassageCorpus (or any ``{doc_id: text}`` mapping)."""
    texts = _corpus_texts(corpus)
    if not texts:
        raise EmptyCorpus("cannot index an empty corpus")
    postings: dict[str, list[tuple[DocId, int]]] = defaultdict(list)
    doc_lengths: dict[DocId, int] = {}
    for doc_id in sorted(texts):
        toks = terms(texts[doc_id])
        doc_lengths[doc_id] = len(toks)
        for term, tf in sorted(Counter(toks).items()):
            postings[term].append((doc_id, tf))
    n = len(doc_lengths)
    return Bm25Index(
        postings=dict(sorted(postings.items())),
        doc_lengths=doc_lengths,
        avg_doc_length=sum(doc_lengths.values()) / n,
        doc_count=n,
        k1=k1,
        b=b,
    )


def rank(scores: Mapping[DocId, float], top_k: int | None = None) -> RankedList:
    entries = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    if top_k is not None:
        entries = entries[:top_k]
    return RankedList(entries)


def search(index: Bm25Index, query: str, top_k: int = 100) -> RankedList:
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    return rank(index.score_all(query), top_k)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_index(index: Bm25Index, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>`` (versioned binary) and ``<path>.json`` (parameter sidecar)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "doc_lengths": [[d, n] for d, n in index.doc_lengths.items()],
        "postings": [[t, [[d, tf] for d, tf in plist]] for t, plist in index.postings.items()],
    }
    raw = json.dumps(payload, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(INDEX_VERSION.to_bytes(2, "big"))
        fh.write(zlib.compress(raw, 9))
    sidecar = path.with_name(path.name + ".json")
    write_json(
        sidecar,
        {
            "format": "coreforge-bm25",
            "version": INDEX_VERSION,
            "k1": index.k1,
            "b": index.b,
            "doc_count": index.doc_count,
            "avg_doc_length": index.avg_doc_length,
            "term_count": len(index.postings),
            "binary_sha256": file_sha256(path),
        },
    )
    return path, sidecar


def load_index(path: str | Path) -> Bm25Index:
    path = Path(path)
    sidecar = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
    blob = path.read_bytes()
    if not blob.startswith(_MAGIC):
        raise ForgeError(f"{path} is not a BM25 index file")
    version = int.from_bytes(blob[len(_MAGIC): len(_MAGIC) + 2], "big")
    if version != INDEX_VERSION or sidecar.get("version") != INDEX_VERSION:
        raise ForgeError(f"unsupported index version {version}")
    payload = json.loads(zlib.decompress(blob[len(_MAGIC) + 2:]).decode("utf-8"))
    doc_lengths = {d: n for d, n in payload["doc_lengths"]}
    postings = {t: [(d, tf) for d, tf in plist] for t, plist in payload["postings"]}
    return Bm25Index(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=float(sidecar["avg_doc_length"]),
        doc_count=int(sidecar["doc_count"]),
        k1=float(sidecar["k1"]),
        b=float(sidecar["b"]),
    )


# ---------------------------------------------------------------------------
# qrels
# ---------------------------------------------------------------------------

Qrels = dict[tuple[str, int], set]


def topic_id(conversation_id: str, turn_id: int) -> str:
    return f"{conversation_id}_{turn_id}"


def parse_topic_id(topic: str) -> tuple[str, int]:
    conv, _, turn = topic.rpartition("_")
    return conv, int(turn)


def write_trec_qrels(qrels: Qrels, path: str | Path) -> None:
    lines = []
    for (conv, turn) in sorted(qrels):
        for pid in sorted(qrels[(conv, turn)]):
            lines.append(f"{topic_id(conv, turn)} 0 {pid} 1\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_trec_qrels(path: str | Path) -> Qrels:
    """Read ``topic 0 doc relevance`` lines; relevance <= 0 is skipped."""
    qrels: Qrels = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        topic, _, doc, rel = parts
        if int(rel) <= 0:
            continue
        doc_id: DocId = int(doc) if doc.isdigit() else doc
        qrels.setdefault(parse_topic_id(topic), set()).add(doc_id)
    return qrels
