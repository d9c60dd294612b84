"""Score a run file against the dataset: retrieval, response overlap, citations, pairwise preference."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from . import metrics
from .citations import Judge, LexicalJudge, citation_precision_detail, citation_recall
from .dataset import Conversation, ConversationTurn, PassageCorpus
from .errors import EmptyRun, ParseError
from .jsonl import read_jsonl, text_sha256, write_json
from .llm import CONSTRUCTION_TEMPERATURE, Gateway, LlmRequest
from .pipeline import TurnRecord
from .prompting import DEFAULT_PROMPTS, PromptSet, after_label, ask
from .retrieval import topic_id
from .textutil import strip_markers

METRIC_NAMES = (
    "mrr", "map", "ndcg_at_3", "recall_at_20", "recall_at_100",
    "bleu1", "rouge_l", "citation_recall", "citation_precision",
)
PAIRWISE_NOTE = "pairwise judgments use a stand-in comparison prompt, not a published one"


class Verdict(str, Enum):
    WIN = "Win"
    DRAW = "Draw"
    LOSE = "Lose"

    def flipped(self) -> "Verdict":
        return {Verdict.WIN: Verdict.LOSE, Verdict.LOSE: Verdict.WIN}.get(self, self)


def parse_verdict(text: str) -> Verdict:
    value = after_label(text, "Verdict").split()[0].strip(".,;:()*").lower()
    for v in Verdict:
        if v.value.lower() == value:
            return v
    raise ParseError(f"unknown verdict {value!r}")


def llm_compare(candidate: str, golden: str, question: str, gateway: Gateway, *, seed: int = 0,
                swap: bool | None = None, prompts: PromptSet = DEFAULT_PROMPTS,
                cache: dict | None = None) -> Verdict:
    """Is ``candidate`` better than (Win), as good as (Draw) or worse than (Lose) ``golden``?

    Presentation order is decided by a seeded coin per item unless ``swap``
    is given; the verdict is always reported from the candidate's side.
    """
    if swap is None:
        swap = random.Random(text_sha256(f"{seed}\x00{question}\x00{candidate}\x00{golden}")).random() < 0.5
    a, b = (golden, candidate) if swap else (candidate, golden)
    request = LlmRequest(
        prompts.render("judge", question=question, response_a=a, response_b=b),
        temperature=CONSTRUCTION_TEMPERATURE,
    )
    key = request.digest()
    if cache is not None and key in cache:
        verdict = Verdict(cache[key])
    else:
        verdict, _ = ask(gateway, request, parse_verdict)
        if cache is not None:
            cache[key] = verdict.value
    return verdict.flipped() if swap else verdict


@dataclass
class EvalReport:
    per_turn: list[dict]
    aggregate: dict[str, float]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "aggregate": self.aggregate, "per_turn": self.per_turn}

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_dict())

    def table(self) -> str:
        width = max(len(m) for m in METRIC_NAMES)
        lines = [f"strategy: {self.metadata.get('strategy')}  turns: {self.metadata.get('turns')}"]
        lines += [f"{m.ljust(width)}  {self.aggregate[m]:.4f}" for m in METRIC_NAMES]
        pairwise = self.metadata.get("pairwise")
        if pairwise:
            lines.append("pairwise vs golden  " + "  ".join(f"{k}={v}" for k, v in pairwise["counts"].items()))
        return "\n".join(lines)

    def write_trec(self, path: str | Path) -> None:
        """Per-topic metric dump in the ``metric topic value`` layout of trec_eval -q."""
        rows = [f"{m}\t{t['topic']}\t{t[m]:.6f}" for t in self.per_turn for m in METRIC_NAMES]
        rows += [f"{m}\tall\t{self.aggregate[m]:.6f}" for m in METRIC_NAMES]
        Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def load_run(path: str | Path) -> list[TurnRecord]:
    return [TurnRecord.from_dict(rec) for _, rec in read_jsonl(path)]


def score_turn(record: TurnRecord, turn: ConversationTurn, corpus: PassageCorpus, judge: Judge,
               depth: int = metrics.DEFAULT_DEPTH) -> dict:
    """All metrics for one turn. A turn without a response scores 0 on the response metrics."""
    relevant = set(turn.golden_passage_ids)
    ranked = record.ranked
    row = {
        "topic": topic_id(record.conversation_id, record.turn_id),
        "conversation_id": record.conversation_id,
        "turn_id": record.turn_id,
        "mrr": metrics.mrr(ranked, relevant, depth),
        "map": metrics.average_precision(ranked, relevant, depth),
        "ndcg_at_3": metrics.ndcg_at_3(ranked, relevant),
        "recall_at_20": metrics.recall_at_k(ranked, relevant, 20),
        "recall_at_100": metrics.recall_at_k(ranked, relevant, 100),
        "error": record.error,
    }
    if record.response is None:
        row.update(bleu1=0.0, rouge_l=0.0, citation_recall=0.0, citation_precision=0.0, precision_undefined=True)
        return row
    candidate = strip_markers(record.response.raw_text)
    reference = strip_markers(turn.response)
    precision = citation_precision_detail(record.response, corpus, judge)
    row.update(
        bleu1=metrics.bleu1(candidate, reference),
        rouge_l=metrics.rouge_l(candidate, reference),
        citation_recall=citation_recall(record.response, corpus, judge),
        citation_precision=precision.value,
        precision_undefined=precision.undefined,
    )
    return row


def evaluate_run(records: Sequence[TurnRecord] | str | Path, conversations: Iterable[Conversation],
                 corpus: PassageCorpus, judge: Judge | None = None, *, config_hash: str = "",
                 dataset_hash: str = "", compare_gateway: Gateway | None = None, seed: int = 0,
                 depth: int = metrics.DEFAULT_DEPTH) -> EvalReport:
    """Macro-averaged report over every turn in the run."""
    if isinstance(records, (str, Path)):
        records = load_run(records)
    if not records:
        raise EmptyRun("run has no turn records")
    judge = judge or LexicalJudge()
    turns = {(c.conversation_id, t.turn_id): t for c in conversations for t in c.turns}
    per_turn = []
    counts = {v.value: 0 for v in Verdict}
    cache: dict = {}
    for rec in records:
        turn = turns.get((rec.conversation_id, rec.turn_id))
        if turn is None:
            raise KeyError(f"run refers to unknown turn {rec.conversation_id}:{rec.turn_id}")
        row = score_turn(rec, turn, corpus, judge, depth)
        if compare_gateway is not None:
            verdict = Verdict.LOSE
            if rec.response is not None:
                verdict = llm_compare(strip_markers(rec.response.raw_text), strip_markers(turn.response),
                                      turn.question, compare_gateway, seed=seed, cache=cache)
            row["pairwise"] = verdict.value
            counts[verdict.value] += 1
        per_turn.append(row)
    n = len(per_turn)
    aggregate = {m: sum(r[m] for r in per_turn) / n for m in METRIC_NAMES}
    judge_desc = f"lexical(threshold={judge.threshold})" if isinstance(judge, LexicalJudge) else type(judge).__name__
    metadata = {
        "strategy": records[0].strategy,
        "config_hash": config_hash,
        "dataset_manifest_hash": dataset_hash,
        "depth": depth,
        "judge": judge_desc,
        "turns": n,
        "failed_turns": sum(1 for r in per_turn if r["error"]),
        "precision_undefined_turns": sum(1 for r in per_turn if r["precision_undefined"]),
    }
    if compare_gateway is not None:
        metadata["pairwise"] = {"counts": counts, "note": PAIRWISE_NOTE}
    return EvalReport(per_turn, aggregate, metadata)
