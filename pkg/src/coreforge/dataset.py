"""Final dataset records, assembly from flows/drafts/passages, persistence and statistics.

On disk a dataset is a directory with

    conversations.jsonl   one Conversation per line
    corpus.jsonl          one Passage per line (integer passage ids)
    manifest.json         schema_version, seed, counts
"""

from __future__ import annotations

import logging
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .contextualize import TurnDraft
from .errors import CorruptRecord, EmptyConversation, SchemaVersionMismatch
from .ingest import Passage, SupportLink, TitleTree
from .jsonl import read_json, read_jsonl, write_json, write_jsonl
from .sampling import ConversationFlow, Kind
from .textutil import marker_ids, strip_markers, whitespace_tokens

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_TEST_FRACTION = 0.1
SPLITS = ("train", "test")


@dataclass
class ConversationTurn:
    turn_id: int
    question: str
    golden_rewrite: str
    response: str
    golden_passage_ids: list[int]
    source_url: str
    node_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "question": self.question,
            "golden_rewrite": self.golden_rewrite,
            "response": self.response,
            "golden_passage_ids": list(self.golden_passage_ids),
            "source_url": self.source_url,
            "node_id": self.node_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConversationTurn":
        return cls(
            turn_id=int(d["turn_id"]),
            question=d["question"],
            golden_rewrite=d["golden_rewrite"],
            response=d["response"],
            golden_passage_ids=[int(x) for x in d["golden_passage_ids"]],
            source_url=d["source_url"],
            node_id=d.get("node_id"),
        )


@dataclass
class Conversation:
    conversation_id: str
    strategy_kind: Kind
    turns: list[ConversationTurn]
    split: str = "train"
    turn_bounds: tuple[int, int] | None = None

    def __post_init__(self):
        self.strategy_kind = Kind(self.strategy_kind)

    def to_dict(self) -> dict:
        return {
            "conversation_id": self.conversation_id,
            "strategy_kind": self.strategy_kind.value,
            "split": self.split,
            "turn_bounds": list(self.turn_bounds) if self.turn_bounds else None,
            "turns": [t.to_dict() for t in self.turns],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Conversation":
        bounds = d.get("turn_bounds")
        return cls(
            conversation_id=d["conversation_id"],
            strategy_kind=Kind(d["strategy_kind"]),
            turns=[ConversationTurn.from_dict(t) for t in d["turns"]],
            split=d.get("split", "train"),
            turn_bounds=(int(bounds[0]), int(bounds[1])) if bounds else None,
        )


@dataclass
class PassageCorpus:
    passages: dict[int, Passage] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.passages)

    def __contains__(self, pid) -> bool:
        return pid in self.passages

    def text(self, pid) -> str:
        return self.passages[pid].text


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


@dataclass
class AssembleReport:
    dropped_turns: list[dict] = field(default_factory=list)
    dropped_conversations: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"dropped_turns": self.dropped_turns, "dropped_conversations": self.dropped_conversations}


def assign_passage_ids(passages: Sequence[Passage], start: int = 1) -> tuple[PassageCorpus, dict[str, int]]:
    """Number passages sequentially in the given order; returns the corpus and local->global ids."""
    corpus = PassageCorpus()
    mapping: dict[str, int] = {}
    for i, p in enumerate(passages, start):
        mapping[str(p.passage_id)] = i
        corpus.passages[i] = Passage(i, p.text, p.source_url, p.word_count, p.term_recall)
    return corpus, mapping


def cite_response(content: str, slots: Sequence[tuple[int, int]], ids_for_slot) -> tuple[str, list[int]]:
    """Insert ``[pid]`` markers at each slot offset.

    ``ids_for_slot(reference_index)`` gives the passage ids to cite for that
    reference. Returns the marked text and the distinct ids cited, in order.
    """
    out = []
    cited: list[int] = []
    prev = 0
    for off, ref_idx in sorted(slots, key=lambda s: s[0]):
        out.append(content[prev:off])
        for pid in ids_for_slot(ref_idx):
            out.append(f"[{pid}]")
            if pid not in cited:
                cited.append(pid)
        prev = off
    out.append(content[prev:])
    return "".join(out), cited


def assemble_conversation(
    conversation_id: str,
    flow: ConversationFlow,
    drafts: Sequence[TurnDraft],
    trees: Mapping[str, TitleTree],
    support: Mapping[tuple[str, str, str], list[int]],
    report: AssembleReport | None = None,
) -> Conversation:
    """Build one Conversation; turns with no surviving passages are dropped.

    Raises EmptyConversation if every turn is dropped.
    """
    if len(flow.steps) != len(drafts):
        raise ValueError(f"{conversation_id}: {len(flow.steps)} steps but {len(drafts)} drafts")
    turns = []
    for (tree_id, node_id), draft in zip(flow.steps, drafts):
        node = trees[tree_id].nodes[node_id]
        response, cited = cite_response(
            node.content,
            node.inline_citation_slots,
            lambda ref_idx: support.get((tree_id, node_id, node.reference_urls[ref_idx]), []),
        )
        if not cited:
            log.info("%s: dropping turn %d (%s): no surviving passages", conversation_id, draft.turn_index, node.title)
            if report is not None:
                report.dropped_turns.append(
                    {"conversation_id": conversation_id, "turn_index": draft.turn_index,
                     "page_url": tree_id, "node_id": node_id, "reason": "no surviving passages"}
                )
            continue
        turns.append(
            ConversationTurn(
                turn_id=len(turns) + 1,
                question=draft.conversational_question or draft.full_question or "",
                golden_rewrite=draft.full_question or "",
                response=response,
                golden_passage_ids=cited,
                source_url=tree_id,
                node_id=node_id,
            )
        )
    if not turns:
        raise EmptyConversation(f"{conversation_id}: every turn was dropped")
    return Conversation(
        conversation_id, flow.strategy.kind, turns,
        turn_bounds=(flow.strategy.min_turns, flow.strategy.max_turns),
    )


def assign_splits(conversations: list[Conversation], seed: int, test_fraction: float = DEFAULT_TEST_FRACTION) -> None:
    """Seeded per-strategy shuffle; the first ``round(n * test_fraction)`` (at least one when n >= 2) go to test."""
    by_kind: dict[Kind, list[Conversation]] = defaultdict(list)
    for c in conversations:
        by_kind[c.strategy_kind].append(c)
    for kind in sorted(by_kind, key=lambda k: k.value):
        group = sorted(by_kind[kind], key=lambda c: c.conversation_id)
        rng = random.Random(f"{seed}:{kind.value}")
        rng.shuffle(group)
        n_test = round(len(group) * test_fraction)
        if len(group) >= 2 and test_fraction > 0:
            n_test = max(1, n_test)
        for i, c in enumerate(group):
            c.split = "test" if i < n_test else "train"


def assemble(
    flows: Sequence[ConversationFlow],
    drafts: Sequence[Sequence[TurnDraft]],
    trees: Mapping[str, TitleTree] | Sequence[TitleTree],
    passages: Sequence[Passage],
    support: Sequence[SupportLink],
    *,
    seed: int = 0,
    test_fraction: float = DEFAULT_TEST_FRACTION,
) -> tuple[list[Conversation], PassageCorpus, AssembleReport]:
    """Assemble every flow into a conversation over one shared passage corpus.

    Passage ids are assigned 1..N in the order of ``passages``. A
    conversation that falls below its minimum length after turn drops is
    removed and reported.
    """
    if not isinstance(trees, Mapping):
        trees = {t.tree_id: t for t in trees}
    corpus, local_to_global = assign_passage_ids(passages)
    support_map: dict[tuple[str, str, str], list[int]] = {}
    for link in support:
        support_map[(link.page_url, link.node_id, link.reference_url)] = [
            local_to_global[pid] for pid in link.passage_ids if pid in local_to_global
        ]
    report = AssembleReport()
    conversations = []
    for i, (flow, flow_drafts) in enumerate(zip(flows, drafts)):
        conv_id = f"{flow.strategy.kind.value.lower()}-{i:05d}"
        try:
            conv = assemble_conversation(conv_id, flow, flow_drafts, trees, support_map, report)
        except EmptyConversation as exc:
            report.dropped_conversations.append({"conversation_id": conv_id, "reason": str(exc)})
            continue
        if len(conv.turns) < flow.strategy.min_turns:
            report.dropped_conversations.append(
                {"conversation_id": conv_id,
                 "reason": f"{len(conv.turns)} turns left, minimum is {flow.strategy.min_turns}"}
            )
            continue
        conversations.append(conv)
    assign_splits(conversations, seed, test_fraction)
    return conversations, corpus, report


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def validate(conversations: Sequence[Conversation], corpus: PassageCorpus) -> list[dict]:
    """Referential-integrity and shape checks; an empty list means the dataset is valid."""
    errors = []
    seen_ids = set()

    def err(kind, conv, turn=None, **detail):
        rec = {"kind": kind, "conversation_id": conv.conversation_id}
        if turn is not None:
            rec["turn_id"] = turn.turn_id
        rec.update(detail)
        errors.append(rec)

    for conv in conversations:
        if conv.conversation_id in seen_ids:
            err("duplicate_conversation_id", conv)
        seen_ids.add(conv.conversation_id)
        if [t.turn_id for t in conv.turns] != list(range(1, len(conv.turns) + 1)):
            err("turn_ids_not_consecutive", conv)
        if conv.turn_bounds and not conv.turn_bounds[0] <= len(conv.turns) <= conv.turn_bounds[1]:
            err("turn_count_out_of_bounds", conv, count=len(conv.turns), bounds=list(conv.turn_bounds))
        if conv.split not in SPLITS:
            err("unknown_split", conv, split=conv.split)
        for turn in conv.turns:
            if not turn.question.strip():
                err("empty_question", conv, turn)
            if not turn.golden_passage_ids:
                err("no_golden_passages", conv, turn)
            golden = set(turn.golden_passage_ids)
            for pid in turn.golden_passage_ids:
                if pid not in corpus:
                    err("golden_id_not_in_corpus", conv, turn, passage_id=pid)
            for pid in marker_ids(turn.response):
                if pid not in golden:
                    err("marker_not_in_golden", conv, turn, passage_id=pid)
                if pid not in corpus:
                    err("marker_not_in_corpus", conv, turn, passage_id=pid)
    return errors


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save(conversations: Sequence[Conversation], corpus: PassageCorpus, path: str | Path, seed: int = 0) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_jsonl(path / "conversations.jsonl", (c.to_dict() for c in conversations))
    write_jsonl(path / "corpus.jsonl", (corpus.passages[k].to_dict() for k in sorted(corpus.passages)))
    counts = defaultdict(int)
    for c in conversations:
        counts[c.strategy_kind.value] += 1
    write_json(
        path / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "seed": seed,
            "counts": {
                "conversations": len(conversations),
                "turns": sum(len(c.turns) for c in conversations),
                "passages": len(corpus),
                "per_strategy": dict(sorted(counts.items())),
            },
        },
    )
    return path


def load(path: str | Path) -> tuple[list[Conversation], PassageCorpus]:
    path = Path(path)
    manifest = read_json(path / "manifest.json")
    version = manifest.get("schema_version")
    if str(version) != str(SCHEMA_VERSION):
        raise SchemaVersionMismatch(f"dataset schema version {version!r}, reader supports {SCHEMA_VERSION}")
    conversations = []
    for lineno, rec in read_jsonl(path / "conversations.jsonl"):
        try:
            conversations.append(Conversation.from_dict(rec))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptRecord(f"conversations.jsonl: line {lineno}: {exc!r}", line=lineno) from exc
    corpus = PassageCorpus()
    for lineno, rec in read_jsonl(path / "corpus.jsonl"):
        try:
            p = Passage.from_dict(rec)
            corpus.passages[int(p.passage_id)] = Passage(int(p.passage_id), p.text, p.source_url,
                                                          p.word_count, p.term_recall)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptRecord(f"corpus.jsonl: line {lineno}: {exc!r}", line=lineno) from exc
    return conversations, corpus


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


@dataclass
class StatsRow:
    conversations: int = 0
    turns: int = 0
    question_tokens: int = 0
    response_tokens: int = 0
    positive_passages: int = 0

    @property
    def turns_per_conversation(self) -> float:
        return self.turns / self.conversations if self.conversations else 0.0

    @property
    def tokens_per_question(self) -> float:
        return self.question_tokens / self.turns if self.turns else 0.0

    @property
    def tokens_per_response(self) -> float:
        return self.response_tokens / self.turns if self.turns else 0.0

    @property
    def positive_passages_per_turn(self) -> float:
        return self.positive_passages / self.turns if self.turns else 0.0

    def to_dict(self) -> dict:
        return {
            "conversations": self.conversations,
            "turns": self.turns,
            "turns_per_conversation": self.turns_per_conversation,
            "tokens_per_question": self.tokens_per_question,
            "tokens_per_response": self.tokens_per_response,
            "positive_passages_per_turn": self.positive_passages_per_turn,
            "question_tokens": self.question_tokens,
            "response_tokens": self.response_tokens,
            "positive_passages": self.positive_passages,
        }


DatasetStats = dict[tuple[str, str], StatsRow]


def compute_stats(conversations: Sequence[Conversation]) -> DatasetStats:
    """Per (strategy, split) counts; tokens are whitespace tokens, citation markers excluded."""
    if not conversations:
        raise ValueError("dataset is empty")
    stats: DatasetStats = {}
    for conv in conversations:
        row = stats.setdefault((conv.strategy_kind.value, conv.split), StatsRow())
        row.conversations += 1
        for turn in conv.turns:
            row.turns += 1
            row.question_tokens += len(whitespace_tokens(turn.question))
            row.response_tokens += len(whitespace_tokens(strip_markers(turn.response)))
            row.positive_passages += len(turn.golden_passage_ids)
    return dict(sorted(stats.items()))


_STAT_LINES = (
    ("# Conversation", lambda r: f"{r.conversations}"),
    ("# Turns", lambda r: f"{r.turns}"),
    ("# Turns / Conversation", lambda r: f"{r.turns_per_conversation:.2f}"),
    ("# Tokens / Question", lambda r: f"{r.tokens_per_question:.2f}"),
    ("# Tokens / Response", lambda r: f"{r.tokens_per_response:.2f}"),
    ("# Positive passages / Turn", lambda r: f"{r.positive_passages_per_turn:.2f}"),
)


def format_stats_table(stats: DatasetStats) -> str:
    """Plain-text table, one column per (strategy, split), two decimals for ratios."""
    cols = list(stats)
    header = ["", *[f"{k} {s}" for k, s in cols]]
    rows = [header] + [[label, *[fmt(stats[c]) for c in cols]] for label, fmt in _STAT_LINES]
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths)))
        for r in rows
    )


def stats_to_dict(stats: DatasetStats) -> dict:
    return {f"{k}/{s}": row.to_dict() for (k, s), row in stats.items()}
