"""Conversational RAG under one framework: compress the history, retrieve, compress passages, generate.

Four history treatments are supported:

raw      every earlier (question, response) pair, verbatim
last     every earlier question, plus only the previous response
rewrite  the current question rewritten to stand alone; no history in generation
summ     a model-written summary of the history

The generator sees the passages as ``[pid] text`` blocks and is asked to cite
them in brackets; its answer is split into statements with their cited ids.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .dataset import Conversation, PassageCorpus
from .errors import EmptyResponse, ForgeError
from .llm import CONSTRUCTION_TEMPERATURE, GENERATION_TEMPERATURE, Gateway, LlmRequest
from .prompting import DEFAULT_PROMPTS, PromptSet, after_label, ask
from .retrieval import Bm25Index, RankedList, search
from .textutil import marker_ids, strip_markers, whitespace_tokens

log = logging.getLogger(__name__)


class CompressionStrategy(str, Enum):
    RAW = "raw"
    LAST = "last"
    REWRITE = "rewrite"
    SUMM = "summ"

    @property
    def needs_gateway(self) -> bool:
        return self in (CompressionStrategy.REWRITE, CompressionStrategy.SUMM)


class PassageMode(str, Enum):
    PASSTHROUGH = "passthrough"
    LLM = "llm"


@dataclass
class ConversationHistory:
    """Earlier (question, response) pairs; ``first_turn`` is the turn number of ``entries[0]``."""

    entries: list[tuple[str, str]] = field(default_factory=list)
    first_turn: int = 1

    def __len__(self) -> int:
        return len(self.entries)

    def window(self, m: int | None) -> "ConversationHistory":
        """The last ``m`` turns (all of them when ``m`` is None)."""
        if m is None or m >= len(self.entries):
            return ConversationHistory(list(self.entries), self.first_turn)
        if m < 0:
            raise ValueError("history window must be >= 0")
        cut = len(self.entries) - m
        return ConversationHistory(self.entries[cut:], self.first_turn + cut)

    def numbered(self) -> list[tuple[int, str, str]]:
        return [(self.first_turn + i, q, r) for i, (q, r) in enumerate(self.entries)]

    def format(self) -> str:
        return "\n".join(f"Question{i}: {q}\nResponse{i}: {r}" for i, q, r in self.numbered())


# ---------------------------------------------------------------------------
# history compression
# ---------------------------------------------------------------------------


def summarize_history(history: ConversationHistory, question: str, gateway: Gateway,
                      prompts: PromptSet = DEFAULT_PROMPTS) -> str:
    prompt = prompts.render("summarize", question=question, history=history.format())
    summary, _ = ask(gateway, LlmRequest(prompt, temperature=CONSTRUCTION_TEMPERATURE),
                     lambda t: after_label(t, "Summarization", multiline=True, stop_labels=("Reason",)))
    return summary


def compress_history(history: ConversationHistory, strategy: CompressionStrategy | str,
                     gateway: Gateway | None = None, question: str = "",
                     prompts: PromptSet = DEFAULT_PROMPTS) -> str:
    strategy = CompressionStrategy(strategy)
    if strategy is CompressionStrategy.REWRITE:
        raise ValueError("rewrite has no compressed history; use rewrite_query")
    if not history.entries:
        return ""
    if strategy is CompressionStrategy.RAW:
        return history.format()
    if strategy is CompressionStrategy.LAST:
        rows = history.numbered()
        lines = [f"Question{i}: {q}" for i, q, _ in rows]
        last_i, _, last_r = rows[-1]
        lines.append(f"Response{last_i}: {last_r}")
        return "\n".join(lines)
    if gateway is None:
        raise ValueError("summarization needs a gateway")
    return summarize_history(history, question, gateway, prompts)


def history_query_text(question: str, history: ConversationHistory, strategy: CompressionStrategy | str,
                       context: str = "") -> str:
    """Retrieval query for the non-rewrite strategies; citation markers are dropped."""
    strategy = CompressionStrategy(strategy)
    if strategy is CompressionStrategy.RAW:
        parts = [x for _, q, r in history.numbered() for x in (q, strip_markers(r))]
    elif strategy is CompressionStrategy.LAST:
        rows = history.numbered()
        parts = [q for _, q, _ in rows]
        if rows:
            parts.append(strip_markers(rows[-1][2]))
    elif strategy is CompressionStrategy.SUMM:
        parts = [context] if context else []
    else:
        raise ValueError("rewrite queries come from rewrite_query")
    return " ".join([*parts, question])


def rewrite_query(question: str, history: ConversationHistory, gateway: Gateway,
                  prompts: PromptSet = DEFAULT_PROMPTS, turn: str | None = None) -> str:
    prompt = prompts.render("rewrite", history=history.format() or "(no earlier turns)", question=question)
    try:
        rewrite, _ = ask(gateway, LlmRequest(prompt, temperature=CONSTRUCTION_TEMPERATURE),
                         lambda t: after_label(t, "Rewrite"))
    except ForgeError as exc:
        if turn is not None:
            exc.context.setdefault("turn", turn)
        raise
    return rewrite


@dataclass
class TurnContext:
    question: str  # what the generator is asked: the rewrite under ``rewrite``
    context: str  # compressed history, empty under ``rewrite``
    query: str  # retrieval query


def prepare_turn(question: str, history: ConversationHistory, strategy: CompressionStrategy | str,
                 gateway: Gateway | None = None, prompts: PromptSet = DEFAULT_PROMPTS,
                 turn: str | None = None) -> TurnContext:
    strategy = CompressionStrategy(strategy)
    if strategy is CompressionStrategy.REWRITE:
        if gateway is None:
            raise ValueError("rewriting needs a gateway")
        rewrite = rewrite_query(question, history, gateway, prompts, turn=turn)
        return TurnContext(rewrite, "", rewrite)
    context = compress_history(history, strategy, gateway, question, prompts)
    return TurnContext(question, context, history_query_text(question, history, strategy, context))


def retrieve_for_turn(index: Bm25Index, question: str, history: ConversationHistory,
                      strategy: CompressionStrategy | str, gateway: Gateway | None = None,
                      top_k: int = 100, prompts: PromptSet = DEFAULT_PROMPTS) -> RankedList:
    """Compressed history plus the question (or the rewrite alone), searched with BM25."""
    return search(index, prepare_turn(question, history, strategy, gateway, prompts).query, top_k)


# ---------------------------------------------------------------------------
# passages and generation
# ---------------------------------------------------------------------------


def passage_blocks(passages: Sequence[tuple[int, str]]) -> str:
    return "\n".join(f"[{pid}] {text}" for pid, text in passages)


def _drop_foreign_markers(text: str, allowed: set[int]) -> str:
    return re.sub(r"\s*\[(\d+)\]", lambda m: m.group(0) if int(m.group(1)) in allowed else "", text)


def compress_passages(passages: Sequence[tuple[int, str]], question: str, context: str = "",
                      gateway: Gateway | None = None, mode: PassageMode | str = PassageMode.PASSTHROUGH,
                      prompts: PromptSet = DEFAULT_PROMPTS) -> str:
    """Passage block handed to the generator.

    Pass-through returns ``[pid] text`` blocks in rank order. The LLM mode
    summarizes them in one call; markers naming ids outside the input are
    removed so provenance always points at a retrieved passage.
    """
    if not passages:
        raise ValueError("need at least one passage")
    mode = PassageMode(mode)
    block = passage_blocks(passages)
    if mode is PassageMode.PASSTHROUGH:
        return block
    if gateway is None:
        raise ValueError("LLM passage compression needs a gateway")
    prompt = prompts.render("compress_passages", question=question, context=context or "(none)", passages=block)
    summary, _ = ask(gateway, LlmRequest(prompt, temperature=CONSTRUCTION_TEMPERATURE),
                     lambda t: after_label(t, "Summarization", multiline=True))
    return _drop_foreign_markers(summary, {pid for pid, _ in passages})


@dataclass
class Statement:
    text: str
    cited: list[int]
    # (offset into text, pid) for re-inserting markers
    markers: list[tuple[int, int]] = field(default_factory=list)
    dangling: list[int] = field(default_factory=list)

    def with_markers(self) -> str:
        out, prev = [], 0
        for off, pid in self.markers:
            out.append(self.text[prev:off])
            out.append(f"[{pid}]")
            prev = off
        out.append(self.text[prev:])
        return "".join(out)

    def to_dict(self) -> dict:
        return {"text": self.text, "cited": list(self.cited),
                "markers": [list(m) for m in self.markers], "dangling": list(self.dangling)}

    @classmethod
    def from_dict(cls, d: dict) -> "Statement":
        return cls(d["text"], [int(x) for x in d["cited"]],
                   [(int(a), int(b)) for a, b in d.get("markers", [])], [int(x) for x in d.get("dangling", [])])


@dataclass
class GeneratedResponse:
    raw_text: str
    statements: list[Statement]
    model_name: str = ""

    @property
    def cited_ids(self) -> list[int]:
        return list(dict.fromkeys(pid for s in self.statements for pid in s.cited))

    def to_dict(self) -> dict:
        return {"raw_text": self.raw_text, "model_name": self.model_name,
                "statements": [s.to_dict() for s in self.statements]}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratedResponse":
        return cls(d["raw_text"], [Statement.from_dict(s) for s in d["statements"]], d.get("model_name", ""))


# a sentence ends at . ! ? plus any markers that follow, when whitespace and
# an uppercase letter (or the end of the text) come next
_STATEMENT_END_RE = re.compile(r"[.!?]+(?:\s*\[\d+\])*(?=\s+[A-Z]|\s*$)")
_MARKER_WITH_SPACE_RE = re.compile(r"\s*\[(\d+)\]")


def _statement(segment: str) -> Statement:
    text_parts, markers, cited = [], [], []
    prev, length = 0, 0
    for m in _MARKER_WITH_SPACE_RE.finditer(segment):
        piece = segment[prev:m.start()]
        text_parts.append(piece)
        length += len(piece)
        pid = int(m.group(1))
        markers.append((length, pid))
        if pid not in cited:
            cited.append(pid)
        prev = m.end()
    text_parts.append(segment[prev:])
    return Statement("".join(text_parts).strip(), cited, markers)


def parse_statements(raw_text: str, retrieved: Iterable[int] | None = None) -> list[Statement]:
    """Split generator output into statements with the ids each one cites.

    Ids outside ``retrieved`` (when given) are kept and listed as dangling.
    """
    text = raw_text.strip()
    segments, start = [], 0
    for m in _STATEMENT_END_RE.finditer(text):
        segments.append(text[start:m.end()])
        start = m.end()
    if start < len(text):
        segments.append(text[start:])
    allowed = set(retrieved) if retrieved is not None else None
    out = []
    for seg in segments:
        seg = seg.strip()
        if not seg:
            continue
        st = _statement(seg)
        if not st.text and out:
            # markers alone after the last sentence belong to it
            prev = out[-1]
            for _, pid in st.markers:
                prev.markers.append((len(prev.text), pid))
                if pid not in prev.cited:
                    prev.cited.append(pid)
            continue
        out.append(st)
    if allowed is not None:
        for st in out:
            st.dangling = [pid for pid in st.cited if pid not in allowed]
    return out


def generation_inputs(question: str, context: str, strategy: CompressionStrategy | str) -> str:
    strategy = CompressionStrategy(strategy)
    if strategy is CompressionStrategy.REWRITE:
        return f"Question: {question}"
    if strategy is CompressionStrategy.SUMM:
        return f"Current Question: {question}\nSummarization of Conversation History: {context or '(none)'}"
    return f"Current Question: {question}\nConversation History:\n{context or '(none)'}"


def render_generation_prompt(question: str, context: str, passages_text: str,
                             strategy: CompressionStrategy | str, prompts: PromptSet = DEFAULT_PROMPTS) -> str:
    strategy = CompressionStrategy(strategy)
    return prompts.render(
        "generate",
        instruction_variant=prompts.variants["generation_instruction"][strategy.value],
        inputs=generation_inputs(question, context, strategy),
        passages=passages_text,
    )


def generate_response(question: str, context: str, passages_text: str, strategy: CompressionStrategy | str,
                      gateway: Gateway, prompts: PromptSet = DEFAULT_PROMPTS,
                      retrieved: Iterable[int] | None = None,
                      temperature: float = GENERATION_TEMPERATURE) -> tuple[GeneratedResponse, str]:
    """Returns the parsed response and the exact prompt sent."""
    prompt = render_generation_prompt(question, context, passages_text, strategy, prompts)
    resp = gateway.complete(LlmRequest(prompt, temperature=temperature))
    if not resp.text.strip():
        raise EmptyResponse("generator returned no text")
    statements = parse_statements(resp.text, retrieved)
    if not statements:
        raise EmptyResponse("generator output has no statements")
    return GeneratedResponse(resp.text, statements, resp.model_name), prompt


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    strategy: CompressionStrategy = CompressionStrategy.RAW
    top_k: int = 100
    passages_m: int = 5
    history_window: int | None = None
    teacher_forced: bool = True
    passage_mode: PassageMode = PassageMode.PASSTHROUGH
    temperature: float = GENERATION_TEMPERATURE

    def __post_init__(self):
        self.strategy = CompressionStrategy(self.strategy)
        self.passage_mode = PassageMode(self.passage_mode)
        if self.top_k < 1 or self.passages_m < 1:
            raise ValueError("top_k and passages_m must be >= 1")
        if self.history_window is not None and self.history_window < 0:
            raise ValueError("history_window must be >= 0")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value, "top_k": self.top_k, "passages_m": self.passages_m,
            "history_window": self.history_window, "teacher_forced": self.teacher_forced,
            "passage_mode": self.passage_mode.value, "temperature": self.temperature,
        }


@dataclass
class TurnRecord:
    conversation_id: str
    turn_id: int
    strategy: str
    query: str
    ranked: RankedList
    response: GeneratedResponse | None
    prompt: str = ""
    prompt_tokens: int = 0
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "conversation_id": self.conversation_id,
            "turn_id": self.turn_id,
            "strategy": self.strategy,
            "query": self.query,
            "ranked": self.ranked.to_list(),
            "response": self.response.to_dict() if self.response else None,
            "prompt": self.prompt,
            "prompt_tokens": self.prompt_tokens,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TurnRecord":
        return cls(
            conversation_id=d["conversation_id"],
            turn_id=int(d["turn_id"]),
            strategy=d["strategy"],
            query=d["query"],
            ranked=RankedList.from_list(d["ranked"]),
            response=GeneratedResponse.from_dict(d["response"]) if d.get("response") else None,
            prompt=d.get("prompt", ""),
            prompt_tokens=int(d.get("prompt_tokens", 0)),
            error=d.get("error"),
        )


def run_conversation(conversation: Conversation, index: Bm25Index, corpus: PassageCorpus,
                     gateway: Gateway, config: RunConfig | None = None,
                     prompts: PromptSet = DEFAULT_PROMPTS) -> list[TurnRecord]:
    """Run every turn in order. A failing turn is recorded with its error and the run goes on."""
    config = config or RunConfig()
    strategy = config.strategy
    records: list[TurnRecord] = []
    produced: list[str] = []
    for k, turn in enumerate(conversation.turns):
        responses = [t.response for t in conversation.turns[:k]] if config.teacher_forced else produced[:k]
        full = ConversationHistory([(t.question, r) for t, r in zip(conversation.turns[:k], responses)])
        history = full.window(config.history_window)
        tag = f"{conversation.conversation_id}:{turn.turn_id}"
        query, ranked = turn.question, RankedList()
        try:
            tc = prepare_turn(turn.question, history, strategy, gateway, prompts, turn=tag)
            question, context, query = tc.question, tc.context, tc.query
            ranked = search(index, query, config.top_k)
            top = [(pid, corpus.text(pid)) for pid in ranked.ids()[: config.passages_m]]
            if not top:
                raise EmptyResponse("retrieval returned no passages", turn=tag)
            passages_text = compress_passages(top, question, context, gateway, config.passage_mode, prompts)
            response, prompt = generate_response(
                question, context, passages_text, strategy, gateway, prompts,
                retrieved=ranked.ids(), temperature=config.temperature,
            )
        except ForgeError as exc:
            exc.context.setdefault("turn", tag)
            log.warning("turn %s failed: %s", tag, exc)
            records.append(TurnRecord(conversation.conversation_id, turn.turn_id, strategy.value, query,
                                      ranked, None, error=f"{type(exc).__name__}: {exc}"))
            produced.append(turn.response)
            continue
        produced.append(response.raw_text)
        records.append(
            TurnRecord(conversation.conversation_id, turn.turn_id, strategy.value, query, ranked, response,
                       prompt, len(whitespace_tokens(prompt)))
        )
    return records


def run_conversations(conversations: Sequence[Conversation], index: Bm25Index, corpus: PassageCorpus,
                      gateway: Gateway, config: RunConfig | None = None, prompts: PromptSet = DEFAULT_PROMPTS,
                      workers: int = 1) -> list[TurnRecord]:
    """Run conversations, in parallel when ``workers`` > 1; output order follows the input."""
    def one(conv):
        return run_conversation(conv, index, corpus, gateway, config, prompts)

    if workers <= 1:
        results = [one(c) for c in conversations]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, gateway.max_in_flight)) as pool:
            results = list(pool.map(one, conversations))
    return [r for rs in results for r in rs]


def failures(records: Iterable[TurnRecord]) -> list[dict]:
    return [{"conversation_id": r.conversation_id, "turn_id": r.turn_id, "error": r.error}
            for r in records if r.error]
