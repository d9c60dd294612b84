"""Turn keyword chains into questions, then into context-dependent conversational questions.

Stage one asks for a self-contained question per turn from the node's keyword
chain (root title ... node title) and its section text. Stage two sends the
whole conversation in one prompt and asks for a conversational rewrite of
every turn. The stage-one question is kept as the golden rewrite.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ParseError
from .ingest import TitleTree
from .llm import CONSTRUCTION_TEMPERATURE, Gateway, LlmRequest
from .prompting import DEFAULT_PROMPTS, PromptSet, after_label, ask, truncate_words
from .sampling import Kind

PROMPT_RESPONSE_WORDS = 200


@dataclass
class KeywordChain:
    terms: list[str]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("keyword chain must be non-empty")

    @property
    def focus(self) -> str:
        return self.terms[-1]


@dataclass
class TurnDraft:
    turn_index: int
    chain: KeywordChain
    response: str
    full_question: str | None = None
    conversational_question: str | None = None
    rewrite_reason: str | None = None
    # set when the generated question does not mention the chain's last term
    needs_review: bool = False
    source: tuple[str, str] | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "chain": list(self.chain.terms),
            "response": self.response,
            "full_question": self.full_question,
            "conversational_question": self.conversational_question,
            "rewrite_reason": self.rewrite_reason,
            "needs_review": self.needs_review,
            "source": list(self.source) if self.source else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TurnDraft":
        return cls(
            turn_index=int(d["turn_index"]),
            chain=KeywordChain(list(d["chain"])),
            response=d["response"],
            full_question=d.get("full_question"),
            conversational_question=d.get("conversational_question"),
            rewrite_reason=d.get("rewrite_reason"),
            needs_review=bool(d.get("needs_review", False)),
            source=tuple(d["source"]) if d.get("source") else None,
        )


def build_keyword_chain(trees: TitleTree | Mapping[str, TitleTree] | Sequence[TitleTree],
                        step: tuple[str, str] | str) -> KeywordChain:
    """Titles on the root-to-node path of the step's node."""
    if isinstance(trees, TitleTree):
        by_id = {trees.tree_id: trees}
    elif isinstance(trees, Mapping):
        by_id = dict(trees)
    else:
        by_id = {t.tree_id: t for t in trees}
    if isinstance(step, str):
        if len(by_id) != 1:
            raise ValueError("a bare node id needs exactly one tree")
        tree = next(iter(by_id.values()))
        node_id = step
    else:
        tree = by_id[step[0]]
        node_id = step[1]
    if node_id not in tree.nodes:
        raise KeyError(f"node {node_id!r} not in tree {tree.tree_id!r}")
    return KeywordChain([n.title for n in tree.path(node_id)])


# ---------------------------------------------------------------------------
# stage one
# ---------------------------------------------------------------------------


def render_question_prompt(draft: TurnDraft, prompts: PromptSet = DEFAULT_PROMPTS,
                           max_words: int = PROMPT_RESPONSE_WORDS) -> str:
    return prompts.render(
        "question",
        chain=", ".join(draft.chain.terms),
        response=truncate_words(draft.response, max_words),
    )


def parse_question(text: str) -> str:
    return after_label(text, "Question")


def generate_full_question(draft: TurnDraft, gateway: Gateway, prompts: PromptSet = DEFAULT_PROMPTS,
                           max_words: int = PROMPT_RESPONSE_WORDS) -> str:
    """Ask for the self-contained question of one turn; store it on the draft."""
    if not draft.response and not draft.chain.terms:
        raise ValueError("draft needs a chain and a response")
    request = LlmRequest(render_question_prompt(draft, prompts, max_words), temperature=CONSTRUCTION_TEMPERATURE)
    question, _ = ask(gateway, request, parse_question)
    draft.full_question = question
    draft.needs_review = draft.chain.focus.lower() not in question.lower()
    return question


# ---------------------------------------------------------------------------
# stage two
# ---------------------------------------------------------------------------


def render_conversational_prompt(drafts: Sequence[TurnDraft], kind: Kind | str, topic: str | None = None,
                                 prompts: PromptSet = DEFAULT_PROMPTS,
                                 max_words: int = PROMPT_RESPONSE_WORDS) -> str:
    kind = Kind(kind)
    variants = prompts.variants
    pairs = "\n".join(
        f"Id: {i}\nQuestion: {d.full_question}\nResponse: {truncate_words(d.response, max_words)}"
        for i, d in enumerate(drafts, 1)
    )
    if kind is Kind.DTRW or not topic:
        topic_block = ""
    else:
        topic_block = f"Topic: {topic}\n\n"
    return prompts.render(
        "conversational",
        instruction_variant=variants["conversational_instruction"][kind.value],
        input_intro=variants["conversational_input_intro"][kind.value],
        topic_block=topic_block,
        pairs=pairs,
    )


_TURN_RE = re.compile(r"^[ \t*_#>-]*Turn\s*#\s*(\d+)[ \t*_:]*$", re.IGNORECASE | re.MULTILINE)


def parse_conversational(text: str, n_turns: int) -> dict[int, tuple[str, str | None]]:
    """Map turn number -> (conversational question, reason).

    Blocks are keyed by their ``Turn #i`` header, so out-of-order output is fine.
    """
    heads = list(_TURN_RE.finditer(text))
    out: dict[int, tuple[str, str | None]] = {}
    for i, m in enumerate(heads):
        end = heads[i + 1].start() if i + 1 < len(heads) else len(text)
        block = text[m.end():end]
        idx = int(m.group(1))
        question = after_label(block, "Conversational Question")
        try:
            reason = after_label(block, "Reason", multiline=True)
        except ParseError:
            reason = None
        out[idx] = (question, reason)
    if sorted(out) != list(range(1, n_turns + 1)) or len(heads) != n_turns:
        raise ParseError(f"expected turns 1..{n_turns}, got {sorted(out)}")
    return out


def contextualize_conversation(drafts: list[TurnDraft], kind: Kind | str, gateway: Gateway,
                               topic: str | None = None, prompts: PromptSet = DEFAULT_PROMPTS,
                               max_words: int = PROMPT_RESPONSE_WORDS) -> list[TurnDraft]:
    """Fill ``conversational_question`` and ``rewrite_reason`` on every draft."""
    if not drafts:
        return drafts
    for d in drafts:
        if not d.full_question or d.response is None:
            raise ValueError(f"turn {d.turn_index} has no full question yet")
    if topic is None:
        topic = drafts[0].chain.terms[0]
    if len(drafts) == 1:
        drafts[0].conversational_question = drafts[0].full_question
        drafts[0].rewrite_reason = "single-turn conversation; nothing to elide"
        return drafts
    prompt = render_conversational_prompt(drafts, kind, topic, prompts, max_words)
    request = LlmRequest(prompt, temperature=CONSTRUCTION_TEMPERATURE)
    parsed, _ = ask(gateway, request, lambda text: parse_conversational(text, len(drafts)))
    for i, d in enumerate(drafts, 1):
        d.conversational_question, d.rewrite_reason = parsed[i]
    return drafts
