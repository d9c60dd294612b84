"""Citation recall and precision with a pluggable support judge.

A judge answers one question: do these premise passages, taken together,
support this statement? Recall is the share of statements whose cited
passages support them. A citation is irrelevant when it does not support the
statement on its own while the statement's other citations still do.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .dataset import PassageCorpus
from .llm import CONSTRUCTION_TEMPERATURE, Gateway, LlmRequest
from .pipeline import GeneratedResponse, Statement
from .prompting import after_label, ask
from .textutil import content_words

DEFAULT_THRESHOLD = 0.6


class Judge(Protocol):
    def __call__(self, premises: Sequence[str], hypothesis: str) -> bool: ...


@dataclass(frozen=True)
class LexicalJudge:
    """Supported when at least ``threshold`` of the statement's content words occur in the premises."""

    threshold: float = DEFAULT_THRESHOLD

    def score(self, premises: Sequence[str], hypothesis: str) -> float:
        words = content_words(hypothesis)
        if not words:
            return 0.0
        pool = set().union(*(content_words(p) for p in premises)) if premises else set()
        return len(words & pool) / len(words)

    def __call__(self, premises: Sequence[str], hypothesis: str) -> bool:
        if not premises:
            return False
        words = content_words(hypothesis)
        return bool(words) and self.score(premises, hypothesis) >= self.threshold


_ENTAIL_PROMPT = (
    "Premise:\n{premise}\n\nHypothesis: {hypothesis}\n\n"
    "Does the premise entail the hypothesis? Answer in the format: Answer: yes or Answer: no"
)


class LlmJudge:
    """Entailment asked of a chat model; the gateway's response cache makes reruns free."""

    def __init__(self, gateway: Gateway):
        self.gateway = gateway

    def __call__(self, premises: Sequence[str], hypothesis: str) -> bool:
        if not premises:
            return False
        prompt = _ENTAIL_PROMPT.format(premise="\n\n".join(premises), hypothesis=hypothesis)
        answer, _ = ask(self.gateway, LlmRequest(prompt, temperature=CONSTRUCTION_TEMPERATURE),
                        lambda t: after_label(t, "Answer"))
        return answer.strip().lower().startswith("yes")


def _premises(ids: Sequence[int], corpus: PassageCorpus) -> list[str]:
    return [corpus.text(pid) for pid in ids if pid in corpus]


def statement_supported(st: Statement, corpus: PassageCorpus, judge: Judge) -> bool:
    if not st.cited:
        return False
    return judge(_premises(st.cited, corpus), st.text)


def citation_recall(response: GeneratedResponse, corpus: PassageCorpus, judge: Judge) -> float:
    if not response.statements:
        return 0.0
    supported = sum(statement_supported(s, corpus, judge) for s in response.statements)
    return supported / len(response.statements)


@dataclass(frozen=True)
class PrecisionResult:
    value: float
    correct: int
    total: int

    @property
    def undefined(self) -> bool:
        return self.total == 0


def citation_precision_detail(response: GeneratedResponse, corpus: PassageCorpus, judge: Judge) -> PrecisionResult:
    """Correct citations over all citations.

    A citation is correct when its statement is supported by the full citation
    set and the citation is not irrelevant. Citations of unsupported
    statements, ids missing from the corpus and ids the parser flagged as
    dangling (not among the retrieved passages) are never correct.
    """
    total = correct = 0
    for st in response.statements:
        total += len(st.cited)
        if not statement_supported(st, corpus, judge):
            continue
        for pid in st.cited:
            if pid not in corpus or pid in st.dangling:
                continue
            alone = judge([corpus.text(pid)], st.text)
            if alone:
                correct += 1
                continue
            rest = _premises([c for c in st.cited if c != pid], corpus)
            if not judge(rest, st.text):
                correct += 1
    return PrecisionResult(correct / total if total else 0.0, correct, total)


def citation_precision(response: GeneratedResponse, corpus: PassageCorpus, judge: Judge) -> float:
    return citation_precision_detail(response, corpus, judge).value
