"""Deterministic stand-in for a chat model, used by ``--mock`` runs and tests.

The responder recognises each bundled prompt by a phrase from its
instruction and answers in the required output format using only string
manipulation of the prompt itself. It never calls out and never draws
random numbers, so a mock run is a pure function of its inputs.
"""

from __future__ import annotations

import re

from .errors import EndpointError
from .llm import LlmRequest, MockGateway
from .textutil import strip_markers, whitespace_tokens

_CONTEXT_RE = re.compile(r"^What is known about (.+) in the context of (.+)\?$")
_FOLLOWUP_RE = re.compile(r"^And what about (.+)\?$")
_HISTORY_Q_RE = re.compile(r"^Question\d+: (.*)$", re.MULTILINE)
_PAIR_RE = re.compile(r"^Id: (\d+)\nQuestion: (.*)$", re.MULTILINE)
_LEADING_MARKER_RE = re.compile(r"^\[(\d+)\]\s*(.*)$", re.MULTILINE)
_SENTENCE_END_RE = re.compile(r"(?<=[.!?])(?:\[\d+\])*\s+(?=[A-Z])")


def _field(text: str, label: str) -> str:
    m = re.search(rf"^{re.escape(label)}: ?(.*)$", text, re.MULTILINE)
    return m.group(1).strip() if m else ""


def _section(text: str, start: str, end: str | None = None) -> str:
    i = text.rfind(start)
    body = text[i + len(start):] if i >= 0 else text
    if end is not None:
        j = body.find(end)
        if j >= 0:
            body = body[:j]
    return body.strip()


def _first_sentence(text: str) -> str:
    parts = _SENTENCE_END_RE.split(text.strip(), maxsplit=1)
    return parts[0].strip()


def _question(prompt: str) -> str:
    chain = [t.strip() for t in _field(prompt, "Keyword Chain").split(",") if t.strip()]
    if not chain:
        return "Question: What is this about?"
    if len(chain) == 1:
        return f"Question: What is known about {chain[0]}?"
    context = ", ".join(chain[:-1])
    return f"Question: What is known about {chain[-1]} in the context of {context}?"


def _conversational(prompt: str) -> str:
    body = _section(prompt, "Now I will give you")
    blocks = []
    for idx, question in _PAIR_RE.findall(body):
        m = _CONTEXT_RE.match(question)
        if idx == "1" or m is None:
            conv, reason = question, "The first question keeps its full form."
        else:
            conv, reason = f"And what about {m.group(1)}?", "The shared context is left implicit."
        blocks.append(
            f"Turn #{idx}\nOriginal Question: {question}\nConversational Question: {conv}\nReason: {reason}"
        )
    return "\n".join(blocks)


def _rewrite(prompt: str) -> str:
    question = _field(prompt, "Current Question")
    history = _section(prompt, "Conversation History:", "Current Question:")
    m = _FOLLOWUP_RE.match(question)
    if m is None:
        return f"Rewrite: {question}"
    context = None
    for previous in reversed(_HISTORY_Q_RE.findall(history)):
        c = _CONTEXT_RE.match(previous.strip())
        if c is not None:
            context = c.group(2)
            break
    if context is None:
        return f"Rewrite: What is known about {m.group(1)}?"
    return f"Rewrite: What is known about {m.group(1)} in the context of {context}?"


def _summarize(prompt: str) -> str:
    body = _section(prompt, "Given the following question and its conversation history:")
    questions = [q.strip() for q in _HISTORY_Q_RE.findall(body)]
    if not questions:
        return "Summarization: No earlier turns."
    return "Summarization: Earlier turns asked: " + " ".join(questions)


def _compress(prompt: str) -> str:
    body = _section(prompt, "Retrieved Passages:", "(Now, you should")
    sentences = [f"{_first_sentence(text)} [{pid}]" for pid, text in _LEADING_MARKER_RE.findall(body)[:3]]
    return "Summarization: " + (" ".join(sentences) or "Nothing relevant was retrieved.")


def _generate(prompt: str) -> str:
    body = _section(prompt, "\nPassages:\n")
    blocks = _LEADING_MARKER_RE.findall(body)
    if blocks:
        return " ".join(f"{_first_sentence(text)}[{pid}]" for pid, text in blocks[:2])
    # compressed passages: echo the leading sentences
    return " ".join(_SENTENCE_END_RE.split(body.strip())[:3]) or "No answer is available."


def _judge(prompt: str) -> str:
    a = _section(prompt, "Response A:\n", "\nResponse B:")
    b = _section(prompt, "Response B:\n", "\n\nIs Response A")
    ta = whitespace_tokens(strip_markers(a).lower())
    tb = whitespace_tokens(strip_markers(b).lower())
    if ta == tb or len(ta) == len(tb):
        return "Verdict: Draw"
    return "Verdict: Win" if len(ta) > len(tb) else "Verdict: Lose"


_ROUTES = (
    ("generate the original question", _question),
    ("convert the original question into a conversational form", _conversational),
    ("rewrite the current question into a standalone question", _rewrite),
    ("summarize the conversation history", _summarize),
    ("Compress the information in the retrieved passages", _compress),
    ("Support your answer with citations", _generate),
    ("You are comparing two responses", _judge),
)


def heuristic_responder(request: LlmRequest) -> str:
    prompt = request.user_text
    for phrase, handler in _ROUTES:
        if phrase in prompt:
            return handler(prompt)
    raise EndpointError("mock does not recognise this prompt", status=400)


def heuristic_gateway(**kwargs) -> MockGateway:
    return MockGateway(responder=heuristic_responder, model_name="mock-heuristic", **kwargs)
