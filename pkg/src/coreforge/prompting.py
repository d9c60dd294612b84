"""Prompt template loading/rendering and tolerant parsing of labelled outputs."""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, TypeVar

from .errors import ParseError
from .llm import Gateway, LlmRequest, LlmResponse

T = TypeVar("T")

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")

REASK_SUFFIX = (
    "\n\nYour previous answer did not follow the required output format. "
    "Answer again and follow the output format exactly."
)


class PromptSet:
    """Templates with ``{{name}}`` placeholders; files in ``override_dir`` win over bundled ones."""

    def __init__(self, override_dir: str | Path | None = None):
        self.override_dir = Path(override_dir) if override_dir else None

    def _read(self, filename: str) -> str:
        if self.override_dir is not None:
            candidate = self.override_dir / filename
            if candidate.exists():
                return candidate.read_text(encoding="utf-8")
        return _bundled(filename)

    def template(self, name: str) -> str:
        return self._read(f"{name}.txt")

    @property
    def variants(self) -> dict:
        return json.loads(self._read("variants.json"))

    def render(self, name: str, **values: str) -> str:
        text = self.template(name)

        def sub(m: re.Match) -> str:
            key = m.group(1)
            if key not in values:
                raise KeyError(f"template {name!r} needs a value for {key!r}")
            return values[key]

        return _PLACEHOLDER_RE.sub(sub, text).rstrip("\n")


@lru_cache(maxsize=None)
def _bundled(filename: str) -> str:
    return resources.files("coreforge").joinpath("prompts", filename).read_text(encoding="utf-8")


DEFAULT_PROMPTS = PromptSet()


def _label_re(label: str) -> re.Pattern:
    # tolerate markdown emphasis around the label: **Question:** / *Question*:
    return re.compile(rf"^[ \t*_#>-]*{re.escape(label)}[ \t*_]*:[ \t*_]*(.*)$", re.IGNORECASE | re.MULTILINE)


def after_label(text: str, label: str, *, multiline: bool = False, stop_labels: tuple[str, ...] = ()) -> str:
    """Text following ``label:``; raise ParseError if the label is absent or empty.

    With ``multiline`` the value runs to the end of the text or to the first
    line starting with one of ``stop_labels``.
    """
    m = _label_re(label).search(text)
    if m is None:
        raise ParseError(f"no {label!r} marker in model output")
    if multiline:
        rest = text[m.start(1):]
        for stop in stop_labels:
            s = _label_re(stop).search(rest)
            if s is not None:
                rest = rest[: s.start()]
        value = " ".join(rest.split())
    else:
        value = m.group(1).strip()
    value = value.strip().strip("*").strip()
    if not value:
        raise ParseError(f"empty value after {label!r}")
    return value


def ask(gateway: Gateway, request: LlmRequest, parse: Callable[[str], T]) -> tuple[T, LlmResponse]:
    """Complete and parse; on ParseError re-ask once with a format reminder."""
    resp = gateway.complete(request)
    try:
        return parse(resp.text), resp
    except ParseError:
        retry = LlmRequest(
            user_text=request.user_text + REASK_SUFFIX,
            system_text=request.system_text,
            temperature=request.temperature,
            max_output_tokens=request.max_output_tokens,
        )
        resp = gateway.complete(retry)
        return parse(resp.text), resp


def truncate_words(text: str, limit: int) -> str:
    words = text.split()
    if len(words) <= limit:
        return " ".join(words)
    return " ".join(words[:limit]) + " ..."
