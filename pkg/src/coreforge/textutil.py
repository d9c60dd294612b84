"""Tokenization helpers and the bundled English stop-word list.

Two tokenizers live here and they are deliberately different:

* ``terms`` - lowercased alphanumeric runs with stop words dropped. Used by
  BM25, term recall and the lexical entailment judge.
* ``whitespace_tokens`` - plain ``str.split``. Used for word counts, the
  16-word passage floor, dataset statistics and BLEU/ROUGE.
"""

from __future__ import annotations

import re

# Fixed list so term recall and BM25 are reproducible across environments.
STOPWORDS = frozenset(
    """
    a about above after again against all also am an and any are as at be
    because been before being below between both but by can could did do does
    doing down during each few for from further had has have having he her here
    hers herself him himself his how i if in into is it its itself just me more
    most my myself no nor not now of off on once only or other our ours
    ourselves out over own same she should so some such than that the their
    theirs them themselves then there these they this those through to too under
    until up very was we were what when where which while who whom why will with
    would you your yours yourself yourselves may might must shall upon within
    without among across around along via per one two three many much every
    either neither yet however although though whether since also etc s t d ll
    re ve m o y ain aren couldn didn doesn hadn hasn haven isn mightn mustn
    needn shan shouldn wasn weren won wouldn don
    """.split()
)

_TERM_RE = re.compile(r"[^\W_]+")


def terms(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop stop words. Order and duplicates kept."""
    return [t for t in _TERM_RE.findall(text.lower()) if t not in STOPWORDS]


def content_words(text: str) -> set[str]:
    return set(terms(text))


def whitespace_tokens(text: str) -> list[str]:
    return text.split()


def word_count(text: str) -> int:
    return len(text.split())


_MARKER_RE = re.compile(r"\[(\d+)\]")


def strip_markers(text: str) -> str:
    """Remove ``[123]`` citation markers and tidy the whitespace they leave."""
    out = _MARKER_RE.sub("", text)
    return re.sub(r"[ \t]+", " ", out).strip()


def marker_ids(text: str) -> list[int]:
    return [int(m) for m in _MARKER_RE.findall(text)]
