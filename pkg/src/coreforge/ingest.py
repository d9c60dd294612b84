"""Encyclopedia HTML -> title trees, and reference pages -> filtered passage pools.

The page walker works on the parsed DOM in document order. Boilerplate
(infoboxes, navboxes, edit links, hatnotes, reference lists, tables, ...) is
removed first, then every remaining text node is attributed to the most recent
heading. Footnote anchors (``<sup class="reference">``) never reach the text;
they become citation slots at the character offset where they appeared.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable
from urllib.parse import urlparse

from bs4 import BeautifulSoup, Comment, NavigableString, Tag
from bs4.element import CData, Declaration, Doctype, ProcessingInstruction

from .errors import EmptyTarget, EmptyTree, MalformedHtml
from .textutil import content_words, word_count

log = logging.getLogger(__name__)

DEFAULT_TARGET_WORDS = 128
DEFAULT_TERM_RECALL = 0.2
MIN_PASSAGE_WORDS = 16
MAX_NON_ENGLISH_RATIO = 0.3

# Section headings that never carry answerable content.
BOILERPLATE_TITLES = frozenset(
    {
        "references",
        "notes",
        "see also",
        "external links",
        "further reading",
        "bibliography",
        "sources",
        "citations",
        "footnotes",
        "notes and references",
        "works cited",
    }
)


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RawPage:
    url: str
    html: str
    fetched_at: str | None = None

    def __post_init__(self):
        if not self.html or not self.html.strip():
            raise ValueError("RawPage.html is empty")
        parsed = urlparse(self.url)
        if not parsed.scheme or not (parsed.netloc or parsed.scheme == "file"):
            raise ValueError(f"not an absolute URL: {self.url!r}")


@dataclass
class TitleNode:
    node_id: str
    level: int
    title: str
    content: str = ""
    reference_urls: list[str] = field(default_factory=list)
    # (offset into content, index into reference_urls)
    inline_citation_slots: list[tuple[int, int]] = field(default_factory=list)
    parent: str | None = None
    children: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "level": self.level,
            "title": self.title,
            "content": self.content,
            "reference_urls": list(self.reference_urls),
            "inline_citation_slots": [list(s) for s in self.inline_citation_slots],
            "parent": self.parent,
            "children": list(self.children),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TitleNode":
        return cls(
            node_id=d["node_id"],
            level=int(d["level"]),
            title=d["title"],
            content=d.get("content", ""),
            reference_urls=list(d.get("reference_urls", [])),
            inline_citation_slots=[(int(a), int(b)) for a, b in d.get("inline_citation_slots", [])],
            parent=d.get("parent"),
            children=list(d.get("children", [])),
        )


@dataclass
class TitleTree:
    root: str
    nodes: dict[str, TitleNode]
    page_url: str

    @property
    def title(self) -> str:
        return self.nodes[self.root].title

    @property
    def tree_id(self) -> str:
        return self.page_url

    def node(self, node_id: str) -> TitleNode:
        return self.nodes[node_id]

    def path(self, node_id: str) -> list[TitleNode]:
        """Nodes from the root down to ``node_id`` inclusive."""
        out = []
        cur: str | None = node_id
        while cur is not None:
            out.append(self.nodes[cur])
            cur = self.nodes[cur].parent
        return out[::-1]

    def depth(self, node_id: str) -> int:
        """Root has depth 1."""
        return len(self.path(node_id))

    def in_document_order(self) -> list[TitleNode]:
        return list(self.nodes.values())

    def check(self) -> None:
        """Raise ValueError if any structural invariant is broken."""
        roots = [n for n in self.nodes.values() if n.parent is None]
        if len(roots) != 1 or roots[0].node_id != self.root:
            raise ValueError("tree must have exactly one parentless node, the root")
        if self.nodes[self.root].level != 1:
            raise ValueError("root must be level 1")
        for n in self.nodes.values():
            for c in n.children:
                child = self.nodes[c]
                if child.parent != n.node_id:
                    raise ValueError(f"inconsistent link {n.node_id} -> {c}")
                if child.level <= n.level:
                    raise ValueError(f"child {c} level {child.level} <= parent level {n.level}")
            if n.parent is not None and n.node_id not in self.nodes[n.parent].children:
                raise ValueError(f"{n.node_id} missing from parent's children")
            last = -1
            for off, idx in n.inline_citation_slots:
                if not 0 <= idx < len(n.reference_urls):
                    raise ValueError(f"slot index {idx} out of range in {n.node_id}")
                if off < last or off > len(n.content):
                    raise ValueError(f"slot offsets out of order in {n.node_id}")
                last = off
        seen = set()
        stack = [self.root]
        while stack:
            cur = stack.pop()
            if cur in seen:
                raise ValueError("cycle in tree")
            seen.add(cur)
            stack.extend(self.nodes[cur].children)
        if seen != set(self.nodes):
            raise ValueError("tree is not connected")

    def to_dict(self) -> dict:
        return {
            "page_url": self.page_url,
            "root": self.root,
            "nodes": [n.to_dict() for n in self.nodes.values()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TitleTree":
        nodes = {}
        for nd in d["nodes"]:
            node = TitleNode.from_dict(nd)
            nodes[node.node_id] = node
        return cls(root=d["root"], nodes=nodes, page_url=d["page_url"])


@dataclass
class Passage:
    passage_id: str | int
    text: str
    source_url: str
    word_count: int
    term_recall: float

    def to_dict(self) -> dict:
        return {
            "passage_id": self.passage_id,
            "text": self.text,
            "source_url": self.source_url,
            "word_count": self.word_count,
            "term_recall": self.term_recall,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Passage":
        return cls(
            passage_id=d["passage_id"],
            text=d["text"],
            source_url=d["source_url"],
            word_count=int(d["word_count"]),
            term_recall=float(d["term_recall"]),
        )


# ---------------------------------------------------------------------------
# HTML cleaning
# ---------------------------------------------------------------------------

_NOISE_SELECTORS = ", ".join(
    [
        "script", "style", "noscript", "template", "link", "meta", "nav", "footer",
        "aside", "form", "input", "button", "table", "figure", "img", "math", "svg",
        ".mw-editsection", ".hatnote", ".navbox", ".vertical-navbox", ".sidebar",
        ".infobox", ".ambox", ".metadata", ".noprint", ".mw-empty-elt", ".toc", "#toc",
        ".mw-jump-link", ".catlinks", "#siteSub", "#contentSub", "#jump-to-nav",
        ".reflist", ".references", ".refbegin", ".mw-references-wrap", ".thumb",
        ".gallery", ".shortdescription", ".mw-indicators", "#mw-navigation",
        "#footer", ".Template-Fact", ".mw-cite-backlink", ".printfooter",
    ]
)

_BLOCK_TAGS = frozenset(
    """address article blockquote dd details div dl dt fieldset figcaption
    header hr li main ol p pre section summary ul caption tr""".split()
)
_HEADING_RE = re.compile(r"^h[1-6]$")
_SPECIAL_RE = re.compile(
    r"[\u200b-\u200f\u2060\ufeff\u00ad\u00b6\u2191\u2020\u2021]"
    r"|\[(?:edit|citation needed|clarification needed|when\?|who\?|according to whom\?|dubious[^\]]*)\]"
    r"|\^",
    re.IGNORECASE,
)
_WS_RE = re.compile(r"\s+")
_NOTE_NUMBER_RE = re.compile(r"(\d+)\D*$")
_SKIPPED_STRINGS = (Comment, CData, ProcessingInstruction, Declaration, Doctype)


def _is_footnote(tag: Tag) -> bool:
    return tag.name == "sup" and "reference" in (tag.get("class") or [])


def _footnote_ref(tag: Tag) -> tuple[int | None, str | None]:
    """Return (footnote number, target note id) for a ``sup.reference`` anchor."""
    anchor = tag.find("a", href=True)
    note_id = None
    if anchor is not None and anchor["href"].startswith("#"):
        note_id = anchor["href"][1:]
    digits = re.search(r"\d+", tag.get_text())
    if digits:
        return int(digits.group()), note_id
    if note_id:
        m = _NOTE_NUMBER_RE.search(note_id)
        if m:
            return int(m.group(1)), note_id
    return None, note_id


def _reference_map(soup: BeautifulSoup) -> tuple[dict[str, str], dict[int, str]]:
    """Map note ids and 1-based ordinals of the reference list to external URLs."""
    by_id: dict[str, str] = {}
    by_ordinal: dict[int, str] = {}
    ordinal = 0
    for ol in soup.select("ol.references"):
        for li in ol.find_all("li", recursive=False):
            ordinal += 1
            url = None
            for a in li.select("a.external[href]") + li.find_all("a", href=True):
                href = a["href"]
                if href.startswith("//"):
                    href = "https:" + href
                if href.startswith(("http://", "https://")):
                    url = href
                    break
            if url is None:
                continue
            by_ordinal[ordinal] = url
            if li.get("id"):
                by_id[li["id"]] = url
    return by_id, by_ordinal


def _strip_noise(soup: BeautifulSoup) -> None:
    for el in soup.select(_NOISE_SELECTORS):
        if not el.decomposed:
            el.decompose()


class _TextBuilder:
    """Accumulates whitespace-normalized text and records citation slot offsets."""

    def __init__(self):
        self._parts: list[str] = []
        self._length = 0
        self._pending_space = False
        self._pending_break = False
        self.slots: list[tuple[int, int | None, str | None]] = []

    def add_text(self, raw: str) -> None:
        s = _WS_RE.sub(" ", _SPECIAL_RE.sub("", raw.replace("\xa0", " ")))
        if not s:
            return
        stripped = s.strip()
        if s[0] == " ":
            self._pending_space = True
        if stripped:
            if self._length:
                if self._pending_break:
                    self._emit("\n")
                elif self._pending_space:
                    self._emit(" ")
            self._pending_space = False
            self._pending_break = False
            self._emit(stripped)
        if s[-1] == " ":
            self._pending_space = True

    def add_break(self) -> None:
        self._pending_break = True

    def add_slot(self, number: int | None, note_id: str | None) -> None:
        self.slots.append((self._length, number, note_id))

    def _emit(self, s: str) -> None:
        self._parts.append(s)
        self._length += len(s)

    @property
    def text(self) -> str:
        return "".join(self._parts)


def _walk(node: Tag, on_text, on_break, on_slot, on_heading) -> None:
    for child in node.children:
        if isinstance(child, NavigableString):
            if not isinstance(child, _SKIPPED_STRINGS):
                on_text(str(child))
            continue
        if not isinstance(child, Tag):
            continue
        name = child.name
        if _HEADING_RE.match(name):
            on_heading(child)
            continue
        if _is_footnote(child):
            on_slot(*_footnote_ref(child))
            continue
        if name == "br":
            on_break()
            continue
        block = name in _BLOCK_TAGS
        if block:
            on_break()
        _walk(child, on_text, on_break, on_slot, on_heading)
        if block:
            on_break()


def _parse(html: str) -> BeautifulSoup:
    try:
        return BeautifulSoup(html, "html.parser")
    except Exception as exc:  # html.parser only fails on pathological input
        raise MalformedHtml(f"unparseable document: {exc}") from exc


def _heading_title(tag: Tag) -> str:
    b = _TextBuilder()
    b.add_text(tag.get_text(" "))
    return b.text


def clean_content(raw_html_fragment: str) -> tuple[str, list[tuple[int, int]]]:
    """Strip markup and boilerplate from an HTML fragment.

    Returns the plain text and ``(offset, footnote number)`` pairs, one per
    footnote anchor, in document order. Heading text is not content and is
    dropped.
    """
    if not raw_html_fragment or not raw_html_fragment.strip():
        return "", []
    soup = _parse(raw_html_fragment)
    _strip_noise(soup)
    b = _TextBuilder()
    _walk(soup, b.add_text, b.add_break, b.add_slot, lambda _h: b.add_break())
    return b.text, [(off, num) for off, num, _ in b.slots if num is not None]


def page_text(html: str) -> str:
    """Cleaned text of a whole document (headings excluded)."""
    return clean_content(html)[0]


def extract_title_tree(page: RawPage) -> TitleTree:
    """Build the heading hierarchy of ``page``.

    The first H1 is the root. Any later H1 is treated as level 2, and headings
    before the root (site chrome) are ignored. A heading whose level skips
    (H2 -> H4) hangs directly under the nearest shallower heading.
    """
    soup = _parse(page.html)
    by_id, by_ordinal = _reference_map(soup)
    _strip_noise(soup)

    if soup.find("h1") is None:
        raise MalformedHtml("document has no H1 heading", url=page.url)

    nodes: dict[str, TitleNode] = {}
    builders: dict[str, _TextBuilder] = {}
    stack: list[TitleNode] = []
    current: list[_TextBuilder | None] = [None]

    def on_heading(tag: Tag) -> None:
        level = int(tag.name[1])
        if not nodes:
            if level != 1:
                current[0] = None
                return
        elif level == 1:
            level = 2
        node_id = f"n{len(nodes)}"
        while stack and stack[-1].level >= level:
            stack.pop()
        parent = stack[-1] if stack else None
        node = TitleNode(node_id=node_id, level=level, title=_heading_title(tag),
                         parent=parent.node_id if parent else None)
        if parent:
            parent.children.append(node_id)
        nodes[node_id] = node
        stack.append(node)
        builders[node_id] = _TextBuilder()
        current[0] = builders[node_id]

    def on_text(s: str) -> None:
        if current[0] is not None:
            current[0].add_text(s)

    def on_break() -> None:
        if current[0] is not None:
            current[0].add_break()

    def on_slot(number, note_id) -> None:
        if current[0] is not None:
            current[0].add_slot(number, note_id)

    _walk(soup.body or soup, on_text, on_break, on_slot, on_heading)

    for node_id, node in nodes.items():
        b = builders[node_id]
        node.content = b.text
        for off, number, note_id in b.slots:
            url = by_id.get(note_id) if note_id else None
            if url is None and number is not None:
                url = by_ordinal.get(number)
            if url is None:
                continue
            if url not in node.reference_urls:
                node.reference_urls.append(url)
            node.inline_citation_slots.append((off, node.reference_urls.index(url)))

    tree = TitleTree(root="n0", nodes=nodes, page_url=page.url)
    root = nodes["n0"]
    if not root.children and not root.content:
        raise EmptyTree("page has an H1 but no content and no subheadings", url=page.url)
    return tree


def is_boilerplate(node: TitleNode) -> bool:
    return node.title.strip().lower() in BOILERPLATE_TITLES


# ---------------------------------------------------------------------------
# Reference pages -> passages
# ---------------------------------------------------------------------------

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+|\s*\n\s*")


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT_RE.split(text) if s and s.strip()]


def split_reference_page(page_text: str, target_words: int = DEFAULT_TARGET_WORDS) -> list[str]:
    """Greedily pack whole sentences into chunks of at most ``target_words`` words.

    A sentence longer than ``target_words`` becomes a chunk of its own.
    """
    if target_words < MIN_PASSAGE_WORDS:
        raise ValueError(f"target_words must be >= {MIN_PASSAGE_WORDS}")
    chunks: list[str] = []
    cur: list[str] = []
    cur_words = 0
    for sent in split_sentences(page_text):
        n = word_count(sent)
        if cur and cur_words + n > target_words:
            chunks.append(" ".join(cur))
            cur, cur_words = [], 0
        cur.append(sent)
        cur_words += n
    if cur:
        chunks.append(" ".join(cur))
    return chunks


_ENGLISH_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,;:'\"()-"
)


def non_english_ratio(text: str) -> float:
    """Fraction of whitespace tokens in which fewer than half the characters are
    ASCII letters, digits or ``.,;:'"()-``."""
    tokens = text.split()
    if not tokens:
        return 0.0
    bad = 0
    for tok in tokens:
        ok = sum(1 for ch in tok if ch in _ENGLISH_CHARS)
        if 2 * ok < len(tok):
            bad += 1
    return bad / len(tokens)


def term_recall(candidate: str, target_words: set[str]) -> float:
    if not target_words:
        raise EmptyTarget("target text has no content words")
    return len(target_words & content_words(candidate)) / len(target_words)


def filter_passages(
    candidates: Iterable[str],
    target_text: str,
    threshold: float = DEFAULT_TERM_RECALL,
    *,
    source_url: str = "",
    min_words: int = MIN_PASSAGE_WORDS,
    max_non_english: float = MAX_NON_ENGLISH_RATIO,
) -> list[Passage]:
    """Keep candidates that are long enough, English enough and on-topic.

    Passage ids are ``"<source_url>#<candidate index>"`` so the same chunk of
    the same reference page gets the same id whichever section cites it.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    target = content_words(target_text)
    if not target:
        raise EmptyTarget("target text has no content words")
    kept = []
    for i, cand in enumerate(candidates):
        wc = word_count(cand)
        if wc < min_words:
            continue
        if non_english_ratio(cand) > max_non_english:
            continue
        recall = term_recall(cand, target)
        if recall < threshold:
            continue
        kept.append(Passage(f"{source_url}#{i}", cand, source_url, wc, recall))
    return kept


# ---------------------------------------------------------------------------
# Directory ingestion
# ---------------------------------------------------------------------------


@dataclass
class SupportLink:
    """Surviving passages of one reference page for one citing section."""

    page_url: str
    node_id: str
    reference_url: str
    passage_ids: list[str]

    def to_dict(self) -> dict:
        return {
            "page_url": self.page_url,
            "node_id": self.node_id,
            "reference_url": self.reference_url,
            "passage_ids": list(self.passage_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SupportLink":
        return cls(d["page_url"], d["node_id"], d["reference_url"], list(d["passage_ids"]))


@dataclass
class IngestResult:
    trees: list[TitleTree]
    passages: list[Passage]
    support: list[SupportLink]
    missing_references: list[str] = field(default_factory=list)
    skipped_pages: list[tuple[str, str]] = field(default_factory=list)


def canonical_url(html: str, fallback: str) -> str:
    soup = BeautifulSoup(html, "html.parser")
    link = soup.find("link", rel="canonical", href=True)
    return link["href"] if link else fallback


def load_pages(pages_dir: str | Path) -> list[RawPage]:
    pages = []
    for path in sorted(Path(pages_dir).glob("*.html")):
        html = path.read_text(encoding="utf-8")
        pages.append(RawPage(url=canonical_url(html, path.resolve().as_uri()), html=html))
    return pages


def ingest_pages(
    pages: list[RawPage],
    load_reference: Callable[[str], str | None],
    *,
    target_words: int = DEFAULT_TARGET_WORDS,
    threshold: float = DEFAULT_TERM_RECALL,
) -> IngestResult:
    """Parse pages, split and filter every cited reference page.

    ``load_reference`` maps a URL to its HTML (or None when unavailable). A
    passage that survives for several citing sections is stored once, with the
    highest term recall it achieved.
    """
    trees: list[TitleTree] = []
    skipped: list[tuple[str, str]] = []
    for page in pages:
        try:
            trees.append(extract_title_tree(page))
        except (MalformedHtml, EmptyTree) as exc:
            log.warning("skipping %s: %s", page.url, exc)
            skipped.append((page.url, str(exc)))

    chunk_cache: dict[str, list[str] | None] = {}
    pool: dict[str, Passage] = {}
    support: list[SupportLink] = []
    missing: list[str] = []
    for tree in trees:
        for node in tree.in_document_order():
            if not node.reference_urls or not content_words(node.content):
                continue
            for url in node.reference_urls:
                if url not in chunk_cache:
                    html = load_reference(url)
                    if html is None:
                        missing.append(url)
                        chunk_cache[url] = None
                    else:
                        chunk_cache[url] = split_reference_page(page_text(html), target_words)
                chunks = chunk_cache[url]
                if chunks is None:
                    continue
                kept = filter_passages(chunks, node.content, threshold, source_url=url)
                for p in kept:
                    prev = pool.get(p.passage_id)
                    if prev is None or p.term_recall > prev.term_recall:
                        pool[p.passage_id] = p
                support.append(SupportLink(tree.page_url, node.node_id, url, [p.passage_id for p in kept]))

    def sort_key(pid: str):
        url, _, idx = pid.rpartition("#")
        return url, int(idx)

    passages = [pool[k] for k in sorted(pool, key=sort_key)]
    return IngestResult(trees, passages, support, sorted(set(missing)), skipped)
