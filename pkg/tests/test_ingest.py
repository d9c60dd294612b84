from __future__ import annotations

import re
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coreforge.errors import EmptyTarget, EmptyTree, MalformedHtml
from coreforge.fetch import ReferenceStore
from coreforge.ingest import (
    RawPage,
    clean_content,
    extract_title_tree,
    filter_passages,
    ingest_pages,
    load_pages,
    non_english_ratio,
    page_text,
    split_reference_page,
    term_recall,
)
from coreforge.textutil import content_words

URL = "https://en.wikipedia.org/wiki/Sample"


def page(body: str, refs: str = "") -> RawPage:
    return RawPage(URL, f"<html><body>{body}{refs}</body></html>")


def words(n: int, word: str = "alpha") -> str:
    return " ".join(f"{word}{i}" for i in range(n))


# -- title trees -----------------------------------------------------------------

def test_nested_headings_build_the_expected_tree():
    tree = extract_title_tree(page("<h1>A</h1><p>root</p><h2>B</h2><p>b</p><h3>D</h3><p>d</p><h2>C</h2><p>c</p>"))
    tree.check()
    titles = {n.title: n for n in tree.nodes.values()}
    root = tree.nodes[tree.root]
    assert root.title == "A"
    assert [tree.nodes[c].title for c in root.children] == ["B", "C"]
    assert [tree.nodes[c].title for c in titles["B"].children] == ["D"]
    assert [titles[t].level for t in "ABCD"] == [1, 2, 2, 3]


def test_single_heading_page():
    tree = extract_title_tree(page("<h1>Only</h1><p>One paragraph of text.</p>"))
    assert list(tree.nodes) == ["n0"]
    assert tree.nodes["n0"].content == "One paragraph of text."


def test_missing_h1_is_malformed():
    with pytest.raises(MalformedHtml):
        extract_title_tree(page("<h2>B</h2><p>text</p>"))


def test_h1_without_content_is_empty_tree():
    with pytest.raises(EmptyTree):
        extract_title_tree(page("<h1>Nothing</h1>"))


def test_skipped_level_attaches_to_nearest_shallower_heading():
    tree = extract_title_tree(page("<h1>A</h1><p>a</p><h2>B</h2><p>b</p><h4>E</h4><p>e</p>"))
    e = next(n for n in tree.nodes.values() if n.title == "E")
    assert tree.nodes[e.parent].title == "B"
    assert e.level == 4


def test_headings_before_the_root_are_site_chrome():
    tree = extract_title_tree(page("<div><h3>Personal tools</h3><p>log in</p></div><h1>A</h1><p>a</p>"))
    assert [n.title for n in tree.nodes.values()] == ["A"]


def test_fixture_climate_outline():
    pages = load_pages(resources.files("coreforge") / "fixtures" / "pages")
    climate = next(extract_title_tree(p) for p in pages if p.url.endswith("/Climate_change"))
    health = next(n for n in climate.nodes.values() if n.title == "Health")
    assert [n.title for n in climate.path(health.node_id)] == ["Climate change", "Impacts", "Humans", "Health"]
    pricing = next(n for n in climate.nodes.values() if n.title == "Carbon pricing")
    assert pricing.level == 4 and climate.nodes[pricing.parent].title == "Mitigation"


def test_every_fixture_tree_is_well_formed():
    pages = load_pages(resources.files("coreforge") / "fixtures" / "pages")
    assert len(pages) == 6
    for p in pages:
        tree = extract_title_tree(p)
        tree.check()
        # one node per heading inside the article body, table of contents aside
        body = p.html.split('class="mw-parser-output"', 1)[1]
        heads = [h for h in re.findall(r"<h[2-6][ >][^<]*", body) if not h.endswith(">Contents")]
        assert len(tree.nodes) == len(heads) + 1


# -- cleaning ----------------------------------------------------------------------

def test_clean_content_strips_templates_and_records_slot():
    html = ('<p>First sentence.<sup class="reference"><a href="#cite_note-1">[1]</a></sup> Second '
            'sentence.<span class="mw-editsection">[edit]</span></p><div class="navbox">Nav stuff</div>')
    text, slots = clean_content(html)
    assert text == "First sentence. Second sentence."
    assert slots == [(len("First sentence."), 1)]


def test_clean_content_plain_text_is_identity():
    assert clean_content("plain words here") == ("plain words here", [])


def test_clean_content_empty():
    assert clean_content("") == ("", [])


def test_two_anchors_keep_their_reference_numbers():
    html = ('<p>Alpha beta.<sup class="reference"><a href="#cite_note-1">[1]</a></sup> Gamma delta.'
            '<sup class="reference"><a href="#cite_note-3">[3]</a></sup></p>')
    text, slots = clean_content(html)
    assert slots == [(text.index(" Gamma"), 1), (len(text), 3)]


def test_citation_needed_and_hatnotes_are_removed():
    html = ('<div class="hatnote">For other uses see X.</div><p>Claim here.<sup class="Template-Fact">'
            '[<i>citation needed</i>]</sup></p>')
    assert clean_content(html)[0] == "Claim here."


def test_node_references_resolve_through_the_reference_list():
    refs = ('<ol class="references"><li id="cite_note-a-1"><a class="external" href="https://r.example/a">a</a></li>'
            '<li id="cite_note-b-2"><a class="external" href="https://r.example/b">b</a></li></ol>')
    body = ('<h1>A</h1><p>One.<sup class="reference"><a href="#cite_note-b-2">[2]</a></sup>'
            ' Two.<sup class="reference"><a href="#cite_note-a-1">[1]</a></sup></p>')
    tree = extract_title_tree(page(body, refs))
    root = tree.nodes["n0"]
    assert root.reference_urls == ["https://r.example/b", "https://r.example/a"]
    assert root.inline_citation_slots == [(4, 0), (9, 1)]


def test_content_partition_matches_page_text():
    pages = load_pages(resources.files("coreforge") / "fixtures" / "pages")
    for p in pages:
        tree = extract_title_tree(p)
        joined = " ".join(n.content for n in tree.in_document_order())
        # page_text also keeps chrome before the root heading and the footer
        assert " ".join(joined.split()) in " ".join(page_text(p.html).split())


# -- splitting -------------------------------------------------------------------

def sentence(n: int, tag: str) -> str:
    return " ".join([tag] * (n - 1)) + " end."


def test_five_sentences_fit_one_chunk():
    text = " ".join(sentence(20, f"s{i}") for i in range(5))
    assert len(split_reference_page(text, 100)) == 1


def test_greedy_packing_groups_pairs():
    sents = [sentence(20, f"s{i}") for i in range(5)]
    chunks = split_reference_page(" ".join(sents), 40)
    assert chunks == [" ".join(sents[0:2]), " ".join(sents[2:4]), sents[4]]


def test_long_sentence_is_its_own_chunk():
    text = sentence(120, "w")
    assert split_reference_page(text, 100) == [text]


def test_target_below_floor_rejected():
    with pytest.raises(ValueError):
        split_reference_page("x.", 15)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.text(alphabet="abc .!?\n", min_size=1, max_size=40), max_size=20), st.integers(16, 64))
def test_chunks_reconstruct_the_input(parts, target):
    text = " ".join(parts)
    chunks = split_reference_page(text, target)
    assert all(c.strip() for c in chunks)
    assert "".join("".join(chunks).split()) == "".join(text.split())


# -- filtering -------------------------------------------------------------------

TARGET = "climate warming emission policy"


def test_fifteen_words_excluded():
    assert filter_passages([" ".join(["climate"] * 15)], "climate") == []


def test_sixteen_words_retained():
    kept = filter_passages([" ".join(["climate"] * 16)], "climate", 0.2)
    assert len(kept) == 1 and kept[0].word_count == 16 and kept[0].term_recall == 1.0


def test_non_english_ratio_over_limit_excluded():
    cand = " ".join(["climate"] * 13 + ["климат"] * 7)
    assert non_english_ratio(cand) == pytest.approx(0.35)
    assert filter_passages([cand], "climate") == []


def test_non_english_ratio_at_limit_retained():
    cand = " ".join(["climate"] * 14 + ["климат"] * 6)
    assert non_english_ratio(cand) == pytest.approx(0.3)
    assert len(filter_passages([cand], "climate")) == 1


def test_term_recall_half_is_below_point_six():
    cand = "climate policy " + words(16)
    assert term_recall(cand, content_words(TARGET)) == 0.5
    assert filter_passages([cand], TARGET, 0.6) == []
    assert len(filter_passages([cand], TARGET, 0.5)) == 1


def test_empty_target_raises():
    with pytest.raises(EmptyTarget):
        filter_passages(["x"], "the of and")


def test_threshold_out_of_range():
    with pytest.raises(ValueError):
        filter_passages(["x"], "climate", 1.5)


@pytest.mark.parametrize("text,expected", [
    ("hello world", 0.0),
    ("naïve café test", 0.0),
    ("один два три четыре a b c d e f", 0.4),
    ("", 0.0),
])
def test_non_english_ratio_cases(text, expected):
    assert non_english_ratio(text) == pytest.approx(expected)


@settings(max_examples=80, deadline=None)
@given(st.integers(10, 22), st.integers(0, 10))
def test_filter_boundaries_are_exact(n_words, n_foreign):
    n_foreign = min(n_foreign, n_words)
    toks = ["climate"] * (n_words - n_foreign) + ["気候"] * n_foreign
    kept = filter_passages([" ".join(toks)], "climate", 0.0)
    ratio = n_foreign / n_words
    assert bool(kept) == (n_words >= 16 and ratio <= 0.3)


# -- whole fixture ---------------------------------------------------------------

def test_fixture_ingest_filters_noise_and_reports_missing():
    root = resources.files("coreforge") / "fixtures"
    result = ingest_pages(load_pages(root / "pages"), ReferenceStore(root / "refs"))
    assert len(result.trees) == 6
    assert result.missing_references == ["https://tv-awards.example.com/72nd_primetime_emmy_awards/producers"]
    for p in result.passages:
        assert p.word_count >= 16
        assert non_english_ratio(p.text) <= 0.3
    # the all-Japanese reference page yields nothing
    assert not any(p.source_url.endswith("/berlin1936") for p in result.passages)
