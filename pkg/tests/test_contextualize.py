from __future__ import annotations

from pathlib import Path

import pytest

from coreforge.contextualize import (
    KeywordChain,
    TurnDraft,
    build_keyword_chain,
    contextualize_conversation,
    generate_full_question,
    parse_conversational,
    render_conversational_prompt,
    render_question_prompt,
)
from coreforge.errors import ParseError
from coreforge.llm import MockGateway
from coreforge.mock import heuristic_gateway
from conftest import outline_tree

GOLDEN = Path(__file__).parent / "golden"

CLIMATE = ("Climate change", [
    ("Causes", []),
    ("Impacts", [("Environment", []), ("Humans", [("Health", []), ("Food", [])])]),
])

EMMY_RESPONSE = (
    "For 2020, the Outstanding Variety Series category was split into two, Outstanding Variety Talk Series "
    "and Outstanding Variety Sketch Series. The number of nominees in several categories was expanded."
)
EMMY_QUESTION = "What were the category and rule changes for the 72nd Primetime Emmy Awards ceremony?"

SOLVE_FULL = [
    "What is Solve Education?",
    "What is the history of Solve Education?",
]
SOLVE_CONV_2 = "Could you share more about the history of Solve Education since it started?"


def draft(i: int, terms: list[str], response: str, full: str | None = None) -> TurnDraft:
    return TurnDraft(i, KeywordChain(terms), response, full_question=full)


def test_keyword_chain_follows_the_path():
    tree = outline_tree(CLIMATE)
    health = next(n for n, v in tree.nodes.items() if v.title == "Health")
    chain = build_keyword_chain(tree, health)
    assert chain.terms == ["Climate change", "Impacts", "Humans", "Health"]
    assert chain.focus == "Health"
    assert build_keyword_chain(tree, "n0").terms == ["Climate change"]


def test_keyword_chain_by_tree_mapping():
    t1 = outline_tree(CLIMATE, "https://x.org/1")
    t2 = outline_tree(("Other", [("Part", [])]), "https://x.org/2")
    assert build_keyword_chain([t1, t2], ("https://x.org/2", "n1")).terms == ["Other", "Part"]
    with pytest.raises(ValueError):
        build_keyword_chain([t1, t2], "n1")
    with pytest.raises(KeyError):
        build_keyword_chain(t1, "n99")


def test_empty_chain_rejected():
    with pytest.raises(ValueError):
        KeywordChain([])


def test_emmy_question_replay():
    d = draft(1, ["72nd Primetime Emmy Awards", "Category and rule changes"], EMMY_RESPONSE)
    gw = MockGateway({render_question_prompt(d): f"Question: {EMMY_QUESTION}"})
    assert generate_full_question(d, gw) == EMMY_QUESTION
    assert d.full_question == EMMY_QUESTION
    assert not d.needs_review


def test_question_missing_focus_is_flagged():
    d = draft(1, ["Climate change", "Health"], "Heat waves harm people.")
    gw = MockGateway(responder=lambda req: "Question: What happens during heat waves?")
    generate_full_question(d, gw)
    assert d.needs_review


def test_question_prompt_truncates_long_responses():
    d = draft(1, ["A"], " ".join(["zyx"] * 500))
    prompt = render_question_prompt(d, max_words=10)
    assert "Response: " + "zyx " * 10 + "..." in prompt
    assert prompt.count("zyx") == 10


def solve_drafts() -> list[TurnDraft]:
    return [
        draft(1, ["Solve Education"], "Solve Education is a non-profit working on learning apps.", SOLVE_FULL[0]),
        draft(2, ["Solve Education", "History"], "It was founded in 2015 in Singapore.", SOLVE_FULL[1]),
    ]


def test_solve_education_conversational_replay():
    drafts = solve_drafts()
    reply = (
        f"Turn #1\nOriginal Question: {SOLVE_FULL[0]}\nConversational Question: {SOLVE_FULL[0]}\n"
        "Reason: The first turn stays as it is.\n"
        f"Turn #2\nOriginal Question: {SOLVE_FULL[1]}\nConversational Question: {SOLVE_CONV_2}\n"
        "Reason: Asks for more detail in a natural way."
    )
    gw = MockGateway({render_conversational_prompt(drafts, "LDS", "Solve Education"): reply})
    contextualize_conversation(drafts, "LDS", gw)
    assert drafts[1].conversational_question == SOLVE_CONV_2
    assert drafts[1].full_question == SOLVE_FULL[1]
    assert drafts[0].rewrite_reason == "The first turn stays as it is."


def test_single_turn_needs_no_call():
    gw = MockGateway()
    drafts = contextualize_conversation(solve_drafts()[:1], "LDS", gw)
    assert drafts[0].conversational_question == SOLVE_FULL[0]
    assert gw.calls == 0


def test_drafts_need_full_questions():
    with pytest.raises(ValueError):
        contextualize_conversation([draft(1, ["A"], "r"), draft(2, ["A", "B"], "r")], "LDS", MockGateway())


def test_dtrw_prompt_has_no_topic():
    drafts = solve_drafts()
    lds = render_conversational_prompt(drafts, "LDS", "Solve Education")
    dtrw = render_conversational_prompt(drafts, "DTRW", "Solve Education")
    assert "Topic: Solve Education\n" in lds
    assert "Topic: Solve Education\n" not in dtrw
    assert "Now I will give you the question and response pairs:" in dtrw


# -- parsing -----------------------------------------------------------------------

def block(i: int, conv: str, reason: str = "r") -> str:
    return f"Turn #{i}\nOriginal Question: q{i}\nConversational Question: {conv}\nReason: {reason}\n"


def test_parse_out_of_order_blocks():
    parsed = parse_conversational(block(2, "second") + block(1, "first"), 2)
    assert parsed == {1: ("first", "r"), 2: ("second", "r")}


def test_parse_trims_and_tolerates_markdown():
    text = "**Turn #1**\n**Conversational Question:**   X ?  \nReason: multi\nline reason\n"
    assert parse_conversational(text, 1) == {1: ("X ?", "multi line reason")}


def test_parse_missing_turn_or_marker():
    with pytest.raises(ParseError):
        parse_conversational(block(1, "a"), 2)
    with pytest.raises(ParseError):
        parse_conversational("Turn #1\nOriginal Question: q\n", 1)
    with pytest.raises(ParseError):
        parse_conversational(block(1, "a") + block(1, "b"), 1)


def test_unparseable_output_is_reasked_once():
    drafts = solve_drafts()
    gw = MockGateway(responder=lambda req: "I cannot do that.")
    with pytest.raises(ParseError):
        contextualize_conversation(drafts, "SIDS", gw)
    assert gw.calls == 2


def test_heuristic_mock_makes_followups_context_dependent():
    drafts = [draft(1, ["Emmy"], "r1", "What is known about Emmy?"),
              draft(2, ["Emmy", "Hosts"], "r2", "What is known about Hosts in the context of Emmy?")]
    contextualize_conversation(drafts, "LDS", heuristic_gateway())
    assert drafts[0].conversational_question == "What is known about Emmy?"
    assert drafts[1].conversational_question == "And what about Hosts?"


def test_draft_round_trip():
    d = solve_drafts()[1]
    d.source = ("u", "n3")
    assert TurnDraft.from_dict(d.to_dict()).to_dict() == d.to_dict()


# -- rendered prompts stay byte-stable ---------------------------------------------

@pytest.mark.parametrize("name,render", [
    ("question_emmy.txt",
     lambda: render_question_prompt(draft(1, ["72nd Primetime Emmy Awards", "Category and rule changes"],
                                          EMMY_RESPONSE))),
    ("conversational_lds.txt", lambda: render_conversational_prompt(solve_drafts(), "LDS", "Solve Education")),
    ("conversational_dtrw.txt", lambda: render_conversational_prompt(solve_drafts(), "DTRW")),
])
def test_golden_prompts(name, render):
    assert render() == (GOLDEN / name).read_text(encoding="utf-8")
