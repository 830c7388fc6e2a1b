from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from rufes.corpus import Mention
from rufes.ontology import TypePath
from rufes.submission import SubmissionFormatError, SubmissionRow, emit, parse, rows_from_mentions

names = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\t\n\r.:"), min_size=1, max_size=8)
rows = st.builds(
    SubmissionRow,
    run_id=names, mention_id=names,
    text=st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=20),
    doc_id=names.filter(lambda s: s.strip() == s),
    start=st.integers(0, 10_000), end=st.integers(10_000, 20_000),
    entity_id=names,
    type_path=st.lists(st.sampled_from(["PER", "Artist", "Photographer"]), min_size=1, max_size=3)
    .map(lambda xs: TypePath(tuple(xs))),
    mention_class=st.sampled_from(["NAM", "NOM", "PRO"]),
    confidence=st.floats(1e-300, 1.0, exclude_min=False),
)


@given(st.lists(rows, max_size=5))
def test_parse_emit_roundtrip(rs):
    assert parse(emit(rs)) == rs


def test_line_layout():
    row = SubmissionRow("run", "run-0", "Phoan\tPhobel", "DOC1", 3, 14, "DOC1_E0",
                        TypePath.parse("PER.Artist.Photographer"), "NAM", 0.25)
    assert row.to_line() == "run\trun-0\tPhoan\\tPhobel\tDOC1:3-14\tDOC1_E0\tPER.Artist.Photographer\tNAM\t0.25"


@pytest.mark.parametrize("line", [
    "a\tb\tc\tD:1-2\te\tPER\tNAM",  # 7 columns
    "a\tb\tc\tD-1-2\te\tPER\tNAM\t0.5",  # bad provenance
    "a\tb\tc\tD:1-2\te\tPER\tXXX\t0.5",  # bad class
    "a\tb\tc\tD:1-2\te\tPER\tNAM\t0",  # confidence must be > 0
    "a\tb\tc\tD:3-2\te\tPER\tNAM\t0.5",  # end < start
])
def test_bad_lines(line):
    with pytest.raises(SubmissionFormatError):
        parse(line + "\n")


def test_rows_from_mentions_ids_and_order():
    P = TypePath.parse
    ms = [Mention("B", 5, 6, "xy", P("ORG"), entity_id="B_E0"), Mention("A", 9, 9, "z", P("PER")),
          Mention("A", 0, 2, "abc", P("PER"), confidence=0.0)]
    out = rows_from_mentions(ms, "r")
    assert [(r.doc_id, r.start, r.mention_id, r.entity_id) for r in out] == \
        [("A", 0, "r-0", "A_S0"), ("A", 9, "r-1", "A_S1"), ("B", 5, "r-2", "B_E0")]
    assert out[0].confidence == 1e-12
