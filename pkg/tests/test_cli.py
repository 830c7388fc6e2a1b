from __future__ import annotations

import json
from pathlib import Path

import pytest

from rufes import submission
from rufes.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from rufes.corpus import TagTracks, from_iob, read_iob
from rufes.pipeline import load_corpus
from rufes.synthetic import SYNTHETIC_ONTOLOGY, generate_corpus, write_corpus

TRAIN_FLAGS = ["--epochs", "2", "--hidden", "16", "--heads", "2", "--layers", "1"]


def write_gold(path: Path, docs) -> None:
    submission.write_rows(path, submission.rows_from_mentions([m for sd in docs for m in sd.mentions], "gold"))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    docs = generate_corpus(3, 6, seed=21)
    write_corpus(root / "corpus", docs)
    write_gold(root / "gold.tsv", docs)
    (root / "ontology.txt").write_text(SYNTHETIC_ONTOLOGY, encoding="utf-8")
    return root, docs


def test_convert_empty_dir(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["convert", "--corpus", str(tmp_path / "empty"), "--out", str(tmp_path / "iob")]) == EXIT_OK
    assert list((tmp_path / "iob").iterdir()) == []


def test_convert_three_docs_roundtrip(workspace, tmp_path):
    root, docs = workspace
    out = tmp_path / "iob"
    assert main(["convert", "--corpus", str(root / "corpus"), "--annotations", str(root / "gold.tsv"),
                 "--out", str(out)]) == EXIT_OK
    files = sorted(out.iterdir())
    assert [f.name for f in files] == [f"{sd.doc.doc_id}.iob" for sd in docs]
    for f, sd in zip(files, docs):
        segs = read_iob(f.read_text(encoding="utf-8"))
        tracks = TagTracks(tuple(tuple(zip(*(r[3] for r in seg))) for seg in segs))
        got = {(m.start, m.end, m.type_path, m.mention_class) for m in from_iob(sd.doc, tracks)}
        assert got == {(m.start, m.end, m.type_path, m.mention_class) for m in sd.mentions}


def test_convert_corrupt_file(workspace, tmp_path):
    root, docs = workspace
    corpus = tmp_path / "corpus"
    write_corpus(corpus, docs)
    bad = corpus / "ltf" / f"{docs[1].doc.doc_id}.ltf.xml"
    bad.write_bytes(bad.read_bytes()[:-40])
    out = tmp_path / "iob"
    assert main(["convert", "--corpus", str(corpus), "--out", str(out)]) == EXIT_DATA
    assert len(list(out.iterdir())) == 2


def test_config_errors(workspace, tmp_path):
    root, _ = workspace
    assert main(["tag", "--corpus", str(root / "corpus"), "--model", str(tmp_path / "missing.bin"),
                 "--vocab", str(tmp_path / "v.txt"), "--out", str(tmp_path / "o.tsv")]) == EXIT_CONFIG
    assert not (tmp_path / "o.tsv").exists()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"no_such_key": 1}))
    assert main(["score", "--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text(json.dumps({"threshold": 2.0}))
    assert main(["score", "--config", str(cfg)]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as err:
        main(["score", "--workers", "many"])
    assert err.value.code == EXIT_CONFIG


def test_score_self_is_one(workspace, tmp_path, capsys):
    root, _ = workspace
    report = tmp_path / "r.tsv"
    assert main(["score", "--gold", str(root / "gold.tsv"), "--system", str(root / "gold.tsv"),
                 "--report", str(report)]) == EXIT_OK
    lines = report.read_text().splitlines()
    assert len(lines) == 6
    assert all(line.split("\t")[1:] == ["1.000000"] * 3 for line in lines)
    assert "approximation" in capsys.readouterr().out


def test_correct_identity_with_empty_rules(workspace, tmp_path):
    root, _ = workspace
    (tmp_path / "rules.tsv").write_text("")
    out = tmp_path / "out.tsv"
    assert main(["correct", "--input", str(root / "gold.tsv"), "--ontology", str(root / "ontology.txt"),
                 "--rules", str(tmp_path / "rules.tsv"), "--out", str(out)]) == EXIT_OK
    assert out.read_bytes() == (root / "gold.tsv").read_bytes()


def test_correct_applies_ontology_then_rules(tmp_path):
    (tmp_path / "ont.txt").write_text("GPE.ProvinceState\nPathogen.Virus\nFAC.Building.Hospital\n")
    (tmp_path / "rules.tsv").write_text("virus\tsubstring\tPathogen.Virus\n")
    rows = [submission.SubmissionRow("r", "r-0", "Illinois", "D", 0, 7, "E0", submission.TypePath.parse(
                "LOC.ProvinceState"), "NAM", 0.9),
            submission.SubmissionRow("r", "r-1", "Norovirus", "D", 10, 18, "E1", submission.TypePath.parse("GPE"),
                                     "NAM", 0.8),
            submission.SubmissionRow("r", "r-2", "County Hospital", "D", 20, 34, "E2",
                                     submission.TypePath.parse("ORG"), "NAM", 0.7)]
    submission.write_rows(tmp_path / "in.tsv", rows)
    args = ["correct", "--input", str(tmp_path / "in.tsv"), "--ontology", str(tmp_path / "ont.txt"),
            "--rules", str(tmp_path / "rules.tsv"), "--out", str(tmp_path / "out.tsv")]
    assert main(args) == EXIT_OK
    assert [str(r.type_path) for r in submission.read_rows(tmp_path / "out.tsv")] == \
        ["GPE.ProvinceState", "Pathogen.Virus", "ORG"]
    assert main(args + ["--auto-rules"]) == EXIT_OK
    assert str(submission.read_rows(tmp_path / "out.tsv")[2].type_path) == "FAC.Building.Hospital"


def test_analyze_fixture(tmp_path, capsys):
    from helpers import error_fixture
    gold, sys_ = error_fixture()
    submission.write_rows(tmp_path / "g.tsv", submission.rows_from_mentions(gold, "g"))
    submission.write_rows(tmp_path / "s.tsv", submission.rows_from_mentions(sys_, "s"))
    assert main(["analyze", "--gold", str(tmp_path / "g.tsv"), "--system", str(tmp_path / "s.tsv")]) == EXIT_OK
    out = capsys.readouterr().out
    for cat in ("wrong_type", "extraneous", "wrong_extent", "missing", "coref_error"):
        assert any(line.split()[:2] == [cat, "1"] for line in out.splitlines())


def test_full_pipeline(workspace, tmp_path):
    root, docs = workspace
    corpus, gold = str(root / "corpus"), str(root / "gold.tsv")
    model, vocab, cmodel = (str(tmp_path / n) for n in ("m.bin", "v.txt", "c.bin"))
    assert main(["train", "--corpus", corpus, "--annotations", gold, "--model", model, "--vocab", vocab,
                 "--coref-model", cmodel, *TRAIN_FLAGS]) == EXIT_OK
    tagged, linked, fixed = (str(tmp_path / n) for n in ("t.tsv", "l.tsv", "f.tsv"))
    assert main(["tag", "--corpus", corpus, "--model", model, "--vocab", vocab,
                 "--ontology", str(root / "ontology.txt"), "--out", tagged, "--run-id", "demo"]) == EXIT_OK
    assert main(["coref", "--corpus", corpus, "--input", tagged, "--coref-model", cmodel, "--out", linked]) == EXIT_OK
    before, after = submission.read_rows(tagged), submission.read_rows(linked)
    assert [r.__dict__ | {"entity_id": None} for r in before] == [r.__dict__ | {"entity_id": None} for r in after]
    assert main(["correct", "--input", linked, "--ontology", str(root / "ontology.txt"), "--out", fixed]) == EXIT_OK
    assert main(["score", "--gold", gold, "--system", fixed, "--report", str(tmp_path / "r.tsv")]) == EXIT_OK
    assert main(["analyze", "--gold", gold, "--system", fixed, "--report", str(tmp_path / "a.txt")]) == EXIT_OK
    # rows are ordered by document then offset
    keys = [(r.doc_id, r.start) for r in after]
    assert keys == sorted(keys)


def test_config_file_and_flag_precedence(workspace, tmp_path):
    root, _ = workspace
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corpus": str(root / "corpus"), "annotations": str(root / "gold.tsv"),
                               "model": str(tmp_path / "m.bin"), "vocab": str(tmp_path / "v.txt"),
                               "tagger": {"epochs": 1, "hidden": 16, "num_heads": 2, "num_layers": 1}}))
    assert main(["train", "--config", str(cfg), "--model", str(tmp_path / "other.bin")]) == EXIT_OK
    assert (tmp_path / "other.bin").exists() and not (tmp_path / "m.bin").exists()


def test_workers_do_not_change_output(workspace, tmp_path):
    root, _ = workspace
    model, vocab = str(tmp_path / "m.bin"), str(tmp_path / "v.txt")
    assert main(["train", "--corpus", str(root / "corpus"), "--annotations", str(root / "gold.tsv"),
                 "--model", model, "--vocab", vocab, *TRAIN_FLAGS]) == EXIT_OK
    outs = []
    for workers in ("1", "3"):
        out = tmp_path / f"t{workers}.tsv"
        assert main(["tag", "--corpus", str(root / "corpus"), "--model", model, "--vocab", vocab,
                     "--workers", workers, "--out", str(out)]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_load_corpus_flat_layout(tmp_path):
    docs = generate_corpus(2, 3, seed=1)
    write_corpus(tmp_path, docs)
    for sub in ("ltf", "rsd"):
        for f in (tmp_path / sub).iterdir():
            f.rename(tmp_path / f.name)
        (tmp_path / sub).rmdir()
    loaded = load_corpus(tmp_path)
    assert [d.doc_id for d in loaded.documents] == [sd.doc.doc_id for sd in docs]
    assert all(d.rsd_text == sd.rsd_text for d, sd in zip(loaded.documents, docs))
