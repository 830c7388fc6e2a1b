"""Command-line entry point: ``rufes <convert|train|tag|coref|correct|score|analyze>``.

Settings come from an optional JSON ``--config`` file; command-line flags win.
Exit codes: 0 success, 1 data errors, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import coref, feedback, scorer, submission
from .container import ContainerError
from .corpus import AlignmentError, OverlapError, to_iob, write_iob
from .ontology import OntologyFormatError, TypeHierarchy, correct_type, load_ontology
from .pipeline import group_by_doc, load_corpus, parallel_map, tag_documents, training_examples
from .tagger import FINE_TUNING_LR, TaggerConfig, TrainingDiverged, Vocab, load_model, save_model, train

logger = logging.getLogger("rufes")

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    run_id: str = "rufes"
    corpus: str | None = None
    annotations: str | None = None
    ontology: str | None = None
    pronouns: str | None = None
    determiners: str | None = None
    rules: str | None = None
    model: str | None = None
    vocab: str | None = None
    coref_model: str | None = None
    input: str | None = None
    output: str | None = None
    gold: str | None = None
    system: str | None = None
    report: str | None = None
    threshold: float = 0.5
    partial_credit: bool = False
    keep_longest: bool = False
    auto_rules: bool = False
    snap: bool = False
    workers: int = 1
    seed: int = 0
    tagger: dict = field(default_factory=dict)
    coref: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.run_id:
            raise ConfigError("run_id must be non-empty")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must be in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> PipelineConfig:
        data: dict = {}
        if getattr(args, "config", None):
            try:
                data = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            unknown = set(data) - {f.name for f in fields(cls)}
            if unknown:
                raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for f in fields(cls):
            value = getattr(args, f.name, None)
            if value is not None and f.name not in ("tagger", "coref"):
                data[f.name] = value
        tagger = dict(data.get("tagger", {}))
        for key in ("epochs", "hidden", "num_layers", "num_heads", "learning_rate", "batch_size", "max_seq_len"):
            value = getattr(args, key, None)
            if value is not None:
                tagger[key] = value
        if getattr(args, "fine_tuning_lr", False):
            tagger["learning_rate"] = FINE_TUNING_LR
        data["tagger"] = tagger
        return cls(**data)

    def require(self, *names: str) -> None:
        """Fail unless every named input is configured and exists."""
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"--{name.replace('_', '-')} is required")
            if not Path(value).exists():
                raise ConfigError(f"{name} path does not exist: {value}")

    def need_output(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"--{name.replace('_', '-')} is required")


def _hierarchy(cfg: PipelineConfig) -> TypeHierarchy | None:
    if cfg.ontology is None:
        return None
    return load_ontology(Path(cfg.ontology).read_text(encoding="utf-8"))


def _lexicons(cfg: PipelineConfig):
    return (coref.load_lexicon(cfg.pronouns, "pronouns.txt"),
            coref.load_lexicon(cfg.determiners, "determiners.txt"))


# --------------------------------------------------------------------------- commands

def cmd_convert(cfg: PipelineConfig) -> int:
    cfg.require("corpus")
    if cfg.annotations is not None:
        cfg.require("annotations")
    cfg.need_output("output")
    gold = group_by_doc(submission.read_mentions(cfg.annotations)) if cfg.annotations else {}
    corpus = load_corpus(cfg.corpus)
    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = len(corpus.failures)
    written = 0
    for doc in corpus.documents:
        try:
            tracks = to_iob(doc, gold.get(doc.doc_id, []), keep_longest=cfg.keep_longest, snap=cfg.snap)
        except (AlignmentError, OverlapError) as exc:
            logger.error("%s: %s", doc.doc_id, exc)
            failed += 1
            continue
        (out_dir / f"{doc.doc_id}.iob").write_text(write_iob(doc, tracks), encoding="utf-8")
        written += 1
    logger.info("converted %d documents, %d failed", written, failed)
    return EXIT_DATA if failed else EXIT_OK


def cmd_train(cfg: PipelineConfig) -> int:
    cfg.require("corpus", "annotations")
    cfg.need_output("model", "vocab")
    corpus = load_corpus(cfg.corpus)
    if corpus.failures:
        logger.error("%d corpus files could not be parsed; not training", len(corpus.failures))
        return EXIT_DATA
    if not corpus.documents:
        logger.error("no documents in %s", cfg.corpus)
        return EXIT_DATA
    gold = group_by_doc(submission.read_mentions(cfg.annotations))
    docs = corpus.documents
    vocab = Vocab.build([tok.text for tok in doc.tokens] for doc in docs)
    try:
        examples = training_examples(docs, gold, vocab, cfg.keep_longest, cfg.snap)
    except (AlignmentError, OverlapError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    tagger_cfg = TaggerConfig.from_dict({"seed": cfg.seed, **cfg.tagger, "vocab_size": len(vocab)})
    model = train(examples, tagger_cfg)
    save_model(model, cfg.model)
    vocab.save(cfg.vocab)
    logger.info("tagger trained on %d segments; final loss %.4f", len(examples), model.loss_history[-1])

    if cfg.coref_model is not None:
        pronouns, determiners = _lexicons(cfg)
        pair_cfg = coref.PairScorerConfig(**{"seed": cfg.seed, **cfg.coref})
        pairs = [p for doc in docs
                 for p in coref.training_pairs(doc, gold.get(doc.doc_id, []), pair_cfg.max_antecedents,
                                               pronouns, determiners)]
        params = coref.train_pair_scorer(pairs, pair_cfg)
        coref.save_pair_scorer(params, cfg.coref_model, pair_cfg)
        logger.info("pair scorer trained on %d pairs", len(pairs))
    return EXIT_OK


def cmd_tag(cfg: PipelineConfig) -> int:
    cfg.require("corpus", "model", "vocab")
    if cfg.ontology is not None:
        cfg.require("ontology")
    cfg.need_output("output")
    model = load_model(cfg.model)
    vocab = Vocab.load(cfg.vocab)
    h = _hierarchy(cfg)
    corpus = load_corpus(cfg.corpus)
    mentions = tag_documents(model, corpus.documents, vocab, h, cfg.workers)
    submission.write_rows(cfg.output, submission.rows_from_mentions(mentions, cfg.run_id))
    logger.info("tagged %d documents, %d mentions", len(corpus.documents), len(mentions))
    return EXIT_DATA if corpus.failures else EXIT_OK


def cmd_coref(cfg: PipelineConfig) -> int:
    cfg.require("corpus", "input", "coref_model")
    cfg.need_output("output")
    params = coref.load_pair_scorer(cfg.coref_model)
    pronouns, determiners = _lexicons(cfg)
    rows = submission.read_rows(cfg.input)
    corpus = load_corpus(cfg.corpus)
    docs = {d.doc_id: d for d in corpus.documents}
    by_doc = group_by_doc(row.to_mention() for row in rows)

    def resolve(doc_id: str) -> dict:
        doc = docs.get(doc_id)
        if doc is None:
            logger.error("document %s not found in corpus; entity ids kept", doc_id)
            return {}
        resolved = coref.resolve_document(doc, by_doc[doc_id], params, cfg.threshold, pronouns, determiners)
        return {(m.start, m.end): m.entity_id for m in resolved}

    doc_ids = sorted(by_doc)
    owners = dict(zip(doc_ids, parallel_map(resolve, doc_ids, cfg.workers)))
    out = [replace(r, entity_id=owners[r.doc_id].get((r.start, r.end), r.entity_id)) for r in rows]
    submission.write_rows(cfg.output, out)
    missing = [d for d in doc_ids if d not in docs]
    return EXIT_DATA if missing or corpus.failures else EXIT_OK


def cmd_correct(cfg: PipelineConfig) -> int:
    cfg.require("input", "ontology")
    if cfg.rules is not None:
        cfg.require("rules")
    cfg.need_output("output")
    h = _hierarchy(cfg)
    extra = feedback.load_rules(cfg.rules) if cfg.rules else []
    rules = feedback.compile_rules(h, extra, include_leaves=cfg.auto_rules)
    rows = submission.read_rows(cfg.input)
    out = []
    for row in rows:
        path = correct_type(row.type_path, h) if len(h) else row.type_path
        m = replace(row.to_mention(), type_path=path)
        (m,) = feedback.apply_rules([m], rules)
        out.append(replace(row, type_path=m.type_path))
    submission.write_rows(cfg.output, out)
    return EXIT_OK


def cmd_score(cfg: PipelineConfig) -> int:
    cfg.require("gold", "system")
    gold = submission.read_mentions(cfg.gold)
    sys_ = submission.read_mentions(cfg.system)
    scores = scorer.score_all(gold, sys_, cfg.partial_credit)
    sys.stdout.write(scorer.format_table(scores))
    report = scorer.format_report(scores)
    if cfg.report:
        Path(cfg.report).write_text(report, encoding="utf-8")
    else:
        sys.stdout.write("\n" + report)
    return EXIT_OK


def cmd_analyze(cfg: PipelineConfig) -> int:
    cfg.require("gold", "system")
    gold = submission.read_mentions(cfg.gold)
    sys_ = submission.read_mentions(cfg.system)
    text = scorer.categorize_errors(gold, sys_).format()
    if cfg.report:
        Path(cfg.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of settings; flags override it")
    common.add_argument("--workers", type=int, help="document-level worker threads")
    common.add_argument("--seed", type=int)
    common.add_argument("--run-id", dest="run_id")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rufes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("convert", cmd_convert, "LTF corpus + gold TSV -> 7-column IOB files")
    p.add_argument("--corpus")
    p.add_argument("--annotations")
    p.add_argument("--out", dest="output")
    p.add_argument("--keep-longest", action="store_true", default=None, help="resolve overlapping mentions")
    p.add_argument("--snap", action="store_true", default=None, help="widen unaligned mentions to tokens")

    p = add("train", cmd_train, "train the tagger (and pair scorer with --coref-model)")
    p.add_argument("--corpus")
    p.add_argument("--annotations")
    p.add_argument("--model")
    p.add_argument("--vocab")
    p.add_argument("--coref-model", dest="coref_model")
    p.add_argument("--pronouns")
    p.add_argument("--determiners")
    p.add_argument("--keep-longest", action="store_true", default=None)
    p.add_argument("--snap", action="store_true", default=None)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--layers", dest="num_layers", type=int)
    p.add_argument("--heads", dest="num_heads", type=int)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--fine-tuning-lr", action="store_true", help=f"use learning rate {FINE_TUNING_LR}")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-seq-len", type=int)

    p = add("tag", cmd_tag, "tag a corpus and write submission rows")
    p.add_argument("--corpus")
    p.add_argument("--model")
    p.add_argument("--vocab")
    p.add_argument("--ontology")
    p.add_argument("--out", dest="output")

    p = add("coref", cmd_coref, "rewrite entity ids by within-document coreference")
    p.add_argument("--corpus")
    p.add_argument("--input")
    p.add_argument("--coref-model", dest="coref_model")
    p.add_argument("--pronouns")
    p.add_argument("--determiners")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", dest="output")

    p = add("correct", cmd_correct, "apply ontology correction, then feedback rules")
    p.add_argument("--input")
    p.add_argument("--ontology")
    p.add_argument("--rules", help="extra rules, TSV: trigger, mode, dotted path")
    p.add_argument("--auto-rules", action="store_true", default=None,
                   help="add a whole-token rule for every unambiguous ontology leaf name")
    p.add_argument("--out", dest="output")

    for name, func, help_ in (("score", cmd_score, "score system rows against gold"),
                              ("analyze", cmd_analyze, "categorize system errors against gold")):
        p = add(name, func, help_)
        p.add_argument("--gold")
        p.add_argument("--system")
        p.add_argument("--partial-credit", action="store_true", default=None)
        p.add_argument("--report", help="write the machine-readable report here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = PipelineConfig.resolve(args)
        return args.func(cfg)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (submission.SubmissionFormatError, OntologyFormatError, feedback.RuleError, ContainerError,
            TrainingDiverged, ValueError) as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
