"""Command-line interface.

Subcommands mirror the pipeline stages::

    scopeworks convert   # corpus file -> canonical JSON Lines
    scopeworks encode    # canonical -> encoded task instances
    scopeworks split     # canonical -> train/val/test canonical files
    scopeworks train     # canonical train/val -> model checkpoint
    scopeworks predict   # checkpoint + canonical -> probability file
    scopeworks evaluate  # probability + tokenized files -> word-level scores
    scopeworks report    # run bundle -> table / CSV
    scopeworks run       # full experiment from a JSON config
    scopeworks validate  # schema-check any interchange file

Every command exits 0 on success; failures print an
``error [stage:...]`` line and exit nonzero.  The experiment output
directory honors the ``SCOPEWORKS_ARTIFACTS`` environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from . import __version__
from .corpus import (
    COLUMN_DIALECTS,
    corpus_stats,
    load_corpus,
    parse_column_format,
    parse_inline_xml,
    save_corpus,
)
from .encoding import load_instances, save_instances
from .errors import ConfigError, ScopeworksError
from .experiment import (
    ExperimentConfig,
    SplitSpec,
    TokenizerSettings,
    ModelSettings,
    build_tokenizer,
    encode_sentences,
    load_bundle,
    run as run_experiment,
    split as split_corpus,
    tokenize_all,
)
from .metrics import MetricsReport, WordPredictions, render_csv, render_table, score_task
from .model import (
    ReplayBackend,
    TrainConfig,
    load_checkpoint,
    read_probability_data,
    save_checkpoint,
    train,
    write_probability_file,
)
from .model.network import ClassifierConfig
from .tokenization import (
    AGGREGATIONS,
    class_order_for,
    load_tokenized,
    save_tokenized,
    word_level_outputs,
)

log = logging.getLogger("scopeworks")


def artifacts_dir(flag_value=None) -> str:
    return flag_value or os.environ.get("SCOPEWORKS_ARTIFACTS") or "artifacts"


def _read_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_convert(args) -> int:
    with open(args.infile, "rb") as fh:
        data = fh.read()
    name = args.name or os.path.splitext(os.path.basename(args.infile))[0]
    if args.format == "columns":
        corpus = parse_column_format(
            data, args.cue_kind, dialect=args.column_dialect, name=name
        )
    else:
        corpus = parse_inline_xml(data, args.format, args.cue_kind, name=name)
    save_corpus(corpus, args.out)
    stats = corpus_stats(corpus)
    log.info("wrote %s: %d sentences, %d cues", args.out,
             stats["sentence_count"], stats["cue_count"])
    return 0


def cmd_encode(args) -> int:
    corpus = load_corpus(args.infile)
    instances = encode_sentences(
        corpus.sentences, args.task, allow_empty_scope=args.allow_empty_scope
    )
    save_instances(instances, args.out)
    log.info("wrote %d %s instances to %s", len(instances), args.task, args.out)
    return 0


def cmd_split(args) -> int:
    corpus = load_corpus(args.infile)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    parts = split_corpus(corpus, SplitSpec(ratios=ratios, seed=args.seed))
    os.makedirs(args.out_dir, exist_ok=True)
    for part, sub in parts.items():
        path = os.path.join(args.out_dir, f"{corpus.name}.{part}.jsonl")
        save_corpus(sub, path)
        log.info("wrote %s (%d sentences)", path, len(sub.sentences))
    return 0


def _settings_from_config(obj: dict):
    tokenizer = TokenizerSettings(**obj.get("tokenizer", {}))
    model = ModelSettings(**obj.get("model", {}))
    train_cfg = TrainConfig(**obj.get("train", {}))
    return tokenizer, model, train_cfg


def cmd_train(args) -> int:
    obj = _read_config(args.config) if args.config else {}
    task = args.task or obj.get("task")
    if task is None:
        raise ConfigError("no task given (pass --task or set it in the config)")
    tok_settings, model_settings, train_cfg = _settings_from_config(obj)
    if args.seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)

    train_corpus = load_corpus(args.train_file)
    val_corpus = load_corpus(args.val_file) if args.val_file else None
    tokenizer = build_tokenizer(train_corpus.sentences, tok_settings)
    allow_empty = args.allow_empty_scope or obj.get("allow_empty_scope", False)
    drop_overflow = args.drop_overflow or obj.get("drop_overflow", False)
    tok_train = tokenize_all(
        encode_sentences(train_corpus.sentences, task, allow_empty), tokenizer, drop_overflow
    )
    tok_val = tokenize_all(
        encode_sentences(val_corpus.sentences, task, allow_empty), tokenizer, drop_overflow
    ) if val_corpus else []

    order = class_order_for(task)
    config = ClassifierConfig(
        vocab_size=tokenizer.vocab_size, num_classes=len(order), class_order=order,
        max_len=tokenizer.max_len, n_hidden=model_settings.n_hidden,
        encoder_layers=model_settings.encoder_layers,
        attention_heads=model_settings.attention_heads,
        ffn_width=model_settings.ffn_width, dropout=model_settings.dropout,
    )
    trained = train(config, tok_train, tok_val, train_cfg)
    save_checkpoint(args.out, trained.model, tokenizer, extra={
        "task": task,
        "train_config": train_cfg.to_json_obj(),
        "best_epoch": trained.best_epoch,
        "best_val_f1": trained.best_val_f1,
        "history": trained.history,
    })
    log.info("wrote checkpoint %s (best epoch %d)", args.out, trained.best_epoch)
    return 0


def cmd_predict(args) -> int:
    model, tokenizer, meta = load_checkpoint(args.model)
    if tokenizer is None:
        raise ConfigError(f"checkpoint {args.model} carries no tokenizer")
    task = args.task or meta.get("extra", {}).get("task")
    if task is None:
        raise ConfigError("no task given and none recorded in the checkpoint")
    corpus = load_corpus(args.infile)
    tokenized = tokenize_all(
        encode_sentences(corpus.sentences, task, args.allow_empty_scope),
        tokenizer, args.drop_overflow,
    )
    tables = model.predict_probs(tokenized)
    with open(args.out, "wb") as fh:
        write_probability_file(
            ((ti.instance_id, table) for ti, table in zip(tokenized, tables)), fh
        )
    log.info("wrote %d probability rows to %s", len(tokenized), args.out)
    if args.tokenized_out:
        save_tokenized(tokenized, args.tokenized_out)
        log.info("wrote tokenized instances to %s", args.tokenized_out)
    return 0


def cmd_evaluate(args) -> int:
    tokenized = load_tokenized(args.tokenized)
    if not tokenized:
        raise ConfigError(f"{args.tokenized}: no instances")
    task = args.task or tokenized[0].task
    backend = ReplayBackend.from_file(
        args.probs, expected_class_order=class_order_for(task),
        expected_rows=len(tokenized[0].tokens),
    )
    tables = backend.predict_probs(tokenized)
    methods = list(AGGREGATIONS) if args.aggregation == "all" else [args.aggregation]
    reports = []
    for method in methods:
        preds = []
        for ti, table in zip(tokenized, tables):
            predicted, gold = word_level_outputs(ti, table, method=method)
            preds.append(WordPredictions(ti.instance_id, predicted, gold))
        reports.append(score_task(
            preds, task, train_set=args.train_name, eval_set=args.eval_name,
            aggregation=method,
        ))
    print(render_table(reports))
    if args.out:
        payload = {
            "schema": "scopeworks-report", "version": 1,
            "reports": [r.to_json_obj() for r in reports],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        log.info("wrote %s", args.out)
    return 0


def cmd_report(args) -> int:
    bundle = load_bundle(args.bundle)
    which = args.which
    reports = [MetricsReport.from_json_obj(o) for o in bundle["reports"][which]]
    text = render_csv(reports) if args.format == "csv" else render_table(reports)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)
    return 0


def cmd_run(args) -> int:
    obj = _read_config(args.config)
    if args.runs is not None:
        obj["runs"] = args.runs
    if args.joint:
        obj["joint"] = True
    if args.task:
        obj["task"] = args.task
    if args.seed is not None:
        obj.setdefault("train", {})["seed"] = args.seed
    cfg = ExperimentConfig.from_json_obj(obj)
    out_path = args.out
    if out_path is None:
        out_dir = artifacts_dir(args.out_dir)
        out_path = os.path.join(out_dir, f"bundle-{cfg.task}-{'joint' if cfg.joint else 'single'}.json")
    bundle = run_experiment(cfg, out_path=out_path)
    averaged = [MetricsReport.from_json_obj(o) for o in bundle["reports"]["averaged"]]
    print(render_table(averaged))
    print(f"bundle: {out_path}")
    return 0


def cmd_validate(args) -> int:
    with open(args.infile, "rb") as fh:
        data = fh.read()
    if args.kind == "corpus":
        from .corpus import read_canonical
        corpus = read_canonical(data)
        stats = corpus_stats(corpus)
        print(f"ok: corpus {corpus.name!r}, {stats['sentence_count']} sentences, "
              f"{stats['cue_count']} cues")
    elif args.kind == "instances":
        instances = load_instances(args.infile)
        print(f"ok: {len(instances)} encoded instances")
    elif args.kind == "tokenized":
        instances = load_tokenized(args.infile)
        print(f"ok: {len(instances)} tokenized instances")
    else:
        tables, class_order = read_probability_data(data)
        print(f"ok: {len(tables)} probability tables, class order "
              f"{list(class_order) if class_order else '(empty file)'}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scopeworks",
        description="cue detection and scope resolution toolkit",
    )
    parser.add_argument("--version", action="version", version=f"scopeworks {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    # accepted after the subcommand too; SUPPRESS keeps a pre-subcommand -v
    # from being clobbered by the subparser default
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=(
        lambda **kw: argparse.ArgumentParser(parents=[common], **kw)
    ))

    p = sub.add_parser("convert", help="parse a corpus file into canonical JSON Lines")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", required=True, choices=["bioscope", "sfu", "columns"])
    p.add_argument("--cue-kind", required=True, choices=["speculation", "negation"])
    p.add_argument("--out", required=True)
    p.add_argument("--name", help="corpus name tag (default: input file stem)")
    p.add_argument("--column-dialect", default="default", choices=sorted(COLUMN_DIALECTS))
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("encode", help="encode canonical sentences as task instances")
    p.add_argument("--task", required=True, choices=["cue", "scope"])
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--allow-empty-scope", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("split", help="deterministic train/val/test split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratios", default="0.70,0.15,0.15")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a token classifier")
    p.add_argument("--config", help="JSON config with tokenizer/model/train sections")
    p.add_argument("--task", choices=["cue", "scope"])
    p.add_argument("--train", dest="train_file", required=True, help="canonical train corpus")
    p.add_argument("--val", dest="val_file", help="canonical validation corpus")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--seed", type=int)
    p.add_argument("--allow-empty-scope", action="store_true")
    p.add_argument("--drop-overflow", action="store_true",
                   help="drop oversized instances with a log line instead of failing")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="emit a probability interchange file")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True, help="canonical corpus to predict on")
    p.add_argument("--out", required=True)
    p.add_argument("--tokenized-out", help="also export the tokenized instances")
    p.add_argument("--task", choices=["cue", "scope"])
    p.add_argument("--allow-empty-scope", action="store_true")
    p.add_argument("--drop-overflow", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a probability file at word level")
    p.add_argument("--probs", required=True)
    p.add_argument("--tokenized", required=True)
    p.add_argument("--task", choices=["cue", "scope"])
    p.add_argument("--aggregation", default="all", choices=["average", "first_token", "all"])
    p.add_argument("--train-name", default="")
    p.add_argument("--eval-name", default="")
    p.add_argument("--out", help="write the reports as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a run bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--which", default="averaged", choices=["averaged", "per_run"])
    p.add_argument("--format", default="table", choices=["table", "csv"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run a full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="bundle path (default: under the artifacts directory)")
    p.add_argument("--out-dir", help="artifacts directory (or $SCOPEWORKS_ARTIFACTS)")
    p.add_argument("--runs", type=int)
    p.add_argument("--joint", action="store_true")
    p.add_argument("--task", choices=["cue", "scope"])
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="schema-check an interchange file")
    p.add_argument("--kind", required=True, choices=["corpus", "instances", "tokenized", "probs"])
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ScopeworksError as exc:
        stage = exc.stage or args.command
        print(f"error [stage:{stage}] {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [stage:{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
