"""End-to-end experiment protocols behind one entry point.

A run bundle executes, for every run seed, the full pipeline
split -> encode -> tokenize -> train -> predict -> aggregate -> score,
then averages the repeated runs per (train set, eval set, aggregation)
cell.  Two modes exist: single-dataset training (every dataset trains
its own model and is evaluated on every dataset's test split,
producing the inter-dataset matrix) and joint training (train and
validation splits of all datasets are merged; each dataset's test
split is reported separately).

Splits are deterministic: sentences are shuffled by a counter-based
generator keyed by (corpus name, split seed) and sliced contiguously,
so the same corpus and seed always produce the same partition.  Run
seeds are ``base_seed + run_index``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .corpus import AnnotatedSentence, Corpus, load_corpus, validate_corpus, write_canonical
from .encoding import encode_cue_task, encode_scope_task
from .errors import ConfigError, ScopeworksError, TruncationError
from .metrics import MetricsReport, WordPredictions, average_runs, score_task
from .model import ClassifierConfig, TrainConfig, train
from .tokenization import (
    TASKS,
    WordPieceTokenizer,
    class_order_for,
    tokenize_instance,
    word_level_outputs,
)

log = logging.getLogger(__name__)

BUNDLE_SCHEMA = "scopeworks-report-bundle"
BUNDLE_VERSION = 1


@contextmanager
def _stage(name):
    """Tag toolkit errors with the pipeline stage they escaped from."""
    try:
        yield
    except ScopeworksError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise ConfigError(f"ratios must be three positive numbers, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"ratios must sum to 1, got {sum(self.ratios)}")


def _split_sizes(n: int, ratios) -> list[int]:
    # largest-remainder rounding: every part stays within 1 of its exact share
    exact = [n * r for r in ratios]
    sizes = [int(x) for x in exact]
    leftover = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def _split_rng(name: str, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{name}:{seed}".encode("utf-8")).digest()
    key = int.from_bytes(digest[:16], "big")
    return np.random.Generator(np.random.Philox(key=key))


def split(corpus: Corpus, spec: SplitSpec) -> dict[str, Corpus]:
    """Deterministic sentence-level train/val/test partition."""
    n = len(corpus.sentences)
    if n < 3:
        raise ConfigError(f"corpus {corpus.name!r} has {n} sentences; need at least 3 to split")
    perm = _split_rng(corpus.name, spec.seed).permutation(n)
    n_train, n_val, n_test = _split_sizes(n, spec.ratios)
    parts = {
        "train": perm[:n_train],
        "val": perm[n_train:n_train + n_val],
        "test": perm[n_train + n_val:],
    }
    return {
        part: Corpus(
            name=corpus.name, cue_kind=corpus.cue_kind,
            sentences=tuple(corpus.sentences[i] for i in sorted(idx)),
        )
        for part, idx in parts.items()
    }


def namespace_corpus(corpus: Corpus) -> Corpus:
    """Prefix sentence ids with the corpus name so ids stay unique
    when several datasets meet in one experiment."""
    return Corpus(
        name=corpus.name, cue_kind=corpus.cue_kind,
        sentences=tuple(
            dataclasses.replace(s, sentence_id=f"{corpus.name}/{s.sentence_id}")
            for s in corpus.sentences
        ),
    )


def prepare_joint(splits_by_dataset: dict[str, dict[str, Corpus]], run_seed: int = 0) -> dict:
    """Merge train and validation splits; keep each test split separate.

    The merged training order is shuffled under the run seed.  Dataset
    names must be unique (sentence ids are namespaced by them).
    """
    names = list(splits_by_dataset)
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate dataset names: {names}")
    merged_train: list[AnnotatedSentence] = []
    merged_val: list[AnnotatedSentence] = []
    for name in names:
        merged_train.extend(splits_by_dataset[name]["train"].sentences)
        merged_val.extend(splits_by_dataset[name]["val"].sentences)
    seen = set()
    for s in merged_train + merged_val:
        if s.sentence_id in seen:
            raise ConfigError(
                f"sentence id {s.sentence_id!r} collides across datasets; "
                f"namespace corpora before merging"
            )
        seen.add(s.sentence_id)
    rng = np.random.default_rng(run_seed)
    order = rng.permutation(len(merged_train))
    return {
        "train": tuple(merged_train[i] for i in order),
        "val": tuple(merged_val),
        "tests": {name: splits_by_dataset[name]["test"] for name in names},
    }


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSpec:
    """A named dataset: either a canonical-file path or an in-memory corpus."""

    name: str
    path: str | None = None
    corpus: Corpus | None = None

    def load(self) -> Corpus:
        if self.corpus is not None:
            corpus = self.corpus
        elif self.path is not None:
            corpus = load_corpus(self.path)
        else:
            raise ConfigError(f"dataset {self.name!r} has neither a path nor a corpus")
        validate_corpus(corpus)
        return Corpus(name=self.name, cue_kind=corpus.cue_kind, sentences=corpus.sentences)


@dataclass(frozen=True)
class TokenizerSettings:
    max_len: int = 128
    lowercase: bool = True
    min_freq: int = 1


@dataclass(frozen=True)
class ModelSettings:
    n_hidden: int = 64
    encoder_layers: int = 2
    attention_heads: int = 4
    ffn_width: int = 128
    dropout: float = 0.1


def default_aggregations(task: str) -> tuple[str, ...]:
    """Cue detection is reported with averaging only; scope resolution
    with both aggregation rules."""
    return ("average",) if task == "cue" else ("average", "first_token")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    datasets: tuple[DatasetSpec, ...]
    split: SplitSpec = SplitSpec()
    tokenizer: TokenizerSettings = TokenizerSettings()
    model: ModelSettings = ModelSettings()
    train: TrainConfig = TrainConfig()
    aggregations: tuple[str, ...] | None = None
    runs: int = 1
    joint: bool = False
    allow_empty_scope: bool = False
    drop_overflow: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; known: {list(TASKS)}")
        if not self.datasets:
            raise ConfigError("at least one dataset is required")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.joint and len(self.datasets) < 2:
            raise ConfigError("joint mode needs at least 2 datasets")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate dataset names: {names}")

    def methods(self) -> tuple[str, ...]:
        return tuple(self.aggregations) if self.aggregations else default_aggregations(self.task)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ExperimentConfig":
        try:
            datasets = tuple(
                DatasetSpec(name=d["name"], path=d.get("path")) for d in obj["datasets"]
            )
            return cls(
                task=obj["task"],
                datasets=datasets,
                split=SplitSpec(**obj.get("split", {})),
                tokenizer=TokenizerSettings(**obj.get("tokenizer", {})),
                model=ModelSettings(**obj.get("model", {})),
                train=TrainConfig(**obj.get("train", {})),
                aggregations=tuple(obj["aggregations"]) if obj.get("aggregations") else None,
                runs=obj.get("runs", 1),
                joint=obj.get("joint", False),
                allow_empty_scope=obj.get("allow_empty_scope", False),
                drop_overflow=obj.get("drop_overflow", False),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc


def config_json_obj(cfg: ExperimentConfig, corpora: dict[str, Corpus]) -> dict:
    """JSON form of the config for hashing and provenance.  In-memory
    corpora are represented by a content digest so the hash is stable."""
    datasets = []
    for spec in cfg.datasets:
        entry = {"name": spec.name}
        if spec.path is not None:
            entry["path"] = str(spec.path)
        if spec.name in corpora:
            entry["sha256"] = hashlib.sha256(write_canonical(corpora[spec.name])).hexdigest()
        datasets.append(entry)
    return {
        "task": cfg.task,
        "datasets": datasets,
        "split": {"ratios": list(cfg.split.ratios), "seed": cfg.split.seed},
        "tokenizer": cfg.tokenizer.__dict__.copy(),
        "model": cfg.model.__dict__.copy(),
        "train": cfg.train.to_json_obj(),
        "aggregations": list(cfg.methods()),
        "runs": cfg.runs,
        "joint": cfg.joint,
        "allow_empty_scope": cfg.allow_empty_scope,
        "drop_overflow": cfg.drop_overflow,
    }


# ---------------------------------------------------------------------------
# Pipeline pieces
# ---------------------------------------------------------------------------

def encode_sentences(sentences, task: str, allow_empty_scope: bool = False) -> list:
    encoded = []
    for sentence in sentences:
        if task == "cue":
            encoded.append(encode_cue_task(sentence))
        else:
            encoded.extend(encode_scope_task(sentence, allow_empty_scope=allow_empty_scope))
    return encoded

def tokenize_all(encoded, tokenizer, drop_overflow: bool = False) -> list:
    tokenized = []
    for inst in encoded:
        try:
            tokenized.append(tokenize_instance(inst, tokenizer))
        except TruncationError as exc:
            if not drop_overflow:
                raise
            log.warning("dropping oversized instance: %s", exc)
    return tokenized


def build_tokenizer(sentences, settings: TokenizerSettings) -> WordPieceTokenizer:
    return WordPieceTokenizer.from_words(
        (w for s in sentences for w in s.words),
        max_len=settings.max_len, lowercase=settings.lowercase, min_freq=settings.min_freq,
    )


def _classifier_config(cfg: ExperimentConfig, tokenizer: WordPieceTokenizer) -> ClassifierConfig:
    order = class_order_for(cfg.task)
    return ClassifierConfig(
        vocab_size=tokenizer.vocab_size,
        num_classes=len(order),
        class_order=order,
        max_len=tokenizer.max_len,
        n_hidden=cfg.model.n_hidden,
        encoder_layers=cfg.model.encoder_layers,
        attention_heads=cfg.model.attention_heads,
        ffn_width=cfg.model.ffn_width,
        dropout=cfg.model.dropout,
    )


def _fit(cfg: ExperimentConfig, train_sents, val_sents, run_seed: int):
    """Train one model on sentence lists; returns (trained, tokenizer)."""
    with _stage("tokenize"):
        tokenizer = build_tokenizer(train_sents, cfg.tokenizer)
    with _stage("encode"):
        enc_train = encode_sentences(train_sents, cfg.task, cfg.allow_empty_scope)
        enc_val = encode_sentences(val_sents, cfg.task, cfg.allow_empty_scope)
    with _stage("tokenize"):
        tok_train = tokenize_all(enc_train, tokenizer, cfg.drop_overflow)
        tok_val = tokenize_all(enc_val, tokenizer, cfg.drop_overflow)
    with _stage("train"):
        run_cfg = dataclasses.replace(cfg.train, seed=run_seed)
        trained = train(_classifier_config(cfg, tokenizer), tok_train, tok_val, run_cfg)
    return trained, tokenizer, {ti.instance_id for ti in tok_train + tok_val}


def _evaluate(cfg, trained, tokenizer, test_sents, *, train_name, eval_name, run_seed,
              cfg_hash, fitted_ids) -> list[MetricsReport]:
    with _stage("encode"):
        encoded = encode_sentences(test_sents, cfg.task, cfg.allow_empty_scope)
    with _stage("tokenize"):
        tokenized = tokenize_all(encoded, tokenizer, cfg.drop_overflow)
    test_ids = {ti.instance_id for ti in tokenized}
    leaked = fitted_ids & test_ids
    if leaked:
        raise ScopeworksError(
            f"leakage: {len(leaked)} instance ids shared between fit and test sets "
            f"(e.g. {sorted(leaked)[:3]})"
        )
    with _stage("predict"):
        tables = trained.model.predict_probs(tokenized)
    reports = []
    with _stage("score"):
        for method in cfg.methods():
            preds = []
            for ti, table in zip(tokenized, tables):
                predicted, gold = word_level_outputs(ti, table, method=method)
                preds.append(WordPredictions(ti.instance_id, predicted, gold))
            reports.append(score_task(
                preds, cfg.task, train_set=train_name, eval_set=eval_name,
                aggregation=method, seeds=(run_seed,), config_hash=cfg_hash,
            ))
    return reports


# ---------------------------------------------------------------------------
# Run bundles
# ---------------------------------------------------------------------------

def run(cfg: ExperimentConfig, out_path=None) -> dict:
    """Execute a full experiment and return (and optionally write) the bundle."""
    with _stage("load"):
        corpora = {spec.name: namespace_corpus(spec.load()) for spec in cfg.datasets}
        kinds = {c.cue_kind for c in corpora.values()}
        if len(kinds) != 1:
            raise ConfigError(f"datasets mix cue kinds {sorted(kinds)}")
    cfg_obj = config_json_obj(cfg, corpora)
    cfg_hash = hashlib.sha256(
        json.dumps(cfg_obj, sort_keys=True).encode("utf-8")
    ).hexdigest()

    with _stage("split"):
        splits = {name: split(corpus, cfg.split) for name, corpus in corpora.items()}

    run_seeds = [cfg.train.seed + i for i in range(cfg.runs)]
    per_run: list[MetricsReport] = []
    for run_seed in run_seeds:
        if cfg.joint:
            merged = prepare_joint(splits, run_seed=run_seed)
            trained, tokenizer, fitted_ids = _fit(cfg, merged["train"], merged["val"], run_seed)
            for eval_name, test_corpus in merged["tests"].items():
                per_run.extend(_evaluate(
                    cfg, trained, tokenizer, test_corpus.sentences,
                    train_name="+".join(sorted(corpora)), eval_name=eval_name,
                    run_seed=run_seed, cfg_hash=cfg_hash, fitted_ids=fitted_ids,
                ))
        else:
            for train_name in corpora:
                parts = splits[train_name]
                trained, tokenizer, fitted_ids = _fit(
                    cfg, parts["train"].sentences, parts["val"].sentences, run_seed
                )
                for eval_name in corpora:
                    per_run.extend(_evaluate(
                        cfg, trained, tokenizer, splits[eval_name]["test"].sentences,
                        train_name=train_name, eval_name=eval_name,
                        run_seed=run_seed, cfg_hash=cfg_hash, fitted_ids=fitted_ids,
                    ))

    by_cell: dict[tuple, list[MetricsReport]] = {}
    for report in per_run:
        by_cell.setdefault(report.cell(), []).append(report)
    averaged = [average_runs(group) for group in by_cell.values()]

    bundle = {
        "schema": BUNDLE_SCHEMA,
        "version": BUNDLE_VERSION,
        "provenance": {
            "tool_version": f"scopeworks-{__version__}",
            "config_hash": cfg_hash,
            "config": cfg_obj,
            "task": cfg.task,
            "mode": "joint" if cfg.joint else "single",
            "datasets": sorted(corpora),
            "base_seed": cfg.train.seed,
            "run_seeds": run_seeds,
            "class_order": list(class_order_for(cfg.task)),
            "aggregations": list(cfg.methods()),
        },
        "meta": {"created_at": datetime.now(timezone.utc).isoformat()},
        "reports": {
            "per_run": [r.to_json_obj() for r in per_run],
            "averaged": [r.to_json_obj() for r in averaged],
        },
    }
    if out_path is not None:
        with _stage("report"):
            write_bundle(bundle, out_path)
    return bundle


def bundle_bytes(bundle: dict) -> bytes:
    return (json.dumps(bundle, sort_keys=True, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def write_bundle(bundle: dict, path) -> None:
    """Atomic write: the bundle lands complete or not at all."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bundle_bytes(bundle))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_bundle(path) -> dict:
    with open(path, "rb") as fh:
        return json.loads(fh.read().decode("utf-8"))
