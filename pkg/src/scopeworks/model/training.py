"""Training loop: adaptive-moment gradient descent with early stopping.

Early stopping watches word-level F1 on the validation set (computed
with average aggregation, markers excluded) and returns the parameters
of the best epoch.  Given identical data, config and seed the whole
trajectory is reproducible.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, SchemaError, SchemaVersionError
from ..metrics import WordPredictions, score_task
from ..tokenization import WordPieceTokenizer, class_order_for, word_level_outputs
from .network import ClassifierConfig, TokenClassifier, ce_loss_and_dlogits, labels_to_indices

log = logging.getLogger(__name__)


def default_class_weights(task: str) -> tuple[float, ...]:
    """Cue training ignores the pad class (weight 0); scope weights are flat."""
    return (1.0, 1.0, 1.0, 0.0) if task == "cue" else (1.0, 1.0)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-5
    batch_size: int = 8
    max_epochs: int = 60
    early_stop_patience: int = 6
    class_weights: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")
        if not self.early_stop_patience < self.max_epochs:
            raise ConfigError(
                f"early_stop_patience ({self.early_stop_patience}) must be smaller "
                f"than max_epochs ({self.max_epochs})"
            )
        if self.class_weights is not None:
            object.__setattr__(self, "class_weights", tuple(float(w) for w in self.class_weights))
            if any(w < 0 for w in self.class_weights):
                raise ConfigError("class weights must be nonnegative")

    def to_json_obj(self) -> dict:
        obj = self.__dict__.copy()
        if obj["class_weights"] is not None:
            obj["class_weights"] = list(obj["class_weights"])
        return obj


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correct1 = 1.0 - b1 ** self.t
        correct2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


@dataclass
class TrainedModel:
    """A trained classifier plus the record of how it got there."""

    model: TokenClassifier
    train_config: TrainConfig
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_f1: float | None = None


def _stack(instances):
    ids = np.stack([ti.token_ids for ti in instances])
    mask = np.stack([ti.pad_mask for ti in instances])
    return ids, mask


def validation_f1(model: TokenClassifier, instances, task: str) -> float:
    """Word-level F1 (average aggregation, markers excluded)."""
    preds = []
    tables = model.predict_probs(instances)
    for ti, table in zip(instances, tables):
        predicted, gold = word_level_outputs(ti, table, method="average")
        preds.append(WordPredictions(instance_id=ti.instance_id, predicted=predicted, gold=gold))
    return score_task(preds, task).f1


def train(
    model_config: ClassifierConfig,
    train_instances,
    val_instances,
    cfg: TrainConfig,
    val_metric_fn=None,
) -> TrainedModel:
    """Fit a token classifier on tokenized instances.

    ``val_metric_fn(model, epoch) -> float`` replaces the validation F1
    computation when given (useful for scripted early-stopping tests).
    Without validation instances or a metric function, training runs to
    ``max_epochs`` and keeps the final parameters.
    """
    train_instances = list(train_instances)
    val_instances = list(val_instances or [])
    if not train_instances:
        raise ConfigError("empty training set")
    tasks = {ti.task for ti in train_instances + val_instances}
    if len(tasks) != 1:
        raise ConfigError(f"instances mix tasks {sorted(tasks)}; train one task at a time")
    task = tasks.pop()
    overlap = {ti.instance_id for ti in train_instances} & {ti.instance_id for ti in val_instances}
    if overlap:
        raise ConfigError(f"train and validation sets share instance ids: {sorted(overlap)[:5]}")

    weights = np.asarray(cfg.class_weights or default_class_weights(task), dtype=np.float64)
    if len(weights) != model_config.num_classes:
        raise ConfigError(
            f"{len(weights)} class weights for {model_config.num_classes} classes"
        )

    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    init_seed = int(seeds[0].generate_state(1)[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    dropout_rng = np.random.default_rng(seeds[2])

    model = TokenClassifier(model_config, seed=init_seed)
    optimizer = Adam(model.parameters(), lr=cfg.learning_rate)

    ids_all, mask_all = _stack(train_instances)
    labels_all = labels_to_indices(
        np.stack([ti.token_labels for ti in train_instances]), model_config.class_order
    )

    track_metric = val_metric_fn is not None or bool(val_instances)
    history = []
    best_f1 = -np.inf
    best_epoch = 0
    best_state = None
    n = len(train_instances)

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            probs = model.forward_batch(
                ids_all[batch], mask_all[batch], train=True, rng=dropout_rng
            )
            loss, dlogits = ce_loss_and_dlogits(
                probs, labels_all[batch], weights, mask_all[batch]
            )
            model.backward_batch(dlogits)
            optimizer.step(model.gradients())
            epoch_loss += loss
            n_batches += 1

        val_f1 = None
        if val_metric_fn is not None:
            val_f1 = float(val_metric_fn(model, epoch))
        elif val_instances:
            val_f1 = validation_f1(model, val_instances, task)
        history.append({
            "epoch": epoch,
            "train_loss": epoch_loss / max(n_batches, 1),
            "val_f1": val_f1,
        })
        if val_f1 is not None:
            log.debug("epoch %d: loss %.4f, val F1 %.4f", epoch, history[-1]["train_loss"], val_f1)

        if track_metric and val_f1 is not None:
            if val_f1 > best_f1:
                best_f1 = val_f1
                best_epoch = epoch
                best_state = model.get_state()
            if epoch - best_epoch >= cfg.early_stop_patience:
                log.info(
                    "early stop after epoch %d (best val F1 %.4f at epoch %d)",
                    epoch, best_f1, best_epoch,
                )
                break

    if best_state is not None:
        model.set_state(best_state)
    else:
        best_epoch = len(history)
    return TrainedModel(
        model=model,
        train_config=cfg,
        history=history,
        best_epoch=best_epoch,
        best_val_f1=None if best_f1 == -np.inf else float(best_f1),
    )


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "scopeworks-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: TokenClassifier, tokenizer: WordPieceTokenizer | None = None,
                    extra: dict | None = None) -> None:
    """Write a single-file checkpoint: config, parameters, optional tokenizer."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_json_obj(),
        "tokenizer": tokenizer.to_json_obj() if tokenizer is not None else None,
        "extra": extra or {},
    }
    arrays = {f"param/{name}": arr for name, arr in model.parameters().items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=json.dumps(meta), **arrays)


def load_checkpoint(path):
    """Read a checkpoint; returns (model, tokenizer or None, meta dict)."""
    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data:
            raise SchemaError(f"{path}: not a {CHECKPOINT_FORMAT} file")
        meta = json.loads(str(data["__meta__"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise SchemaError(f"{path}: unexpected format {meta.get('format')!r}")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise SchemaVersionError(
                f"{path}: checkpoint version {meta.get('version')!r} unsupported; "
                f"this build reads version {CHECKPOINT_VERSION}"
            )
        config = ClassifierConfig.from_json_obj(meta["config"])
        model = TokenClassifier(config, seed=0)
        state = {
            name[len("param/"):]: data[name] for name in data.files if name.startswith("param/")
        }
    model.set_state(state)
    tokenizer = None
    if meta.get("tokenizer"):
        tokenizer = WordPieceTokenizer.from_json_obj(meta["tokenizer"])
    return model, tokenizer, meta


def task_class_order(task: str) -> tuple[int, ...]:
    return class_order_for(task)
