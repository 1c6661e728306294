"""Word-level precision/recall/F1, cross-dataset matrices, run averaging.

Scores are binary and micro-averaged over every real word of every
instance: for cue detection the positive class collapses the
single-word and multiword cue labels {1, 2}, for scope resolution it
is the in-scope label 1.  A per-label breakdown is kept alongside so
the uncollapsed reading can be inspected too.  Degenerate ratios
(zero denominators) are defined as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError, InputError
from .tokenization import CUE_CLASS_ORDER, SCOPE_CLASS_ORDER, class_order_for

POSITIVE_LABELS = {"cue": frozenset({1, 2}), "scope": frozenset({1})}
# gold word labels never contain the pad class ...
LABEL_ALPHABET = {"cue": frozenset({1, 2, 3}), "scope": frozenset({0, 1})}
# ... but a weak model can still argmax to it; such predictions simply
# fall outside the positive set and score as "not a cue"
PREDICTION_ALPHABET = {"cue": frozenset({1, 2, 3, 4}), "scope": frozenset({0, 1})}


@dataclass(frozen=True)
class WordPredictions:
    """Predicted vs gold labels over the real words of one instance."""

    instance_id: str
    predicted: tuple[int, ...]
    gold: tuple[int, ...]

    def __post_init__(self):
        if len(self.predicted) != len(self.gold):
            raise InputError(
                f"instance {self.instance_id!r}: {len(self.predicted)} predictions "
                f"vs {len(self.gold)} gold labels"
            )


@dataclass
class MetricsReport:
    """One scored cell: a (train set, eval set, aggregation) triple.

    For a single run ``f1 == 2PR/(P+R)`` and the counts are the raw
    confusion tallies.  A report produced by :func:`average_runs`
    carries the per-run means in precision/recall/f1, sample standard
    deviations in ``std``, and summed counts.
    """

    task: str
    train_set: str
    eval_set: str
    aggregation: str
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    word_count: int = 0
    seeds: tuple[int, ...] = ()
    n_runs: int = 1
    std: dict | None = None
    per_class: dict = field(default_factory=dict)
    class_order: tuple[int, ...] = ()
    config_hash: str | None = None
    extras: dict = field(default_factory=dict)

    def cell(self):
        return (self.task, self.train_set, self.eval_set, self.aggregation)

    def to_json_obj(self) -> dict:
        obj = {
            "task": self.task,
            "train_set": self.train_set,
            "eval_set": self.eval_set,
            "aggregation": self.aggregation,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "word_count": self.word_count,
            "seeds": list(self.seeds),
            "n_runs": self.n_runs,
            "std": self.std,
            "per_class": {str(k): v for k, v in self.per_class.items()},
            "class_order": list(self.class_order),
            "config_hash": self.config_hash,
            "extras": self.extras,
        }
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "MetricsReport":
        return cls(
            task=obj["task"],
            train_set=obj["train_set"],
            eval_set=obj["eval_set"],
            aggregation=obj["aggregation"],
            precision=obj["precision"],
            recall=obj["recall"],
            f1=obj["f1"],
            tp=obj["tp"],
            fp=obj["fp"],
            fn=obj["fn"],
            word_count=obj.get("word_count", 0),
            seeds=tuple(obj.get("seeds", ())),
            n_runs=obj.get("n_runs", 1),
            std=obj.get("std"),
            per_class={int(k): v for k, v in obj.get("per_class", {}).items()},
            class_order=tuple(obj.get("class_order", ())),
            config_hash=obj.get("config_hash"),
            extras=obj.get("extras", {}),
        )


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Binary precision/recall/F1 with zero denominators scored as 0."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def score_task(
    preds: list[WordPredictions], task: str, *,
    train_set: str = "", eval_set: str = "", aggregation: str = "",
    seeds: tuple[int, ...] = (), config_hash: str | None = None,
) -> MetricsReport:
    """Micro-averaged word-level P/R/F1 over all instances."""
    try:
        positive = POSITIVE_LABELS[task]
        alphabet = LABEL_ALPHABET[task]
        pred_alphabet = PREDICTION_ALPHABET[task]
    except KeyError:
        raise InputError(f"unknown task {task!r}") from None

    tp = fp = fn = 0
    per_label = {v: [0, 0, 0, 0] for v in sorted(alphabet)}  # tp, fp, fn, support
    words = 0
    for wp in preds:
        bad_gold = set(wp.gold) - alphabet
        bad_pred = set(wp.predicted) - pred_alphabet
        if bad_gold or bad_pred:
            bad = sorted(bad_gold | bad_pred)
            raise InputError(
                f"instance {wp.instance_id!r}: labels {bad} outside the "
                f"{task} alphabet {sorted(alphabet)}"
            )
        for p, g in zip(wp.predicted, wp.gold):
            words += 1
            p_pos, g_pos = p in positive, g in positive
            if p_pos and g_pos:
                tp += 1
            elif p_pos:
                fp += 1
            elif g_pos:
                fn += 1
            for v, row in per_label.items():
                if p == v and g == v:
                    row[0] += 1
                elif p == v:
                    row[1] += 1
                elif g == v:
                    row[2] += 1
                if g == v:
                    row[3] += 1

    precision, recall, f1 = prf(tp, fp, fn)
    per_class = {}
    for v, (ltp, lfp, lfn, support) in per_label.items():
        lp, lr, lf = prf(ltp, lfp, lfn)
        per_class[v] = {"precision": lp, "recall": lr, "f1": lf, "support": support}
    return MetricsReport(
        task=task, train_set=train_set, eval_set=eval_set, aggregation=aggregation,
        precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn,
        word_count=words, seeds=tuple(seeds), per_class=per_class,
        class_order=class_order_for(task), config_hash=config_hash,
    )


def exact_match_fraction(preds: list[WordPredictions], task: str = "scope") -> float:
    """Supplementary strictness metric: fraction of instances whose
    predicted positive word set equals the gold set exactly.  Not part
    of the word-level scores reported elsewhere."""
    positive = POSITIVE_LABELS[task]
    if not preds:
        return 0.0
    hits = 0
    for wp in preds:
        pred_set = {i for i, v in enumerate(wp.predicted) if v in positive}
        gold_set = {i for i, v in enumerate(wp.gold) if v in positive}
        hits += pred_set == gold_set
    return hits / len(preds)


def cross_matrix(
    cells: dict, task: str, *,
    train_ids=None, eval_ids=None, aggregation: str = "", seeds=(),
) -> dict:
    """Score a train-set x eval-set grid of prediction lists.

    ``cells`` maps ``(train_id, eval_id)`` to a list of
    :class:`WordPredictions`.  When the expected id lists are given,
    a missing cell is a configuration error.
    """
    if train_ids is not None and eval_ids is not None:
        missing = [
            (t, e) for t in train_ids for e in eval_ids if (t, e) not in cells
        ]
        if missing:
            raise ConfigError(f"missing evaluation cells: {missing}")
    return {
        (t, e): score_task(
            preds, task, train_set=t, eval_set=e, aggregation=aggregation, seeds=seeds
        )
        for (t, e), preds in cells.items()
    }


def average_runs(reports: list[MetricsReport]) -> MetricsReport:
    """Mean and sample standard deviation of P/R/F1 across repeated runs."""
    if not reports:
        raise InputError("average_runs needs at least one report")
    cells = {r.cell() for r in reports}
    if len(cells) != 1:
        raise InputError(f"reports mix cells: {sorted(cells)}")

    k = len(reports)

    def mean_std(values):
        mean = sum(values) / k
        if k == 1:
            return mean, 0.0
        var = sum((v - mean) ** 2 for v in values) / (k - 1)
        return mean, math.sqrt(var)

    p_mean, p_std = mean_std([r.precision for r in reports])
    r_mean, r_std = mean_std([r.recall for r in reports])
    f_mean, f_std = mean_std([r.f1 for r in reports])
    first = reports[0]
    seeds = tuple(s for r in reports for s in r.seeds)
    return MetricsReport(
        task=first.task, train_set=first.train_set, eval_set=first.eval_set,
        aggregation=first.aggregation,
        precision=p_mean, recall=r_mean, f1=f_mean,
        tp=sum(r.tp for r in reports), fp=sum(r.fp for r in reports),
        fn=sum(r.fn for r in reports),
        word_count=sum(r.word_count for r in reports),
        seeds=seeds, n_runs=k,
        std={"precision": p_std, "recall": r_std, "f1": f_std},
        class_order=first.class_order, config_hash=first.config_hash,
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render_table(reports: list[MetricsReport]) -> str:
    """Aligned text table of reports."""
    headers = ["task", "train", "eval", "agg", "P", "R", "F1", "±F1", "runs"]
    rows = []
    for r in reports:
        rows.append([
            r.task, r.train_set, r.eval_set, r.aggregation,
            f"{r.precision:.4f}", f"{r.recall:.4f}", f"{r.f1:.4f}",
            f"{r.std['f1']:.4f}" if r.std else "-",
            str(r.n_runs),
        ])
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)


def render_csv(reports: list[MetricsReport]) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([
        "task", "train_set", "eval_set", "aggregation", "precision", "recall", "f1",
        "f1_std", "tp", "fp", "fn", "n_runs", "seeds",
    ])
    for r in reports:
        writer.writerow([
            r.task, r.train_set, r.eval_set, r.aggregation,
            repr(r.precision), repr(r.recall), repr(r.f1),
            repr(r.std["f1"]) if r.std else "",
            r.tp, r.fp, r.fn, r.n_runs, " ".join(str(s) for s in r.seeds),
        ])
    return buf.getvalue()


__all__ = [
    "WordPredictions", "MetricsReport", "prf", "score_task", "exact_match_fraction",
    "cross_matrix", "average_runs", "render_table", "render_csv",
    "POSITIVE_LABELS", "LABEL_ALPHABET", "CUE_CLASS_ORDER", "SCOPE_CLASS_ORDER",
]
