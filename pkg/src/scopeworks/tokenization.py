"""Subword tokenization, label propagation and word-level aggregation.

A word-level task instance is mapped to a fixed-length token sequence:
each word becomes one or more subword tokens that all inherit the
word's label, the remainder is padded (pad label 4 for the cue task, 0
for the scope task, with the pad mask excluding those positions from
training), and a ``word_spans`` table remembers which token interval
belongs to which word.

Going the other way, per-token probability vectors are collapsed back
to one label per word either by averaging the vectors over the word's
tokens or by taking the first token's vector, followed by an argmax
(ties resolved toward the lowest class index).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .encoding import CUE_PAD, MARKER_WORDS, SCOPE_OUT
from .errors import InputError, SchemaError, ScopeworksError, TruncationError

PAD_TOKEN = "⟨pad⟩"
UNK_TOKEN = "⟨unk⟩"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN) + MARKER_WORDS

# Class index order of probability vectors, embedded in every report
# and interchange file: cue classes 1..4 map to indices 0..3, scope
# classes 0..1 map to indices 0..1.
CUE_CLASS_ORDER = (1, 2, 3, 4)
SCOPE_CLASS_ORDER = (0, 1)

TASKS = ("cue", "scope")


def class_order_for(task: str) -> tuple[int, ...]:
    if task == "cue":
        return CUE_CLASS_ORDER
    if task == "scope":
        return SCOPE_CLASS_ORDER
    raise InputError(f"unknown task {task!r}; known: {list(TASKS)}")


def pad_label_for(task: str) -> int:
    return CUE_PAD if task == "cue" else SCOPE_OUT


class TokenizerSpec(Protocol):
    """What tokenize_instance needs from a tokenizer implementation."""

    max_len: int
    pad_id: int

    def tokenize_word(self, word: str) -> list[tuple[str, int]]:
        """Split one word into a non-empty list of (token, id) pairs."""
        ...


class WordPieceTokenizer:
    """Greedy longest-match subword tokenizer over a fixed vocabulary.

    Words are lowercased (configurable) and matched greedily against
    the vocabulary; continuation pieces carry a ``##`` prefix.  Words
    that cannot be covered become a single unknown token.  Reserved
    symbols (pad, unknown, cue markers) always map to exactly one
    token and are matched before any lowercasing.
    """

    def __init__(self, vocab, max_len: int = 128, lowercase: bool = True,
                 reserved=RESERVED_TOKENS):
        if isinstance(vocab, dict):
            items = sorted(vocab.items(), key=lambda kv: kv[1])
            pieces = [p for p, _ in items]
            if [i for _, i in items] != list(range(len(items))):
                raise InputError("vocabulary ids must be 0..n-1 without gaps")
        else:
            pieces = list(vocab)
        self._reserved = tuple(reserved)
        for symbol in self._reserved:
            if symbol not in pieces:
                pieces.append(symbol)
        self._vocab = {p: i for i, p in enumerate(pieces)}
        if len(self._vocab) != len(pieces):
            raise InputError("vocabulary contains duplicate pieces")
        self.max_len = int(max_len)
        self.lowercase = bool(lowercase)
        self.pad_id = self._vocab[PAD_TOKEN]
        self.unk_id = self._vocab[UNK_TOKEN]

    @property
    def vocab_size(self) -> int:
        return len(self._vocab)

    @property
    def pieces(self) -> list[str]:
        return sorted(self._vocab, key=self._vocab.get)

    def is_reserved(self, word: str) -> bool:
        return word in self._reserved

    def tokenize_word(self, word: str) -> list[tuple[str, int]]:
        if word in self._reserved:
            return [(word, self._vocab[word])]
        w = word.lower() if self.lowercase else word
        pieces: list[str] = []
        start = 0
        while start < len(w):
            end = len(w)
            match = None
            while end > start:
                piece = w[start:end] if start == 0 else "##" + w[start:end]
                if piece in self._vocab:
                    match = piece
                    break
                end -= 1
            if match is None:
                return [(UNK_TOKEN, self.unk_id)]
            pieces.append(match)
            start = end
        return [(p, self._vocab[p]) for p in pieces]

    @classmethod
    def from_words(cls, words, max_len: int = 128, lowercase: bool = True,
                   min_freq: int = 1) -> "WordPieceTokenizer":
        """Build a vocabulary from training words.

        Reserved symbols come first, then every character of the
        training text (plain and ``##``-prefixed, so rare words can
        still be pieced together), then whole words by descending
        frequency.
        """
        counts = Counter()
        chars = set()
        for word in words:
            if word in RESERVED_TOKENS:
                continue
            w = word.lower() if lowercase else word
            counts[w] += 1
            chars.update(w)
        pieces = list(RESERVED_TOKENS)
        pieces.extend(sorted(chars))
        pieces.extend("##" + c for c in sorted(chars))
        seen = set(pieces)
        for w, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            if n >= min_freq and w not in seen:
                pieces.append(w)
                seen.add(w)
        return cls(pieces, max_len=max_len, lowercase=lowercase)

    def to_json_obj(self) -> dict:
        return {
            "pieces": self.pieces,
            "max_len": self.max_len,
            "lowercase": self.lowercase,
            "reserved": list(self._reserved),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "WordPieceTokenizer":
        return cls(
            obj["pieces"], max_len=obj["max_len"], lowercase=obj["lowercase"],
            reserved=tuple(obj.get("reserved", RESERVED_TOKENS)),
        )


# ---------------------------------------------------------------------------
# Tokenized instances
# ---------------------------------------------------------------------------

@dataclass
class TokenizedInstance:
    """A task instance mapped to fixed-length token arrays.

    ``word_spans[i]`` is the half-open token interval of word ``i``;
    the spans tile the non-pad prefix exactly and every token in a span
    carries its word's label.
    """

    instance_id: str
    task: str
    tokens: tuple[str, ...]
    token_ids: np.ndarray
    token_labels: np.ndarray
    pad_mask: np.ndarray
    word_spans: tuple[tuple[int, int], ...]
    class_order: tuple[int, ...]
    marker_word_positions: tuple[int, ...] = ()

    @property
    def n_words(self) -> int:
        return len(self.word_spans)

    @property
    def n_tokens(self) -> int:
        return int(self.pad_mask.sum())

    def word_gold_labels(self) -> tuple[int, ...]:
        return tuple(int(self.token_labels[s]) for s, _ in self.word_spans)


def tokenize_instance(instance, tokenizer: TokenizerSpec) -> TokenizedInstance:
    """Map a word-level instance to padded token arrays with spans.

    Raises :class:`TruncationError` when the subword sequence exceeds
    the maximum length; labels are never silently cut.
    """
    max_len = tokenizer.max_len
    tokens: list[str] = []
    ids: list[int] = []
    labels: list[int] = []
    spans: list[tuple[int, int]] = []
    for word, label in zip(instance.words, instance.labels):
        pieces = tokenizer.tokenize_word(word)
        if not pieces:
            raise ScopeworksError(
                f"tokenizer returned no tokens for word {word!r} "
                f"(instance {instance.instance_id!r})"
            )
        start = len(tokens)
        for piece, piece_id in pieces:
            tokens.append(piece)
            ids.append(piece_id)
            labels.append(label)
        spans.append((start, len(tokens)))
    if len(tokens) > max_len:
        raise TruncationError(instance.instance_id, needed=len(tokens), max_len=max_len)

    pad_label = pad_label_for(instance.task)
    n = len(tokens)
    tokens.extend([PAD_TOKEN] * (max_len - n))
    ids.extend([tokenizer.pad_id] * (max_len - n))
    labels.extend([pad_label] * (max_len - n))
    pad_mask = np.zeros(max_len, dtype=bool)
    pad_mask[:n] = True
    return TokenizedInstance(
        instance_id=instance.instance_id,
        task=instance.task,
        tokens=tuple(tokens),
        token_ids=np.asarray(ids, dtype=np.int64),
        token_labels=np.asarray(labels, dtype=np.int64),
        pad_mask=pad_mask,
        word_spans=tuple(spans),
        class_order=class_order_for(instance.task),
        marker_word_positions=tuple(getattr(instance, "marker_positions", ()) or ()),
    )


# ---------------------------------------------------------------------------
# Probability tables and word-level aggregation
# ---------------------------------------------------------------------------

ROW_SUM_TOLERANCE = 1e-4


@dataclass
class ProbTable:
    """Per-token probability vectors plus the class order they index."""

    probs: np.ndarray
    class_order: tuple[int, ...]

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.class_order = tuple(int(c) for c in self.class_order)
        if self.probs.ndim != 2 or self.probs.shape[1] != len(self.class_order):
            raise InputError(
                f"probability table must be (rows, {len(self.class_order)}), "
                f"got shape {self.probs.shape}"
            )

    def validate(self, expected_rows: int | None = None) -> None:
        if expected_rows is not None and self.probs.shape[0] != expected_rows:
            raise SchemaError(
                f"probability table has {self.probs.shape[0]} rows, expected {expected_rows}"
            )
        sums = self.probs.sum(axis=1)
        worst = float(np.abs(sums - 1.0).max()) if len(sums) else 0.0
        if worst > ROW_SUM_TOLERANCE:
            raise SchemaError(
                f"probability rows must sum to 1 within {ROW_SUM_TOLERANCE}; "
                f"worst deviation {worst:.3e}"
            )
        if np.any(self.probs < 0):
            raise SchemaError("probability table contains negative entries")


def _check_spans(table: ProbTable, spans) -> None:
    rows = table.probs.shape[0]
    for s, e in spans:
        if e <= s:
            raise ScopeworksError(f"empty word span [{s}, {e}) violates the tokenizer contract")
        if s < 0 or e > rows:
            raise InputError(f"word span [{s}, {e}) outside the table's {rows} rows")


def aggregate_average(table: ProbTable, spans) -> list[int]:
    """Mean of each word's token probability vectors, then argmax."""
    _check_spans(table, spans)
    order = table.class_order
    out = []
    for s, e in spans:
        mean = table.probs[s:e].mean(axis=0)
        out.append(order[int(np.argmax(mean))])
    return out


def aggregate_first(table: ProbTable, spans) -> list[int]:
    """Argmax of the first token's probability vector of each word."""
    _check_spans(table, spans)
    order = table.class_order
    return [order[int(np.argmax(table.probs[s]))] for s, _ in spans]


AGGREGATIONS = {"average": aggregate_average, "first_token": aggregate_first}


def word_level_outputs(
    ti: TokenizedInstance, table: ProbTable, method: str = "average",
    include_markers: bool = False,
):
    """Per-word (predicted, gold) label sequences for one instance.

    Marker words are dropped from both sequences unless
    ``include_markers`` is set, so scores stay defined over real words.
    """
    try:
        aggregate = AGGREGATIONS[method]
    except KeyError:
        raise InputError(
            f"unknown aggregation {method!r}; known: {sorted(AGGREGATIONS)}"
        ) from None
    if tuple(table.class_order) != tuple(ti.class_order):
        raise InputError(
            f"class order mismatch: table {list(table.class_order)} vs "
            f"instance {list(ti.class_order)}"
        )
    predicted = aggregate(table, ti.word_spans)
    gold = list(ti.word_gold_labels())
    if not include_markers and ti.marker_word_positions:
        skip = set(ti.marker_word_positions)
        predicted = [v for i, v in enumerate(predicted) if i not in skip]
        gold = [v for i, v in enumerate(gold) if i not in skip]
    return tuple(predicted), tuple(gold)


# ---------------------------------------------------------------------------
# Tokenized-instance JSON Lines (consumed by external model adapters)
# ---------------------------------------------------------------------------

def tokenized_to_json_obj(ti: TokenizedInstance) -> dict:
    return {
        "instance_id": ti.instance_id,
        "tokens": list(ti.tokens),
        "token_ids": [int(i) for i in ti.token_ids],
        "word_spans": [[int(s), int(e)] for s, e in ti.word_spans],
        "pad_mask": [bool(b) for b in ti.pad_mask],
        "labels": [int(v) for v in ti.token_labels],
        "class_order": list(ti.class_order),
    }


def tokenized_from_json_obj(obj: dict) -> TokenizedInstance:
    try:
        ti = TokenizedInstance(
            instance_id=obj["instance_id"],
            task=_task_from_class_order(obj["class_order"]),
            tokens=tuple(obj["tokens"]),
            token_ids=np.asarray(obj["token_ids"], dtype=np.int64),
            token_labels=np.asarray(obj["labels"], dtype=np.int64),
            pad_mask=np.asarray(obj["pad_mask"], dtype=bool),
            word_spans=tuple((int(s), int(e)) for s, e in obj["word_spans"]),
            class_order=tuple(int(c) for c in obj["class_order"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed tokenized instance: {exc}") from exc
    # Marker words are identifiable by their reserved forms.
    ti.marker_word_positions = tuple(
        i for i, (s, e) in enumerate(ti.word_spans)
        if e - s == 1 and ti.tokens[s] in MARKER_WORDS
    )
    validate_tokenized_instance(ti)
    return ti


def _task_from_class_order(class_order) -> str:
    order = tuple(int(c) for c in class_order)
    if order == CUE_CLASS_ORDER:
        return "cue"
    if order == SCOPE_CLASS_ORDER:
        return "scope"
    raise SchemaError(
        f"class order {list(order)} matches neither the cue order "
        f"{list(CUE_CLASS_ORDER)} nor the scope order {list(SCOPE_CLASS_ORDER)}"
    )


def validate_tokenized_instance(ti: TokenizedInstance) -> None:
    """Enforce the tokenized-instance invariants; raise on violation."""
    n = len(ti.tokens)
    for name, arr in (("token_ids", ti.token_ids), ("labels", ti.token_labels),
                      ("pad_mask", ti.pad_mask)):
        if len(arr) != n:
            raise SchemaError(
                f"instance {ti.instance_id!r}: {name} length {len(arr)} != {n} tokens"
            )
    n_real = int(ti.pad_mask.sum())
    if ti.pad_mask[:n_real].sum() != n_real:
        raise SchemaError(f"instance {ti.instance_id!r}: pad mask is not a prefix mask")
    cursor = 0
    for s, e in ti.word_spans:
        if s != cursor or e <= s:
            raise SchemaError(
                f"instance {ti.instance_id!r}: word spans must tile the non-pad "
                f"prefix contiguously (bad span [{s}, {e}) at token {cursor})"
            )
        span_labels = set(int(v) for v in ti.token_labels[s:e])
        if len(span_labels) != 1:
            raise SchemaError(
                f"instance {ti.instance_id!r}: labels within span [{s}, {e}) differ"
            )
        cursor = e
    if cursor != n_real:
        raise SchemaError(
            f"instance {ti.instance_id!r}: spans cover {cursor} tokens but "
            f"{n_real} are non-pad"
        )
    allowed = set(ti.class_order)
    bad = sorted(set(int(v) for v in ti.token_labels) - allowed)
    if bad:
        raise SchemaError(
            f"instance {ti.instance_id!r}: labels {bad} outside class order "
            f"{list(ti.class_order)}"
        )


def write_tokenized(instances, sink=None) -> bytes:
    lines = [json.dumps(tokenized_to_json_obj(ti), ensure_ascii=False) for ti in instances]
    data = ("\n".join(lines) + "\n" if lines else "").encode("utf-8")
    if sink is not None:
        sink.write(data)
    return data


def read_tokenized(data: bytes) -> list[TokenizedInstance]:
    out = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: bad JSON ({exc})") from exc
        out.append(tokenized_from_json_obj(obj))
    return out


def load_tokenized(path) -> list[TokenizedInstance]:
    with open(path, "rb") as fh:
        return read_tokenized(fh.read())


def save_tokenized(instances, path) -> None:
    with open(path, "wb") as fh:
        write_tokenized(instances, fh)
