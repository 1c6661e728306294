"""Task encodings: per-word cue labels and per-cue scope instances.

Cue detection labels every word of a sentence with ``1`` (single-word
cue), ``2`` (part of a multiword cue) or ``3`` (not a cue); the pad
label ``4`` only appears later, after subword tokenization.  Scope
resolution is encoded one instance per cue: a marker word naming the
cue's class is inserted immediately before the cue, and every word is
labeled ``1`` (in scope) or ``0`` (out of scope).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import ClassVar

from .corpus import AnnotatedSentence, CueAnnotation
from .errors import EncodingError, InputError, SchemaError

CUE_SINGLE = 1
CUE_MULTI = 2
CUE_NONE = 3
CUE_PAD = 4

SCOPE_OUT = 0
SCOPE_IN = 1

# Reserved marker words, one per cue class; registered with tokenizers
# as atomic symbols so they can never be split into subwords.
MARKER_SINGLE = "⟨token[1]⟩"
MARKER_MULTI = "⟨token[2]⟩"
MARKER_WORDS = (MARKER_SINGLE, MARKER_MULTI)


def marker_for(cue: CueAnnotation) -> str:
    """The marker word announcing ``cue``'s class (single vs multiword)."""
    return MARKER_MULTI if len(cue.word_indices) > 1 else MARKER_SINGLE


@dataclass(frozen=True)
class CueTaskInstance:
    """One sentence encoded for cue detection."""

    task: ClassVar[str] = "cue"

    instance_id: str
    sentence_id: str
    words: tuple[str, ...]
    labels: tuple[int, ...]


@dataclass(frozen=True)
class ScopeTaskInstance:
    """One (sentence, cue) pair encoded for scope resolution.

    ``words`` is the sentence with the marker word inserted;
    ``marker_positions`` holds the inserted positions, so deleting them
    recovers the original sentence.
    """

    task: ClassVar[str] = "scope"

    instance_id: str
    sentence_id: str
    cue_id: str
    words: tuple[str, ...]
    labels: tuple[int, ...]
    marker_positions: tuple[int, ...]


def encode_cue_task(sentence: AnnotatedSentence) -> CueTaskInstance:
    """Label every word: 1 single-word cue, 2 multiword cue, 3 otherwise."""
    labels = [CUE_NONE] * len(sentence.words)
    owner: dict[int, str] = {}
    for cue in sentence.cues:
        value = CUE_MULTI if len(cue.word_indices) > 1 else CUE_SINGLE
        for i in cue.word_indices:
            if i in owner:
                raise EncodingError(
                    f"sentence {sentence.sentence_id!r}: cues {owner[i]!r} and {cue.id!r} "
                    f"overlap on word {i}"
                )
            owner[i] = cue.id
            labels[i] = value
    return CueTaskInstance(
        instance_id=f"{sentence.sentence_id}::cue",
        sentence_id=sentence.sentence_id,
        words=sentence.words,
        labels=tuple(labels),
    )


def encode_scope_task(
    sentence: AnnotatedSentence, allow_empty_scope: bool = False
) -> list[ScopeTaskInstance]:
    """Build one scope instance per cue of the sentence.

    Each instance inserts one marker word immediately before the first
    word of its cue.  Words in the cue's gold scope get label 1, all
    others 0; the marker inherits the label of the cue word it precedes
    (markers are excluded from scoring downstream).  A cue with no or
    an empty scope annotation is an error unless ``allow_empty_scope``.
    """
    scope_by_cue = {sc.cue_id: sc for sc in sentence.scopes}
    instances = []
    for cue in sentence.cues:
        scope = scope_by_cue.get(cue.id)
        in_scope = frozenset(scope.word_indices) if scope is not None else frozenset()
        if not in_scope and not allow_empty_scope:
            detail = "no scope annotation" if scope is None else "an empty scope"
            raise EncodingError(
                f"sentence {sentence.sentence_id!r}: cue {cue.id!r} has {detail}; "
                f"pass allow_empty_scope=True to emit an all-out instance"
            )
        insert_at = cue.word_indices[0]
        words = (
            sentence.words[:insert_at] + (marker_for(cue),) + sentence.words[insert_at:]
        )
        word_labels = [SCOPE_IN if i in in_scope else SCOPE_OUT for i in range(len(sentence.words))]
        labels = word_labels[:insert_at] + [word_labels[insert_at]] + word_labels[insert_at:]
        instances.append(
            ScopeTaskInstance(
                instance_id=f"{sentence.sentence_id}::scope::{cue.id}",
                sentence_id=sentence.sentence_id,
                cue_id=cue.id,
                words=words,
                labels=tuple(labels),
                marker_positions=(insert_at,),
            )
        )
    return instances


def strip_markers(instance, values):
    """Drop marker positions from a per-word vector of ``instance``."""
    skip = set(getattr(instance, "marker_positions", ()) or ())
    if len(values) != len(instance.words):
        raise InputError(
            f"instance {instance.instance_id!r}: expected {len(instance.words)} per-word "
            f"values, got {len(values)}"
        )
    return tuple(v for i, v in enumerate(values) if i not in skip)


def decode_cue_predictions(
    instance: CueTaskInstance, word_labels, kind: str = "speculation"
) -> list[CueAnnotation]:
    """Turn per-word cue labels back into cue annotations.

    Every maximal run of label 2 becomes one multiword cue; every label
    1 word becomes its own single-word cue.
    """
    word_labels = list(word_labels)
    if len(word_labels) != len(instance.words):
        raise InputError(
            f"instance {instance.instance_id!r}: {len(word_labels)} labels for "
            f"{len(instance.words)} words"
        )
    bad = sorted({v for v in word_labels if v not in (CUE_SINGLE, CUE_MULTI, CUE_NONE)})
    if bad:
        raise InputError(f"cue labels must be in {{1, 2, 3}}, found {bad}")

    cues = []
    i = 0
    while i < len(word_labels):
        label = word_labels[i]
        if label == CUE_SINGLE:
            cues.append(
                CueAnnotation(id=f"pred-{len(cues)}", kind=kind, word_indices=(i,))
            )
            i += 1
        elif label == CUE_MULTI:
            j = i
            while j < len(word_labels) and word_labels[j] == CUE_MULTI:
                j += 1
            cues.append(
                CueAnnotation(id=f"pred-{len(cues)}", kind=kind, word_indices=tuple(range(i, j)))
            )
            i = j
        else:
            i += 1
    return cues


# ---------------------------------------------------------------------------
# Encoded-instance JSON Lines
# ---------------------------------------------------------------------------

def instance_to_json_obj(instance) -> dict:
    obj = {
        "instance_id": instance.instance_id,
        "task": instance.task,
        "words": list(instance.words),
        "labels": list(instance.labels),
    }
    if instance.task == "scope":
        obj["cue_id"] = instance.cue_id
        obj["marker_positions"] = list(instance.marker_positions)
    return obj


def instance_from_json_obj(obj: dict):
    try:
        task = obj["task"]
        instance_id = obj["instance_id"]
        words = tuple(obj["words"])
        labels = tuple(int(v) for v in obj["labels"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed encoded instance: {exc}") from exc
    if len(words) != len(labels):
        raise SchemaError(
            f"instance {instance_id!r}: {len(labels)} labels for {len(words)} words"
        )
    sentence_id = instance_id.split("::", 1)[0]
    if task == "cue":
        return CueTaskInstance(
            instance_id=instance_id, sentence_id=sentence_id, words=words, labels=labels
        )
    if task == "scope":
        return ScopeTaskInstance(
            instance_id=instance_id,
            sentence_id=sentence_id,
            cue_id=obj.get("cue_id", ""),
            words=words,
            labels=labels,
            marker_positions=tuple(int(i) for i in obj.get("marker_positions", ())),
        )
    raise SchemaError(f"instance {instance_id!r}: unknown task {task!r}")


def write_instances(instances, sink=None) -> bytes:
    lines = [json.dumps(instance_to_json_obj(inst), ensure_ascii=False) for inst in instances]
    data = ("\n".join(lines) + "\n" if lines else "").encode("utf-8")
    if sink is not None:
        sink.write(data)
    return data


def read_instances(data: bytes) -> list:
    out = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: bad JSON ({exc})") from exc
        out.append(instance_from_json_obj(obj))
    return out


def load_instances(path) -> list:
    with open(path, "rb") as fh:
        return read_instances(fh.read())


def save_instances(instances, path) -> None:
    with open(path, "wb") as fh:
        write_instances(instances, fh)
