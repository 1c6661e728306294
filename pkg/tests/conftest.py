import numpy as np
import pytest

from scopeworks.corpus import (
    AnnotatedSentence,
    Corpus,
    CueAnnotation,
    ScopeAnnotation,
)

# The running example used throughout: one speculation cue whose scope
# is the rest of the sentence.
EXAMPLE_XML = b"""<Annotation><Document>
<sentence id="S1">It <cue type="speculation" ref="X1">might</cue> <xcope id="X1">rain tomorrow</xcope></sentence>
</Document></Annotation>"""

WORD_POOL = (
    "alpha", "beta", "gamma", "delta", "cells", "levels", "report", "the",
    "a", "of", "in", "was", "seen", "no", "effect", "growth",
)


@pytest.fixture
def example_sentence():
    return AnnotatedSentence(
        sentence_id="S1",
        words=("It", "might", "rain", "tomorrow"),
        cues=(CueAnnotation(id="X1", kind="speculation", word_indices=(1,)),),
        scopes=(ScopeAnnotation(cue_id="X1", word_indices=frozenset({2, 3})),),
    )


def random_sentence(rng, sid, cue_kind="speculation", max_cues=2):
    """A random sentence with non-overlapping cues and random scopes."""
    length = int(rng.integers(4, 12))
    words = tuple(str(w) for w in rng.choice(WORD_POOL, size=length))
    n_cues = int(rng.integers(0, max_cues + 1))
    free = list(range(length))
    cues, scopes = [], []
    for c in range(n_cues):
        width = int(rng.integers(1, 3))
        if len(free) < width:
            break
        start = int(rng.choice(len(free) - width + 1))
        block = free[start:start + width]
        if block != list(range(block[0], block[0] + width)):
            continue  # need contiguous positions for a multiword cue
        for i in block:
            free.remove(i)
        cue_id = f"{sid}-c{c}"
        cues.append(CueAnnotation(id=cue_id, kind=cue_kind, word_indices=tuple(block)))
        n_scope = int(rng.integers(1, length))
        scope = frozenset(int(i) for i in rng.choice(length, size=n_scope, replace=False))
        scopes.append(ScopeAnnotation(cue_id=cue_id, word_indices=scope))
    return AnnotatedSentence(
        sentence_id=sid, words=words, cues=tuple(cues), scopes=tuple(scopes)
    )


def random_corpus(rng, n_sentences=20, name="rand", cue_kind="speculation"):
    return Corpus(
        name=name,
        cue_kind=cue_kind,
        sentences=tuple(
            random_sentence(rng, f"{name}-s{i}", cue_kind) for i in range(n_sentences)
        ),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
