"""Rule-based synthetic corpora for smoke tests and demos.

Sentences are filler words drawn from a small vocabulary; cues come
from a fixed lexicon (single-word and two-word), and each cue's scope
is, by construction, every word after the cue to the end of the
sentence.  Both tasks are therefore exactly learnable, which makes
these corpora useful for end-to-end checks without any licensed data.
"""

from __future__ import annotations

import numpy as np

from .corpus import AnnotatedSentence, Corpus, CueAnnotation, ScopeAnnotation, validate_corpus

FILLERS = (
    "the", "a", "report", "results", "cells", "study", "data", "patients",
    "protein", "levels", "we", "they", "observed", "measured", "increased",
    "decreased", "response", "analysis", "showed", "found", "in", "of",
    "with", "after", "treatment", "growth", "effect", "samples", "values",
    "group",
)

SINGLE_CUES = ("might", "may", "possibly", "suggest", "apparently")
MULTI_CUES = (("whether", "or"), ("cannot", "exclude"), ("raise", "possibility"))


def make_rule_corpus(
    n_sentences: int,
    seed: int = 0,
    name: str = "synthetic",
    cue_kind: str = "speculation",
    cue_probability: float = 0.85,
    multiword_fraction: float = 0.25,
    min_len: int = 5,
    max_len: int = 11,
) -> Corpus:
    """Generate a corpus whose cues and scopes follow a learnable rule."""
    rng = np.random.default_rng(seed)
    sentences = []
    for i in range(n_sentences):
        length = int(rng.integers(min_len, max_len + 1))
        words = list(rng.choice(FILLERS, size=length))
        cues = []
        scopes = []
        if rng.random() < cue_probability:
            if rng.random() < multiword_fraction:
                cue_words = MULTI_CUES[int(rng.integers(len(MULTI_CUES)))]
            else:
                cue_words = (SINGLE_CUES[int(rng.integers(len(SINGLE_CUES)))],)
            # keep at least one word after the cue so the scope is non-empty
            start = int(rng.integers(0, length - len(cue_words)))
            for k, cw in enumerate(cue_words):
                words[start + k] = cw
            cue_id = f"s{i}-c0"
            indices = tuple(range(start, start + len(cue_words)))
            cues.append(CueAnnotation(id=cue_id, kind=cue_kind, word_indices=indices))
            scopes.append(ScopeAnnotation(
                cue_id=cue_id,
                word_indices=frozenset(range(start + len(cue_words), length)),
            ))
        sentences.append(AnnotatedSentence(
            sentence_id=f"s{i}",
            words=tuple(words),
            cues=tuple(cues),
            scopes=tuple(scopes),
        ))
    corpus = Corpus(name=name, cue_kind=cue_kind, sentences=tuple(sentences))
    validate_corpus(corpus)
    return corpus
