"""Word labels through a subword tokenizer and back.

Each word's label is copied to every subword it splits into; padding
carries label 4 for the cue task (weight 0 during training).  Coming
back, a word's label is either the argmax of its tokens' averaged
probability vectors or the argmax of its first token's vector.
"""

import numpy as np

from scopeworks import (
    ProbTable,
    WordPieceTokenizer,
    aggregate_average,
    aggregate_first,
    encode_cue_task,
    tokenize_instance,
)
from scopeworks.corpus import AnnotatedSentence, CueAnnotation, ScopeAnnotation
from scopeworks.encoding import MARKER_SINGLE
from scopeworks.tokenization import PAD_TOKEN, UNK_TOKEN

sentence = AnnotatedSentence(
    sentence_id="S1",
    words=("It", "might", "rain", "tomorrow"),
    cues=(CueAnnotation(id="X1", kind="speculation", word_indices=(1,)),),
    scopes=(ScopeAnnotation(cue_id="X1", word_indices=frozenset({2, 3})),),
)

# a vocabulary that splits "tomorrow" into three pieces
tokenizer = WordPieceTokenizer(
    [PAD_TOKEN, UNK_TOKEN, MARKER_SINGLE, "it", "might", "rain", "tom", "##or", "##row"],
    max_len=10,
)

ti = tokenize_instance(encode_cue_task(sentence), tokenizer)
print("tokens:      ", list(ti.tokens))
print("token labels:", list(ti.token_labels), " (pad label 4 after the text)")
print("word spans:  ", list(ti.word_spans))

print("\n== aggregation on a hand-made probability table ==")
# two-class table over one word split into two tokens
rows = np.array([[0.6, 0.4], [0.2, 0.8]])
table = ProbTable(rows, class_order=(0, 1))
span = [(0, 2)]
print("rows:", rows.tolist())
print("average -> mean [0.4, 0.6] -> label", aggregate_average(table, span))
print("first token -> row [0.6, 0.4] -> label", aggregate_first(table, span))

print("\n== per-word labels for the tokenized sentence ==")
rng = np.random.default_rng(1)
probs = rng.dirichlet([1.0] * 4, size=10)
cue_table = ProbTable(probs, class_order=(1, 2, 3, 4))
print("average:    ", aggregate_average(cue_table, ti.word_spans))
print("first token:", aggregate_first(cue_table, ti.word_spans))
print("(classes map through the order [1, 2, 3, 4])")
