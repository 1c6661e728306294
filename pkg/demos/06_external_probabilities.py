"""Score externally produced probabilities through the pipeline.

Any model backend (in-process or not) can participate by writing the
probability interchange format: one JSON line per instance with a
probability row per token position.  The replay backend serves those
rows in place of a live model, so the same aggregation and scoring
code runs unchanged.
"""

import io

import numpy as np

from scopeworks import (
    ProbTable,
    ReplayBackend,
    WordPieceTokenizer,
    WordPredictions,
    encode_scope_task,
    score_task,
    tokenize_instance,
    word_level_outputs,
    write_probability_file,
)
from scopeworks.corpus import AnnotatedSentence, CueAnnotation, ScopeAnnotation
from scopeworks.encoding import MARKER_SINGLE
from scopeworks.model.replay import read_probability_data
from scopeworks.tokenization import PAD_TOKEN, UNK_TOKEN

sentence = AnnotatedSentence(
    sentence_id="S1",
    words=("It", "might", "rain", "tomorrow"),
    cues=(CueAnnotation(id="X1", kind="speculation", word_indices=(1,)),),
    scopes=(ScopeAnnotation(cue_id="X1", word_indices=frozenset({2, 3})),),
)
tokenizer = WordPieceTokenizer(
    [PAD_TOKEN, UNK_TOKEN, MARKER_SINGLE, "it", "might", "rain", "tom", "##or", "##row"],
    max_len=10,
)
(instance,) = encode_scope_task(sentence)
ti = tokenize_instance(instance, tokenizer)

# pretend an external model produced these rows: confident "in scope"
# for rain/tom/##or/##row, "out" elsewhere
rows = np.full((10, 2), [0.9, 0.1])
for start, end in ti.word_spans[3:5]:
    rows[start:end] = [0.08, 0.92]
table = ProbTable(rows, class_order=(0, 1))

buffer = io.BytesIO()
write_probability_file([(ti.instance_id, table)], buffer)
print("interchange line:")
print(" ", buffer.getvalue().decode().splitlines()[0][:96], "...")

tables, class_order = read_probability_data(buffer.getvalue(), expected_rows=10)
backend = ReplayBackend(tables, class_order)

replayed = backend.forward_for(ti.instance_id)
predicted, gold = word_level_outputs(ti, replayed, method="average")
print("\nper-word predictions (markers excluded):", list(predicted))
print("per-word gold:                          ", list(gold))

report = score_task(
    [WordPredictions(ti.instance_id, predicted, gold)],
    "scope", train_set="external", eval_set="demo", aggregation="average",
)
print(f"\nword-level scores: P={report.precision:.3f} R={report.recall:.3f} "
      f"F1={report.f1:.3f} (TP={report.tp} FP={report.fp} FN={report.fn})")
