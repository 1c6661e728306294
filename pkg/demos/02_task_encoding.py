"""Encode sentences for the two tasks and decode predictions back.

Cue detection labels every word (1 single-word cue, 2 multiword cue,
3 otherwise).  Scope resolution builds one instance per cue, inserting
a marker word before the cue so the model knows whose scope to find.
"""

from scopeworks import (
    AnnotatedSentence,
    CueAnnotation,
    ScopeAnnotation,
    decode_cue_predictions,
    encode_cue_task,
    encode_scope_task,
    strip_markers,
)

sentence = AnnotatedSentence(
    sentence_id="S1",
    words=("It", "might", "rain", "tomorrow"),
    cues=(CueAnnotation(id="X1", kind="speculation", word_indices=(1,)),),
    scopes=(ScopeAnnotation(cue_id="X1", word_indices=frozenset({2, 3})),),
)

print("sentence:", " ".join(sentence.words))

cue_instance = encode_cue_task(sentence)
print("\n== cue task ==")
print("  words: ", list(cue_instance.words))
print("  labels:", list(cue_instance.labels), " (1 cue, 2 multiword cue, 3 not a cue)")

decoded = decode_cue_predictions(cue_instance, cue_instance.labels)
print("  decode(labels) ->", [(c.id, c.word_indices) for c in decoded])

print("\n== scope task (one instance per cue) ==")
for inst in encode_scope_task(sentence):
    print("  words: ", list(inst.words))
    print("  labels:", list(inst.labels), " (1 in scope, 0 out of scope)")
    print("  marker at", inst.marker_positions,
          "-> stripped:", list(strip_markers(inst, inst.words)))

# a multiword cue gets the multiword marker, still one marker per instance
multi = AnnotatedSentence(
    sentence_id="S2",
    words=("We", "cannot", "exclude", "side", "effects"),
    cues=(CueAnnotation(id="X2", kind="speculation", word_indices=(1, 2)),),
    scopes=(ScopeAnnotation(cue_id="X2", word_indices=frozenset({3, 4})),),
)
print("\nmultiword cue:", " ".join(multi.words))
print("  cue labels:  ", list(encode_cue_task(multi).labels))
(inst,) = encode_scope_task(multi)
print("  scope words: ", list(inst.words))
print("  scope labels:", list(inst.labels))
