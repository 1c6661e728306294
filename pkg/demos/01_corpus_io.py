"""Parse annotated corpora and round-trip the canonical format.

Three input layouts land in the same representation: inline XML with
cue->scope references, inline XML with scope->cue references, and a
token-column layout for negation data.
"""

from scopeworks import corpus_stats, parse_column_format, parse_inline_xml, read_canonical, write_canonical

BIOSCOPE_STYLE = b"""<Annotation><Document>
<sentence id="S1">It <cue type="speculation" ref="X1">might</cue> <xcope id="X1">rain tomorrow</xcope>.</sentence>
<sentence id="S2">The effect was clear.</sentence>
<sentence id="S3"><cue type="speculation" ref="X2">Whether</cue> <xcope id="X2">this holds</xcope> is unknown.</sentence>
</Document></Annotation>"""

SFU_STYLE = b"""<Document>
<SENTENCE>I would <cue type="negation" ID="c1">never</cue> <xcope><ref SRC="c1"/>buy this again</xcope>.</SENTENCE>
</Document>"""

COLUMNS = b"""We\t_\t_
did\tdid\t_
not\tnot\t_
go\t_\tgo
"""

print("== inline XML, cue -> scope references ==")
spec = parse_inline_xml(BIOSCOPE_STYLE, "bioscope", "speculation", name="demo-spec")
for s in spec.sentences:
    print(f"  {s.sentence_id}: words={list(s.words)}")
    for cue in s.cues:
        scope = next(sc for sc in s.scopes if sc.cue_id == cue.id)
        print(f"    cue {cue.id} at {list(cue.word_indices)}, scope {sorted(scope.word_indices)}")
print("  stats:", corpus_stats(spec))

print("\n== inline XML, scope -> cue references ==")
neg = parse_inline_xml(SFU_STYLE, "sfu", "negation", name="demo-neg")
s = neg.sentences[0]
print(f"  words={list(s.words)}")
print(f"  cue at {list(s.cues[0].word_indices)}, scope {sorted(s.scopes[0].word_indices)}")

print("\n== column layout ==")
cols = parse_column_format(COLUMNS, "negation", name="demo-cols")
s = cols.sentences[0]
print(f"  words={list(s.words)}, cue at {list(s.cues[0].word_indices)}, "
      f"scope {sorted(s.scopes[0].word_indices)}")

print("\n== canonical round trip ==")
blob = write_canonical(spec)
print("  header + first sentence:")
for line in blob.decode().splitlines()[:2]:
    print("   ", line)
assert read_canonical(blob) == spec
print("  read(write(corpus)) == corpus: True")
