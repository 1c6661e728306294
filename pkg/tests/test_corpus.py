import io
import json

import pytest

from scopeworks.corpus import (
    Corpus,
    CueAnnotation,
    ScopeAnnotation,
    corpus_stats,
    parse_column_format,
    parse_inline_xml,
    read_canonical,
    segment_words,
    write_canonical,
)
from scopeworks.errors import (
    ColumnFormatError,
    ConfigError,
    CorpusParseError,
    CorpusStructureError,
    SchemaVersionError,
)

from conftest import EXAMPLE_XML, random_corpus


class TestBioscopeXml:
    def test_running_example(self):
        corpus = parse_inline_xml(EXAMPLE_XML, "bioscope", "speculation")
        assert len(corpus.sentences) == 1
        s = corpus.sentences[0]
        assert s.words == ("It", "might", "rain", "tomorrow")
        assert s.cues == (CueAnnotation(id="X1", kind="speculation", word_indices=(1,)),)
        assert s.scopes == (ScopeAnnotation(cue_id="X1", word_indices=frozenset({2, 3})),)

    def test_sentence_without_markup(self):
        xml = b'<doc><sentence id="S1">Nothing to see here.</sentence></doc>'
        s = parse_inline_xml(xml, "bioscope", "speculation").sentences[0]
        assert s.words == ("Nothing", "to", "see", "here", ".")
        assert s.cues == () and s.scopes == ()

    def test_two_cues_one_sentence(self):
        xml = (
            b'<doc><sentence id="S1">'
            b'<cue type="speculation" ref="X1">May</cue> <xcope id="X1">be</xcope> or '
            b'<cue type="speculation" ref="X2">might</cue> <xcope id="X2">not be</xcope>'
            b"</sentence></doc>"
        )
        corpus = parse_inline_xml(xml, "bioscope", "speculation")
        assert len(corpus.sentences) == 1
        s = corpus.sentences[0]
        assert len(s.cues) == 2
        assert len(s.scopes) == 2

    def test_nested_scopes_become_independent_annotations(self):
        xml = (
            b'<doc><sentence id="S1">'
            b'<cue type="speculation" ref="X1">might</cue> '
            b'<xcope id="X1">see <cue type="speculation" ref="X2">possible</cue> '
            b'<xcope id="X2">growth</xcope></xcope>'
            b"</sentence></doc>"
        )
        s = parse_inline_xml(xml, "bioscope", "speculation").sentences[0]
        by_id = {sc.cue_id: sc.word_indices for sc in s.scopes}
        assert by_id["X1"] == frozenset({1, 2, 3})
        assert by_id["X2"] == frozenset({3})

    def test_other_kind_dropped(self):
        xml = (
            b'<doc><sentence id="S1">'
            b'<cue type="negation" ref="X1">not</cue> <xcope id="X1">here</xcope> but '
            b'<cue type="speculation" ref="X2">maybe</cue> <xcope id="X2">there</xcope>'
            b"</sentence></doc>"
        )
        s = parse_inline_xml(xml, "bioscope", "speculation").sentences[0]
        assert [c.id for c in s.cues] == ["X2"]
        s = parse_inline_xml(xml, "bioscope", "negation").sentences[0]
        assert [c.id for c in s.cues] == ["X1"]

    def test_multiword_cue_single_element(self):
        xml = (
            b'<doc><sentence id="S1">We <cue type="speculation" ref="X1">cannot exclude'
            b'</cue> <xcope id="X1">effects</xcope></sentence></doc>'
        )
        s = parse_inline_xml(xml, "bioscope", "speculation").sentences[0]
        assert s.cues[0].word_indices == (1, 2)

    def test_split_cue_elements_share_ref(self):
        xml = (
            b'<doc><sentence id="S1"><cue type="speculation" ref="X1">either</cue> this '
            b'<cue type="speculation" ref="X1">or</cue> <xcope id="X1">that</xcope>'
            b"</sentence></doc>"
        )
        s = parse_inline_xml(xml, "bioscope", "speculation").sentences[0]
        assert len(s.cues) == 1
        assert s.cues[0].word_indices == (0, 2)

    def test_malformed_xml_reports_byte_offset(self):
        xml = b"<doc><sentence>broken</doc>"
        with pytest.raises(CorpusParseError) as err:
            parse_inline_xml(xml, "bioscope", "speculation")
        assert err.value.byte_offset is not None

    def test_cue_referencing_missing_scope(self):
        xml = (
            b'<doc><sentence id="S1"><cue type="speculation" ref="X9">might</cue> rain'
            b"</sentence></doc>"
        )
        with pytest.raises(CorpusStructureError, match="X9"):
            parse_inline_xml(xml, "bioscope", "speculation")

    def test_unknown_dialect(self):
        with pytest.raises(ConfigError, match="bioscope"):
            parse_inline_xml(EXAMPLE_XML, "nope", "speculation")


class TestSfuXml:
    SFU = (
        b"<Document>"
        b'<SENTENCE>I <cue type="negation" ID="c1">never</cue> '
        b'<xcope><ref SRC="c1"/>liked it</xcope></SENTENCE>'
        b"</Document>"
    )

    def test_scope_to_cue_linking(self):
        s = parse_inline_xml(self.SFU, "sfu", "negation").sentences[0]
        assert s.words == ("I", "never", "liked", "it")
        assert s.cues[0].word_indices == (1,)
        assert s.scopes[0].word_indices == frozenset({2, 3})

    def test_cue_without_scope_keeps_empty_scope(self):
        xml = (
            b'<Document><SENTENCE><cue type="negation" ID="c1">No</cue> thanks'
            b"</SENTENCE></Document>"
        )
        s = parse_inline_xml(xml, "sfu", "negation").sentences[0]
        assert s.cues[0].word_indices == (0,)
        assert s.scopes[0].word_indices == frozenset()

    def test_reference_to_missing_cue(self):
        xml = (
            b'<Document><SENTENCE>so <xcope><ref SRC="ghost"/>bad</xcope>'
            b"</SENTENCE></Document>"
        )
        with pytest.raises(CorpusStructureError, match="ghost"):
            parse_inline_xml(xml, "sfu", "negation")

    def test_discontinuous_scope_merges(self):
        xml = (
            b'<Document><SENTENCE><cue type="negation" ID="c1">not</cue> '
            b'<xcope><ref SRC="c1"/>this</xcope> but <xcope><ref SRC="c1"/>that</xcope>'
            b"</SENTENCE></Document>"
        )
        s = parse_inline_xml(xml, "sfu", "negation").sentences[0]
        assert s.scopes[0].word_indices == frozenset({1, 3})


class TestColumnFormat:
    def test_single_cue_block(self):
        data = b"We\t_\t_\ndid\tdid\t_\nnot\tnot\t_\ngo\t_\tgo\n"
        corpus = parse_column_format(data, "negation")
        assert len(corpus.sentences) == 1
        s = corpus.sentences[0]
        assert s.words == ("We", "did", "not", "go")
        assert s.cues[0].word_indices == (1, 2)
        assert s.scopes[0].word_indices == frozenset({3})

    def test_zero_sentences(self):
        corpus = parse_column_format(b"\n\n", "negation")
        assert corpus.sentences == ()
        assert corpus_stats(corpus)["sentence_count"] == 0

    def test_two_sentences_split_on_blank_line(self):
        data = b"a\t_\t_\n\nb\tb\tb\n"
        corpus = parse_column_format(data, "negation")
        assert len(corpus.sentences) == 2
        assert corpus.sentences[0].cues == ()
        assert corpus.sentences[1].cues[0].word_indices == (0,)

    def test_ragged_rows_name_line(self):
        data = b"a\t_\t_\nb\t_\n"
        with pytest.raises(ColumnFormatError) as err:
            parse_column_format(data, "negation")
        assert err.value.line == 2

    def test_affixal_cue_recorded_full_word(self):
        data = b"it\t_\t_\nis\t_\t_\nimpossible\tim\tpossible\n"
        s = parse_column_format(data, "negation").sentences[0]
        cue = s.cues[0]
        assert cue.word_indices == (2,)
        assert cue.note is not None and "im" in cue.note

    def test_multiple_groups(self):
        data = b"not\tnot\t_\t_\t_\nonly\t_\tonly\tnever\t_\nhere\t_\t_\t_\there\n"
        s = parse_column_format(data, "negation").sentences[0]
        assert len(s.cues) == 2
        assert s.cues[0].word_indices == (0,)
        assert s.cues[1].word_indices == (1,)
        assert {sc.cue_id: sc.word_indices for sc in s.scopes}[s.cues[1].id] == frozenset({2})

    def test_sem2012_dialect(self):
        lines = [
            "wisteria\t1\t0\tI\tI\tPRP\t(S(NP*)\t_\t_\t_",
            "wisteria\t1\t1\tnever\tnever\tRB\t*\tnever\t_\t_",
            "wisteria\t1\t2\tleft\tleave\tVBD\t(VP*\t_\tleft\t_",
        ]
        data = ("\n".join(lines) + "\n\n").encode()
        corpus = parse_column_format(data, "negation", dialect="sem2012", name="Sherlock")
        s = corpus.sentences[0]
        assert s.sentence_id == "wisteria-1"
        assert s.words == ("I", "never", "left")
        assert s.cues[0].word_indices == (1,)
        assert s.scopes[0].word_indices == frozenset({2})

    def test_sem2012_no_annotation_marker(self):
        lines = ["w\t2\t0\tFine\tfine\tJJ\t*\t***", "w\t2\t1\t.\t.\t.\t*\t***"]
        data = ("\n".join(lines) + "\n").encode()
        s = parse_column_format(data, "negation", dialect="sem2012").sentences[0]
        assert s.cues == ()


class TestStats:
    def test_counts_match_bruteforce(self, rng):
        for trial in range(5):
            corpus = random_corpus(rng, n_sentences=int(rng.integers(1, 30)), name=f"r{trial}")
            stats = corpus_stats(corpus)
            assert stats["sentence_count"] == len(corpus.sentences)
            cues = [c for s in corpus.sentences for c in s.cues]
            assert stats["cue_count"] == len(cues)
            assert stats["multiword_cue_count"] == sum(len(c.word_indices) > 1 for c in cues)
            assert stats["scope_count"] == sum(len(s.scopes) for s in corpus.sentences)
            hist = {}
            for s in corpus.sentences:
                hist[len(s.cues)] = hist.get(len(s.cues), 0) + 1
            assert stats["cues_per_sentence"] == hist

    def test_empty_corpus(self):
        stats = corpus_stats(Corpus(name="e", cue_kind="speculation", sentences=()))
        assert stats["sentence_count"] == 0
        assert stats["cue_count"] == 0
        assert stats["cues_per_sentence"] == {}


class TestCanonical:
    def test_round_trip_random_corpora(self, rng):
        for trial in range(10):
            corpus = random_corpus(rng, n_sentences=int(rng.integers(0, 25)), name=f"t{trial}")
            assert read_canonical(write_canonical(corpus)) == corpus

    def test_round_trip_through_sink(self, rng):
        corpus = random_corpus(rng, 5)
        sink = io.BytesIO()
        data = write_canonical(corpus, sink)
        assert sink.getvalue() == data

    def test_discontinuous_scope_preserved(self):
        from scopeworks.corpus import AnnotatedSentence
        s = AnnotatedSentence(
            sentence_id="s0",
            words=("a", "b", "c", "d", "e"),
            cues=(CueAnnotation(id="c0", kind="negation", word_indices=(1,)),),
            scopes=(ScopeAnnotation(cue_id="c0", word_indices=frozenset({0, 2, 4})),),
        )
        corpus = Corpus(name="d", cue_kind="negation", sentences=(s,))
        back = read_canonical(write_canonical(corpus))
        assert back.sentences[0].scopes[0].word_indices == frozenset({0, 2, 4})

    def test_out_of_range_index_rejected(self, rng):
        corpus = random_corpus(rng, 3)
        lines = write_canonical(corpus).decode().splitlines()
        obj = json.loads(lines[1])
        obj["cues"] = [{"id": "bad", "kind": "speculation", "word_indices": [99]}]
        lines[1] = json.dumps(obj)
        with pytest.raises(CorpusStructureError):
            read_canonical("\n".join(lines).encode())

    def test_version_mismatch(self, rng):
        corpus = random_corpus(rng, 2)
        lines = write_canonical(corpus).decode().splitlines()
        header = json.loads(lines[0])
        header["version"] = 99
        lines[0] = json.dumps(header)
        with pytest.raises(SchemaVersionError):
            read_canonical("\n".join(lines).encode())

    def test_scope_referencing_unknown_cue_rejected(self):
        from scopeworks.corpus import AnnotatedSentence, validate_sentence
        s = AnnotatedSentence(
            sentence_id="s0", words=("a",),
            scopes=(ScopeAnnotation(cue_id="nope", word_indices=frozenset({0})),),
        )
        with pytest.raises(CorpusStructureError, match="nope"):
            validate_sentence(s)


class TestSegmentation:
    def test_punctuation_isolated(self):
        assert segment_words("(It might) rain, tomorrow...") == [
            "(", "It", "might", ")", "rain", ",", "tomorrow", ".", ".", ".",
        ]

    def test_interior_punctuation_kept(self):
        assert segment_words("don't over-react") == ["don't", "over-react"]

    def test_join_and_resplit_is_stable(self, rng):
        texts = [
            "It might rain tomorrow.",
            "No , thanks (really) !",
            "pH 7.4-dependent effect's scope",
        ]
        for text in texts:
            words = segment_words(text)
            assert segment_words(" ".join(words)) == words
