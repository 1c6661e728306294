import pytest

from scopeworks.corpus import AnnotatedSentence, CueAnnotation, ScopeAnnotation
from scopeworks.encoding import (
    MARKER_MULTI,
    MARKER_SINGLE,
    decode_cue_predictions,
    encode_cue_task,
    encode_scope_task,
    read_instances,
    strip_markers,
    write_instances,
)
from scopeworks.errors import EncodingError, InputError

from conftest import random_sentence


def make_sentence(words, cues=(), scopes=()):
    return AnnotatedSentence(
        sentence_id="s0", words=tuple(words), cues=tuple(cues), scopes=tuple(scopes)
    )


class TestCueEncoding:
    def test_running_example(self, example_sentence):
        inst = encode_cue_task(example_sentence)
        assert inst.labels == (3, 1, 3, 3)
        assert inst.words == example_sentence.words

    def test_no_cues_all_three(self):
        inst = encode_cue_task(make_sentence(["a", "b", "c"]))
        assert inst.labels == (3, 3, 3)

    def test_multiword_cue(self):
        s = make_sentence(
            "v w x y z".split(),
            cues=[CueAnnotation(id="c", kind="speculation", word_indices=(1, 2))],
        )
        assert encode_cue_task(s).labels == (3, 2, 2, 3, 3)

    def test_overlapping_cues_error_names_both(self):
        s = make_sentence(
            "a b c".split(),
            cues=[
                CueAnnotation(id="c1", kind="speculation", word_indices=(0, 1)),
                CueAnnotation(id="c2", kind="speculation", word_indices=(1,)),
            ],
        )
        with pytest.raises(EncodingError) as err:
            encode_cue_task(s)
        assert "c1" in str(err.value) and "c2" in str(err.value)


class TestScopeEncoding:
    def test_running_example(self, example_sentence):
        (inst,) = encode_scope_task(example_sentence)
        assert inst.words == ("It", MARKER_SINGLE, "might", "rain", "tomorrow")
        assert inst.labels == (0, 0, 0, 1, 1)
        assert inst.marker_positions == (1,)

    def test_marker_strip_recovers_sentence(self, example_sentence):
        (inst,) = encode_scope_task(example_sentence)
        assert strip_markers(inst, inst.words) == example_sentence.words
        assert strip_markers(inst, inst.labels) == (0, 0, 1, 1)

    def test_scope_to_sentence_end(self):
        s = make_sentence(
            "w x y z".split(),
            cues=[CueAnnotation(id="c", kind="speculation", word_indices=(0,))],
            scopes=[ScopeAnnotation(cue_id="c", word_indices=frozenset({1, 2, 3}))],
        )
        (inst,) = encode_scope_task(s)
        assert inst.labels == (0, 0, 1, 1, 1)

    def test_multiword_cue_gets_one_multi_marker(self):
        s = make_sentence(
            "a b c d".split(),
            cues=[CueAnnotation(id="c", kind="speculation", word_indices=(1, 2))],
            scopes=[ScopeAnnotation(cue_id="c", word_indices=frozenset({3}))],
        )
        (inst,) = encode_scope_task(s)
        assert inst.words == ("a", MARKER_MULTI, "b", "c", "d")
        assert inst.marker_positions == (1,)
        assert inst.labels == (0, 0, 0, 0, 1)

    def test_marker_inherits_cue_word_label(self):
        # gold marks the cue word itself in scope: the marker copies that
        s = make_sentence(
            "a b c".split(),
            cues=[CueAnnotation(id="c", kind="speculation", word_indices=(1,))],
            scopes=[ScopeAnnotation(cue_id="c", word_indices=frozenset({1, 2}))],
        )
        (inst,) = encode_scope_task(s)
        assert inst.labels == (0, 1, 1, 1)

    def test_two_cues_two_instances(self):
        s = make_sentence(
            "a b c d e".split(),
            cues=[
                CueAnnotation(id="c1", kind="speculation", word_indices=(1,)),
                CueAnnotation(id="c2", kind="speculation", word_indices=(3,)),
            ],
            scopes=[
                ScopeAnnotation(cue_id="c1", word_indices=frozenset({2})),
                ScopeAnnotation(cue_id="c2", word_indices=frozenset({4})),
            ],
        )
        instances = encode_scope_task(s)
        assert len(instances) == 2
        for inst in instances:
            assert strip_markers(inst, inst.words) == s.words
        assert instances[0].labels == (0, 0, 0, 1, 0, 0)
        assert instances[1].labels == (0, 0, 0, 0, 0, 1)

    def test_missing_scope_requires_flag(self):
        s = make_sentence(
            "a b".split(),
            cues=[CueAnnotation(id="c", kind="speculation", word_indices=(0,))],
        )
        with pytest.raises(EncodingError, match="allow_empty_scope"):
            encode_scope_task(s)
        (inst,) = encode_scope_task(s, allow_empty_scope=True)
        assert inst.labels == (0, 0, 0)

    def test_instance_count_equals_cue_count(self, rng):
        for i in range(20):
            s = random_sentence(rng, f"s{i}")
            instances = encode_scope_task(s, allow_empty_scope=True)
            assert len(instances) == len(s.cues)


class TestDecode:
    def test_running_example_inverted(self, example_sentence):
        inst = encode_cue_task(example_sentence)
        cues = decode_cue_predictions(inst, [3, 1, 3, 3])
        assert [c.word_indices for c in cues] == [(1,)]

    def test_all_three_empty(self, example_sentence):
        inst = encode_cue_task(example_sentence)
        assert decode_cue_predictions(inst, [3, 3, 3, 3]) == []

    def test_two_multiword_runs(self):
        inst = encode_cue_task(make_sentence("a b c d e".split()))
        cues = decode_cue_predictions(inst, [2, 2, 3, 2, 2])
        assert [c.word_indices for c in cues] == [(0, 1), (3, 4)]

    def test_adjacent_singles_stay_separate(self):
        inst = encode_cue_task(make_sentence("a b c".split()))
        cues = decode_cue_predictions(inst, [1, 1, 3])
        assert [c.word_indices for c in cues] == [(0,), (1,)]

    def test_label_alphabet_enforced(self):
        inst = encode_cue_task(make_sentence("a b".split()))
        with pytest.raises(InputError):
            decode_cue_predictions(inst, [3, 4])

    def test_encode_decode_round_trip(self, rng):
        for i in range(30):
            s = random_sentence(rng, f"s{i}")
            inst = encode_cue_task(s)
            decoded = decode_cue_predictions(inst, inst.labels)
            # adjacent multiword cues would merge into one run, so only
            # compare when gold cue blocks are not adjacent
            gold = sorted(c.word_indices for c in s.cues)
            blocks = sorted(c.word_indices for c in decoded)
            adjacent_multi = any(
                a[-1] + 1 == b[0] and (len(a) > 1 and len(b) > 1)
                for a, b in zip(gold, gold[1:])
            )
            if not adjacent_multi:
                assert blocks == gold


class TestLabelAlphabets:
    def test_alphabets(self, rng):
        for i in range(20):
            s = random_sentence(rng, f"s{i}")
            assert set(encode_cue_task(s).labels) <= {1, 2, 3}
            for inst in encode_scope_task(s, allow_empty_scope=True):
                assert set(inst.labels) <= {0, 1}


class TestInstanceIo:
    def test_round_trip(self, rng):
        instances = []
        for i in range(10):
            s = random_sentence(rng, f"s{i}")
            instances.append(encode_cue_task(s))
            instances.extend(encode_scope_task(s, allow_empty_scope=True))
        back = read_instances(write_instances(instances))
        assert len(back) == len(instances)
        for a, b in zip(instances, back):
            assert a.instance_id == b.instance_id
            assert a.words == b.words
            assert a.labels == b.labels
            assert a.task == b.task
            if a.task == "scope":
                assert a.marker_positions == b.marker_positions

    def test_empty(self):
        assert write_instances([]) == b""
        assert read_instances(b"") == []
