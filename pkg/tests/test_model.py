import math

import numpy as np
import pytest

from scopeworks.encoding import encode_cue_task
from scopeworks.errors import ConfigError, InputError, ReplayLookupError, SchemaError
from scopeworks.model import (
    ClassifierConfig,
    ReplayBackend,
    TokenClassifier,
    TrainConfig,
    ce_loss_and_dlogits,
    default_class_weights,
    labels_to_indices,
    load_checkpoint,
    save_checkpoint,
    train,
    weighted_ce_loss,
    write_probability_file,
)
from scopeworks.synthetic import make_rule_corpus
from scopeworks.tokenization import ProbTable, WordPieceTokenizer, tokenize_instance


def mini_config(**overrides):
    base = dict(
        vocab_size=11, num_classes=2, class_order=(0, 1), max_len=6,
        n_hidden=4, encoder_layers=1, attention_heads=2, ffn_width=8, dropout=0.0,
    )
    base.update(overrides)
    return ClassifierConfig(**base)


def random_batch(rng, config, batch=2):
    ids = rng.integers(0, config.vocab_size, size=(batch, config.max_len))
    mask = np.ones((batch, config.max_len), dtype=bool)
    for b in range(batch):
        mask[b, int(rng.integers(2, config.max_len)):] = False
    labels = rng.integers(0, config.num_classes, size=(batch, config.max_len))
    return ids, mask, labels


class TestForward:
    def test_zero_head_gives_uniform_rows(self, rng):
        config = mini_config(num_classes=4, class_order=(1, 2, 3, 4))
        model = TokenClassifier(config, seed=5)
        model.head.W[...] = 0.0
        model.head.b[...] = 0.0
        ids, mask, _ = random_batch(rng, config)
        table = model.forward(ids[0], mask[0])
        np.testing.assert_allclose(table.probs, 0.25, atol=0)

    def test_fixed_seed_is_bitwise_deterministic(self, rng):
        config = mini_config()
        ids, mask, _ = random_batch(rng, config)
        a = TokenClassifier(config, seed=9).forward(ids[0], mask[0]).probs
        b = TokenClassifier(config, seed=9).forward(ids[0], mask[0]).probs
        assert a.tobytes() == b.tobytes()

    def test_head_matches_manual_arithmetic(self, rng):
        # n_hidden=2, 2 classes: recompute Y = W*X + b and the softmax by hand
        config = mini_config(n_hidden=2, attention_heads=1, ffn_width=4)
        model = TokenClassifier(config, seed=3)
        ids, mask, _ = random_batch(rng, config, batch=1)
        x = model.encode(ids, mask)
        manual_logits = x @ model.head.W + model.head.b
        shifted = manual_logits - manual_logits.max(axis=-1, keepdims=True)
        manual_probs = np.exp(shifted) / np.exp(shifted).sum(axis=-1, keepdims=True)
        got = model.forward_batch(ids, mask)
        np.testing.assert_allclose(got, manual_probs, atol=1e-15)

    def test_rows_are_distributions(self, rng):
        config = mini_config(num_classes=4, class_order=(1, 2, 3, 4))
        model = TokenClassifier(config, seed=0)
        ids, mask, _ = random_batch(rng, config, batch=3)
        probs = model.forward_batch(ids, mask)
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-6)
        assert np.all(probs > 0) and np.all(probs < 1)

    def test_out_of_vocab_id_rejected(self, rng):
        config = mini_config()
        model = TokenClassifier(config, seed=0)
        ids = np.full(config.max_len, config.vocab_size, dtype=np.int64)
        with pytest.raises(InputError, match="vocab"):
            model.forward(ids, np.ones(config.max_len, bool))

    def test_pad_content_never_reaches_real_tokens(self, rng):
        config = mini_config()
        model = TokenClassifier(config, seed=4)
        ids, mask, _ = random_batch(rng, config, batch=1)
        n_real = int(mask[0].sum())
        base = model.forward_batch(ids, mask)[0, :n_real]
        ids2 = ids.copy()
        ids2[0, n_real:] = (ids2[0, n_real:] + 1) % config.vocab_size
        again = model.forward_batch(ids2, mask)[0, :n_real]
        np.testing.assert_array_equal(base, again)


class TestLoss:
    def test_perfect_prediction_zero_loss(self):
        table = ProbTable(np.array([[1.0, 0.0]]), (0, 1))
        assert weighted_ce_loss(table, [0], (1.0, 1.0), [True]) == 0.0

    def test_quarter_probability(self):
        table = ProbTable(np.array([[0.25, 0.75]]), (0, 1))
        loss = weighted_ce_loss(table, [0], (1.0, 1.0), [True])
        assert math.isclose(loss, -math.log(0.25), rel_tol=1e-12)

    def test_pad_class_weight_zero_contributes_nothing(self, rng):
        rows = rng.dirichlet([1.0] * 4, size=4)
        table = ProbTable(rows, (1, 2, 3, 4))
        labels = [3, 4, 4, 4]
        weights = default_class_weights("cue")
        full = weighted_ce_loss(table, labels, weights, [True] * 4)
        solo = weighted_ce_loss(
            ProbTable(rows[:1], (1, 2, 3, 4)), [3], weights, [True]
        )
        assert full == solo

    def test_zero_probability_clamped_finite(self):
        table = ProbTable(np.array([[0.0, 1.0]]), (0, 1))
        loss = weighted_ce_loss(table, [0], (1.0, 1.0), [True])
        assert math.isfinite(loss)
        assert math.isclose(loss, -math.log(1e-12), rel_tol=1e-9)

    def test_normalization_independent_of_pad_count(self, rng):
        rows = rng.dirichlet([1.0] * 2, size=2)
        short = ProbTable(rows, (0, 1))
        long_rows = np.vstack([rows, rng.dirichlet([1.0] * 2, size=6)])
        padded = ProbTable(long_rows, (0, 1))
        labels_short = [0, 1]
        labels_long = [0, 1, 0, 0, 0, 0, 0, 0]
        a = weighted_ce_loss(short, labels_short, (1.0, 1.0), [True, True])
        b = weighted_ce_loss(padded, labels_long, (1.0, 1.0), [True, True] + [False] * 6)
        assert a == b

    def test_masked_and_zero_weight_positions_are_skipped_exactly(self, rng):
        rows = rng.dirichlet([1.0] * 4, size=6)
        labels = np.array([1, 2, 4, 3, 4, 1])
        mask = np.array([True, True, True, True, False, False])
        weights = np.array(default_class_weights("cue"))
        idx = labels_to_indices(labels, (1, 2, 3, 4))
        base, dlogits = ce_loss_and_dlogits(rows, idx, weights, mask)
        for _ in range(20):
            noisy = rows.copy()
            noisy[2] = rng.dirichlet([1.0] * 4)   # weight-0 label
            noisy[4] = rng.dirichlet([1.0] * 4)   # masked
            noisy[5] = 0.0                        # even degenerate rows
            loss, _ = ce_loss_and_dlogits(noisy, idx, weights, mask)
            assert loss == base
        assert np.all(dlogits[2] == 0) and np.all(dlogits[4:] == 0)

    def test_all_weights_zero_gives_zero(self):
        table = ProbTable(np.array([[0.5, 0.5]]), (0, 1))
        assert weighted_ce_loss(table, [0], (0.0, 0.0), [True]) == 0.0

    def test_labels_outside_order_rejected(self):
        table = ProbTable(np.array([[0.5, 0.5]]), (0, 1))
        with pytest.raises(InputError):
            weighted_ce_loss(table, [7], (1.0, 1.0), [True])


class TestGradients:
    def test_analytic_matches_finite_differences(self, rng):
        config = mini_config(num_classes=2, class_order=(0, 1), encoder_layers=2)
        model = TokenClassifier(config, seed=12)
        ids, mask, labels = random_batch(rng, config, batch=2)
        weights = np.array([1.0, 0.6])
        idx = labels_to_indices(labels, config.class_order)

        def loss_value():
            return ce_loss_and_dlogits(model.forward_batch(ids, mask), idx, weights, mask)[0]

        probs = model.forward_batch(ids, mask)
        _, dlogits = ce_loss_and_dlogits(probs, idx, weights, mask)
        model.backward_batch(dlogits)
        grads = model.gradients()
        params = model.parameters()

        h = 1e-6
        checked = 0
        for name, arr in params.items():
            flat = arr.reshape(-1)
            for k in rng.choice(flat.size, size=min(3, flat.size), replace=False):
                old = flat[k]
                flat[k] = old + h
                up = loss_value()
                flat[k] = old - h
                down = loss_value()
                flat[k] = old
                fd = (up - down) / (2 * h)
                an = grads[name].reshape(-1)[k]
                scale = max(abs(fd), abs(an))
                if scale >= 1e-6:
                    assert abs(fd - an) / scale <= 1e-4, f"{name}[{k}]"
                else:
                    assert abs(fd - an) <= 1e-9, f"{name}[{k}]"
                checked += 1
        assert checked >= 30


class TestTraining:
    def test_scripted_early_stopping(self):
        instances, config = _tiny_instances()
        metrics = {1: 0.1, 2: 0.2, 3: 0.9}  # peak at epoch 3, flat after

        snapshots = {}

        def fake_metric(model, epoch):
            snapshots[epoch] = model.get_state()
            return metrics.get(epoch, 0.9)

        cfg = TrainConfig(max_epochs=60, early_stop_patience=6, seed=0,
                          learning_rate=1e-3)
        trained = train(config, instances, [], cfg, val_metric_fn=fake_metric)
        assert len(trained.history) == 9          # stops after epoch 9
        assert trained.best_epoch == 3
        for name, arr in trained.model.parameters().items():
            np.testing.assert_array_equal(arr, snapshots[3][name])

    def test_max_epochs_one(self):
        instances, config = _tiny_instances()
        cfg = TrainConfig(max_epochs=1, early_stop_patience=0, seed=0)
        trained = train(config, instances, [], cfg)
        assert len(trained.history) == 1

    def test_empty_train_set_rejected(self):
        with pytest.raises(ConfigError, match="empty"):
            train(mini_config(), [], [], TrainConfig(max_epochs=2, early_stop_patience=1))

    def test_train_val_overlap_rejected(self):
        instances, config = _tiny_instances()
        with pytest.raises(ConfigError, match="share"):
            train(config, instances, instances,
                  TrainConfig(max_epochs=2, early_stop_patience=1))

    def test_fixed_seed_reproduces_parameters(self):
        instances, config = _tiny_instances()
        cfg = TrainConfig(max_epochs=3, early_stop_patience=1, seed=7, learning_rate=1e-3)
        a = train(config, instances, [], cfg)
        b = train(config, instances, [], cfg)
        for name, arr in a.model.parameters().items():
            assert arr.tobytes() == b.model.parameters()[name].tobytes()


def _tiny_instances():
    """Small cue-task instances plus a matching 4-class model config."""
    corpus = make_rule_corpus(8, seed=3, min_len=3, max_len=4)
    tokenizer = WordPieceTokenizer.from_words(
        (w for s in corpus.sentences for w in s.words), max_len=8
    )
    instances = [tokenize_instance(encode_cue_task(s), tokenizer) for s in corpus.sentences]
    config = mini_config(
        vocab_size=tokenizer.vocab_size, max_len=8,
        num_classes=4, class_order=(1, 2, 3, 4),
    )
    return instances, config


class TestCheckpoint:
    def test_round_trip(self, rng, tmp_path):
        config = mini_config()
        model = TokenClassifier(config, seed=2)
        tokenizer = WordPieceTokenizer.from_words(["alpha", "beta"], max_len=config.max_len)
        path = tmp_path / "model.npz"
        save_checkpoint(path, model, tokenizer, extra={"task": "scope"})
        back, tok, meta = load_checkpoint(path)
        ids, mask, _ = random_batch(rng, config)
        np.testing.assert_array_equal(
            model.forward(ids[0], mask[0]).probs, back.forward(ids[0], mask[0]).probs
        )
        assert tok.pieces == tokenizer.pieces
        assert meta["extra"]["task"] == "scope"

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.npz"
        np.savez(path, something=np.zeros(3))
        with pytest.raises(SchemaError):
            load_checkpoint(path)


class TestReplay:
    def _tables(self, rng, n=3, rows=6, order=(0, 1)):
        out = {}
        for i in range(n):
            out[f"inst-{i}"] = ProbTable(rng.dirichlet([1.0] * len(order), size=rows), order)
        return out

    def test_file_round_trip(self, rng, tmp_path):
        tables = self._tables(rng)
        path = tmp_path / "probs.jsonl"
        with open(path, "wb") as fh:
            write_probability_file(tables.items(), fh)
        backend = ReplayBackend.from_file(path)
        for iid, table in tables.items():
            np.testing.assert_allclose(backend.forward_for(iid).probs, table.probs, atol=1e-15)
        assert backend.class_order == (0, 1)

    def test_class_order_mismatch_names_both(self, rng, tmp_path):
        path = tmp_path / "probs.jsonl"
        with open(path, "wb") as fh:
            write_probability_file(self._tables(rng).items(), fh)
        with pytest.raises(SchemaError) as err:
            ReplayBackend.from_file(path, expected_class_order=(1, 2, 3, 4))
        msg = str(err.value)
        assert "[0, 1]" in msg and "[1, 2, 3, 4]" in msg

    def test_missing_instance(self, rng, tmp_path):
        path = tmp_path / "probs.jsonl"
        with open(path, "wb") as fh:
            write_probability_file(self._tables(rng).items(), fh)
        backend = ReplayBackend.from_file(path)
        with pytest.raises(ReplayLookupError, match="ghost"):
            backend.forward_for("ghost")

    def test_row_sum_violation_rejected(self, tmp_path):
        path = tmp_path / "probs.jsonl"
        path.write_text(
            '{"instance_id": "x", "class_order": [0, 1], "probs": [[0.9, 0.9]]}\n'
        )
        with pytest.raises(SchemaError, match="sum"):
            ReplayBackend.from_file(path)

    def test_row_count_enforced(self, rng, tmp_path):
        path = tmp_path / "probs.jsonl"
        with open(path, "wb") as fh:
            write_probability_file(self._tables(rng, rows=6).items(), fh)
        with pytest.raises(SchemaError, match="rows"):
            ReplayBackend.from_file(path, expected_rows=9)
