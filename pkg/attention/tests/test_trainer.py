import io
import math

import numpy as np
from django.test import SimpleTestCase

from attention.augment import AdjacencyConfig, build_augmented_dataset
from attention.exceptions import ConfigurationError, DataError, DivergenceError
from attention.reward import LabeledSequence, RewardWeights
from attention.scanpath_synth import SynthConfig, generate_corpus, synthesize_corpus
from attention.tests.factories import fast_train_config, planted_corpus, tiny_model_config
from attention.trainer import (AdamW, MiniLabeler, ModelConfig, PassKind, TrainConfig, TrainingExample, build_examples,
                               encode_batch, gradient_check, load_model, loss_and_gradients, predict, predict_examples,
                               random_batch, save_model, split_dataset, token_accuracy, train_epoch, write_history)

EQUAL = RewardWeights()


def example(snippet_id: str, length: int, seed: int = 0) -> TrainingExample:
    rng = np.random.default_rng(seed)
    pattern = [int(c) or None for c in rng.integers(0, 4, size=length)]
    position = [int(c) - 1 if c else None for c in rng.integers(0, 4, size=length)]
    return TrainingExample(snippet_id, [int(i) for i in rng.integers(1, 8, size=length)], LabeledSequence(pattern, position))


class ConfigTests(SimpleTestCase):
    def test_model_config_validation(self):
        with self.assertRaises(ConfigurationError):
            tiny_model_config(embed_dim=10, attention_heads=4)
        with self.assertRaises(ConfigurationError):
            tiny_model_config(pattern_classes=5)
        self.assertEqual(ModelConfig.from_settings().vocab_size, 8)

    def test_train_config_validation(self):
        for bad in (dict(split_ratio=1.0), dict(reward_every=0), dict(alpha=-1.0)):
            with self.assertRaises(ConfigurationError):
                TrainConfig(**bad)
        config = TrainConfig.from_settings()
        self.assertEqual((config.learning_rate, config.seed, config.reward_every, config.split_ratio), (5e-5, 42, 20, 0.8))


class EncodeBatchTests(SimpleTestCase):
    def test_single_snippet(self):
        batch = encode_batch([example("a", 10)], tiny_model_config())
        self.assertEqual(batch.ids.shape, (1, 10))
        self.assertTrue(batch.mask.all())

    def test_padding(self):
        batch = encode_batch([example("a", 5), example("b", 8)], tiny_model_config())
        self.assertEqual(batch.ids.shape, (2, 8))
        self.assertEqual(int((~batch.mask).sum()), 3)
        self.assertEqual(batch.ids[0, 5:].tolist(), [0, 0, 0])

    def test_truncation_warns(self):
        with self.assertLogs("attention.trainer", "WARNING"):
            batch = encode_batch([example("long", 300)], tiny_model_config(max_seq_len=256))
        self.assertEqual(batch.ids.shape, (1, 256))

    def test_empty_batch(self):
        with self.assertRaises(DataError):
            encode_batch([], tiny_model_config())


class ForwardTests(SimpleTestCase):
    def setUp(self):
        self.model = MiniLabeler(tiny_model_config())
        self.batch = encode_batch([example("a", 5), example("b", 8, seed=1)], self.model.config)

    def test_rows_are_distributions(self):
        pattern, position, _ = self.model.forward(self.batch.ids, self.batch.mask)
        self.assertEqual(pattern.shape, (2, 8, 21))
        self.assertEqual(position.shape, (2, 8, 101))
        np.testing.assert_allclose(pattern.sum(axis=-1), 1.0, atol=1e-6)
        np.testing.assert_allclose(position.sum(axis=-1), 1.0, atol=1e-6)

    def test_zero_heads_give_uniform_rows(self):
        self.model.zero_heads()
        pattern, position, _ = self.model.forward(self.batch.ids, self.batch.mask)
        np.testing.assert_allclose(pattern, 1 / 21)
        np.testing.assert_allclose(position, 1 / 101)

    def test_deterministic(self):
        first = self.model.forward(self.batch.ids, self.batch.mask)[0]
        again = MiniLabeler(tiny_model_config()).forward(self.batch.ids, self.batch.mask)[0]
        np.testing.assert_array_equal(first, again)

    def test_padding_does_not_leak(self):
        alone = encode_batch([example("a", 5)], self.model.config)
        padded = self.model.forward(self.batch.ids, self.batch.mask)[0][0, :5]
        np.testing.assert_allclose(self.model.forward(alone.ids, alone.mask)[0][0], padded, atol=1e-12)

    def test_shape_mismatch(self):
        with self.assertRaises(DataError):
            self.model.forward(self.batch.ids, self.batch.mask[:, :4])


class LossTests(SimpleTestCase):
    def setUp(self):
        self.model = MiniLabeler(tiny_model_config())
        self.batch = encode_batch([example("a", 5), example("b", 8, seed=1)], self.model.config)

    def test_alpha_zero_reward_pass(self):
        breakdown, _ = loss_and_gradients(self.model, self.batch, PassKind.REWARD, 0.0, EQUAL)
        self.assertEqual(breakdown.total, breakdown.ce)
        self.assertIsNotNone(breakdown.reward)

    def test_loss_composition(self):
        breakdown, grads = loss_and_gradients(self.model, self.batch, PassKind.REWARD, 0.7, EQUAL)
        self.assertAlmostEqual(breakdown.total - breakdown.ce - 0.7 * breakdown.reward, 0.0, delta=1e-9)
        self.assertEqual(set(grads), set(self.model.params))
        ce_pass, _ = loss_and_gradients(self.model, self.batch, PassKind.CE, 0.7, EQUAL)
        self.assertIsNone(ce_pass.reward)
        self.assertEqual(ce_pass.total, ce_pass.ce)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(0)
        config = tiny_model_config(embed_dim=8, ffn_dim=16, max_seq_len=8)
        for seed in range(3):
            model = MiniLabeler(tiny_model_config(embed_dim=8, ffn_dim=16, max_seq_len=8, seed=seed))
            batch = random_batch(config, rng)
            for kind in PassKind:
                errors = gradient_check(model, batch, kind, 1.0, EQUAL, rng)
                self.assertLess(max(errors.values()), 1e-4, (kind, errors))

    def test_two_token_batch(self):
        model = MiniLabeler(tiny_model_config())
        batch = encode_batch([TrainingExample("t", [1, 3], LabeledSequence([2, None], [0, 1]))], model.config)
        errors = gradient_check(model, batch, PassKind.REWARD, 1.0, EQUAL, np.random.default_rng(1))
        self.assertLess(max(errors.values()), 1e-4)

    def test_non_finite_loss(self):
        self.model.params["pattern.b"][0] = np.nan
        with self.assertRaises(DivergenceError):
            loss_and_gradients(self.model, self.batch, PassKind.CE, 1.0, EQUAL)


class AdamWTests(SimpleTestCase):
    def test_zero_gradient_without_decay(self):
        params = {"w": np.array([1.0, -2.0])}
        AdamW(0.1, weight_decay=0.0).step(params, {"w": np.zeros(2)})
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])

    def test_single_scalar_step(self):
        params = {"w": np.array([1.0])}
        AdamW(0.1, weight_decay=0.01).step(params, {"w": np.array([0.5])})
        m_hat = (0.1 * 0.5) / (1 - 0.9)
        v_hat = (0.001 * 0.25) / (1 - 0.999)
        expected = 1.0 * (1 - 0.1 * 0.01) - 0.1 * m_hat / (math.sqrt(v_hat) + 1e-8)
        self.assertAlmostEqual(float(params["w"][0]), expected, places=12)

    def test_same_trajectory_twice(self):
        def trajectory():
            params, optimizer = {"w": np.array([0.3, 0.7])}, AdamW(0.05)
            for step in range(5):
                optimizer.step(params, {"w": np.array([step - 2.0, 1.0])})
            return params["w"]
        np.testing.assert_array_equal(trajectory(), trajectory())


class SplitTests(SimpleTestCase):
    def test_eighty_twenty(self):
        train, test = split_dataset(list(range(10)), 0.8, 42)
        self.assertEqual((len(train), len(test)), (8, 2))
        self.assertEqual(split_dataset(list(range(10)), 0.8, 42), (train, test))

    def test_split_draws_from_its_own_stream(self):
        order = np.random.default_rng([42, 4]).permutation(20).tolist()
        self.assertEqual(split_dataset(list(range(20)), 0.8, 42), (order[:16], order[16:]))

    def test_disjoint_and_exhaustive(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = int(rng.integers(2, 40))
            train, test = split_dataset(list(range(n)), float(rng.uniform(0.05, 0.95)), int(rng.integers(1000)))
            self.assertEqual(set(train) | set(test), set(range(n)))
            self.assertFalse(set(train) & set(test))
            self.assertTrue(train and test)

    def test_too_small(self):
        with self.assertRaises(DataError):
            split_dataset(["only"], 0.8, 42)


class TrainEpochTests(SimpleTestCase):
    def train(self, count, **overrides):
        model = MiniLabeler(tiny_model_config())
        examples = [example(f"e{n:03d}", 6, seed=n) for n in range(count)]
        return model, train_epoch(model, examples, fast_train_config(**overrides))

    def test_reward_cadence(self):
        _, history = self.train(100, reward_every=20)
        self.assertEqual(history.ce_batch_count, 100)
        self.assertEqual(history.reward_pass_count, 5)
        self.assertEqual([p.batch_index for p in history.passes if p.kind is PassKind.REWARD], [20, 40, 60, 80, 100])

    def test_below_threshold(self):
        _, history = self.train(19, reward_every=20)
        self.assertEqual(history.reward_pass_count, 0)

    def test_reward_pass_records_compose(self):
        _, history = self.train(12, reward_every=3, alpha=0.4)
        for record in history.passes:
            if record.kind is PassKind.REWARD:
                self.assertAlmostEqual(record.total - record.ce - 0.4 * record.reward, 0.0, delta=1e-9)

    def test_alpha_zero_matches_ce_only(self):
        with_reward, _ = self.train(30, reward_every=5, alpha=0.0)
        ce_only, history = self.train(30, reward_every=5, alpha=0.0, reward_enabled=False)
        self.assertEqual(history.reward_pass_count, 0)
        for name in with_reward.params:
            np.testing.assert_array_equal(with_reward.params[name], ce_only.params[name])

    def test_deterministic_history(self):
        first = self.train(10, reward_every=4)[1]
        second = self.train(10, reward_every=4)[1]
        self.assertEqual(first.passes, second.passes)

    def test_checkpoints(self):
        model = MiniLabeler(tiny_model_config())
        examples = [example(f"e{n}", 4, seed=n) for n in range(10)]
        history = train_epoch(model, examples, fast_train_config(progress_checkpoints=(0.5, 1.0)),
                              evaluate=lambda m: token_accuracy(m, examples))
        self.assertEqual([ratio for ratio, _ in history.checkpoints], [0.5, 1.0])

    def test_empty_train_set(self):
        with self.assertRaises(DataError):
            train_epoch(MiniLabeler(tiny_model_config()), [], fast_train_config())

    def test_history_csv(self):
        _, history = self.train(4, reward_every=2)
        out = io.StringIO()
        write_history(history, out)
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0], "pass_index,kind,L_CE,R,L_total")
        self.assertEqual(len(lines), 1 + 6)
        self.assertEqual(lines[1].split(",")[1:4:2], ["CE", ""])
        self.assertEqual(lines[3].split(",")[1], "reward")


class PredictTests(SimpleTestCase):
    def test_uniform_model_predicts_none(self):
        corpus, _ = planted_corpus(1)
        model = MiniLabeler(tiny_model_config())
        model.zero_heads()
        labels = predict(model, corpus["rep-00"])
        self.assertEqual(len(labels), 20)
        self.assertEqual(set(labels.pattern_labels) | set(labels.reading_indices), {None})

    def test_overfits_five_generated_snippets(self):
        corpus = generate_corpus(5, seed=42)
        dataset = build_augmented_dataset(corpus, synthesize_corpus(corpus, SynthConfig(seed=42)), AdjacencyConfig(3))
        examples = build_examples(corpus, dataset)
        self.assertEqual(len(examples), 5)
        model = MiniLabeler(tiny_model_config())
        history = train_epoch(model, examples, fast_train_config(learning_rate=1e-3, batch_size=1, epochs=300))
        self.assertEqual(history.ce_batch_count, 1500)
        pattern_acc, position_acc = token_accuracy(model, examples)
        self.assertGreaterEqual(pattern_acc, 0.99)
        self.assertGreaterEqual(position_acc, 0.99)

    def test_memorises_one_snippet_exactly(self):
        corpus, paths = planted_corpus(1)
        examples = build_examples(corpus, build_augmented_dataset(corpus, paths, AdjacencyConfig(3)))
        model = MiniLabeler(tiny_model_config())
        train_epoch(model, examples, fast_train_config(epochs=400))
        self.assertEqual(predict_examples(model, examples)["rep-00"], examples[0].gold)


class PersistenceTests(SimpleTestCase):
    def test_round_trip_is_exact_and_stable(self):
        model = MiniLabeler(tiny_model_config(seed=3))
        first, second = io.BytesIO(), io.BytesIO()
        save_model(model, first)
        save_model(model, second)
        self.assertEqual(first.getvalue(), second.getvalue())
        self.assertTrue(first.getvalue().startswith(b"GZAT"))

        loaded = load_model(io.BytesIO(first.getvalue()))
        self.assertEqual(loaded.config, model.config)
        for name, value in model.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)

    def test_bad_magic(self):
        with self.assertRaises(DataError):
            load_model(io.BytesIO(b"NOPE" + b"\0" * 16))

    def test_truncated_or_garbled_file(self):
        buffer = io.BytesIO()
        save_model(MiniLabeler(tiny_model_config()), buffer)
        blob = buffer.getvalue()
        header_end = 12 + int.from_bytes(blob[8:12], "little")
        for damaged in (blob[:len(blob) // 2], blob[:header_end - 5], blob[:header_end] + b"\0" * 64):
            with self.assertRaises(DataError):
                load_model(io.BytesIO(damaged))
