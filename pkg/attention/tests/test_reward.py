import io

import numpy as np
from django.test import SimpleTestCase

from attention.augment import AugmentedToken, Origin
from attention.exceptions import ConfigurationError, DataError
from attention.reward import (PATTERN_CLASSES, POSITION_CLASSES, LabeledSequence, RewardWeights, batch_soft_reward,
                              gold_sequence, hard_reward, read_label_file, score_label_files, soft_reward, write_label_file)

EQUAL = RewardWeights(0.5, 0.5)
GOLD = LabeledSequence([1, None, 3], [0, 1, None])


def one_hot(sequence: LabeledSequence):
    return np.eye(PATTERN_CLASSES)[sequence.pattern_classes()], np.eye(POSITION_CLASSES)[sequence.position_classes()]


class RewardWeightsTests(SimpleTestCase):
    def test_must_sum_to_one(self):
        with self.assertRaises(ConfigurationError):
            RewardWeights(0.7, 0.7)
        with self.assertRaises(ConfigurationError):
            RewardWeights(-0.5, 1.5)
        self.assertEqual(RewardWeights.from_settings(), EQUAL)


class HardRewardTests(SimpleTestCase):
    def test_perfect(self):
        self.assertEqual(hard_reward(GOLD, GOLD, EQUAL).value, 0.0)

    def test_all_wrong(self):
        score = hard_reward(LabeledSequence([2, 2, 2], [5, 5, 5]), GOLD, EQUAL)
        self.assertEqual((score.value, score.pattern_acc, score.position_acc), (1.0, 0.0, 0.0))

    def test_convex_combination(self):
        score = hard_reward(LabeledSequence([1, None, 3], [5, 5, None]), GOLD, EQUAL)
        self.assertEqual((score.pattern_acc, score.position_acc), (1.0, 0.0))
        self.assertAlmostEqual(score.value, 0.5)

    def test_none_predictions_on_unlabelled_gold_are_ignored(self):
        score = hard_reward(LabeledSequence([1, 7, 3], [0, 1, 42]), GOLD, EQUAL)
        self.assertEqual(score.value, 0.0)

    def test_family_without_gold_is_renormalised_away(self):
        gold = LabeledSequence([1, 2], [None, None])
        score = hard_reward(LabeledSequence([1, 5], [3, 3]), gold, EQUAL)
        self.assertEqual(score.position_acc, 1.0)
        self.assertAlmostEqual(score.value, 0.5)
        self.assertEqual(hard_reward(LabeledSequence([4], [4]), LabeledSequence([None], [None]), EQUAL).value, 0.0)

    def test_length_mismatch(self):
        with self.assertRaises(DataError):
            hard_reward(LabeledSequence([1], [0]), GOLD, EQUAL)


class SoftRewardTests(SimpleTestCase):
    def test_one_hot_correct(self):
        self.assertAlmostEqual(soft_reward(*one_hot(GOLD), GOLD, EQUAL), 0.0, places=12)

    def test_uniform(self):
        uniform_p = np.full((3, PATTERN_CLASSES), 1 / PATTERN_CLASSES)
        uniform_r = np.full((3, POSITION_CLASSES), 1 / POSITION_CLASSES)
        self.assertAlmostEqual(soft_reward(uniform_p, uniform_r, GOLD, EQUAL), 1 - 0.5 / 21 - 0.5 / 101, places=12)

    def test_one_hot_wrong(self):
        self.assertAlmostEqual(soft_reward(*one_hot(LabeledSequence([2, 2, 2], [5, 5, 5])), GOLD, EQUAL), 1.0, places=12)

    def test_malformed_rows(self):
        probs_p, probs_r = one_hot(GOLD)
        with self.assertRaises(DataError):
            soft_reward(probs_p * 0.9, probs_r, GOLD, EQUAL)
        with self.assertRaises(DataError):
            soft_reward(probs_p[:2], probs_r, GOLD, EQUAL)

    def test_agrees_with_hard_reward_on_one_hot(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            gold = LabeledSequence.from_classes(rng.integers(0, 4, size=n), rng.integers(0, 4, size=n))
            pred = LabeledSequence.from_classes(rng.integers(0, 4, size=n), rng.integers(0, 4, size=n))
            share = float(rng.uniform())
            weights = RewardWeights(share, 1.0 - share)
            self.assertAlmostEqual(soft_reward(*one_hot(pred), gold, weights), hard_reward(pred, gold, weights).value, delta=1e-9)

    def test_more_gold_mass_never_increases_reward(self):
        rng = np.random.default_rng(1)
        probs_p = rng.dirichlet(np.ones(PATTERN_CLASSES), size=3)
        probs_r = rng.dirichlet(np.ones(POSITION_CLASSES), size=3)
        before = soft_reward(probs_p, probs_r, GOLD, EQUAL)
        boosted = probs_p.copy()
        boosted[0] *= 0.5
        boosted[0, 1] += 1 - boosted[0].sum()
        self.assertLessEqual(soft_reward(boosted, probs_r, GOLD, EQUAL), before)

    def test_batch_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        probs_p = rng.dirichlet(np.ones(PATTERN_CLASSES), size=(2, 4))
        probs_r = rng.dirichlet(np.ones(POSITION_CLASSES), size=(2, 4))
        gold_p = np.array([[1, 0, 2, 0], [3, 3, 0, 0]])
        gold_r = np.array([[1, 2, 0, 3], [0, 1, 0, 0]])
        mask = np.array([[True] * 4, [True, True, False, False]])
        value, grad_p, _ = batch_soft_reward(probs_p, probs_r, gold_p, gold_r, mask, EQUAL)
        self.assertTrue(0.0 <= value <= 1.0)
        # the surrogate is linear in the probabilities, so one coordinate's slope is exact
        shifted = probs_p.copy()
        shifted[0, 2, 2] += 1e-3
        shifted[0, 2, 0] -= 1e-3
        moved, _, _ = batch_soft_reward(shifted, probs_r, gold_p, gold_r, mask, EQUAL)
        self.assertAlmostEqual((moved - value) / 1e-3, grad_p[0, 2, 2] - grad_p[0, 2, 0], places=9)
        self.assertEqual(grad_p[1, 2].tolist(), [0.0] * PATTERN_CLASSES)


class LabelFileTests(SimpleTestCase):
    def test_gold_sequence_pads_unlabelled_tokens(self):
        tokens = [AugmentedToken(1, Origin.FIXATED, None, 4, 0), AugmentedToken(3, Origin.EXPANDED, 1, None, 0)]
        self.assertEqual(gold_sequence(4, tokens), LabeledSequence([None, 4, None, None], [None, 0, None, 0]))

    def test_round_trip_and_score(self):
        out = io.StringIO()
        write_label_file({"b": GOLD, "a": LabeledSequence([None], [0])}, out)
        self.assertTrue(out.getvalue().startswith('{"snippet_id":"a"'))
        loaded = read_label_file(io.StringIO(out.getvalue()))
        self.assertEqual(loaded["b"], GOLD)
        self.assertEqual(score_label_files(loaded, loaded, EQUAL).value, 0.0)

    def test_mismatched_files(self):
        with self.assertRaises(DataError):
            score_label_files({"a": GOLD}, {"b": GOLD}, EQUAL)
        with self.assertRaises(DataError):
            read_label_file(io.StringIO("not json\n"))
        with self.assertRaises(DataError):
            read_label_file(io.TextIOWrapper(io.BytesIO(b'{"snippet_id": "\xff"}\n'), encoding="utf-8"))
