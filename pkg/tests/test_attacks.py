"""Edit attacks: counts, determinism, and score-preservation accounting."""

import math

import numpy as np
import pytest

from watermax.attacks import (
    AttackSpec,
    attack,
    attack_batch,
    edit_rate_for_preservation,
    effective_alpha,
    expected_preservation,
)
from watermax.detectors import detect_robust
from watermax.embedder import EmbedParams, embed
from watermax.generator import random_model

KEY = b"attacks-test-key-0123456789abcdef"

SUB_ONLY = (1.0, 0.0, 0.0)
INS_ONLY = (0.0, 1.0, 0.0)
DEL_ONLY = (0.0, 0.0, 1.0)


class TestSpec:
    def test_validation(self):
        AttackSpec(0.5, 64)
        with pytest.raises(ValueError):
            AttackSpec(-0.1, 64)
        with pytest.raises(ValueError):
            AttackSpec(1.1, 64)
        with pytest.raises(ValueError):
            AttackSpec(0.5, 64, mix=(0.5, 0.5))
        with pytest.raises(ValueError):
            AttackSpec(0.5, 64, mix=(0.8, 0.3, -0.1))
        with pytest.raises(ValueError):
            AttackSpec(0.5, 64, mix=(0.5, 0.4, 0.2))
        with pytest.raises(ValueError):
            AttackSpec(0.5, 1)  # substitution needs an alternative token
        AttackSpec(0.5, 1, mix=INS_ONLY)

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            attack([], AttackSpec(0.5, 8))


class TestEdits:
    def test_alpha_one_is_identity(self, rng):
        text = rng.integers(0, 64, 100).astype(np.int32)
        out = attack(text, AttackSpec(1.0, 64, rng_seed=3))
        assert np.array_equal(out, text)

    def test_alpha_zero_substitutes_everything(self, rng):
        text = rng.integers(0, 64, 100).astype(np.int32)
        out = attack(text, AttackSpec(0.0, 64, mix=SUB_ONLY, rng_seed=3))
        assert out.shape == text.shape
        assert (out != text).all()

    def test_substitution_count_and_length(self, rng):
        text = rng.integers(0, 64, 200).astype(np.int32)
        for alpha in (0.9, 0.75, 0.5, 0.31):
            out = attack(text, AttackSpec(alpha, 64, mix=SUB_ONLY, rng_seed=1))
            assert out.shape == text.shape
            want = int(math.floor((1 - alpha) * 200 + 0.5))
            assert int((out != text).sum()) == want

    def test_insert_and_delete_lengths(self, rng):
        text = rng.integers(0, 64, 100).astype(np.int32)
        ins = attack(text, AttackSpec(0.5, 64, mix=INS_ONLY, rng_seed=2))
        assert ins.size == 150
        cut = attack(text, AttackSpec(0.5, 64, mix=DEL_ONLY, rng_seed=2))
        assert cut.size == 50

    def test_delete_preserves_subsequence(self, rng):
        text = rng.integers(0, 64, 80).astype(np.int32)
        cut = attack(text, AttackSpec(0.7, 64, mix=DEL_ONLY, rng_seed=9))
        it = iter(text.tolist())
        assert all(any(t == kept for t in it) for kept in cut.tolist())

    def test_tokens_stay_in_vocab(self, rng):
        text = rng.integers(0, 8, 300).astype(np.int32)
        spec = AttackSpec(0.3, 8, mix=(0.4, 0.3, 0.3), rng_seed=5)
        out = attack(text, spec)
        assert out.min() >= 0 and out.max() < 8

    def test_substitute_draws_are_uniform_over_others(self, rng):
        # replacing token 3 in vocab 4: the three alternatives should be
        # roughly equally likely
        text = np.full(3000, 3, dtype=np.int32)
        out = attack(text, AttackSpec(0.0, 4, mix=SUB_ONLY, rng_seed=11))
        counts = np.bincount(out, minlength=4)
        assert counts[3] == 0
        assert counts[:3].min() > 800

    def test_deterministic_and_batch_consistent(self, rng):
        texts = [rng.integers(0, 32, 60).astype(np.int32) for _ in range(4)]
        spec = AttackSpec(0.6, 32, mix=(0.5, 0.25, 0.25), rng_seed=7)
        again = AttackSpec(0.6, 32, mix=(0.5, 0.25, 0.25), rng_seed=7)
        batch = attack_batch(texts, spec)
        for i, t in enumerate(texts):
            assert np.array_equal(batch[i], attack(t, again, index=i))
        assert not np.array_equal(attack(texts[0], spec, index=0),
                                  attack(texts[0], spec, index=1))


class TestEffectiveAlpha:
    def test_identity_preserves_all(self, rng):
        text = rng.integers(0, 64, 128).astype(np.int32)
        assert effective_alpha(text, text, KEY, window=4) == 1.0

    def test_empty_attacked_is_zero(self, rng):
        text = rng.integers(0, 64, 128).astype(np.int32)
        assert effective_alpha(text, [1, 2], KEY, window=4) == 0.0

    def test_window_amplification_matches_model(self, rng):
        # substituting at rate rho kills every window touching an edit:
        # survival should track (1 - rho)^h
        rho = edit_rate_for_preservation(0.75, window=4)
        vals = []
        for i in range(20):
            text = rng.integers(0, 4096, 256).astype(np.int32)
            spec = AttackSpec(1 - rho, 4096, mix=SUB_ONLY, rng_seed=100 + i)
            vals.append(effective_alpha(text, attack(text, spec), KEY,
                                        window=4))
        assert abs(np.mean(vals) - 0.75) < 0.03

    def test_single_insertion_leaves_scores_intact(self, rng):
        text = rng.integers(0, 4096, 256).astype(np.int32)
        bumped = np.insert(text, 0, 7)
        assert effective_alpha(text, bumped, KEY, window=4) > 0.97

    def test_rate_mapping_round_trip(self):
        for target in (1.0, 0.75, 0.5, 0.25, 0.0):
            rho = edit_rate_for_preservation(target, window=6)
            assert expected_preservation(rho, window=6) == pytest.approx(
                target, abs=1e-12)
        with pytest.raises(ValueError):
            edit_rate_for_preservation(1.5)
        with pytest.raises(ValueError):
            expected_preservation(-0.2)


class TestDetectionUnderAttack:
    def test_mild_attack_keeps_power_total_kills_it(self, rng):
        m = random_model(64, 0, 6.0, rng)
        params = EmbedParams(chunks=8, drafts=8, chunk_len=16, window=4)
        mild = AttackSpec(0.98, 64, mix=SUB_ONLY, rng_seed=42)
        dead = AttackSpec(0.0, 64, mix=SUB_ONLY, rng_seed=42)
        mild_hits = dead_hits = 0
        for seed in range(60):
            text, _ = embed(m, (), params, KEY, seed)
            mild_hits += detect_robust(attack(text, mild, seed), KEY,
                                       window=4, pfa=1e-2).decision
            dead_hits += detect_robust(attack(text, dead, seed), KEY,
                                       window=4, pfa=1e-2).decision
        assert mild_hits >= 50
        assert dead_hits <= 5
