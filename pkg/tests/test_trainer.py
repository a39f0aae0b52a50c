import io
import math

import numpy as np
import pytest
from corpus_helper import small_sequences, tiny_train_config

from ethseq.errors import CorpusFormatError, DataError, DegenerateLabelsError, DivergenceError
from ethseq.model.model_config import ModelConfig
from ethseq.model.params import ModelParams
from ethseq.negsample.frequency_table import build_frequency_table
from ethseq.negsample.negsample_config import NegSampleConfig, NegStrategy
from ethseq.negsample.sampler import SamplerFactory
from ethseq.seqgen.vocabulary import PAD_ID
from ethseq.trainer.batching import (
    RngStream,
    epoch_masks,
    iter_batches,
    shard_rows,
    stream_rng,
    trainable,
)
from ethseq.trainer.checkpoint import load_checkpoint, save_checkpoint
from ethseq.trainer.classifier_head import DEFAULT_DROPOUT, ClassifierHead, bce_with_logits
from ethseq.trainer.finetune_config import FinetuneConfig
from ethseq.trainer.finetuner import finetune, labeled_accounts, split_accounts, train_head
from ethseq.trainer.optimizer import Adam, clip_by_global_norm, global_norm, warmup_lr
from ethseq.trainer.pretrainer import Pretrainer, pretrain
from ethseq.trainer.train_config import TrainConfig


@pytest.fixture(scope="module")
def sequences():
    return small_sequences()


@pytest.fixture(scope="module")
def checkpoint(sequences):
    return pretrain(sequences, tiny_train_config())


class TestOptimizer:
    @pytest.mark.parametrize(
        ("step", "expected"), [(1, 0.1), (5, 0.5), (10, 1.0), (11, 1.0), (100, 1.0)]
    )
    def test_warmup(self, step, expected):
        assert warmup_lr(step, 100, 1.0, 0.1) == pytest.approx(expected)

    def test_warmup_at_least_one_step(self):
        assert warmup_lr(1, 100, 2.0, 0.0) == pytest.approx(2.0)

    def test_clip(self):
        grads = {"a": np.array([3.0, 0.0]), "b": np.array([[4.0]])}
        assert clip_by_global_norm(grads, 1.0) == pytest.approx(5.0)
        assert global_norm(grads) == pytest.approx(1.0)
        np.testing.assert_allclose(grads["a"], [0.6, 0.0])

    def test_clip_below_limit(self):
        grads = {"a": np.array([0.3, 0.4])}
        clip_by_global_norm(grads, 1.0)
        np.testing.assert_array_equal(grads["a"], [0.3, 0.4])

    def test_adam_first_step(self):
        tensors = {"w": np.array([1.0, 1.0, 1.0]), "e": np.ones((2, 2))}
        adam = Adam(tensors, frozen_rows=[("e", 0)])
        adam.step({"w": np.array([2.0, -0.5, 0.0]), "e": np.ones((2, 2))}, 0.1)
        # the bias-corrected first step moves by lr * sign(g)
        np.testing.assert_allclose(tensors["w"], [0.9, 1.1, 1.0], atol=1e-6)
        assert not tensors["e"][0].any()
        assert adam.steps == 1


class TestBatching:
    def test_streams_are_keyed(self):
        a = stream_rng(1, RngStream.MASK, 4, 0, 2).random(3)
        b = stream_rng(1, RngStream.MASK, 4, 0, 2).random(3)
        c = stream_rng(1, RngStream.POOL, 4, 0, 2).random(3)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_masks_independent_of_order(self, sequences):
        seqs = trainable(sequences.sequences)[:6]
        forward = epoch_masks(seqs, 0.5, 3, 1)
        backward = epoch_masks(seqs[::-1], 0.5, 3, 1)[::-1]
        assert [m.masked_positions for m in forward] == [m.masked_positions for m in backward]

    def test_masks_change_between_epochs(self, sequences):
        seqs = trainable(sequences.sequences)
        first = [m.masked_positions for m in epoch_masks(seqs, 0.5, 3, 0)]
        second = [m.masked_positions for m in epoch_masks(seqs, 0.5, 3, 1)]
        assert first != second

    def test_batches(self, sequences):
        seqs = trainable(sequences.sequences)[:10]
        table = build_frequency_table(sequences.sequences, len(sequences.vocab))
        sampler = SamplerFactory.create(NegStrategy.ZIPFAN, table)
        masked = epoch_masks(seqs, 0.5, 0, 0)

        shared = list(iter_batches(masked, 4, sampler, NegSampleConfig(pool_size=7), 0, 0, 0))
        assert [len(b) for b in shared] == [4, 4, 2]
        assert all(b.shared and b.pool.shape == (7,) for b in shared)

        config = NegSampleConfig(batch_sharing=False, per_sequence_pool_size=3)
        separate = list(iter_batches(masked, 4, sampler, config, 0, 0, 0))
        assert separate[0].pool.shape == (4, 3)
        assert separate[0].shard([1, 2]).pool.shape == (2, 3)

    def test_shard_rows(self):
        assert shard_rows(5, 2) == [[0, 1], [2, 3], [4]]


class TestPretrainer:
    def test_thread_count_does_not_change_weights(self, sequences):
        single = pretrain(sequences, tiny_train_config(threads=1))
        threaded = pretrain(sequences, tiny_train_config(threads=4))
        assert single.equals(threaded)

    def test_seed_changes_weights(self, sequences, checkpoint):
        other = pretrain(sequences, tiny_train_config(seed=1))
        assert not other.params.equals(checkpoint.params)

    def test_checkpoint_contents(self, sequences, checkpoint):
        assert checkpoint.epoch == 1
        assert len(checkpoint.loss_history) == 1
        assert math.isfinite(checkpoint.loss_history[0])
        assert checkpoint.vocab_hash == sequences.vocab.content_hash()
        assert not checkpoint.params["emb.address"][PAD_ID].any()

    def test_metrics(self, sequences):
        stream = io.StringIO()
        trainer = Pretrainer(sequences, tiny_train_config())
        trainer.train(stream)
        rows = stream.getvalue().strip().splitlines()
        assert rows[0] == "step,loss,lr"
        assert len(rows) == trainer.total_steps + 1

    def test_per_sequence_pools(self, sequences):
        neg = NegSampleConfig(batch_sharing=False, per_sequence_pool_size=4)
        result = pretrain(sequences, tiny_train_config(negsample_config=neg))
        assert math.isfinite(result.loss_history[0])

    def test_inout_and_gate(self, sequences):
        model = ModelConfig(
            hidden=8,
            layers=1,
            heads=2,
            max_seq_len=8,
            dropout=0.1,
            in_out_separation=True,
            erc20_gate=True,
        )
        result = pretrain(sequences, tiny_train_config(model_config=model))
        assert "in.0.wq" in result.params.tensors
        assert math.isfinite(result.loss_history[0])

    def test_divergence(self, sequences):
        config = tiny_train_config()
        params = ModelParams.initialize(
            config.model_config, len(sequences.vocab), np.random.default_rng(0)
        )
        params.tensors["emb.position"][:] = np.nan
        with pytest.raises(DivergenceError) as info:
            Pretrainer(sequences, config, params=params).train()
        assert info.value.checkpoint is not None
        assert info.value.exit_code == 3

    @pytest.mark.slow
    def test_loss_decreases(self, sequences):
        config = tiny_train_config(epochs=8, learning_rate=5e-3)
        history = pretrain(sequences, config).loss_history
        assert history[-1] < history[0]


class TestCheckpointFile:
    def test_round_trip(self, tmp_path, checkpoint):
        path = tmp_path / "checkpoint.bin"
        save_checkpoint(path, checkpoint)
        loaded = load_checkpoint(path)
        assert loaded.equals(checkpoint)
        assert loaded.config.model_config.hidden == 8

    def test_truncated(self, tmp_path, checkpoint):
        path = tmp_path / "checkpoint.bin"
        save_checkpoint(path, checkpoint)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(CorpusFormatError):
            load_checkpoint(path)

    def test_missing(self, tmp_path):
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / "none.bin")


class TestTrainConfig:
    def test_nested_from_dict(self):
        config = TrainConfig.from_dict(
            {
                "epochs": 2,
                "model_config": {"hidden": 16},
                "negsample_config": {"strategy": "UNIFORM"},
            }
        )
        assert config.model_config.hidden == 16
        assert config.negsample_config.strategy is NegStrategy.UNIFORM

    def test_describe(self):
        described = TrainConfig(dedup=False).describe()
        assert described["deduplication"] == "off"
        assert described["negative_strategy"] == "ZIPFAN"
        assert described["negative_pool"] == "shared:5000"

    def test_hash_tracks_settings(self):
        assert TrainConfig().config_hash() == TrainConfig().config_hash()
        assert TrainConfig().config_hash() != TrainConfig(epochs=3).config_hash()

    @pytest.mark.parametrize("kwargs", [{"mask_ratio": 0.0}, {"batch_size": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


class TestClassifierHead:
    def test_bce(self):
        loss, grad = bce_with_logits(np.zeros(2), np.array([0, 1]))
        assert loss == pytest.approx(math.log(2))
        np.testing.assert_allclose(grad, [0.25, -0.25])

    def test_bce_extreme_logits(self):
        loss, _ = bce_with_logits(np.array([1000.0, -1000.0]), np.array([1, 0]))
        assert loss == pytest.approx(0.0)

    def test_file(self, tmp_path):
        head = ClassifierHead.initialize(6, 4, np.random.default_rng(0))
        head.save(tmp_path / "head.npz")
        loaded = ClassifierHead.load(tmp_path / "head.npz")
        x = np.random.default_rng(1).normal(size=(3, 6))
        np.testing.assert_allclose(loaded.predict_proba(x), head.predict_proba(x))

    @pytest.mark.parametrize("dropout", [0.0, 0.5])
    def test_file_keeps_dropout(self, tmp_path, dropout):
        head = ClassifierHead.initialize(6, 4, np.random.default_rng(0), dropout=dropout)
        head.save(tmp_path / "head.npz")
        loaded = ClassifierHead.load(tmp_path / "head.npz")
        assert loaded.dropout == dropout
        x = np.random.default_rng(1).normal(size=(3, 6))
        saved_logits, _ = head.forward(x, np.random.default_rng(2))
        loaded_logits, _ = loaded.forward(x, np.random.default_rng(2))
        np.testing.assert_allclose(loaded_logits, saved_logits)

    def test_file_without_dropout(self, tmp_path):
        head = ClassifierHead.initialize(6, 4, np.random.default_rng(0), dropout=0.5)
        np.savez(tmp_path / "head.npz", **head.tensors)
        assert ClassifierHead.load(tmp_path / "head.npz").dropout == DEFAULT_DROPOUT

    def test_separable(self):
        rng = np.random.default_rng(0)
        y = np.repeat([0, 1], 40)
        x = rng.normal(size=(80, 4)) + 3.0 * y[:, None]
        head = train_head(x, y, FinetuneConfig(
            head_hidden=8, head_dropout=0.0, epochs=30, batch_size=16, head_learning_rate=0.01
        ))
        accuracy = np.mean((head.predict_proba(x) > 0.5) == y)
        assert accuracy > 0.9

    def test_single_class(self):
        with pytest.raises(DegenerateLabelsError):
            train_head(np.zeros((4, 2)), np.zeros(4, dtype=int), FinetuneConfig())


class TestFinetune:
    def _labeled(self, sequences):
        by_owner = sequences.by_owner()
        owners = sorted(by_owner)[:12]
        return labeled_accounts(by_owner, {o: i % 2 for i, o in enumerate(owners)})

    def test_split(self):
        labels = np.array([0] * 14 + [1] * 6)
        train, test = split_accounts(labels, 0.3, 0)
        assert len(test) == 6
        assert sorted([*train, *test]) == list(range(20))
        assert labels[test].sum() == 2

    def test_split_too_few(self):
        with pytest.raises(DegenerateLabelsError):
            split_accounts(np.array([0, 0, 0, 1]), 0.3, 0)

    def test_labeled_accounts(self, sequences):
        owners, accounts, labels = self._labeled(sequences)
        assert len(owners) == len(accounts) == len(labels) == 12
        assert all(pieces[0].owner == o for o, pieces in zip(owners, accounts))

    def test_finetune_updates_encoder(self, sequences, checkpoint):
        _, accounts, labels = self._labeled(sequences)
        config = FinetuneConfig(head_hidden=8, epochs=1, batch_size=4)
        tuned, head = finetune(checkpoint, accounts, labels, config)
        assert tuned.vocab_hash == checkpoint.vocab_hash
        assert not tuned.params.equals(checkpoint.params)
        assert head.input_size == 8
        assert not tuned.params["emb.address"][PAD_ID].any()

    def test_without_pretraining(self, sequences, checkpoint):
        _, accounts, labels = self._labeled(sequences)
        config = FinetuneConfig(head_hidden=8, epochs=1, batch_size=4, pretrained=False)
        again = FinetuneConfig(head_hidden=8, epochs=1, batch_size=4, pretrained=True)
        fresh, _ = finetune(checkpoint, accounts, labels, config)
        tuned, _ = finetune(checkpoint, accounts, labels, again)
        assert not fresh.params.equals(tuned.params)
