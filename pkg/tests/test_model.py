import math

import numpy as np
import pytest
from corpus_helper import DAY, T0, sequence_of, tiny_model_config, tx_hash

from ethseq.errors import DataError
from ethseq.model.embedding import embed_forward, embed_transaction, gate_fuse
from ethseq.model.encoder import attention_weights, encoder_forward, scaled_dot_attention
from ethseq.model.functional import gelu, layer_norm, masked_softmax
from ethseq.model.inputs import ViewSample, build_view_input, view_samples
from ethseq.model.loss import map_loss
from ethseq.model.model_config import ModelConfig, RepresentationMode, View
from ethseq.model.params import ModelParams
from ethseq.model.representation import extract_representation, extract_representations
from ethseq.model.representation_io import (
    RepresentationSet,
    load_representations,
    save_representations,
)
from ethseq.seqgen.binning import bin_sequence
from ethseq.seqgen.builder import attach_token_recipients
from ethseq.seqgen.sequence import Direction, MaskedSequence, TxSequence
from ethseq.seqgen.vocabulary import MASK_ID, PAD_ID

IN, OUT = Direction.IN, Direction.OUT
VOCAB_SIZE = 16


def _params(**overrides) -> ModelParams:
    config = tiny_model_config(**overrides)
    return ModelParams.initialize(config, VOCAB_SIZE, np.random.default_rng(0), np.float64)


def _seq(owner: int = 3) -> TxSequence:
    body = [
        (5, IN, T0, 10**18),
        (6, OUT, T0 - DAY, 10**17),
        (7, OUT, T0 - 3 * DAY, 10**19),
        (8, IN, T0 - 9 * DAY, 1),
    ]
    return bin_sequence(sequence_of(owner, body))


class TestFunctional:
    def test_gelu(self):
        assert gelu(np.array([0.0]))[0] == 0.0
        assert gelu(np.array([10.0]))[0] == pytest.approx(10.0)
        assert gelu(np.array([1.0]))[0] == pytest.approx(0.8412, abs=1e-4)

    def test_layer_norm(self):
        x = np.array([[1.0, 2.0, 3.0, 4.0]])
        y, _ = layer_norm(x, np.ones(4), np.zeros(4), 1e-12)
        assert y.mean() == pytest.approx(0.0, abs=1e-12)
        assert y.std() == pytest.approx(1.0)

    def test_masked_softmax_zero_weight(self):
        p = masked_softmax(np.array([[5.0, 1.0, 9.0]]), np.array([[True, True, False]]))
        assert p[0, 2] == 0.0
        assert p.sum() == pytest.approx(1.0)


class TestAttention:
    def test_two_keys(self):
        q = np.array([[1.0]])
        k = np.array([[1.0], [0.0]])
        v = np.array([[1.0], [0.0]])
        out, p = scaled_dot_attention(q, k, v, np.array([True, True]))
        assert p[0] == pytest.approx([0.7311, 0.2689], abs=1e-4)
        assert out[0, 0] == pytest.approx(0.7311, abs=1e-4)

    def test_padding_key_ignored(self):
        p = attention_weights(np.array([[1.0]]), np.array([[1.0], [0.0]]), np.array([True, False]))
        assert p[0].tolist() == [1.0, 0.0]

    def test_scaled_by_head_dim(self):
        q = np.array([[1.0, 1.0, 1.0, 1.0]])
        k = np.array([[1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0]])
        p = attention_weights(q, k, np.array([True, True]))
        # scores 4 / sqrt(4) = 2 and 0
        assert p[0, 0] == pytest.approx(1.0 / (1.0 + math.exp(-2.0)))


class TestEncoder:
    def test_padding_does_not_leak(self):
        params = _params()
        rng = np.random.default_rng(1)
        h = rng.normal(size=(1, 3, 8))
        padded = np.concatenate([h, rng.normal(size=(1, 2, 8))], axis=1)
        mask = np.array([[True, True, True, False, False]])
        short = encoder_forward(h, None, params).output
        long = encoder_forward(padded, mask, params).output
        np.testing.assert_allclose(long[:, :3], short, rtol=1e-10, atol=1e-12)

    def test_unbatched_input(self):
        params = _params()
        trace = encoder_forward(np.random.default_rng(2).normal(size=(4, 8)), None, params)
        assert trace.output.shape == (1, 4, 8)
        assert len(trace.attention_weights) == 2
        assert trace.attention_weights[0].shape == (1, 2, 4, 4)

    def test_too_long(self):
        with pytest.raises(ValueError):
            encoder_forward(np.zeros((9, 8)), None, _params())

    def test_dropout_is_seeded(self):
        params = _params(dropout=0.3)
        h = np.random.default_rng(3).normal(size=(2, 4, 8))
        a = encoder_forward(h, None, params, dropout=0.3, rng=np.random.default_rng(9)).output
        b = encoder_forward(h, None, params, dropout=0.3, rng=np.random.default_rng(9)).output
        c = encoder_forward(h, None, params).output
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)


class TestEmbedding:
    def test_pad_row_is_zero(self):
        assert not _params()["emb.address"][PAD_ID].any()

    def test_without_features(self):
        params = _params(tranx_features=False)
        record = _seq().records[2]
        expected = params["emb.address"][record.counterparty] + params["emb.position"][2]
        np.testing.assert_allclose(embed_transaction(record, params), expected)

    def test_features_are_summed(self):
        params = _params()
        record = _seq().records[1]
        expected = (
            params["emb.address"][5]
            + params["emb.account_type"][int(record.counterparty_kind)]
            + params["emb.direction"][int(IN)]
            + params["emb.amount"][record.amount_bin]
            + params["emb.count"][record.count_bin]
            + params["emb.time"][record.time_bin]
            + params["emb.position"][1]
        )
        np.testing.assert_allclose(embed_transaction(record, params), expected)

    def test_masked_uses_mask_row(self):
        params = _params(tranx_features=False)
        record = _seq().records[1]
        expected = params["emb.address"][MASK_ID] + params["emb.position"][1]
        np.testing.assert_allclose(embed_transaction(record, params, masked=True), expected)

    def test_out_of_range(self):
        params = _params()
        with pytest.raises(ValueError):
            embed_transaction(_seq(owner=VOCAB_SIZE + 3).records[0], params)

    def test_batched_matches_single(self):
        params = _params(erc20_gate=True)
        seq = attach_token_recipients(_seq(), {tx_hash(2): (9, 10)})
        inputs = build_view_input([ViewSample(seq)], params.config)
        h0, _ = embed_forward(inputs, params)
        for n, record in enumerate(seq.records):
            np.testing.assert_allclose(h0[0, n], embed_transaction(record, params), atol=1e-12)
        assert inputs.gate_flat.tolist() == [2]


class TestGate:
    def _setup(self, bias: float):
        params = _params(erc20_gate=True)
        params.tensors["gate.w"][:] = 0.0
        params.tensors["gate.b"][:] = bias
        rng = np.random.default_rng(4)
        return params, rng.normal(size=8), rng.normal(size=(3, 8))

    def test_open_gate_keeps_contract(self):
        params, a_c, recipients = self._setup(50.0)
        np.testing.assert_allclose(gate_fuse(a_c, recipients, params), a_c, atol=1e-12)

    def test_closed_gate_takes_recipients(self):
        params, a_c, recipients = self._setup(-50.0)
        fused = gate_fuse(a_c, recipients, params)
        np.testing.assert_allclose(fused, recipients.mean(axis=0), atol=1e-12)

    def test_half_gate(self):
        params, a_c, recipients = self._setup(0.0)
        fused = gate_fuse(a_c, recipients, params)
        np.testing.assert_allclose(fused, 0.5 * (a_c + recipients.mean(axis=0)))

    def test_needs_recipients(self):
        params, a_c, _ = self._setup(0.0)
        with pytest.raises(ValueError):
            gate_fuse(a_c, np.zeros((0, 8)), params)


class TestLoss:
    def test_uniform_logits(self):
        table = np.random.default_rng(5).normal(size=(VOCAB_SIZE, 8))
        result = map_loss(np.zeros((2, 8)), np.array([3, 4]), np.array([5, 6, 7]), table)
        assert result.loss == pytest.approx(math.log(4))
        assert result.collisions == 0
        assert result.negative_logits.shape == (2, 3)

    def test_collision_excluded(self):
        table = np.random.default_rng(5).normal(size=(VOCAB_SIZE, 8))
        result = map_loss(np.zeros((2, 8)), np.array([3, 4]), np.array([3, 6, 7]), table)
        assert result.collisions == 1
        assert result.total == pytest.approx(math.log(3) + math.log(4))
        assert result.negative_logits[0, 0] == -np.inf

    def test_per_sequence_pools(self):
        table = np.random.default_rng(5).normal(size=(VOCAB_SIZE, 8))
        pool = np.array([[5, 6], [7, 8]])
        result = map_loss(np.zeros((3, 8)), np.array([3, 4, 9]), pool, table, np.array([0, 1, 1]))
        assert result.loss == pytest.approx(math.log(3))

    def test_confident_prediction(self):
        table = np.eye(VOCAB_SIZE, 8)
        hidden = 30.0 * table[[3]]
        result = map_loss(hidden, np.array([3]), np.array([4, 5]), table)
        assert result.loss == pytest.approx(0.0, abs=1e-9)

    def test_invalid(self):
        table = np.zeros((VOCAB_SIZE, 8))
        with pytest.raises(ValueError):
            map_loss(np.zeros((0, 8)), np.array([], dtype=np.int64), np.array([5]), table)
        with pytest.raises(ValueError):
            map_loss(np.zeros((1, 8)), np.array([3]), np.array([], dtype=np.int64), table)
        with pytest.raises(ValueError):
            map_loss(np.zeros((1, 8)), np.array([3]), np.array([[5]]), table)


class TestViews:
    def test_masked_records_follow_their_view(self):
        masked = MaskedSequence(_seq(), (1, 3), (5, 7))
        samples = view_samples(masked, [View.FULL, View.IN, View.OUT])
        assert samples[View.FULL].masked_positions == (1, 3)
        assert samples[View.IN].masked_positions == (1,)
        assert samples[View.IN].positives == (5,)
        assert samples[View.OUT].masked_positions == (2,)
        assert samples[View.OUT].positives == (7,)

    def test_config_views(self):
        assert ModelConfig().views == [View.FULL]
        config = ModelConfig(hidden=8, heads=2, in_out_separation=True)
        assert config.views == [View.FULL, View.IN, View.OUT]
        assert config.representation_size == 24

    def test_inout_tensors(self):
        params = _params(in_out_separation=True)
        assert "in.1.wq" in params.tensors and "out.0.ln2.g" in params.tensors

    @pytest.mark.parametrize(("hidden", "heads", "dropout"), [(8, 3, 0.0), (8, 2, 1.0)])
    def test_invalid_config(self, hidden, heads, dropout):
        with pytest.raises(ValueError):
            ModelConfig(hidden=hidden, heads=heads, dropout=dropout)


class TestRepresentation:
    def test_address_mode(self):
        params = _params()
        rep = extract_representation([_seq()], params, RepresentationMode.ADDRESS_EMBEDDING)
        np.testing.assert_array_equal(rep.vector, params["emb.address"][3])

    def test_pieces_are_averaged(self):
        params = _params()
        first = _seq()
        second = bin_sequence(sequence_of(3, [(9, OUT, T0, 10**18)]))
        both = extract_representation([first, second], params).vector
        a = extract_representation([first], params).vector
        b = extract_representation([second], params).vector
        np.testing.assert_allclose(both, (a + b) / 2, atol=1e-12)

    def test_inout_width(self):
        params = _params(in_out_separation=True)
        assert extract_representation([_seq()], params).vector.shape == (24,)

    def test_mixed_owners(self):
        with pytest.raises(ValueError):
            extract_representation([_seq(3), _seq(4)], _params())

    def test_threads_do_not_change_vectors(self):
        params = _params()
        pieces = {o: [_seq(o)] for o in range(3, 12)}
        owners, single = extract_representations(pieces, params, batch_size=2, threads=1)
        _, threaded = extract_representations(pieces, params, batch_size=2, threads=3)
        assert owners.tolist() == list(range(3, 12))
        np.testing.assert_array_equal(single, threaded)

    def test_file(self, tmp_path):
        reps = RepresentationSet(
            np.array(["0xa", "0xb"]), np.ones((2, 4), dtype=np.float32), np.array([5, 6])
        )
        save_representations(tmp_path / "r.npz", reps)
        loaded = load_representations(tmp_path / "r.npz")
        assert loaded.addresses.tolist() == ["0xa", "0xb"]
        assert loaded.rows_of(["0xb"]).tolist() == [1]
        np.testing.assert_array_equal(loaded.vectors, reps.vectors)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_representations(tmp_path / "none.npz")
