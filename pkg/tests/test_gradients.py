from typing import Callable, List, Optional

import numpy as np
import pytest
from corpus_helper import DAY, T0, sequence_of, tiny_model_config, tx_hash

from ethseq.model.inputs import MaskedBatch
from ethseq.model.network import batch_loss, forward, gradients, loss_and_gradients, sum_gradients
from ethseq.model.params import ModelParams
from ethseq.model.representation import representation_backward, representation_forward
from ethseq.seqgen.binning import bin_sequence
from ethseq.seqgen.builder import attach_token_recipients
from ethseq.seqgen.sequence import Direction, MaskedSequence

IN, OUT = Direction.IN, Direction.OUT
VOCAB_SIZE = 20
EPS = 1e-6


def _sequences():
    first = bin_sequence(
        sequence_of(
            3,
            [
                (5, IN, T0, 10**18),
                (6, OUT, T0 - DAY, 10**17),
                (5, OUT, T0 - 3 * DAY, 10**19),
                (7, IN, T0 - 9 * DAY, 1),
            ],
        )
    )
    first = attach_token_recipients(first, {tx_hash(2): (8, 9)})
    second = bin_sequence(
        sequence_of(
            4,
            [(8, OUT, T0, 5 * 10**18), (3, IN, T0 - 2 * DAY, 10**16), (9, OUT, T0 - 2 * DAY, 1)],
        )
    )
    return first, second


def _batch(shared: bool = True) -> MaskedBatch:
    first, second = _sequences()
    masked = [MaskedSequence(first, (1, 3), (5, 5)), MaskedSequence(second, (2,), (3,))]
    # both pools hold a positive so the collision path is differentiated too
    pool = np.array([5, 10, 11, 3, 12]) if shared else np.array([[5, 10, 11], [3, 12, 13]])
    return MaskedBatch(masked, pool)


def _params(**overrides) -> ModelParams:
    settings = {"init_std": 0.3, "erc20_gate": True}
    settings.update(overrides)
    config = tiny_model_config(**settings)
    return ModelParams.initialize(config, VOCAB_SIZE, np.random.default_rng(7), np.float64)


def _probe_indices(grad: np.ndarray, rng: np.random.Generator) -> List[tuple]:
    """
    The largest gradient entry plus two random ones.
    """
    picks = [np.unravel_index(int(np.argmax(np.abs(grad))), grad.shape)]
    for _ in range(2):
        picks.append(tuple(int(rng.integers(0, s)) for s in grad.shape))
    return picks


def _check(
    loss_fn: Callable[[ModelParams], float],
    params: ModelParams,
    grads: ModelParams,
    names: Optional[List[str]] = None,
) -> None:
    rng = np.random.default_rng(0)
    for name in names or list(params.tensors):
        tensor = params.tensors[name]
        for idx in _probe_indices(grads[name], rng):
            original = tensor[idx]
            tensor[idx] = original + EPS
            up = loss_fn(params)
            tensor[idx] = original - EPS
            down = loss_fn(params)
            tensor[idx] = original
            numeric = (up - down) / (2 * EPS)
            assert grads[name][idx] == pytest.approx(numeric, rel=1e-4, abs=1e-7), (name, idx)


def _loss(batch: MaskedBatch, dropout: float = 0.0, seed: int = 0):
    def fn(params: ModelParams) -> float:
        rng = np.random.default_rng(seed) if dropout else None
        computation = forward(batch, params, dropout, rng)
        return batch_loss(computation, params, keep_logits=False).loss

    return fn


@pytest.mark.parametrize("heads", [1, 2])
class TestMaskedLossGradients:
    def test_full_view(self, heads):
        params = _params(heads=heads)
        batch = _batch()
        _, grads = loss_and_gradients(batch, params)
        _check(_loss(batch), params, grads)

    def test_per_sequence_pools(self, heads):
        params = _params(heads=heads)
        batch = _batch(shared=False)
        _, grads = loss_and_gradients(batch, params)
        _check(_loss(batch), params, grads)

    def test_inout_separation(self, heads):
        params = _params(heads=heads, in_out_separation=True)
        batch = _batch()
        _, grads = loss_and_gradients(batch, params)
        _check(_loss(batch), params, grads)

    def test_without_features(self, heads):
        params = _params(heads=heads, tranx_features=False, erc20_gate=False)
        batch = _batch()
        _, grads = loss_and_gradients(batch, params)
        _check(_loss(batch), params, grads)


class TestDropoutGradients:
    def test_recorded_masks(self):
        params = _params(dropout=0.3)
        batch = _batch()
        _, grads = loss_and_gradients(batch, params, 0.3, np.random.default_rng(4))
        names = ["emb.address", "emb.position", "full.0.wq", "full.1.w1", "full.1.ln2.g", "gate.w"]
        _check(_loss(batch, 0.3, 4), params, grads, names)


class TestRepresentationGradients:
    def test_head_pooling(self):
        params = _params(in_out_separation=True)
        first, second = _sequences()
        extra = bin_sequence(sequence_of(3, [(9, OUT, T0, 10**18), (6, IN, T0 - DAY, 10**18)]))
        accounts = [[first, extra], [second]]
        weights = np.random.default_rng(1).normal(size=(2, params.config.representation_size))

        def fn(p: ModelParams) -> float:
            return float((representation_forward(accounts, p).vectors * weights).sum())

        grads = representation_backward(weights, representation_forward(accounts, params), params)
        _check(fn, params, grads)


class TestShards:
    def test_shard_gradients_sum_to_batch(self):
        params = _params()
        batch = _batch()
        result, whole = loss_and_gradients(batch, params)
        weight = 1.0 / batch.masked_count
        parts = [loss_and_gradients(batch.shard([r]), params, weight=weight) for r in (0, 1)]
        total = sum_gradients([g for _, g in parts])
        for name, value in whole:
            np.testing.assert_allclose(total[name], value, rtol=1e-10, atol=1e-14)
        assert sum(r.total for r, _ in parts) == pytest.approx(result.total)

    def test_loss_matches_forward(self):
        params = _params()
        batch = _batch()
        result, _ = gradients(forward(batch, params), params)
        assert result.loss == pytest.approx(_loss(batch)(params))
        assert result.collisions == 3
