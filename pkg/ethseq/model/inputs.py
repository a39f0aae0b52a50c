from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ethseq.model.model_config import ModelConfig, View
from ethseq.seqgen.sequence import Direction, MaskedSequence, TxSequence
from ethseq.seqgen.transforms import separate_in_out
from ethseq.seqgen.vocabulary import MASK_ID, PAD_ID

# Column order of ViewInput.features, matching params.FEATURE_TABLES
N_FEATURES = 5


@dataclass(frozen=True)
class ViewSample:
    """
    One sequence as one encoder stack sees it.

    :param seq: The (view-specific) sequence.
    :type seq: TxSequence
    :param masked_positions: Masked indices within ``seq``.
    :type masked_positions: Tuple[int, ...]
    :param positives: Hidden counterparty ids, aligned with ``masked_positions``.
    :type positives: Tuple[int, ...]
    """

    seq: TxSequence
    masked_positions: Tuple[int, ...] = ()
    positives: Tuple[int, ...] = ()


def view_samples(masked: MaskedSequence, views: Sequence[View]) -> Dict[View, ViewSample]:
    """
    Derive the incoming and outgoing views of a masked sequence. A record masked
    in the full view is masked in whichever partial view holds it.

    :param masked: The masked full sequence.
    :type masked: MaskedSequence
    :param views: Views to derive.
    :type views: Sequence[View]
    :return: One sample per requested view.
    :rtype: Dict[View, ViewSample]
    """
    base = masked.base
    positives = dict(zip(masked.masked_positions, masked.positives))
    samples = {}
    in_seq, out_seq = separate_in_out(base)
    for view in views:
        if view is View.FULL:
            samples[view] = ViewSample(base, masked.masked_positions, masked.positives)
            continue
        direction, seq = (Direction.IN, in_seq) if view is View.IN else (Direction.OUT, out_seq)
        kept = [i for i in range(1, len(base)) if base.records[i].direction is direction]
        new_positions = tuple(j + 1 for j, i in enumerate(kept) if i in positives)
        new_positives = tuple(positives[i] for i in kept if i in positives)
        samples[view] = ViewSample(seq, new_positions, new_positives)
    return samples


def unmasked_samples(seq: TxSequence, views: Sequence[View]) -> Dict[View, ViewSample]:
    in_seq, out_seq = separate_in_out(seq)
    by_view = {View.FULL: seq, View.IN: in_seq, View.OUT: out_seq}
    return {view: ViewSample(by_view[view]) for view in views}


@dataclass
class ViewInput:
    """
    Padded integer inputs of a batch for one encoder stack. Flat indices
    address the ``(B, N)`` grid in row-major order.

    :param ids: Counterparty ids with [MASK] substituted, [PAD] in padding, ``(B, N)``.
    :param features: Account type, direction, amount, count, time ids, ``(B, N, 5)``.
    :param positions: Position ids, ``(B, N)``.
    :param valid: True on real records, ``(B, N)``.
    :param masked_flat: Flat indices of masked records, ``(M,)``.
    :param positives: Hidden counterparty ids, ``(M,)``.
    :param masked_row: Batch row of each masked record, ``(M,)``.
    :param gate_flat: Flat indices of records fused with their ERC-20 recipients, ``(K,)``.
    :param recipients: Recipient ids of all gated records, concatenated, ``(R,)``.
    :param recipient_slot: Gated record (0..K-1) each recipient belongs to, ``(R,)``.
    """

    ids: np.ndarray
    features: np.ndarray
    positions: np.ndarray
    valid: np.ndarray
    masked_flat: np.ndarray
    positives: np.ndarray
    masked_row: np.ndarray
    gate_flat: np.ndarray
    recipients: np.ndarray
    recipient_slot: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.ids.shape  # type: ignore


def build_view_input(samples: Sequence[ViewSample], config: ModelConfig) -> ViewInput:
    """
    Pad a list of samples into one batch for one encoder stack.

    :param samples: Samples of the batch, all for the same view.
    :type samples: Sequence[ViewSample]
    :param config: Model configuration.
    :type config: ModelConfig
    :return: The padded batch.
    :rtype: ViewInput
    :raises ValueError: If a sequence is longer than the position table.
    """
    n_rows = len(samples)
    width = max(len(s.seq) for s in samples)
    if width > config.max_seq_len:
        raise ValueError(
            f"Sequence of length {width} exceeds max_seq_len {config.max_seq_len}; split it first"
        )
    ids = np.full((n_rows, width), PAD_ID, dtype=np.int64)
    features = np.zeros((n_rows, width, N_FEATURES), dtype=np.int64)
    positions = np.zeros((n_rows, width), dtype=np.int64)
    valid = np.zeros((n_rows, width), dtype=bool)
    masked_flat: List[int] = []
    positives: List[int] = []
    masked_row: List[int] = []
    gate_flat: List[int] = []
    recipients: List[int] = []
    recipient_slot: List[int] = []

    for b, sample in enumerate(samples):
        masked = set(sample.masked_positions)
        for n, r in enumerate(sample.seq.records):
            ids[b, n] = MASK_ID if n in masked else r.counterparty
            features[b, n] = (
                int(r.counterparty_kind),
                int(r.direction),
                r.amount_bin,
                r.count_bin,
                r.time_bin,
            )
            positions[b, n] = n
            valid[b, n] = True
            if config.erc20_gate and r.token_recipients and n not in masked:
                slot = len(gate_flat)
                gate_flat.append(b * width + n)
                recipients.extend(r.token_recipients)
                recipient_slot.extend([slot] * len(r.token_recipients))
        for position, positive in zip(sample.masked_positions, sample.positives):
            masked_flat.append(b * width + position)
            positives.append(positive)
            masked_row.append(b)

    def _arr(values: List[int]) -> np.ndarray:
        return np.array(values, dtype=np.int64)

    return ViewInput(
        ids=ids,
        features=features,
        positions=positions,
        valid=valid,
        masked_flat=_arr(masked_flat),
        positives=_arr(positives),
        masked_row=_arr(masked_row),
        gate_flat=_arr(gate_flat),
        recipients=_arr(recipients),
        recipient_slot=_arr(recipient_slot),
    )


@dataclass
class MaskedBatch:
    """
    Masked sequences trained on together, with their negatives.

    :param sequences: The masked sequences.
    :type sequences: List[MaskedSequence]
    :param pool: Negative ids: one pool ``(P,)`` shared by every masked position,
                 or one pool per sequence ``(B, Ps)``.
    :type pool: np.ndarray
    """

    sequences: List[MaskedSequence]
    pool: np.ndarray

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def shared(self) -> bool:
        return self.pool.ndim == 1

    @property
    def masked_count(self) -> int:
        return sum(len(m.masked_positions) for m in self.sequences)

    def shard(self, rows: Sequence[int]) -> "MaskedBatch":
        """
        Sub-batch of the given rows, with their share of the negatives.
        """
        pool = self.pool if self.shared else self.pool[np.asarray(rows, dtype=np.int64)]
        return MaskedBatch([self.sequences[r] for r in rows], pool)
