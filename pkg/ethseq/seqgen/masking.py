import numpy as np

from ethseq.seqgen.sequence import MaskedSequence, TxSequence
from ethseq.seqgen.vocabulary import MASK_ID


def mask_count(length: int, ratio: float) -> int:
    """
    Number of positions to mask in a sequence of ``length`` records (head
    included): ``ratio * (length - 1)`` rounded half up, at least 1.
    """
    return max(1, int(np.floor(ratio * (length - 1) + 0.5)))


def mask_sequence(
    seq: TxSequence, ratio: float, rng: np.random.Generator, mask_id: int = MASK_ID
) -> MaskedSequence:
    """
    Hide the counterparties of a uniformly chosen set of non-head positions.
    Every other feature of a masked record is kept.

    :param seq: Sequence to mask.
    :type seq: TxSequence
    :param ratio: Masking ratio in (0, 1].
    :type ratio: float
    :param rng: Random generator; the only source of randomness.
    :type rng: np.random.Generator
    :param mask_id: Vocabulary id standing in for masked counterparties.
    :type mask_id: int
    :return: The masked sequence with its positives.
    :rtype: MaskedSequence
    :raises ValueError: If the sequence has no record behind its head or the ratio is out of range.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"Masking ratio must lie in (0, 1], got {ratio}")
    if len(seq) < 2:
        raise ValueError(f"Sequence of owner {seq.owner} has nothing to mask")
    m = mask_count(len(seq), ratio)
    positions = np.sort(rng.choice(np.arange(1, len(seq)), size=m, replace=False))
    counterparties = seq.counterparties()
    return MaskedSequence(
        base=seq,
        masked_positions=tuple(int(p) for p in positions),
        positives=tuple(int(c) for c in counterparties[positions]),
        mask_id=mask_id,
    )
