from typing import List, Tuple

from ethseq.seqgen.sequence import Direction, TxSequence


def separate_in_out(seq: TxSequence) -> Tuple[TxSequence, TxSequence]:
    """
    Split a sequence by direction. Both halves keep the self-transaction head,
    record order and get positions re-indexed from 0.

    :param seq: A headed sequence.
    :type seq: TxSequence
    :return: ``(in_seq, out_seq)``.
    :rtype: Tuple[TxSequence, TxSequence]
    """
    in_seq = seq.with_body([r for r in seq.body if r.direction is Direction.IN])
    out_seq = seq.with_body([r for r in seq.body if r.direction is Direction.OUT])
    return in_seq, out_seq


def split_long(seq: TxSequence, max_len: int = 100) -> List[TxSequence]:
    """
    Chunk the records behind the head into pieces of at most ``max_len - 1``
    records, each behind its own copy of the head.

    :param seq: A headed sequence.
    :type seq: TxSequence
    :param max_len: Maximum piece length, head included.
    :type max_len: int
    :return: At least one piece.
    :rtype: List[TxSequence]
    """
    if max_len < 2:
        raise ValueError(f"max_len must be at least 2, got {max_len}")
    body = seq.body
    if len(seq) <= max_len:
        return [seq]
    chunk = max_len - 1
    pieces = []
    for i, start in enumerate(range(0, len(body), chunk)):
        piece = seq.with_body(body[start : start + chunk])
        piece.piece = i
        pieces.append(piece)
    return pieces
