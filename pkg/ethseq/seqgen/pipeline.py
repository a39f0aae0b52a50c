import logging
import time
from collections import Counter
from typing import Dict, List, Optional

from ethseq.ingest.corpus_io import Corpus
from ethseq.seqgen.binning import bin_sequence
from ethseq.seqgen.builder import (
    attach_token_recipients,
    build_sequence,
    group_by_owner,
    group_token_events,
)
from ethseq.seqgen.deduplicator import deduplicate, remove_failed, repetitiveness_ratio
from ethseq.seqgen.seqgen_config import SeqGenConfig
from ethseq.seqgen.sequence import TxSequence
from ethseq.seqgen.sequence_io import SequenceCorpus
from ethseq.seqgen.transforms import split_long
from ethseq.seqgen.vocabulary import Vocabulary
from ethseq.statistics import SequenceCounters, Statistics


def build_vocabulary(corpus: Corpus) -> Vocabulary:
    """
    Vocabulary over the kept accounts and everything they interact with.
    An address's frequency is its number of occurrences in the raw sequences,
    heads and token recipients included, so every entry has frequency >= 1.
    """
    owners = {a.address for a in corpus.accounts}
    frequencies: Counter = Counter({owner: 1 for owner in owners})
    owner_hashes = set()
    for tx in corpus.transactions:
        if tx.from_address in owners:
            frequencies[tx.to_address or tx.from_address] += 1
            owner_hashes.add(tx.tx_hash)
        if tx.to_address in owners and tx.to_address != tx.from_address:
            frequencies[tx.from_address] += 1
    for event in corpus.token_events:
        if event.tx_hash in owner_hashes:
            frequencies[event.recipient_eoa] += 1
    frequencies.pop("", None)
    return Vocabulary(frequencies)


def build_sequence_corpus(
    corpus: Corpus,
    config: SeqGenConfig = SeqGenConfig(),
    stats: Optional[Statistics] = None,
) -> SequenceCorpus:
    """
    Turn an ingested corpus into sequence pieces: build, drop failed
    transactions, de-duplicate (unless disabled), attach ERC-20 recipients,
    bin features, split long sequences.

    :param corpus: Ingested corpus; its accounts become sequence owners.
    :type corpus: Corpus
    :param config: Sequence generation settings.
    :type config: SeqGenConfig
    :param stats: Counters to update, if provided.
    :type stats: Optional[Statistics]
    :return: Sequences, vocabulary and repetitiveness ratios.
    :rtype: SequenceCorpus
    """
    start = time.time()
    stats = stats if stats is not None else Statistics()
    vocab = build_vocabulary(corpus)
    owners = sorted(a.address for a in corpus.accounts)
    grouped = group_by_owner(corpus.transactions, set(owners))
    events = group_token_events(
        corpus.token_events, vocab, {tx.tx_hash for tx in corpus.transactions}
    )

    raw_sequences: List[TxSequence] = []
    clean_sequences: List[TxSequence] = []
    pieces: List[TxSequence] = []
    first_seen: Dict[int, int] = {}
    for owner in owners:
        txs = grouped.get(owner, [])
        raw = build_sequence(owner, txs, vocab, corpus.contracts)
        raw_sequences.append(raw)
        first_seen[raw.owner] = min((tx.block_timestamp for tx in txs), default=0)

        succeeded = remove_failed(raw)
        stats.increment(SequenceCounters.FAILED_REMOVED, len(raw) - len(succeeded))
        if config.dedup:
            clean = deduplicate(succeeded, config.dedup_window_hours)
            stats.increment(SequenceCounters.RECORDS_MERGED, len(succeeded) - len(clean))
        else:
            clean = succeeded
        clean_sequences.append(clean)

        split = split_long(bin_sequence(attach_token_recipients(clean, events)), config.max_seq_len)
        stats.increment(SequenceCounters.SEQUENCES)
        stats.increment(SequenceCounters.PIECES, len(split))
        pieces.extend(split)

    raw_ratio = repetitiveness_ratio(raw_sequences)
    dedup_ratio = repetitiveness_ratio(clean_sequences)
    logging.info(
        f"Built {len(owners)} sequences ({len(pieces)} pieces); "
        f"repetitiveness ratio {raw_ratio:.4f} raw, {dedup_ratio:.4f} after clean-up"
    )
    stats.log_info("build-seqs", time.time() - start)
    return SequenceCorpus(
        vocab=vocab,
        sequences=pieces,
        first_seen=first_seen,
        raw_ratio=raw_ratio,
        dedup_ratio=dedup_ratio,
        config=config.to_dict(),
    )
