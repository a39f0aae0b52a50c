import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pathos.threading import ThreadPool

from ethseq.model.embedding import embed_backward, embed_forward
from ethseq.model.encoder import encoder_backward, encoder_forward
from ethseq.model.inputs import build_view_input, unmasked_samples
from ethseq.model.model_config import RepresentationMode, View
from ethseq.model.network import ViewPass
from ethseq.model.params import ModelParams
from ethseq.seqgen.sequence import TxSequence


@dataclass(frozen=True)
class AccountRepresentation:
    """
    Fixed-width vector describing one account.

    :param owner: Vocabulary id of the account.
    :type owner: int
    :param vector: ``d`` values, or ``3d`` with in/out separation.
    :type vector: np.ndarray
    :param source: How the vector was obtained.
    :type source: RepresentationMode
    """

    owner: int
    vector: np.ndarray
    source: RepresentationMode


@dataclass
class RepresentationPass:
    """
    Forward pass producing the representations of several accounts.

    :param piece_account: Account row of every encoded piece.
    :type piece_account: np.ndarray
    :param piece_counts: Number of pieces of every account.
    :type piece_counts: np.ndarray
    :param passes: One pass per encoder stack.
    :type passes: Dict[View, ViewPass]
    :param vectors: The representations, ``(accounts, representation_size)``.
    :type vectors: np.ndarray
    """

    piece_account: np.ndarray
    piece_counts: np.ndarray
    passes: Dict[View, ViewPass]
    vectors: np.ndarray


def representation_forward(
    accounts: Sequence[Sequence[TxSequence]],
    params: ModelParams,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> RepresentationPass:
    """
    Encode the unmasked pieces of several accounts. Per stack, each piece
    contributes the last hidden state of its head record; pieces of an account
    are mean-pooled and the stacks concatenated in view order.

    :param accounts: Pieces of every account.
    :type accounts: Sequence[Sequence[TxSequence]]
    :param params: Model parameters.
    :type params: ModelParams
    :param dropout: Dropout ratio; 0 for extraction.
    :type dropout: float
    :param rng: Generator for the dropout masks.
    :type rng: Optional[np.random.Generator]
    :return: The pass, with the representations.
    :rtype: RepresentationPass
    :raises ValueError: If an account has no piece.
    """
    config = params.config
    counts = np.array([len(pieces) for pieces in accounts], dtype=np.int64)
    if len(counts) == 0 or counts.min() == 0:
        raise ValueError("Every account needs at least one sequence piece")
    piece_account = np.repeat(np.arange(len(accounts)), counts)
    samples = [unmasked_samples(seq, config.views) for pieces in accounts for seq in pieces]

    passes: Dict[View, ViewPass] = {}
    blocks = []
    for view in config.views:
        inputs = build_view_input([s[view] for s in samples], config)
        h0, cache = embed_forward(inputs, params)
        trace = encoder_forward(h0, inputs.valid, params, view, dropout, rng)
        passes[view] = ViewPass(inputs, cache, trace)
        pooled = np.zeros((len(accounts), config.hidden), dtype=trace.output.dtype)
        np.add.at(pooled, piece_account, trace.output[:, 0, :])
        blocks.append(pooled / counts[:, None].astype(pooled.dtype))
    return RepresentationPass(piece_account, counts, passes, np.concatenate(blocks, axis=1))


def representation_backward(
    d_vectors: np.ndarray, rep: RepresentationPass, params: ModelParams
) -> ModelParams:
    """
    Gradients of every parameter given ``dL/d vectors``.

    :param d_vectors: Gradient with respect to the representations.
    :type d_vectors: np.ndarray
    :param rep: The forward pass.
    :type rep: RepresentationPass
    :param params: The parameters it was computed with.
    :type params: ModelParams
    :return: A parameter-shaped gradient set.
    :rtype: ModelParams
    """
    grads = params.zeros_like()
    d = params.config.hidden
    for i, view_pass in enumerate(rep.passes.values()):
        out = view_pass.trace.output
        d_block = d_vectors[:, i * d : (i + 1) * d] / rep.piece_counts[:, None].astype(out.dtype)
        d_out = np.zeros_like(out)
        d_out[:, 0, :] = d_block[rep.piece_account]
        d_h0 = encoder_backward(d_out, view_pass.trace, params, grads.tensors)
        embed_backward(d_h0, view_pass.inputs, view_pass.embed_cache, params, grads.tensors)
    return grads


def extract_representation(
    pieces: Sequence[TxSequence],
    params: ModelParams,
    mode: RepresentationMode = RepresentationMode.SELF_TOKEN,
) -> AccountRepresentation:
    """
    Representation of one account from the pieces of its sequence, with
    dropout off. Address-embedding mode returns the account's own row of the
    address table instead of encoding anything.

    :param pieces: All pieces of one account's sequence.
    :type pieces: Sequence[TxSequence]
    :param params: Trained parameters.
    :type params: ModelParams
    :param mode: Which representation to produce.
    :type mode: RepresentationMode
    :return: The representation.
    :rtype: AccountRepresentation
    :raises ValueError: If ``pieces`` is empty or mixes owners.
    """
    if not pieces:
        raise ValueError("An account needs at least one sequence piece")
    owners = {seq.owner for seq in pieces}
    if len(owners) != 1:
        raise ValueError(f"Pieces belong to several owners: {sorted(owners)}")
    owner = pieces[0].owner
    if mode is RepresentationMode.ADDRESS_EMBEDDING:
        return AccountRepresentation(owner, params["emb.address"][owner].copy(), mode)
    return AccountRepresentation(owner, representation_forward([pieces], params).vectors[0], mode)


def extract_representations(
    pieces_by_owner: Dict[int, List[TxSequence]],
    params: ModelParams,
    mode: RepresentationMode = RepresentationMode.SELF_TOKEN,
    batch_size: int = 64,
    threads: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Representations of many accounts. Accounts are encoded in fixed chunks of
    ``batch_size`` that do not depend on ``threads``, so the vectors are the
    same for any number of workers.

    :param pieces_by_owner: Sequence pieces per owner id.
    :type pieces_by_owner: Dict[int, List[TxSequence]]
    :param params: Trained parameters.
    :type params: ModelParams
    :param mode: Which representation to produce.
    :type mode: RepresentationMode
    :param batch_size: Accounts encoded at once.
    :type batch_size: int
    :param threads: Worker threads.
    :type threads: int
    :return: Owner ids in ascending order and their vectors, ``(n, D)``.
    :rtype: Tuple[np.ndarray, np.ndarray]
    """
    owners = np.array(sorted(pieces_by_owner), dtype=np.int64)
    if mode is RepresentationMode.ADDRESS_EMBEDDING:
        return owners, params["emb.address"][owners].copy()
    if len(owners) == 0:
        return owners, np.zeros((0, params.config.representation_size), dtype=params.dtype)

    accounts = [pieces_by_owner[int(o)] for o in owners]
    chunks = [accounts[i : i + batch_size] for i in range(0, len(accounts), batch_size)]
    logging.info(f"Extracting {len(accounts)} representations in {len(chunks)} chunks")

    def encode(chunk: List[List[TxSequence]]) -> np.ndarray:
        return representation_forward(chunk, params).vectors

    if threads > 1 and len(chunks) > 1:
        pool = ThreadPool(nodes=threads)
        try:
            results = pool.map(encode, chunks)
        finally:
            pool.close()
            pool.join()
            pool.clear()
    else:
        results = [encode(c) for c in chunks]
    return owners, np.concatenate(results).astype(params.dtype)
