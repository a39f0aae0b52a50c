import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ethseq.ingest.corpus_io import Corpus
from ethseq.ingest.records import AccountMeta, RawTransaction
from ethseq.model.model_config import RepresentationMode
from ethseq.model.params import ModelParams
from ethseq.model.representation import extract_representation
from ethseq.seqgen.pipeline import build_sequence_corpus
from ethseq.seqgen.seqgen_config import SeqGenConfig
from ethseq.seqgen.sequence_io import SequenceCorpus
from ethseq.trainer.pretrainer import pretrain
from ethseq.trainer.train_config import TrainConfig

_DAY = 86400
_START = 1_600_000_000


@dataclass(frozen=True)
class ToyGraph:
    """
    Accounts as nodes and repeated transfers as directed edges.

    :param nodes: Node names; each is a kept account.
    :type nodes: Tuple[str, ...]
    :param edges: ``(sender, receiver)`` name pairs.
    :type edges: Tuple[Tuple[str, str], ...]
    :param probe: The node whose neighbourhood is measured.
    :type probe: str
    :param control: A node with no path to the probe.
    :type control: str
    :param outside: Counterparties that appear in edges but are neither kept
        accounts nor measured.
    :type outside: Tuple[str, ...]
    :param repeats: Transfers per edge, spaced further apart than the de-duplication window.
    :type repeats: int
    """

    nodes: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]
    probe: str
    control: str
    outside: Tuple[str, ...] = ()
    repeats: int = 6

    def address(self, node: str) -> str:
        return f"0x{(self.nodes + self.outside).index(node) + 1:040x}"

    def hops(self) -> Dict[str, int]:
        """
        :return: Undirected hop distance from the probe to every reachable node.
        :rtype: Dict[str, int]
        """
        adjacent: Dict[str, List[str]] = {n: [] for n in self.nodes + self.outside}
        for a, b in self.edges:
            adjacent[a].append(b)
            adjacent[b].append(a)
        dist = {self.probe: 0}
        queue = deque([self.probe])
        while queue:
            node = queue.popleft()
            for other in adjacent[node]:
                if other not in dist:
                    dist[other] = dist[node] + 1
                    queue.append(other)
        return dist


def toy_graph(repeats: int = 6) -> ToyGraph:
    """
    Five accounts: a chain A-B-C-D that puts B, C and D one, two and three
    hops from A, and a control E whose only counterparties X and Y lie
    outside the measured component.
    """
    return ToyGraph(
        nodes=("A", "B", "C", "D", "E"),
        edges=(("A", "B"), ("B", "C"), ("C", "D"), ("X", "E"), ("E", "Y")),
        probe="A",
        control="E",
        outside=("X", "Y"),
        repeats=repeats,
    )


def toy_corpus(graph: ToyGraph) -> Corpus:
    """
    Ingested corpus of the graph: every node is a kept account, outside
    counterparties are not, and every edge becomes ``repeats`` transfers, one
    every four days.
    """
    transactions = []
    for e, (sender, receiver) in enumerate(graph.edges):
        for r in range(graph.repeats):
            transactions.append(
                RawTransaction(
                    tx_hash=f"0x{e * 1000 + r + 1:064x}",
                    from_address=graph.address(sender),
                    to_address=graph.address(receiver),
                    value_wei=(r + 1) * 10**17,
                    block_timestamp=_START + (r * len(graph.edges) + e) * 4 * _DAY,
                )
            )
    accounts = [AccountMeta(graph.address(n)) for n in graph.nodes]
    return Corpus(transactions=transactions, accounts=accounts)


@dataclass
class ProximityReport:
    """
    Distances from the probe's vector to every other node's address embedding.

    :param mode: How the probe's vector was obtained.
    :type mode: RepresentationMode
    :param distances: Node name to distance.
    :type distances: Dict[str, float]
    :param hops: Node name to hop distance; unreachable nodes are absent.
    :type hops: Dict[str, int]
    :param control: Name of the control node.
    :type control: str
    :param seeds: Training seeds the distances are averaged over.
    :type seeds: List[int]
    """

    mode: RepresentationMode
    distances: Dict[str, float]
    hops: Dict[str, int]
    control: str
    seeds: List[int] = field(default_factory=list)

    @property
    def neighbor_distance(self) -> float:
        near = [d for n, d in self.distances.items() if 1 <= self.hops.get(n, 0) <= 3]
        return float(np.mean(near))

    @property
    def control_distance(self) -> float:
        return self.distances[self.control]

    @property
    def separated(self) -> bool:
        return self.neighbor_distance < self.control_distance

    def rows(self) -> List[Tuple[str, str, float]]:
        """
        :return: ``(node, hops, distance)`` rows; unreachable nodes have hops ``none``.
        :rtype: List[Tuple[str, str, float]]
        """
        return [
            (n, str(self.hops[n]) if n in self.hops else "none", d)
            for n, d in self.distances.items()
        ]


def embedding_distance(vector: np.ndarray, embedding: np.ndarray) -> float:
    """
    Euclidean distance between a probe vector and an address embedding. A
    vector wider than the embedding (one block per encoder stack) is compared
    block by block and the block distances averaged.

    :param vector: Representation or address embedding of the probe, ``k*d`` values.
    :type vector: np.ndarray
    :param embedding: Address embedding, ``d`` values.
    :type embedding: np.ndarray
    :return: The distance.
    :rtype: float
    :raises ValueError: If the width of ``vector`` is not a multiple of ``d``.
    """
    d = embedding.shape[-1]
    if vector.shape[-1] % d:
        raise ValueError(f"Vector of width {vector.shape[-1]} does not split into blocks of {d}")
    blocks = vector.astype(np.float64).reshape(-1, d)
    return float(np.mean(np.linalg.norm(blocks - embedding.astype(np.float64), axis=1)))


def three_hop_probe(
    params: ModelParams,
    sequences: SequenceCorpus,
    graph: ToyGraph,
    mode: RepresentationMode = RepresentationMode.SELF_TOKEN,
) -> ProximityReport:
    """
    Distances from the probe node's vector, in the requested mode, to the
    address embedding of every other node of the graph.

    :param params: Parameters trained on ``sequences``.
    :type params: ModelParams
    :param sequences: Sequences of the graph's accounts.
    :type sequences: SequenceCorpus
    :param graph: The toy graph.
    :type graph: ToyGraph
    :param mode: How the probe's vector is obtained.
    :type mode: RepresentationMode
    :return: The report.
    :rtype: ProximityReport
    """
    probe_id = sequences.vocab.id_of(graph.address(graph.probe))
    pieces = [seq for seq in sequences.sequences if seq.owner == probe_id]
    probe = extract_representation(pieces, params, mode).vector
    table = params["emb.address"]
    distances = {
        n: embedding_distance(probe, table[sequences.vocab.id_of(graph.address(n))])
        for n in graph.nodes
        if n != graph.probe
    }
    return ProximityReport(mode, distances, graph.hops(), graph.control)


def three_hop_experiment(
    config: TrainConfig,
    seeds: Sequence[int],
    graph: Optional[ToyGraph] = None,
) -> Dict[RepresentationMode, ProximityReport]:
    """
    Pre-train one model per seed on the toy graph and average the probe
    distances over the seeds, in both representation modes. Zero epochs gives
    the untrained baseline.

    :param config: Training settings; the seed is replaced by each of ``seeds``.
    :type config: TrainConfig
    :param seeds: Training seeds.
    :type seeds: Sequence[int]
    :param graph: The toy graph; :func:`toy_graph` by default.
    :type graph: Optional[ToyGraph]
    :return: Seed-averaged report per mode.
    :rtype: Dict[RepresentationMode, ProximityReport]
    """
    graph = graph or toy_graph()
    max_len = config.model_config.max_seq_len
    sequences = build_sequence_corpus(toy_corpus(graph), SeqGenConfig(max_seq_len=max_len))
    totals: Dict[RepresentationMode, Dict[str, float]] = {m: {} for m in RepresentationMode}
    for seed in seeds:
        seeded = TrainConfig.from_dict({**config.to_dict(), "seed": seed})
        params = pretrain(sequences, seeded).params
        for mode in RepresentationMode:
            report = three_hop_probe(params, sequences, graph, mode)
            for n, d in report.distances.items():
                totals[mode][n] = totals[mode].get(n, 0.0) + d / len(seeds)
            logging.debug(f"Seed {seed}, {mode.value}: {report.distances}")

    reports = {
        mode: ProximityReport(mode, totals[mode], graph.hops(), graph.control, list(seeds))
        for mode in RepresentationMode
    }
    for mode, report in reports.items():
        logging.info(
            f"Three-hop probe ({mode.value}): neighbours {report.neighbor_distance:.4f}, "
            f"control {report.control_distance:.4f}"
        )
    return reports
