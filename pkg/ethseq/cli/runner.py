import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Type, TypeVar

import numpy as np
import yaml

from ethseq.cli.arguments import Stage, build_parser
from ethseq.cli.manifest import RunManifest, stage_seed, write_manifest
from ethseq.configurable import Configurable
from ethseq.errors import CorpusFormatError, DataError, DivergenceError, EthSeqError, UsageError
from ethseq.ingest.corpus_io import read_corpus, write_corpus
from ethseq.ingest.csv_parser import RowDiagnostic, parse_labels
from ethseq.ingest.ingest_config import IngestConfig
from ethseq.ingest.loader import ingest_files
from ethseq.ingest.records import AccountLabel
from ethseq.model.model_config import ModelConfig, RepresentationMode
from ethseq.model.representation import extract_representations
from ethseq.model.representation_io import (
    RepresentationSet,
    load_representations,
    save_representations,
)
from ethseq.negsample.frequency_table import build_frequency_table
from ethseq.negsample.negsample_config import STRATEGY_FLAGS, NegSampleConfig
from ethseq.seqgen.pipeline import build_sequence_corpus
from ethseq.seqgen.seqgen_config import SeqGenConfig
from ethseq.seqgen.sequence_io import SequenceCorpus, read_sequences, write_sequences
from ethseq.seqgen.vocabulary import Vocabulary
from ethseq.synthgen.generator import (
    KINDS_FILE,
    LABELS_FILE,
    TOKEN_TRANSFERS_FILE,
    TRANSACTIONS_FILE,
    generate,
    write_synthetic,
)
from ethseq.synthgen.synth_config import SynthConfig
from ethseq.tasks.attention_diag import attention_by_rank, write_attention_csv
from ethseq.tasks.deanon import deanon_eval, read_pairs
from ethseq.tasks.eval_config import EvalConfig
from ethseq.tasks.metrics import MetricsReport
from ethseq.tasks.phishing import fixed_train_eval, random_representations, scores_report
from ethseq.tasks.three_hop import three_hop_experiment
from ethseq.trainer.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ethseq.trainer.finetune_config import FinetuneConfig
from ethseq.trainer.finetuner import finetune, labeled_accounts, split_accounts
from ethseq.trainer.pretrainer import pretrain
from ethseq.trainer.train_config import TrainConfig

C = TypeVar("C", bound=Configurable)

CORPUS_FILE = "corpus.bin"
SEQUENCES_FILE = "sequences.bin"
VOCAB_FILE = "vocab.csv"
CHECKPOINT_FILE = "checkpoint.bin"
DIVERGED_FILE = "diverged.bin"
METRICS_FILE = "metrics.csv"
HEAD_FILE = "head.npz"
REPRESENTATIONS_FILE = "representations.npz"
ATTENTION_FILE = "attention.csv"
PROBE_FILE = "probe.csv"

_MODES = {"self": RepresentationMode.SELF_TOKEN, "address": RepresentationMode.ADDRESS_EMBEDDING}
_BINARY_LABELS = {AccountLabel.PHISHING: 1, AccountLabel.NORMAL: 0}


def read_config_file(path: str) -> Dict[str, Any]:
    """
    :raises DataError: If the file does not exist.
    """
    if not Path(path).is_file():
        raise DataError(f"Config file not found: {path}")
    with open(path, "r") as ymlfile:
        d: Dict[str, Any] = yaml.safe_load(ymlfile) or {}
        return d


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise DataError(f"Input not found: {p}")
    return p


def _build(cls: Type[C], *layers: Mapping[str, Any]) -> C:
    """
    Construct a config from merged layers, later layers winning. Invalid
    settings surface as usage errors.
    """
    merged: Dict[str, Any] = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    try:
        return cls(**merged)
    except (TypeError, ValueError) as e:
        raise UsageError(f"Invalid {cls.__name__}: {e}")


class Runner:
    """
    Runs one pipeline stage from parsed command-line arguments and writes its
    outputs and manifest into ``--out``.
    """

    def __init__(self, args: Any, sections: Optional[Dict[str, Any]] = None) -> None:
        """
        Initialize the Runner object.

        :param args: Parsed arguments.
        :type args: argparse.Namespace
        :param sections: Config file sections, keyed by config class name.
        :type sections: Optional[Dict[str, Any]]
        """
        self._args = args
        self._stage = Stage(args.stage)
        self._sections = sections or {}
        self._out = Path(args.out)
        self._seed = stage_seed(args.seed, self._stage.value)
        self._manifest = RunManifest(
            subcommand=self._stage.value, seed=args.seed, stage_seed=self._seed
        )

    def _section(self, name: str) -> Dict[str, Any]:
        return dict(self._sections.get(name) or {})

    def _flags(self, *names: str) -> Dict[str, Any]:
        return {n: getattr(self._args, n, None) for n in names}

    def _threads(self) -> Dict[str, Any]:
        return {"threads": self._args.threads} if self._args.threads else {}

    def _input(self, role: str, path: str) -> Path:
        p = _existing(path)
        self._manifest.inputs[role] = str(p)
        return p

    def _output(self, role: str, name: str) -> Path:
        p = self._out / name
        self._manifest.outputs[role] = str(p)
        return p

    def _record(self, config: Configurable) -> None:
        self._manifest.config[type(config).__name__] = config.to_dict()

    def _load_sequences(self) -> SequenceCorpus:
        directory = self._input("sequences", self._args.sequences)
        vocab_path = _existing(str(directory / VOCAB_FILE))
        sequences_path = _existing(str(directory / SEQUENCES_FILE))
        with open(vocab_path, "r", newline="") as stream:
            vocab = Vocabulary.from_csv(stream)
        return read_sequences(sequences_path, vocab)

    def _load_checkpoint(self, sequences: SequenceCorpus) -> Checkpoint:
        checkpoint = load_checkpoint(self._input("checkpoint", self._args.checkpoint))
        if checkpoint.vocab_hash != sequences.vocab.content_hash():
            raise CorpusFormatError(
                f"Checkpoint {self._args.checkpoint} was trained on another vocabulary"
            )
        return checkpoint

    def _binary_labels(self, path: str) -> Dict[str, int]:
        """
        Phishing accounts are positive and normal accounts negative; other labels are left out.
        """
        diagnostics: List[RowDiagnostic] = []
        with open(self._input("labels", path), "r", newline="") as stream:
            labels = parse_labels(stream, diagnostics)
        return {a: _BINARY_LABELS[lab] for a, lab in labels.items() if lab in _BINARY_LABELS}

    def _train_config(self) -> TrainConfig:
        args = self._args
        model = _build(
            ModelConfig,
            self._section("ModelConfig"),
            self._flags(
                "hidden",
                "layers",
                "heads",
                "max_seq_len",
                "dropout",
                "tranx_features",
                "in_out_separation",
                "erc20_gate",
            ),
        )
        strategy = STRATEGY_FLAGS[args.neg_strategy] if args.neg_strategy else None
        neg = _build(
            NegSampleConfig,
            self._section("NegSampleConfig"),
            {"strategy": strategy, **self._flags("pool_size", "batch_sharing")},
        )
        return _build(
            TrainConfig,
            self._section("TrainConfig"),
            self._flags("epochs", "batch_size", "learning_rate", "mask_ratio"),
            self._threads(),
            {"seed": self._seed, "model_config": model, "negsample_config": neg},
        )

    def _eval_config(self) -> EvalConfig:
        section = self._section("EvalConfig")
        head = _build(
            FinetuneConfig,
            self._section("FinetuneConfig"),
            section.pop("finetune_config", None) or {},
            self._flags("threshold"),
            {"seed": self._seed},
        )
        return _build(
            EvalConfig,
            section,
            self._flags("runs", "thresholds", "ks"),
            {"attention_layer": getattr(self._args, "layer", None)},
            {"attention_buckets": getattr(self._args, "buckets", None)},
            self._threads(),
            {"finetune_config": head},
        )

    def _report(self, report: MetricsReport) -> None:
        fmt = self._args.format
        path = self._output("report", f"report.{fmt}")
        with open(path, "w") as stream:
            stream.write(report.to_json() if fmt == "json" else report.to_csv())
        print(report.to_table())

    def _run_synthgen(self) -> None:
        overrides = {
            k: v
            for k, v in self._flags(
                "n_accounts", "n_tx", "n_pairs", "burst_rate", "phisher_fraction"
            ).items()
            if v is not None
        }
        config = SynthConfig.preset(
            self._args.preset,
            **{**self._section("SynthConfig"), **overrides, "seed": self._seed},
        )
        self._record(config)
        corpus = generate(config)
        for role, path in write_synthetic(corpus, self._out).items():
            self._manifest.outputs[role] = str(path)
        self._manifest.results["transactions"] = len(corpus.transactions)
        self._manifest.results["pairs"] = len(corpus.pairs)

    def _run_ingest(self) -> None:
        args = self._args
        if args.data:
            data = self._input("data", args.data)
            transactions = [str(data / TRANSACTIONS_FILE)]
            optional = {
                "tokens": data / TOKEN_TRANSFERS_FILE,
                "labels": data / LABELS_FILE,
                "kinds": data / KINDS_FILE,
            }
            side = {role: str(p) if p.exists() else None for role, p in optional.items()}
        elif args.transactions:
            transactions = args.transactions
            side = {"tokens": args.tokens, "labels": args.labels, "kinds": args.kinds}
        else:
            raise UsageError("ingest needs --data or --transactions")

        tx_paths = [self._input(f"transactions_{i}", p) for i, p in enumerate(transactions)]
        paths = {role: self._input(role, p) if p else None for role, p in side.items()}
        config = _build(
            IngestConfig,
            self._section("IngestConfig"),
            self._flags("min_tx", "max_tx", "shard_rows"),
            self._threads(),
        )
        self._record(config)
        diagnostics: List[RowDiagnostic] = []
        corpus = ingest_files(
            tx_paths, paths["tokens"], paths["labels"], paths["kinds"], config, diagnostics
        )
        write_corpus(self._output("corpus", CORPUS_FILE), corpus)
        self._manifest.results["accounts"] = len(corpus.accounts)
        self._manifest.results["rejected_rows"] = len(diagnostics)

    def _run_build_seqs(self) -> None:
        corpus = read_corpus(self._input("corpus", self._args.corpus))
        config = _build(
            SeqGenConfig,
            self._section("SeqGenConfig"),
            self._flags("max_seq_len", "dedup", "dedup_window_hours"),
        )
        self._record(config)
        sequences = build_sequence_corpus(corpus, config)
        with open(self._output("vocab", VOCAB_FILE), "w", newline="") as stream:
            sequences.vocab.to_csv(stream)
        write_sequences(self._output("sequences", SEQUENCES_FILE), sequences)
        self._manifest.results["raw_ratio"] = sequences.raw_ratio
        self._manifest.results["dedup_ratio"] = sequences.dedup_ratio
        self._manifest.results["pieces"] = len(sequences.sequences)

    def _run_pretrain(self) -> None:
        sequences = self._load_sequences()
        config = self._train_config()
        config.dedup = bool(sequences.config.get("dedup", True))
        self._record(config)
        metrics = self._output("metrics", METRICS_FILE)
        try:
            checkpoint = pretrain(sequences, config, metrics_path=metrics)
        except DivergenceError as e:
            if e.checkpoint is not None:
                save_checkpoint(self._output("diverged", DIVERGED_FILE), e.checkpoint)
            raise
        save_checkpoint(self._output("checkpoint", CHECKPOINT_FILE), checkpoint)
        self._manifest.results["loss_history"] = list(checkpoint.loss_history)

    def _run_finetune(self) -> None:
        sequences = self._load_sequences()
        checkpoint = self._load_checkpoint(sequences)
        labels = self._binary_labels(self._args.labels)
        config = _build(
            FinetuneConfig,
            self._section("FinetuneConfig"),
            self._flags("epochs", "threshold", "pretrained"),
            {"seed": self._seed},
        )
        self._record(config)
        vocab = sequences.vocab
        by_owner = {vocab.id_of(a): y for a, y in labels.items() if a in vocab}
        owners, accounts, y = labeled_accounts(sequences.by_owner(), by_owner)
        train, test = split_accounts(y, config.test_fraction, config.seed)
        tuned, head = finetune(checkpoint, [accounts[i] for i in train], y[train], config)
        test_pieces = {int(owners[i]): accounts[i] for i in test}
        _, vectors = extract_representations(
            test_pieces, tuned.params, threads=self._args.threads or 1
        )
        # extraction returns ascending owner ids, which is the order of ``test``
        report = scores_report(
            "finetune",
            y[test],
            head.predict_proba(vectors),
            config.threshold,
            self._args.thresholds or (),
        )
        save_checkpoint(self._output("checkpoint", CHECKPOINT_FILE), tuned)
        head.save(self._output("head", HEAD_FILE))
        self._report(report)

    def _run_extract(self) -> None:
        sequences = self._load_sequences()
        checkpoint = self._load_checkpoint(sequences)
        mode = _MODES[self._args.mode]
        self._manifest.config["mode"] = mode.value
        owners, vectors = extract_representations(
            sequences.by_owner(), checkpoint.params, mode, threads=self._args.threads or 1
        )
        vocab = sequences.vocab
        reps = RepresentationSet(
            addresses=np.array([vocab.address_of(int(o)) for o in owners], dtype=str),
            vectors=vectors,
            first_seen=np.array([sequences.first_seen[int(o)] for o in owners], dtype=np.int64),
        )
        save_representations(self._output("representations", REPRESENTATIONS_FILE), reps)
        self._manifest.results["accounts"] = len(reps)

    def _run_eval_phish(self) -> None:
        reps = load_representations(self._input("representations", self._args.representations))
        labels = self._binary_labels(self._args.labels)
        config = self._eval_config()
        self._record(config)
        known = [a for a in reps.addresses.tolist() if a in labels]
        vectors = reps.vectors[reps.rows_of(known)]
        y = np.array([labels[a] for a in known], dtype=np.int64)
        if self._args.random_baseline:
            self._manifest.config["random_baseline"] = True
            vectors = random_representations(vectors.shape, self._seed)
        self._report(fixed_train_eval(vectors, y, config))

    def _run_eval_deanon(self) -> None:
        reps = load_representations(self._input("representations", self._args.representations))
        diagnostics: List[RowDiagnostic] = []
        with open(self._input("pairs", self._args.pairs), "r", newline="") as stream:
            pairs = read_pairs(stream, diagnostics)
        config = self._eval_config()
        self._record(config)
        report = deanon_eval(
            pairs,
            reps.addresses.tolist(),
            reps.vectors,
            reps.first_seen,
            config.ks,
            threads=config.threads,
        )
        self._report(report)

    def _run_diag_attention(self) -> None:
        sequences = self._load_sequences()
        checkpoint = self._load_checkpoint(sequences)
        config = self._eval_config()
        self._record(config)
        table = build_frequency_table(sequences.sequences, len(sequences.vocab))
        rows = attention_by_rank(
            checkpoint.params,
            sequences.sequences,
            table,
            layer=config.attention_layer,
            buckets=config.attention_buckets,
        )
        with open(self._output("attention", ATTENTION_FILE), "w", newline="") as stream:
            write_attention_csv(rows, stream)

    def _run_probe_3hop(self) -> None:
        if self._args.seeds < 1:
            raise UsageError(f"--seeds must be at least 1, got {self._args.seeds}")
        config = self._train_config()
        self._record(config)
        seeds = [self._seed + i for i in range(self._args.seeds)]
        reports = three_hop_experiment(config, seeds)
        with open(self._output("probe", PROBE_FILE), "w") as stream:
            stream.write("mode,node,hops,distance\n")
            for mode, report in reports.items():
                for node, hops, distance in report.rows():
                    stream.write(f"{mode.value},{node},{hops},{distance:.8f}\n")
                self._manifest.results[f"separated_{mode.value}"] = report.separated

    _stage_actions: Dict[Stage, Callable[["Runner"], None]] = {
        Stage.SYNTHGEN: _run_synthgen,
        Stage.INGEST: _run_ingest,
        Stage.BUILD_SEQS: _run_build_seqs,
        Stage.PRETRAIN: _run_pretrain,
        Stage.FINETUNE: _run_finetune,
        Stage.EXTRACT: _run_extract,
        Stage.EVAL_PHISH: _run_eval_phish,
        Stage.EVAL_DEANON: _run_eval_deanon,
        Stage.DIAG_ATTENTION: _run_diag_attention,
        Stage.PROBE_3HOP: _run_probe_3hop,
    }

    def run(self) -> RunManifest:
        """
        Run the stage, then write its manifest next to the outputs.

        :return: The manifest.
        :rtype: RunManifest
        """
        action = self._stage_actions.get(self._stage)
        assert action, f"Stage '{self._stage.value}' is not supported."
        start = time.time()
        logging.info(f"Running stage {self._stage.value} (seed {self._args.seed})")
        self._out.mkdir(parents=True, exist_ok=True)
        action(self)
        write_manifest(self._out, self._manifest)
        logging.info(f"Stage {self._stage.value} finished in {time.time() - start:.1f}s")
        return self._manifest


def run(argv: Sequence[str], defaults: Optional[Dict[str, Any]] = None) -> int:
    """
    Command-line entry point.

    :param argv: Arguments after the program name.
    :type argv: Sequence[str]
    :param defaults: Config sections used when ``--config`` is not given.
    :type defaults: Optional[Dict[str, Any]]
    :return: Exit status: 0 on success, 1 on usage errors, 2 on data errors,
             3 on numeric failures.
    :rtype: int
    """
    try:
        args = build_parser().parse_args(list(argv))
        sections = read_config_file(args.config) if args.config else defaults
        Runner(args, sections).run()
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0
    except EthSeqError as e:
        logging.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return 0
