import argparse
import sys
from enum import Enum
from typing import List, NoReturn

from ethseq.errors import UsageError
from ethseq.negsample.negsample_config import STRATEGY_FLAGS
from ethseq.synthgen.synth_config import PRESETS


class Stage(Enum):
    """Enumeration for the pipeline stages, one per subcommand."""

    SYNTHGEN = "synthgen"
    INGEST = "ingest"
    BUILD_SEQS = "build-seqs"
    PRETRAIN = "pretrain"
    FINETUNE = "finetune"
    EXTRACT = "extract"
    EVAL_PHISH = "eval-phish"
    EVAL_DEANON = "eval-deanon"
    DIAG_ATTENTION = "diag-attention"
    PROBE_3HOP = "probe-3hop"


class ArgumentParser(argparse.ArgumentParser):
    """
    Parser that reports bad flags as a :class:`UsageError` instead of exiting,
    so the runner owns the exit status. Subparsers inherit the class.
    """

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory, created if missing")
    common.add_argument("--seed", type=int, default=0, help="run seed (default: 0)")
    common.add_argument("--threads", type=int, default=None, help="worker cap")
    common.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="report format"
    )
    common.add_argument("--config", default=None, help="YAML file with config sections")
    return common


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--hidden", type=int, help="hidden size")
    parser.add_argument("--layers", type=int, help="Transformer layers")
    parser.add_argument("--heads", type=int, help="attention heads")
    parser.add_argument("--max-seq-len", type=int, help="maximum sequence length")
    parser.add_argument("--dropout", type=float, help="dropout ratio")
    parser.add_argument(
        "--no-tranx-features",
        dest="tranx_features",
        action="store_const",
        const=False,
        help="embed counterparty addresses and positions only",
    )
    parser.add_argument(
        "--inout",
        dest="in_out_separation",
        action="store_const",
        const=True,
        help="separate incoming and outgoing encoder stacks",
    )
    parser.add_argument(
        "--erc20",
        dest="erc20_gate",
        action="store_const",
        const=True,
        help="gate ERC-20 recipient embeddings into the input",
    )


def _add_train_args(parser: argparse.ArgumentParser) -> None:
    _add_model_args(parser)
    parser.add_argument("--epochs", type=int, help="training epochs")
    parser.add_argument("--batch-size", type=int, help="sequences per batch")
    parser.add_argument("--lr", dest="learning_rate", type=float, help="peak learning rate")
    parser.add_argument("--mask-ratio", type=float, help="share of masked positions")
    parser.add_argument(
        "--neg-strategy",
        choices=sorted(STRATEGY_FLAGS),
        help="negative sampling distribution",
    )
    parser.add_argument("--neg-pool-size", dest="pool_size", type=int, help="shared pool size")
    parser.add_argument(
        "--no-batch-sharing",
        dest="batch_sharing",
        action="store_const",
        const=False,
        help="draw a small pool per sequence instead of one per batch",
    )


def _add_sequences_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--sequences", required=True, help="build-seqs output directory"
    )


def build_parser() -> ArgumentParser:
    """
    :return: The parser of every subcommand.
    :rtype: ArgumentParser
    """
    parser = ArgumentParser(
        prog="ethseq",
        description="Account transaction sequences, pre-training and evaluation.",
    )
    sub = parser.add_subparsers(dest="stage", required=True)
    common = _common()

    synth = sub.add_parser(
        Stage.SYNTHGEN.value, parents=[common], help="generate a synthetic corpus"
    )
    synth.add_argument("--preset", choices=sorted(PRESETS), default="tiny")
    synth.add_argument("--n-accounts", type=int)
    synth.add_argument("--n-tx", type=int)
    synth.add_argument("--n-pairs", type=int)
    synth.add_argument("--burst-rate", type=float)
    synth.add_argument("--phisher-fraction", type=float)

    ingest = sub.add_parser(
        Stage.INGEST.value, parents=[common], help="parse and filter CSV exports"
    )
    ingest.add_argument("--data", help="directory holding the synthgen file names")
    ingest.add_argument("--transactions", nargs="+", help="transaction CSV shards")
    ingest.add_argument("--tokens", help="token transfer CSV")
    ingest.add_argument("--labels", help="address,label CSV")
    ingest.add_argument("--kinds", help="contract address list")
    ingest.add_argument("--min-tx", type=int)
    ingest.add_argument("--max-tx", type=int)
    ingest.add_argument("--shard-rows", type=int, help="data rows per parsing shard")

    seqs = sub.add_parser(
        Stage.BUILD_SEQS.value, parents=[common], help="build account sequences"
    )
    seqs.add_argument("--corpus", required=True, help="corpus file written by ingest")
    seqs.add_argument("--no-dedup", dest="dedup", action="store_const", const=False)
    seqs.add_argument("--dedup-window-hours", type=float)
    seqs.add_argument("--max-seq-len", type=int)

    pre = sub.add_parser(
        Stage.PRETRAIN.value, parents=[common], help="pre-train the encoder"
    )
    _add_sequences_arg(pre)
    _add_train_args(pre)

    fine = sub.add_parser(
        Stage.FINETUNE.value, parents=[common], help="fine-tune encoder and head"
    )
    fine.add_argument("--checkpoint", required=True)
    _add_sequences_arg(fine)
    fine.add_argument("--labels", required=True, help="address,label CSV")
    fine.add_argument(
        "--no-pretrain",
        dest="pretrained",
        action="store_const",
        const=False,
        help="start the encoder from a fresh initialization",
    )
    fine.add_argument("--epochs", type=int)
    fine.add_argument("--threshold", type=float)
    fine.add_argument("--thresholds", type=float_list, help="extra thresholds, comma-separated")

    extract = sub.add_parser(
        Stage.EXTRACT.value, parents=[common], help="extract account representations"
    )
    extract.add_argument("--checkpoint", required=True)
    _add_sequences_arg(extract)
    extract.add_argument("--mode", choices=("self", "address"), default="self")

    phish = sub.add_parser(
        Stage.EVAL_PHISH.value, parents=[common], help="phishing detection evaluation"
    )
    phish.add_argument("--representations", required=True)
    phish.add_argument("--labels", required=True, help="address,label CSV")
    phish.add_argument("--runs", type=int)
    phish.add_argument("--threshold", type=float)
    phish.add_argument("--thresholds", type=float_list, help="extra thresholds, comma-separated")
    phish.add_argument(
        "--random-baseline",
        action="store_true",
        help="replace the representations with random vectors of the same shape",
    )

    deanon = sub.add_parser(
        Stage.EVAL_DEANON.value, parents=[common], help="de-anonymization evaluation"
    )
    deanon.add_argument("--representations", required=True)
    deanon.add_argument("--pairs", required=True, help="query,target[,cutoff_timestamp] CSV")
    deanon.add_argument("--ks", type=int_list, help="hit-ratio cut-offs, comma-separated")

    attention = sub.add_parser(
        Stage.DIAG_ATTENTION.value, parents=[common], help="attention by address frequency"
    )
    attention.add_argument("--checkpoint", required=True)
    _add_sequences_arg(attention)
    attention.add_argument("--layer", type=int)
    attention.add_argument("--buckets", type=int)

    probe = sub.add_parser(
        Stage.PROBE_3HOP.value, parents=[common], help="three-hop proximity probe"
    )
    probe.add_argument("--seeds", type=int, default=5, help="training runs to average")
    _add_train_args(probe)
    return parser
