"""
Checkpoint file.

Layout: a little-endian u64 header length, a UTF-8 JSON header, then one raw
little-endian blob per tensor in header order. The header holds the format
version, the training configuration and its hash, the vocabulary hash, the
epoch, the loss history and the name, shape and dtype of every tensor.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from ethseq.errors import CorpusFormatError, DataError
from ethseq.model.params import ModelParams
from ethseq.trainer.train_config import TrainConfig

FORMAT_VERSION = 1

_HEADER_LEN = struct.Struct("<Q")


@dataclass
class Checkpoint:
    """
    Trained parameters together with everything needed to reproduce them.

    :param params: Model parameters.
    :type params: ModelParams
    :param config: Training configuration.
    :type config: TrainConfig
    :param vocab_hash: Content hash of the vocabulary the address table indexes.
    :type vocab_hash: str
    :param epoch: Completed epochs.
    :type epoch: int
    :param loss_history: Mean loss of every completed epoch.
    :type loss_history: List[float]
    """

    params: ModelParams
    config: TrainConfig
    vocab_hash: str
    epoch: int = 0
    loss_history: List[float] = field(default_factory=list)

    def equals(self, other: "Checkpoint") -> bool:
        """
        Bit-exact equality of parameters and metadata.
        """
        return (
            self.params.equals(other.params)
            and self.config == other.config
            and self.vocab_hash == other.vocab_hash
            and self.epoch == other.epoch
            and self.loss_history == other.loss_history
        )


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> None:
    """
    Write a checkpoint.

    :param path: Destination file.
    :type path: Union[str, Path]
    :param checkpoint: The checkpoint.
    :type checkpoint: Checkpoint
    """
    tensors = [
        {"name": name, "shape": list(value.shape), "dtype": value.dtype.newbyteorder("<").str}
        for name, value in checkpoint.params
    ]
    header: Dict[str, Any] = {
        "version": FORMAT_VERSION,
        "config": checkpoint.config.to_dict(),
        "config_hash": checkpoint.config.config_hash(),
        "vocab_hash": checkpoint.vocab_hash,
        "epoch": checkpoint.epoch,
        "loss_history": checkpoint.loss_history,
        "tensors": tensors,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as stream:
        stream.write(_HEADER_LEN.pack(len(blob)))
        stream.write(blob)
        for entry, (_, value) in zip(tensors, checkpoint.params):
            stream.write(np.ascontiguousarray(value, dtype=entry["dtype"]).tobytes())
    logging.info(f"Saved checkpoint of epoch {checkpoint.epoch} to {path}")


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint written by ``save_checkpoint``.

    :param path: Checkpoint file.
    :type path: Union[str, Path]
    :return: The checkpoint.
    :rtype: Checkpoint
    :raises DataError: If the file does not exist.
    :raises CorpusFormatError: If it is truncated or its header is corrupt.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Checkpoint not found: {path}")
    data = path.read_bytes()
    if len(data) < _HEADER_LEN.size:
        raise CorpusFormatError(f"Checkpoint {path} is truncated.")
    (length,) = _HEADER_LEN.unpack_from(data)
    offset = _HEADER_LEN.size + length
    try:
        header = json.loads(data[_HEADER_LEN.size : offset].decode("utf-8"))
    except ValueError as e:
        raise CorpusFormatError(f"Checkpoint {path} has a corrupt header: {e}")
    if header.get("version") != FORMAT_VERSION:
        raise CorpusFormatError(
            f"Checkpoint {path} has unsupported version {header.get('version')}."
        )

    config = TrainConfig.from_dict(header["config"])
    tensors: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        end = offset + count * dtype.itemsize
        if end > len(data):
            raise CorpusFormatError(f"Checkpoint {path} is truncated in tensor {entry['name']}.")
        value = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        tensors[entry["name"]] = value.reshape(entry["shape"]).astype(dtype.newbyteorder("="))
        offset = end
    if offset != len(data):
        raise CorpusFormatError(f"Checkpoint {path} has {len(data) - offset} trailing bytes.")

    return Checkpoint(
        params=ModelParams(tensors, config.model_config),
        config=config,
        vocab_hash=header["vocab_hash"],
        epoch=header["epoch"],
        loss_history=[float(x) for x in header["loss_history"]],
    )
