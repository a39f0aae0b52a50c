from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np

from ethseq.errors import CorpusFormatError, DataError

_ARRAYS = ("addresses", "vectors", "first_seen")


@dataclass
class RepresentationSet:
    """
    Extracted account vectors, aligned row by row.

    :param addresses: Account addresses.
    :type addresses: np.ndarray
    :param vectors: Representations, ``(n, D)``.
    :type vectors: np.ndarray
    :param first_seen: First activity of every account, unix seconds.
    :type first_seen: np.ndarray
    """

    addresses: np.ndarray
    vectors: np.ndarray
    first_seen: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.addresses)
        assert len(self.vectors) == n and len(self.first_seen) == n, "Rows must align"

    def __len__(self) -> int:
        return len(self.addresses)

    def rows_of(self, addresses: List[str]) -> np.ndarray:
        row = {a: i for i, a in enumerate(self.addresses.tolist())}
        return np.array([row[a] for a in addresses], dtype=np.int64)


def save_representations(path: Union[str, Path], reps: RepresentationSet) -> None:
    with open(path, "wb") as stream:
        np.savez(
            stream,
            addresses=reps.addresses.astype(str),
            vectors=reps.vectors.astype(np.float32),
            first_seen=reps.first_seen.astype(np.int64),
        )


def load_representations(path: Union[str, Path]) -> RepresentationSet:
    """
    :raises DataError: If the file does not exist.
    :raises CorpusFormatError: If an array is missing.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Representations not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        missing = [name for name in _ARRAYS if name not in data]
        if missing:
            raise CorpusFormatError(f"Representations file {path} lacks {missing}")
        return RepresentationSet(data["addresses"], data["vectors"], data["first_seen"])
