import csv
import hashlib
from typing import Dict, Iterable, List, Mapping, Sequence, TextIO

from ethseq.errors import SchemaError

PAD_ID = 0
MASK_ID = 1
UNK_ID = 2
SPECIAL_TOKENS = ("[PAD]", "[MASK]", "[UNK]")
NUM_SPECIALS = len(SPECIAL_TOKENS)


class Vocabulary:
    """
    Address vocabulary. Ids 0..2 are the special tokens; real addresses follow
    in ascending address order so the mapping is a pure function of the set of
    addresses.
    """

    def __init__(self, frequencies: Mapping[str, int]) -> None:
        """
        :param frequencies: Address to number of occurrences in the corpus.
        :type frequencies: Mapping[str, int]
        """
        self._addresses: List[str] = [*SPECIAL_TOKENS, *sorted(frequencies)]
        self._ids: Dict[str, int] = {
            a: i for i, a in enumerate(self._addresses) if i >= NUM_SPECIALS
        }
        self._frequencies: List[int] = [0] * NUM_SPECIALS + [
            int(frequencies[a]) for a in self._addresses[NUM_SPECIALS:]
        ]

    def __len__(self) -> int:
        return len(self._addresses)

    def __contains__(self, address: object) -> bool:
        return address in self._ids

    def id_of(self, address: str) -> int:
        """
        :param address: Canonical address.
        :type address: str
        :return: The address id, or the [UNK] id for unseen addresses.
        :rtype: int
        """
        return self._ids.get(address, UNK_ID)

    def ids_of(self, addresses: Iterable[str]) -> List[int]:
        return [self.id_of(a) for a in addresses]

    def address_of(self, idx: int) -> str:
        return self._addresses[idx]

    def frequency(self, idx: int) -> int:
        return self._frequencies[idx]

    @property
    def addresses(self) -> Sequence[str]:
        return self._addresses

    def content_hash(self) -> str:
        """
        :return: SHA-256 over the id-ordered address list.
        :rtype: str
        """
        digest = hashlib.sha256()
        for address, freq in zip(self._addresses, self._frequencies):
            digest.update(f"{address},{freq}\n".encode("utf-8"))
        return digest.hexdigest()

    def to_csv(self, stream: TextIO) -> None:
        """
        Write ``id,address,frequency`` rows for the real addresses.
        """
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("id", "address", "frequency"))
        for idx in range(NUM_SPECIALS, len(self)):
            writer.writerow((idx, self._addresses[idx], self._frequencies[idx]))

    @classmethod
    def from_csv(cls, stream: TextIO) -> "Vocabulary":
        """
        Read a file written by ``to_csv``.

        :raises SchemaError: On missing columns or ids that do not match the address order.
        """
        reader = csv.DictReader(stream)
        missing = {"id", "address", "frequency"} - set(reader.fieldnames or [])
        if missing:
            raise SchemaError(f"vocabulary CSV is missing column(s): {', '.join(sorted(missing))}")
        rows = [(int(r["id"]), r["address"], int(r["frequency"])) for r in reader]
        vocab = cls({address: freq for _, address, freq in rows})
        for idx, address, _ in rows:
            if vocab.id_of(address) != idx:
                raise SchemaError(f"vocabulary id {idx} does not match address {address}")
        return vocab
