from typing import Any, Dict, Optional

from ethseq.configurable import Configurable
from ethseq.errors import SynthConfigError

PRESETS: Dict[str, Dict[str, Any]] = {
    "tiny": {"n_accounts": 200, "n_tx": 6000, "n_pairs": 10},
    "desk": {"n_accounts": 10000, "n_tx": 300000, "n_pairs": 200},
}


class SynthConfig(Configurable):
    """
    Configuration class for the synthetic corpus generator.

    :param n_accounts: Planted accounts (normal, phishing and paired) (default: 200).
    :type n_accounts: int
    :param n_tx: Approximate number of external transactions (default: 6000).
    :type n_tx: int
    :param n_counterparties: Size of the counterparty population the planted
                             accounts trade with; ``None`` means ``n_accounts`` (default: None).
    :type n_counterparties: Optional[int]
    :param n_contracts: Hub contracts at the top of the popularity ranking;
                        ``None`` means 1% of the counterparties, at least 2 (default: None).
    :type n_contracts: Optional[int]
    :param powerlaw_exponent: Exponent of the counterparty frequency distribution;
                              rank ``r`` is drawn with weight
                              ``(r + 1) ** (-1 / (exponent - 1))`` (default: 2.0).
    :type powerlaw_exponent: float
    :param burst_rate: Chance that a transaction repeats the previous one's counterparty
                       within hours; close to the raw repetitiveness ratio (default: 0.48).
    :type burst_rate: float
    :param phisher_fraction: Share of phishing accounts among the unpaired ones (default: 0.1).
    :type phisher_fraction: float
    :param phisher_in_out_ratio: Expected incoming to outgoing ratio of phishers (default: 1.25).
    :type phisher_in_out_ratio: float
    :param normal_in_out_ratio: Expected incoming to outgoing ratio of normal
                                accounts (default: 0.385).
    :type normal_in_out_ratio: float
    :param n_pairs: Planted pairs of accounts controlled by one entity (default: 10).
    :type n_pairs: int
    :param pair_shared_counterparties: Private counterparties shared by the two
                                       sides of a pair (default: 3).
    :type pair_shared_counterparties: int
    :param token_event_rate: Share of transfers to token contracts that emit an
                             ERC-20 transfer to an EOA (default: 0.1).
    :type token_event_rate: float
    :param failed_rate: Share of failed transactions (default: 0.02).
    :type failed_rate: float
    :param seed: Generator seed (default: 0).
    :type seed: int
    """

    def __init__(
        self,
        n_accounts: int = 200,
        n_tx: int = 6000,
        n_counterparties: Optional[int] = None,
        n_contracts: Optional[int] = None,
        powerlaw_exponent: float = 2.0,
        burst_rate: float = 0.48,
        phisher_fraction: float = 0.1,
        phisher_in_out_ratio: float = 1.25,
        normal_in_out_ratio: float = 0.385,
        n_pairs: int = 10,
        pair_shared_counterparties: int = 3,
        token_event_rate: float = 0.1,
        failed_rate: float = 0.02,
        seed: int = 0,
    ) -> None:
        self.n_accounts = n_accounts
        self.n_tx = n_tx
        self.n_counterparties = n_counterparties if n_counterparties is not None else n_accounts
        self.n_contracts = (
            n_contracts if n_contracts is not None else max(2, self.n_counterparties // 100)
        )
        self.powerlaw_exponent = powerlaw_exponent
        self.burst_rate = burst_rate
        self.phisher_fraction = phisher_fraction
        self.phisher_in_out_ratio = phisher_in_out_ratio
        self.normal_in_out_ratio = normal_in_out_ratio
        self.n_pairs = n_pairs
        self.pair_shared_counterparties = pair_shared_counterparties
        self.token_event_rate = token_event_rate
        self.failed_rate = failed_rate
        self.seed = seed
        self.validate()

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> "SynthConfig":
        """
        :param name: ``tiny`` (200 accounts) or ``desk`` (10k accounts).
        :type name: str
        :raises SynthConfigError: For an unknown preset.
        """
        if name not in PRESETS:
            raise SynthConfigError(f"Unknown preset '{name}', expected one of {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})

    @property
    def n_unpaired(self) -> int:
        return self.n_accounts - 2 * self.n_pairs

    @property
    def n_phishers(self) -> int:
        return int(round(self.phisher_fraction * self.n_unpaired))

    @property
    def pair_tx(self) -> int:
        # every side of a pair trades twice with each private counterparty
        return 2 * 2 * self.pair_shared_counterparties * self.n_pairs

    def validate(self) -> None:
        """
        :raises SynthConfigError: If the configuration cannot be generated.
        """
        for name in ("burst_rate", "phisher_fraction", "token_event_rate", "failed_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SynthConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.burst_rate >= 1.0:
            raise SynthConfigError("burst_rate must be below 1")
        if self.powerlaw_exponent <= 1.0:
            raise SynthConfigError(
                f"powerlaw_exponent must exceed 1, got {self.powerlaw_exponent}"
            )
        if self.n_accounts < 1 or self.n_pairs < 0:
            raise SynthConfigError("n_accounts must be positive and n_pairs non-negative")
        if self.n_pairs > self.n_accounts / 2:
            raise SynthConfigError(
                f"{self.n_pairs} pairs need more than the {self.n_accounts} accounts"
            )
        if self.n_pairs and self.pair_shared_counterparties < 2:
            raise SynthConfigError("pairs need at least 2 shared counterparties")
        if not 0 < self.n_contracts <= self.n_counterparties - 2:
            raise SynthConfigError(
                f"{self.n_contracts} contracts do not fit {self.n_counterparties} counterparties"
            )
        if self.n_tx < self.pair_tx + 3 * self.n_unpaired:
            raise SynthConfigError(
                f"n_tx {self.n_tx} cannot give every account 3 transactions"
            )
        if min(self.phisher_in_out_ratio, self.normal_in_out_ratio) <= 0:
            raise SynthConfigError("in/out ratios must be positive")
