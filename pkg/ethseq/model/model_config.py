from enum import Enum
from typing import List, Optional

from ethseq.configurable import Configurable


class View(Enum):
    FULL = "FULL"
    IN = "IN"
    OUT = "OUT"


class RepresentationMode(Enum):
    SELF_TOKEN = "SELF_TOKEN"
    ADDRESS_EMBEDDING = "ADDRESS_EMBEDDING"


class ModelConfig(Configurable):
    """
    Configuration class for the encoder.

    :param hidden: Embedding and hidden width d (default: 64).
    :type hidden: int
    :param layers: Number of Transformer layers per encoder stack (default: 8).
    :type layers: int
    :param heads: Attention heads; must divide ``hidden`` (default: 2).
    :type heads: int
    :param ffn_hidden: Feed-forward inner width; ``None`` means ``hidden``.
    :type ffn_hidden: Optional[int]
    :param max_seq_len: Rows of the position table (default: 100).
    :type max_seq_len: int
    :param dropout: Dropout ratio on attention weights and sub-layer outputs (default: 0.2).
    :type dropout: float
    :param tranx_features: Add the account type, direction, amount, count and time
                           embeddings to the address and position embeddings (default: True).
    :type tranx_features: bool
    :param in_out_separation: Run separate encoder stacks over the full, incoming
                              and outgoing views and concatenate their outputs (default: False).
    :type in_out_separation: bool
    :param erc20_gate: Fuse the addresses of ERC-20 recipients into the contract's
                       address embedding through a learned gate (default: False).
    :type erc20_gate: bool
    :param init_std: Standard deviation of the truncated normal initializer (default: 0.02).
    :type init_std: float
    :param ln_eps: Layer normalization epsilon (default: 1e-6).
    :type ln_eps: float
    """

    def __init__(
        self,
        hidden: int = 64,
        layers: int = 8,
        heads: int = 2,
        ffn_hidden: Optional[int] = None,
        max_seq_len: int = 100,
        dropout: float = 0.2,
        tranx_features: bool = True,
        in_out_separation: bool = False,
        erc20_gate: bool = False,
        init_std: float = 0.02,
        ln_eps: float = 1e-6,
    ) -> None:
        if hidden % heads != 0:
            raise ValueError(f"hidden ({hidden}) must be a multiple of heads ({heads})")
        if not 0.0 <= dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {dropout}")
        self.hidden = hidden
        self.layers = layers
        self.heads = heads
        self.ffn_hidden = ffn_hidden if ffn_hidden is not None else hidden
        self.max_seq_len = max_seq_len
        self.dropout = dropout
        self.tranx_features = tranx_features
        self.in_out_separation = in_out_separation
        self.erc20_gate = erc20_gate
        self.init_std = init_std
        self.ln_eps = ln_eps

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    @property
    def views(self) -> List[View]:
        """
        :return: The encoder stacks in concatenation order.
        :rtype: List[View]
        """
        return [View.FULL, View.IN, View.OUT] if self.in_out_separation else [View.FULL]

    @property
    def representation_size(self) -> int:
        return self.hidden * len(self.views)
