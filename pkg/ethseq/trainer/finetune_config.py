from ethseq.configurable import Configurable


class FinetuneConfig(Configurable):
    """
    Configuration class for the classification head and for fine-tuning.

    :param head_hidden: Width of the head's hidden layer (default: 128).
    :type head_hidden: int
    :param head_dropout: Dropout ratio on the head's hidden layer (default: 0.2).
    :type head_dropout: float
    :param epochs: Passes over the labeled training accounts (default: 20).
    :type epochs: int
    :param batch_size: Accounts per step (default: 64).
    :type batch_size: int
    :param head_learning_rate: Adam step size of the head (default: 1e-3).
    :type head_learning_rate: float
    :param encoder_learning_rate: Adam step size of the encoder when it is
                                  trained jointly with the head (default: 1e-4).
    :type encoder_learning_rate: float
    :param pretrained: Start the encoder from the pre-trained checkpoint; when
                       off, from a fresh initialization (default: True).
    :type pretrained: bool
    :param threshold: Score above which an account is predicted positive (default: 0.3).
    :type threshold: float
    :param test_fraction: Share of the labeled accounts held out (default: 0.3).
    :type test_fraction: float
    :param seed: Seed of the split, the head and the dropout masks (default: 0).
    :type seed: int
    """

    def __init__(
        self,
        head_hidden: int = 128,
        head_dropout: float = 0.2,
        epochs: int = 20,
        batch_size: int = 64,
        head_learning_rate: float = 1e-3,
        encoder_learning_rate: float = 1e-4,
        pretrained: bool = True,
        threshold: float = 0.3,
        test_fraction: float = 0.3,
        seed: int = 0,
    ) -> None:
        if not 0.0 < test_fraction < 1.0:
            raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
        self.head_hidden = head_hidden
        self.head_dropout = head_dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.head_learning_rate = head_learning_rate
        self.encoder_learning_rate = encoder_learning_rate
        self.pretrained = pretrained
        self.threshold = threshold
        self.test_fraction = test_fraction
        self.seed = seed
