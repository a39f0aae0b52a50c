from typing import Dict, Sequence, Tuple

import numpy as np


def warmup_lr(step: int, total_steps: int, learning_rate: float, warmup_fraction: float) -> float:
    """
    Learning rate of a 1-based step: linear rise over the first
    ``warmup_fraction`` of the steps (at least one step), constant afterwards.
    """
    warmup = max(1, int(np.ceil(warmup_fraction * total_steps)))
    return learning_rate * min(1.0, step / warmup)


def global_norm(tensors: Dict[str, np.ndarray]) -> float:
    total = sum(float(np.sum(np.square(v, dtype=np.float64))) for v in tensors.values())
    return float(np.sqrt(total))


def clip_by_global_norm(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """
    Scale ``grads`` in place so their global norm is at most ``max_norm``.

    :return: The norm before clipping.
    :rtype: float
    """
    norm = global_norm(grads)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for value in grads.values():
            value *= value.dtype.type(scale)
    return norm


class Adam:
    """
    Adaptive moment estimation over named tensors, updating them in place.

    :param tensors: Tensors to optimize.
    :type tensors: Dict[str, np.ndarray]
    :param beta1: First moment decay.
    :type beta1: float
    :param beta2: Second moment decay.
    :type beta2: float
    :param eps: Denominator floor.
    :type eps: float
    :param frozen_rows: ``(tensor, row)`` pairs kept at zero after every step.
    :type frozen_rows: Sequence[Tuple[str, int]]
    """

    def __init__(
        self,
        tensors: Dict[str, np.ndarray],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        frozen_rows: Sequence[Tuple[str, int]] = (),
    ) -> None:
        self._tensors = tensors
        self._frozen_rows = list(frozen_rows)
        self._beta1 = beta1
        self._beta2 = beta2
        self._eps = eps
        self._m: Dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in tensors.items()}
        self._v: Dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in tensors.items()}
        self._t = 0

    @property
    def steps(self) -> int:
        return self._t

    def step(self, grads: Dict[str, np.ndarray], lr: float) -> None:
        """
        Apply one update.

        :param grads: Gradients, keyed like the parameters.
        :type grads: Dict[str, np.ndarray]
        :param lr: Step size of this update.
        :type lr: float
        """
        self._t += 1
        b1, b2 = self._beta1, self._beta2
        correction1 = 1.0 - b1**self._t
        correction2 = 1.0 - b2**self._t
        for name, value in self._tensors.items():
            g = grads[name]
            m, v = self._m[name], self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (lr / correction1) * m / (np.sqrt(v / correction2) + self._eps)
            value -= update.astype(value.dtype)
        for name, row in self._frozen_rows:
            self._tensors[name][row] = 0.0
