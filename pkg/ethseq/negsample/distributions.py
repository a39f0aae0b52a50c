import numpy as np


def zipfan_prob(rank: int, max_rank: int) -> float:
    """
    Probability of drawing the address at ``rank`` under the rank-based
    log-ratio law. Summed over all ranks the terms telescope to exactly 1.

    :param rank: 0-based rank by descending frequency.
    :type rank: int
    :param max_rank: Number of ranked addresses.
    :type max_rank: int
    :return: ``(log(rank + 2) - log(rank + 1)) / log(max_rank + 1)``.
    :rtype: float
    :raises ValueError: If ``max_rank < 1`` or ``rank`` is out of range.
    """
    if max_rank < 1:
        raise ValueError(f"max_rank must be at least 1, got {max_rank}")
    if not 0 <= rank < max_rank:
        raise ValueError(f"rank {rank} outside [0, {max_rank})")
    return float(np.log1p(1.0 / (rank + 1)) / np.log(max_rank + 1))


def zipfan_probs(max_rank: int) -> np.ndarray:
    """
    Vector form of ``zipfan_prob`` for ranks ``0..max_rank-1``.
    """
    if max_rank < 1:
        raise ValueError(f"max_rank must be at least 1, got {max_rank}")
    ranks = np.arange(max_rank, dtype=np.float64)
    return np.log1p(1.0 / (ranks + 1.0)) / np.log(max_rank + 1.0)


def frequent_prob(freqs: np.ndarray, b: float) -> np.ndarray:
    """
    Frequency-based sampling law ``f_i^b / sum_j f_j^b``. ``b = 0`` is uniform.

    :param freqs: Positive frequencies.
    :type freqs: np.ndarray
    :param b: Non-negative exponent.
    :type b: float
    :return: Probability vector aligned with ``freqs``.
    :rtype: np.ndarray
    :raises ValueError: On an empty vector, non-positive frequencies or negative ``b``.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    if freqs.size == 0:
        raise ValueError("frequent_prob needs at least one frequency")
    if b < 0:
        raise ValueError(f"Exponent b must be non-negative, got {b}")
    if np.any(freqs <= 0):
        raise ValueError("Frequencies must be positive")
    if b == 0:
        return np.full(freqs.shape, 1.0 / freqs.size)
    # Scale by the max first so large frequencies cannot overflow
    weights = np.power(freqs / freqs.max(), b)
    return weights / weights.sum()


def uniform_prob(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"Need at least one address, got {n}")
    return np.full(n, 1.0 / n)
