"""
Samplers
Seeded binomial and multinomial draws for the null-model generators
"""

import logging
import math

import numpy as np

from core_stats.errors import InvalidProbability

logger = logging.getLogger(__name__)

# frequency vectors must sum to one within this tolerance
SUM_TOLERANCE = 1e-12

DRAW_STREAM = 0
FREQUENCY_STREAM = 1


def variant_rng(seed, index, stream=DRAW_STREAM):
    """
    Independent generator for one variant

    Each (seed, stream, index) triple maps to its own SeedSequence child, so
    a variant's draws do not depend on how many variants came before it or
    on which worker generates it.

    Args:
        seed: Non-negative 64-bit integer
        index: 0-based variant index
        stream: DRAW_STREAM for genotype draws, FREQUENCY_STREAM for
            synthetic source frequencies

    Returns:
        numpy Generator
    """
    if seed < 0 or index < 0:
        raise InvalidProbability(f"Seed and variant index must be non-negative, got {seed}, {index}")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index))))


def check_probabilities(probs):
    """
    Validate a frequency vector

    Raises:
        InvalidProbability: entry outside [0, 1], not finite, or sum != 1
    """
    for p in probs:
        if not math.isfinite(p) or p < 0.0 or p > 1.0:
            raise InvalidProbability(f"Probabilities must lie in [0, 1], got {tuple(probs)}")
    if abs(math.fsum(probs) - 1.0) > SUM_TOLERANCE:
        raise InvalidProbability(f"Probabilities must sum to 1, got {tuple(probs)} (sum {math.fsum(probs)!r})")


def _check_trials(n):
    if int(n) != n or n < 0:
        raise InvalidProbability(f"Number of trials must be a non-negative integer, got {n}")


def binomial_draw(rng, n, p):
    """
    One Binomial(n, p) draw

    Args:
        rng: numpy Generator
        n: Non-negative number of trials
        p: Success probability in [0, 1]

    Returns:
        int; exactly 0 for p = 0 and n for p = 1
    """
    _check_trials(n)
    if not math.isfinite(p) or p < 0.0 or p > 1.0:
        raise InvalidProbability(f"Binomial probability must lie in [0, 1], got {p}")
    if n == 0 or p == 0.0:
        return 0
    if p == 1.0:
        return int(n)
    return int(rng.binomial(int(n), p))


def multinomial_draw(rng, n, probs):
    """
    One Multinomial(n, probs) draw via sequential conditional binomials

    Args:
        rng: numpy Generator
        n: Non-negative number of trials
        probs: Category probabilities summing to 1

    Returns:
        Tuple of counts summing to n
    """
    _check_trials(n)
    check_probabilities(probs)

    counts = []
    remaining_n = int(n)
    remaining_p = 1.0
    for p in probs[:-1]:
        if remaining_n == 0 or remaining_p <= 0.0:
            counts.append(0)
            continue
        conditional = min(1.0, max(0.0, p / remaining_p))
        drawn = binomial_draw(rng, remaining_n, conditional)
        counts.append(drawn)
        remaining_n -= drawn
        remaining_p -= p
    counts.append(remaining_n)
    return tuple(counts)
