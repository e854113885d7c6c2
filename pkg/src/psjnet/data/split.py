"""Seeded random partition of sequences into train/validation/test."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, SplitError

DEFAULT_FRACTIONS = (0.75, 0.15, 0.10)


def split_sizes(n, fractions):
    """Largest-remainder apportionment: each size is within 1 of ``n * f``."""
    exact = [n * f for f in fractions]
    sizes = [math.floor(x) for x in exact]
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split_dataset(sequences, fractions=DEFAULT_FRACTIONS, seed=0):
    """Return ``(train, valid, test)`` lists; order inside each part follows the input."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ConfigError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    n = len(sequences)
    parts = sum(1 for f in fractions if f > 0)
    if n < parts:
        raise SplitError(f"{n} sequences cannot fill {parts} non-empty parts")
    sizes = split_sizes(n, fractions)
    perm = np.random.default_rng([seed, 0x5B17]).permutation(n)
    bounds = np.cumsum([0] + sizes)
    out = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        idx = np.sort(perm[lo:hi])
        out.append([sequences[i] for i in idx])
    return tuple(out)
