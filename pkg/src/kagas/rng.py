"""Seeded random-number streams.

All randomness in the package flows from a single integer seed. Two stream
families are used:

* The kinetic Monte Carlo cores run a xoshiro256** generator whose 256-bit
  state is derived from ``(seed, stream)`` by iterating splitmix64, so
  replicas get decorrelated, reproducible streams (see :func:`xoshiro_state`).
* Sampling and analysis code (Bernoulli fields, bootstrap resampling) uses
  numpy generators keyed by ``SeedSequence(seed, spawn_key=(stream,))``
  (see :func:`numpy_stream`).

Both derivations are pure functions of ``(seed, stream)``; no hidden entropy.
"""

from __future__ import annotations

import numpy as np

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)


def splitmix64(x: np.uint64) -> tuple[np.uint64, np.uint64]:
    """One splitmix64 step: returns (new_state, output)."""
    with np.errstate(over="ignore"):
        x = np.uint64(x) + _SPLITMIX_GAMMA
        z = x
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return x, z


def xoshiro_state(seed: int, stream: int = 0) -> np.ndarray:
    """Derive a 4-word xoshiro256** state from (seed, stream).

    The derivation chains splitmix64 over ``seed`` then ``stream`` so that
    distinct replica indices give independent streams for the same seed.
    A zero state is impossible (splitmix64 output of nonzero chains).
    """
    x = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    x, _ = splitmix64(x)
    with np.errstate(over="ignore"):
        x = x ^ (np.uint64(stream & 0xFFFFFFFFFFFFFFFF) * np.uint64(0xD1342543DE82EF95))
    state = np.empty(4, dtype=np.uint64)
    for i in range(4):
        x, out = splitmix64(x)
        state[i] = out
    if not state.any():
        state[0] = np.uint64(1)
    return state


def numpy_stream(seed: int, *stream: int) -> np.random.Generator:
    """Numpy generator for analysis-side randomness, keyed by (seed, *stream)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream)))
