"""Deterministic seed derivation and random-generator construction.

All stochastic operations in the pipeline draw from a counter-based Philox
generator keyed by an explicit 64-bit seed. Sub-seeds for independent
operations (per side, per group, per element) are derived by mixing stable
tokens into the base seed, so results never depend on global state or on
iteration order elsewhere in the program.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    # Finalizer from the splitmix64 generator; good 64-bit avalanche.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _token_to_int(token: int | str) -> int:
    if isinstance(token, str):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    return token & _MASK64


def derive_seed(base_seed: int, *tokens: int | str) -> int:
    """Mix tokens into a base seed, producing a new 64-bit seed.

    Stable across runs and platforms (no use of Python's randomized hash).
    """
    state = base_seed & _MASK64
    for token in tokens:
        state = _splitmix64(state ^ _token_to_int(token))
    return state


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
