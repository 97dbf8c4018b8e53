"""Deterministic, splittable random streams.

Every stochastic decision in the pipeline draws from a stream addressed by
(master seed, sample index, purpose tokens). Streams are counter-based
(Philox), so results never depend on call order, thread count, or how many
other streams were consumed first.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def token_hash(*tokens) -> int:
    """Stable 64-bit hash of a token sequence (ints and strings)."""
    h = hashlib.blake2b(digest_size=8)
    for tok in tokens:
        if isinstance(tok, (int, np.integer)):
            data = (int(tok) & MASK64).to_bytes(8, "little")
            h.update(b"i")
        elif isinstance(tok, str):
            data = tok.encode("utf-8")
            h.update(b"s")
        else:
            raise TypeError(f"unsupported rng token type: {type(tok)!r}")
        h.update(len(data).to_bytes(4, "little"))
        h.update(data)
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, *tokens) -> np.random.Generator:
    """Independent generator for the stream named by (seed, *tokens)."""
    key = np.array([seed & MASK64, token_hash(*tokens)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *tokens) -> int:
    """64-bit sub-seed for the stream named by (seed, *tokens)."""
    return token_hash(seed & MASK64, *tokens)
