"""Deterministic, platform-stable random stream derivation.

Streams are derived from a master seed plus a tuple of labels via
numpy's SeedSequence spawn-key mechanism. String labels are hashed with
SHA-256 so any descriptive key (optimizer name, cell parameters) maps to
a stable 64-bit word. Distinct label tuples give statistically
independent streams, and the derivation is order-independent across
trials, so parallel execution cannot change results.
"""

import hashlib

import numpy as np

__all__ = ["stream_key", "make_stream"]


def stream_key(label) -> int:
    """Stable 64-bit key for a label (int passthrough, strings hashed)."""
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFFFFFFFFFF
    if isinstance(label, float):
        label = repr(label)
    if not isinstance(label, str):
        raise TypeError(f"unsupported stream label type: {type(label)!r}")
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_stream(master_seed: int, *labels) -> np.random.Generator:
    """PCG64 generator for (master_seed, labels...)."""
    key = tuple(stream_key(lab) for lab in labels)
    seq = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))
