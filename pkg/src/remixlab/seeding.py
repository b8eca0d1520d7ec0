"""Deterministic seed derivation for independent RNG streams."""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def normalize_seed(seed: int) -> int:
    """Map any Python int (including negatives) onto a valid 64-bit seed."""
    return int(seed) & _MASK64


def derive_seed(base_seed: int, *parts) -> int:
    """XOR a base seed with a stable digest of the given key parts.

    The digest is keyed on the string forms of `parts`, so adding an
    unrelated key (e.g. one more method to an experiment) never perturbs the
    streams of existing keys.
    """
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return (normalize_seed(base_seed) ^ int.from_bytes(digest, "little")) & _MASK64
