"""Deterministic seed derivation.

Every random decision in the package flows from a single master seed
through :func:`derive_seed`, so independent components (dataset samples,
mixing masks, dropout draws, Monte Carlo trials) get decorrelated yet
fully reproducible streams.  The derivation hashes the tag path, so it is
stable across platforms and insensitive to call order.
"""

from __future__ import annotations

import hashlib


def derive_seed(root: int, *tags: object) -> int:
    """Derive a 63-bit child seed from ``root`` and a path of tags.

    Tags are stringified, so ``derive_seed(7, "mask", 3, 0)`` is stable
    across runs and processes.
    """
    key = str(int(root)) + "|" + "|".join(str(t) for t in tags)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << 63) - 1)
