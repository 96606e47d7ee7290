"""Deterministic seed derivation.

One master seed is expanded into independent child seeds keyed by a label
path, so work items can run in any order (or in parallel) without changing
any output.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts: object) -> int:
    """Derive a child seed from ``master`` and a label path.

    Stable across processes and platforms; distinct part tuples give
    independent child seeds.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode("utf-8"))
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode("utf-8"))
    # keep it in the non-negative 63-bit range accepted everywhere
    return int.from_bytes(h.digest(), "little") >> 1
