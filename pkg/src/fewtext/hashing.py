"""Deterministic 64-bit string hashing.

Feature bucketing and per-text random streams need a hash that is
stable across processes and platforms, which rules out the builtin
``hash`` (salted per interpreter run).  We use FNV-1a with the
standard published 64-bit offset basis and prime.
"""

from __future__ import annotations

FNV64_OFFSET = 14695981039346656037
FNV64_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def fnv1a64(text: str | bytes) -> int:
    """FNV-1a hash of ``text``, returned as an unsigned 64-bit int."""
    data = text.encode("utf-8") if isinstance(text, str) else text
    h = FNV64_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV64_PRIME) & _MASK64
    return h
