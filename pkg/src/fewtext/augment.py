"""Augmented views of unlabeled text.

Two sources: seeded lexical noise (token dropout plus adjacent swaps)
generated on the fly, or externally supplied paired augmentations
loaded from a JSONL file.  Both produce :class:`AugmentedPair` records
linking an original example to its perturbed text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Example, _read_records
from .errors import ConfigError, ContractError, DataError
from .hashing import fnv1a64

LEXICAL_NOISE = "lexical_noise"
EXTERNAL = "external"


@dataclass(frozen=True)
class AugmentedPair:
    original: Example
    augmented_text: str
    source: str  # LEXICAL_NOISE or EXTERNAL


def lexical_noise(text: str, drop_prob: float, swap_prob: float, seed: int) -> str:
    """Drop tokens and swap adjacent survivors, deterministically.

    The random stream is keyed on (seed, hash(text)), so the same text
    and seed always produce the same output while different texts get
    independent draws.  At least one token always survives the drop
    pass; tokens are whitespace-delimited and rejoined with single
    spaces.
    """
    for name, p in (("drop_prob", drop_prob), ("swap_prob", swap_prob)):
        if not 0.0 <= p <= 1.0:
            raise ContractError(f"{name} must be in [0, 1], got {p}")
    tokens = text.split()
    if not tokens:
        return ""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed % 2**64, fnv1a64(text)])))

    draws = rng.random(len(tokens))
    kept = [tok for tok, r in zip(tokens, draws) if r >= drop_prob]
    if not kept:
        kept = [tokens[int(rng.integers(len(tokens)))]]

    i = 0
    while i < len(kept) - 1:
        if rng.random() < swap_prob:
            kept[i], kept[i + 1] = kept[i + 1], kept[i]
            i += 2
        else:
            i += 1
    return " ".join(kept)


def load_paired(path: str | Path, unlabeled: Sequence[Example]) -> list[AugmentedPair]:
    """Read ``{"id", "text", "aug"}`` records and link them to examples.

    Records are matched by id when present, otherwise by exact text.
    Any record that matches nothing is a linkage failure; all offenders
    are reported at once.
    """
    by_id = {ex.id: ex for ex in unlabeled}
    by_text: dict[str, Example] = {}
    for ex in unlabeled:
        by_text.setdefault(ex.text, ex)

    pairs = []
    unmatched = []
    for rec in _read_records(path):
        lineno = rec["_lineno"]
        aug = rec.get("aug")
        if not isinstance(aug, str):
            raise DataError(f"{path}:{lineno}: missing or non-string 'aug'")
        ex = None
        if "id" in rec and rec["id"] is not None:
            ex = by_id.get(str(rec["id"]))
        if ex is None and isinstance(rec.get("text"), str):
            ex = by_text.get(rec["text"])
        if ex is None:
            unmatched.append(f"line {lineno} (id={rec.get('id')!r})")
            continue
        pairs.append(AugmentedPair(original=ex, augmented_text=aug, source=EXTERNAL))
    if unmatched:
        raise DataError(f"{path}: {len(unmatched)} records match no unlabeled example: " + ", ".join(unmatched))
    return pairs


def write_paired(pairs: Sequence[AugmentedPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            rec = {"aug": pair.augmented_text, "id": pair.original.id, "text": pair.original.text}
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n")


class LexicalNoiseSource:
    """Regenerates noise per epoch: the stream seed is base_seed + epoch."""

    source = LEXICAL_NOISE

    def __init__(self, drop_prob: float, swap_prob: float, base_seed: int):
        if not 0.0 <= drop_prob <= 1.0 or not 0.0 <= swap_prob <= 1.0:
            raise ContractError("noise probabilities must be in [0, 1]")
        self.drop_prob = drop_prob
        self.swap_prob = swap_prob
        self.base_seed = base_seed

    def augment(self, example: Example, epoch: int) -> str:
        return lexical_noise(example.text, self.drop_prob, self.swap_prob, self.base_seed + epoch)


class ExternalPairSource:
    """Serves fixed augmentations; every unlabeled example must be covered."""

    source = EXTERNAL

    def __init__(self, pairs: Sequence[AugmentedPair], unlabeled: Sequence[Example]):
        self._aug = {p.original.id: p.augmented_text for p in pairs}
        missing = [ex.id for ex in unlabeled if ex.id not in self._aug]
        if missing:
            raise ConfigError(
                f"external augmentations cover {len(self._aug)} ids but "
                f"{len(missing)} unlabeled examples have none (first: {missing[:5]})"
            )

    def augment(self, example: Example, epoch: int) -> str:
        return self._aug[example.id]
