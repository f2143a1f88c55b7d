"""Datasets, label maps, and the labeled/unlabeled/dev split protocol.

Datasets are JSON Lines files with one record per line: ``{"text": ...,
"label": ...}`` plus an optional ``"id"``.  Splits are drawn per class
with a seeded PCG64 generator, so a split is a pure function of the
data order and the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractError, DataError

_JSON_KW = dict(ensure_ascii=False, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Example:
    """One document.  ``label`` is a class index, or None once stripped."""

    id: str
    text: str
    label: int | None = None


@dataclass(frozen=True)
class LabelMap:
    """Ordered class names; the position of a name is its class index."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 2:
            raise ContractError("a label map needs at least two classes")
        if len(set(self.names)) != len(self.names):
            raise ContractError("duplicate class names in label map")

    @property
    def num_classes(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown label name {name!r}; known: {list(self.names)}") from None


@dataclass
class CorpusSplit:
    """The four buckets of one seeded split.

    ``hidden_labels`` retains the true labels of the unlabeled bucket
    for diagnostics only; nothing on the training path may read it.
    """

    labeled: list[Example]
    unlabeled: list[Example]
    dev: list[Example]
    test: list[Example]
    seed: int
    hidden_labels: dict[str, int] = field(default_factory=dict)


def infer_label_map(records: Iterable[dict]) -> LabelMap:
    """Label map over the distinct label names, sorted alphabetically."""
    names = sorted({r["label"] for r in records if isinstance(r.get("label"), str)})
    if len(names) < 2:
        raise DataError(f"fewer than two label names present: {names}")
    return LabelMap(tuple(names))


def dataset_label_map(path: str | Path) -> LabelMap:
    """Infer the label map for a dataset file without keeping its records."""
    return infer_label_map(_read_records(path))


def _read_records(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: record is not an object")
            rec["_lineno"] = lineno
            records.append(rec)
    return records


def load_dataset(path: str | Path, label_map: LabelMap | None = None) -> list[Example]:
    """Read a JSONL dataset; labels, when present, must be known names.

    Records without an explicit ``id`` get one derived from their line
    number, so ids are stable across reads of the same file.
    """
    records = _read_records(path)
    if label_map is None:
        label_map = infer_label_map(records)
    out = []
    for rec in records:
        lineno = rec["_lineno"]
        text = rec.get("text")
        if not isinstance(text, str):
            raise DataError(f"{path}:{lineno}: missing or non-string 'text'")
        label = None
        if "label" in rec and rec["label"] is not None:
            if not isinstance(rec["label"], str):
                raise DataError(f"{path}:{lineno}: 'label' must be a class name string")
            label = label_map.index(rec["label"])
        ex_id = rec.get("id")
        if ex_id is None:
            ex_id = f"r{lineno:06d}"
        out.append(Example(id=str(ex_id), text=text, label=label))
    ids = [e.id for e in out]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate example ids")
    return out


def _even_counts(total: int, num_classes: int) -> list[int]:
    # Remainder goes to the lowest class indices, deterministically.
    base, rem = divmod(total, num_classes)
    return [base + (1 if c < rem else 0) for c in range(num_classes)]


def make_split(
    data: Sequence[Example],
    label_map: LabelMap,
    shots_per_class: int,
    unlabeled_count: int,
    dev_count: int,
    seed: int,
    test: Sequence[Example] = (),
) -> CorpusSplit:
    """Draw disjoint labeled/unlabeled/dev buckets from a labeled pool.

    Exactly ``shots_per_class`` labeled examples per class; unlabeled
    and dev are drawn with an even per-class distribution and the
    unlabeled bucket has its labels stripped (kept in a hidden sidecar).
    Shuffling uses numpy's PCG64 seeded with ``seed``, so the result is
    a deterministic function of (data order, seed).
    """
    C = label_map.num_classes
    if shots_per_class < 1:
        raise ContractError("shots_per_class must be >= 1")
    if unlabeled_count < 1 or dev_count < 1:
        raise ContractError("unlabeled_count and dev_count must be >= 1")
    n_labeled = shots_per_class * C
    if n_labeled >= unlabeled_count:
        raise ContractError(
            f"labeled budget {n_labeled} must be far below unlabeled_count {unlabeled_count}"
        )

    by_class: dict[int, list[int]] = {c: [] for c in range(C)}
    for i, ex in enumerate(data):
        if ex.label is None:
            raise DataError(f"example {ex.id} has no label; the split pool must be fully labeled")
        if ex.label not in by_class:
            raise DataError(f"example {ex.id} has label index {ex.label} outside the label map")
        by_class[ex.label].append(i)

    unl_c = _even_counts(unlabeled_count, C)
    dev_c = _even_counts(dev_count, C)

    rng = np.random.Generator(np.random.PCG64(seed))
    labeled: list[Example] = []
    unlabeled: list[Example] = []
    dev: list[Example] = []
    hidden: dict[str, int] = {}
    for c in range(C):
        pool = by_class[c]
        need = shots_per_class + unl_c[c] + dev_c[c]
        if len(pool) < need:
            raise DataError(
                f"class {label_map.names[c]!r} has {len(pool)} examples, needs {need}"
            )
        order = rng.permutation(len(pool))
        chosen = [data[pool[j]] for j in order]
        labeled.extend(chosen[:shots_per_class])
        for ex in chosen[shots_per_class : shots_per_class + unl_c[c]]:
            hidden[ex.id] = ex.label  # type: ignore[assignment]
            unlabeled.append(Example(id=ex.id, text=ex.text, label=None))
        dev.extend(chosen[shots_per_class + unl_c[c] : need])

    return CorpusSplit(
        labeled=labeled,
        unlabeled=unlabeled,
        dev=dev,
        test=list(test),
        seed=seed,
        hidden_labels=hidden,
    )


def three_seed_splits(
    data: Sequence[Example],
    label_map: LabelMap,
    shots_per_class: int,
    unlabeled_count: int,
    dev_count: int,
    seeds: Sequence[int],
    test: Sequence[Example] = (),
) -> list[CorpusSplit]:
    """The evaluation protocol's three independent splits."""
    seeds = list(seeds)
    if len(seeds) != 3 or len(set(seeds)) != 3:
        raise ConfigError(f"the protocol needs exactly 3 distinct seeds, got {seeds}")
    return [
        make_split(data, label_map, shots_per_class, unlabeled_count, dev_count, s, test)
        for s in seeds
    ]


# -- file round trips ---------------------------------------------------------


def write_examples(examples: Sequence[Example], label_map: LabelMap, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            rec: dict = {"id": ex.id, "text": ex.text}
            if ex.label is not None:
                rec["label"] = label_map.names[ex.label]
            fh.write(json.dumps(rec, **_JSON_KW) + "\n")


def write_manifest(split: CorpusSplit, path: str | Path) -> None:
    """One ``{"id", "bucket"}`` line per example in the three drawn buckets."""
    with open(path, "w", encoding="utf-8") as fh:
        for bucket, examples in (
            ("labeled", split.labeled),
            ("unlabeled", split.unlabeled),
            ("dev", split.dev),
        ):
            for ex in examples:
                fh.write(json.dumps({"bucket": bucket, "id": ex.id}, **_JSON_KW) + "\n")


def write_split(split: CorpusSplit, label_map: LabelMap, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_examples(split.labeled, label_map, out / "labeled.jsonl")
    write_examples(split.unlabeled, label_map, out / "unlabeled.jsonl")
    write_examples(split.dev, label_map, out / "dev.jsonl")
    if split.test:
        write_examples(split.test, label_map, out / "test.jsonl")
    write_manifest(split, out / "manifest.jsonl")
    with open(out / "hidden_labels.jsonl", "w", encoding="utf-8") as fh:
        for ex_id, label in split.hidden_labels.items():
            rec = {"id": ex_id, "label": label_map.names[label]}
            fh.write(json.dumps(rec, **_JSON_KW) + "\n")
    with open(out / "split.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"seed": split.seed, "labels": list(label_map.names)}, **_JSON_KW) + "\n")


def read_split(split_dir: str | Path, label_map: LabelMap | None = None) -> tuple[CorpusSplit, LabelMap]:
    split_dir = Path(split_dir)
    meta_path = split_dir / "split.json"
    if not meta_path.exists():
        raise DataError(f"{split_dir} is not a split directory (missing split.json)")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if label_map is None:
        label_map = LabelMap(tuple(meta["labels"]))
    labeled = load_dataset(split_dir / "labeled.jsonl", label_map)
    unlabeled = load_dataset(split_dir / "unlabeled.jsonl", label_map)
    dev = load_dataset(split_dir / "dev.jsonl", label_map)
    test_path = split_dir / "test.jsonl"
    test = load_dataset(test_path, label_map) if test_path.exists() else []
    hidden: dict[str, int] = {}
    hidden_path = split_dir / "hidden_labels.jsonl"
    if hidden_path.exists():
        for rec in _read_records(hidden_path):
            hidden[str(rec["id"])] = label_map.index(rec["label"])
    return (
        CorpusSplit(
            labeled=labeled,
            unlabeled=unlabeled,
            dev=dev,
            test=test,
            seed=int(meta["seed"]),
            hidden_labels=hidden,
        ),
        label_map,
    )
