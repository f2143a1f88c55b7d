"""Dataset loading and the seeded stratified split protocol."""

import json

import numpy as np
import pytest

from fewtext.corpus import (
    Example,
    LabelMap,
    dataset_label_map,
    load_dataset,
    make_split,
    read_split,
    three_seed_splits,
    write_split,
)
from fewtext.errors import ConfigError, ContractError, DataError


def pool(n_per_class, classes=2):
    out = []
    for c in range(classes):
        for k in range(n_per_class):
            out.append(Example(id=f"c{c}e{k}", text=f"word{c} tok{k}", label=c))
    return out


LM = LabelMap(("neg", "pos"))


def test_label_map_contracts():
    assert LM.num_classes == 2
    assert LM.index("pos") == 1
    with pytest.raises(DataError):
        LM.index("meh")
    with pytest.raises(ContractError):
        LabelMap(("only",))
    with pytest.raises(ContractError):
        LabelMap(("a", "a"))


def test_load_dataset(tmp_path):
    p = tmp_path / "data.jsonl"
    p.write_text(
        '{"text": "good stuff", "label": "pos"}\n'
        '{"id": "x1", "text": "bad stuff", "label": "neg"}\n'
        '{"text": "no label yet"}\n',
        encoding="utf-8",
    )
    data = load_dataset(p, LM)
    assert [e.id for e in data] == ["r000001", "x1", "r000003"]
    assert [e.label for e in data] == [1, 0, None]
    assert dataset_label_map(p).names == ("neg", "pos")


def test_load_dataset_rejects_bad_records(tmp_path):
    cases = [
        ('{"text": 5}\n', "non-string"),
        ('{"label": "pos"}\n', "text"),
        ('{"text": "a", "label": 3}\n', "class name"),
        ('not json\n', "invalid JSON"),
        ('{"id": "d", "text": "a"}\n{"id": "d", "text": "b"}\n', "duplicate"),
    ]
    for content, needle in cases:
        p = tmp_path / "bad.jsonl"
        p.write_text(content, encoding="utf-8")
        with pytest.raises(DataError, match=needle):
            load_dataset(p, LM)


def test_load_dataset_unknown_label_name(tmp_path):
    p = tmp_path / "data.jsonl"
    p.write_text('{"text": "a", "label": "meh"}\n', encoding="utf-8")
    with pytest.raises(DataError):
        load_dataset(p, LM)


def test_make_split_counts_and_disjointness():
    data = pool(200)
    split = make_split(data, LM, shots_per_class=10, unlabeled_count=150, dev_count=30, seed=5)
    assert len(split.labeled) == 20
    for c in range(2):
        assert sum(1 for e in split.labeled if e.label == c) == 10
    assert len(split.unlabeled) == 150 and len(split.dev) == 30
    buckets = [split.labeled, split.unlabeled, split.dev]
    ids = [frozenset(e.id for e in b) for b in buckets]
    for i in range(3):
        for j in range(i + 1, 3):
            assert not ids[i] & ids[j]


def test_make_split_strips_unlabeled_labels():
    split = make_split(pool(200), LM, 10, 150, 30, seed=5)
    assert all(e.label is None for e in split.unlabeled)
    assert set(split.hidden_labels) == {e.id for e in split.unlabeled}
    true_label = {e.id: e.label for e in pool(200)}
    assert all(split.hidden_labels[i] == true_label[i] for i in split.hidden_labels)


def test_make_split_even_distribution():
    # 151 unlabeled over 2 classes: remainder goes to the lower class index.
    split = make_split(pool(200), LM, 10, 151, 31, seed=5)
    unl = [sum(1 for i in split.hidden_labels.values() if i == c) for c in range(2)]
    dev = [sum(1 for e in split.dev if e.label == c) for c in range(2)]
    assert unl == [76, 75]
    assert dev == [16, 15]


def test_make_split_determinism():
    data = pool(200)
    a = make_split(data, LM, 10, 150, 30, seed=5)
    b = make_split(data, LM, 10, 150, 30, seed=5)
    assert [e.id for e in a.labeled] == [e.id for e in b.labeled]
    assert [e.id for e in a.unlabeled] == [e.id for e in b.unlabeled]
    c = make_split(data, LM, 10, 150, 30, seed=6)
    assert [e.id for e in a.labeled] != [e.id for e in c.labeled]


def test_make_split_errors():
    data = pool(200)
    with pytest.raises(ContractError):
        make_split(data, LM, 10, unlabeled_count=20, dev_count=5, seed=1)  # 20 labeled >= 20
    with pytest.raises(DataError, match="neg"):
        make_split(pool(50), LM, 10, 150, 30, seed=1)  # needs 10+75+15 per class, has 50
    with pytest.raises(DataError, match="no label"):
        make_split([Example("u", "t", None)] + data, LM, 10, 150, 30, seed=1)


def test_three_seed_splits_protocol():
    data = pool(200)
    splits = three_seed_splits(data, LM, 5, 100, 20, seeds=[1, 2, 3])
    assert [s.seed for s in splits] == [1, 2, 3]
    with pytest.raises(ConfigError):
        three_seed_splits(data, LM, 5, 100, 20, seeds=[1, 2])
    with pytest.raises(ConfigError):
        three_seed_splits(data, LM, 5, 100, 20, seeds=[1, 2, 2])


def test_split_round_trip(tmp_path):
    data = pool(200)
    test = [Example(id=f"t{k}", text=f"word1 t{k}", label=1) for k in range(8)]
    split = make_split(data, LM, 10, 150, 30, seed=9, test=test)
    write_split(split, LM, tmp_path / "s")
    back, lm = read_split(tmp_path / "s")
    assert lm.names == LM.names
    assert back.seed == 9
    assert [e.id for e in back.labeled] == [e.id for e in split.labeled]
    assert [e.label for e in back.labeled] == [e.label for e in split.labeled]
    assert [e.text for e in back.unlabeled] == [e.text for e in split.unlabeled]
    assert all(e.label is None for e in back.unlabeled)
    assert back.hidden_labels == split.hidden_labels
    assert [e.id for e in back.test] == [e.id for e in split.test]


def test_split_files_are_stable(tmp_path):
    split = make_split(pool(200), LM, 10, 150, 30, seed=9)
    write_split(split, LM, tmp_path / "a")
    write_split(split, LM, tmp_path / "b")
    for name in ("labeled.jsonl", "unlabeled.jsonl", "dev.jsonl", "manifest.jsonl",
                 "hidden_labels.jsonl", "split.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_matches_buckets(tmp_path):
    split = make_split(pool(200), LM, 10, 150, 30, seed=2)
    write_split(split, LM, tmp_path / "s")
    rows = [json.loads(l) for l in (tmp_path / "s" / "manifest.jsonl").read_text().splitlines()]
    by_bucket = {}
    for r in rows:
        by_bucket.setdefault(r["bucket"], set()).add(r["id"])
    assert by_bucket["labeled"] == {e.id for e in split.labeled}
    assert by_bucket["unlabeled"] == {e.id for e in split.unlabeled}
    assert by_bucket["dev"] == {e.id for e in split.dev}
