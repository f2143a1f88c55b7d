"""The four loss terms against naive double-loop references."""

import math

import numpy as np
import pytest

from fewtext.autodiff import Tensor, backward
from fewtext.errors import ContractError
from fewtext.losses import (
    LabeledBatch,
    LossConfig,
    UnlabeledPairBatch,
    cc_distributions,
    cc_loss,
    ce_loss,
    consistency_loss,
    scl_loss,
)

from oracles import naive_cc, naive_ce, naive_con, naive_scl, random_unit_rows


def tensors(rows):
    return [Tensor(np.asarray(r, dtype=np.float64)) for r in rows]


def leaf_tensors(rows):
    return [Tensor(np.asarray(r, dtype=np.float64), requires_grad=True) for r in rows]


def pair_batch(rng, n, d):
    orig = random_unit_rows(rng, n, d)
    aug = random_unit_rows(rng, n, d)
    classes = int(rng.integers(2, 5))
    return UnlabeledPairBatch(
        orig_embeddings=tensors(orig),
        aug_embeddings=tensors(aug),
        orig_logits=tensors(rng.standard_normal((n, classes))),
        aug_logits=tensors(rng.standard_normal((n, classes))),
    ), orig, aug


# -- cross entropy -------------------------------------------------------------


def test_ce_exact_values():
    # Uniform logits on 2 classes: -log(1/2); ratios 1:3 with the true
    # class at 3/4: -log(3/4).
    assert abs(ce_loss(tensors([[0.0, 0.0]]), [0]).item() - math.log(2.0)) < 1e-15
    v = [0.0, math.log(3.0)]
    got = ce_loss(tensors([v, v]), [1, 1]).item()
    assert abs(got - (-math.log(0.75))) < 1e-14


def test_ce_matches_oracle():
    rng = np.random.default_rng(100)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        c = int(rng.integers(2, 5))
        logits = rng.standard_normal((n, c)) * 3.0
        labels = [int(rng.integers(c)) for _ in range(n)]
        got = ce_loss(tensors(logits), labels).item()
        assert abs(got - naive_ce(logits, labels)) < 1e-10


def test_ce_contracts():
    with pytest.raises(ContractError):
        ce_loss([], [])
    with pytest.raises(ContractError):
        ce_loss(tensors([[0.0, 0.0]]), [2])


# -- supervised contrastive ----------------------------------------------------


def test_scl_matches_oracle():
    rng = np.random.default_rng(101)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(2, 9))
        embs = random_unit_rows(rng, n, d)
        labels = [int(rng.integers(2)) for _ in range(n)]
        batch = LabeledBatch(
            embeddings=tensors(embs),
            logits=tensors(np.zeros((n, 2))),
            labels=labels,
        )
        for tau in (0.1, 0.5, 1.0):
            got = scl_loss(batch, tau).item()
            assert abs(got - naive_scl(embs, labels, tau)) < 1e-10


def test_scl_all_singletons_is_zero():
    rng = np.random.default_rng(102)
    embs = random_unit_rows(rng, 3, 4)
    batch = LabeledBatch(tensors(embs), tensors(np.zeros((3, 3))), [0, 1, 2])
    out = scl_loss(batch, 0.5)
    assert out.item() == 0.0


def test_scl_is_nonnegative():
    # Each anchor term is a negative log-probability.
    rng = np.random.default_rng(103)
    for _ in range(20):
        n = int(rng.integers(2, 8))
        embs = random_unit_rows(rng, n, 5)
        labels = [int(rng.integers(2)) for _ in range(n)]
        batch = LabeledBatch(tensors(embs), tensors(np.zeros((n, 2))), labels)
        assert scl_loss(batch, 0.3).item() >= 0.0


def test_scl_contracts():
    rng = np.random.default_rng(104)
    embs = random_unit_rows(rng, 2, 4)
    batch = LabeledBatch(tensors(embs), tensors(np.zeros((2, 2))), [0, 0])
    with pytest.raises(ContractError):
        scl_loss(batch, 0.0)
    with pytest.raises(ContractError):
        LabeledBatch(tensors([[0.5, 0.5]]), tensors(np.zeros((1, 2))), [0])  # not unit
    with pytest.raises(ContractError):
        LabeledBatch(tensors(embs), tensors(np.zeros((1, 2))), [0, 0])  # length skew


# -- consistency ---------------------------------------------------------------


def test_con_matches_oracle():
    rng = np.random.default_rng(105)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        c = int(rng.integers(2, 5))
        orig = rng.standard_normal((n, c)) * 2.0
        aug = rng.standard_normal((n, c)) * 2.0
        got = consistency_loss(tensors(orig), tensors(aug)).item()
        assert abs(got - naive_con(orig, aug)) < 1e-10


def test_con_zero_on_identical_views():
    rng = np.random.default_rng(106)
    rows = rng.standard_normal((4, 3))
    assert abs(consistency_loss(tensors(rows), tensors(rows)).item()) < 1e-12


def test_con_detaches_original_branch():
    # Even when the caller forgets to detach, no gradient reaches
    # parameters that only feed the original view.
    rng = np.random.default_rng(107)
    orig = leaf_tensors(rng.standard_normal((3, 4)))
    aug = leaf_tensors(rng.standard_normal((3, 4)))
    backward(consistency_loss(orig, aug))
    for t in orig:
        assert np.all(t.grad == 0.0)
    assert any(np.any(t.grad != 0.0) for t in aug)


# -- contrastive consistency ---------------------------------------------------


def test_cc_matches_oracle():
    rng = np.random.default_rng(108)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(2, 9))
        batch, orig, aug = pair_batch(rng, n, d)
        for tau in (0.1, 0.5, 1.0):
            got = cc_loss(batch, tau).item()
            assert abs(got - naive_cc(orig, aug, tau)) < 1e-10


def test_cc_distributions_are_probability_vectors():
    rng = np.random.default_rng(109)
    batch, _, _ = pair_batch(rng, 5, 6)
    p, q = cc_distributions(batch, 2, 0.2)
    assert p.shape == (8,) and q.shape == (8,)  # 2 * (5 - 1) candidates
    for dist in (p, q):
        assert np.all(dist.data > 0.0)
        np.testing.assert_allclose(dist.data.sum(), 1.0, rtol=1e-12)
    with pytest.raises(ContractError):
        cc_distributions(batch, 5, 0.2)


def test_cc_zero_on_identical_views():
    rng = np.random.default_rng(110)
    orig = random_unit_rows(rng, 4, 5)
    batch = UnlabeledPairBatch(
        orig_embeddings=tensors(orig),
        aug_embeddings=tensors(orig.copy()),
        orig_logits=tensors(np.zeros((4, 2))),
        aug_logits=tensors(np.zeros((4, 2))),
    )
    assert abs(cc_loss(batch, 0.1).item()) < 1e-12


def test_cc_stop_grad_default():
    rng = np.random.default_rng(111)
    orig_rows = random_unit_rows(rng, 3, 4)
    aug_rows = random_unit_rows(rng, 3, 4)
    orig = leaf_tensors(orig_rows)
    aug = leaf_tensors(aug_rows)
    batch = UnlabeledPairBatch(orig, aug, tensors(np.zeros((3, 2))), tensors(np.zeros((3, 2))))
    backward(cc_loss(batch, 0.5))
    # Original embeddings still get gradient: they appear as candidates
    # inside Q's (live) similarity scores.  The stop-gradient only
    # freezes the target distribution P.
    assert any(np.any(t.grad != 0.0) for t in aug)

    # Symmetric mode must differ from the frozen-target mode.
    for t in orig + aug:
        t.zero_grad_()
    backward(cc_loss(batch, 0.5, stop_grad_target=False))
    sym = [t.grad.copy() for t in orig]
    for t in orig + aug:
        t.zero_grad_()
    backward(cc_loss(batch, 0.5, stop_grad_target=True))
    froz = [t.grad.copy() for t in orig]
    assert any(not np.allclose(s, f) for s, f in zip(sym, froz))


def test_cc_batch_validation():
    rng = np.random.default_rng(112)
    good = random_unit_rows(rng, 2, 3)
    with pytest.raises(ContractError):
        UnlabeledPairBatch(tensors(good), tensors(good * 2.0),
                           tensors(np.zeros((2, 2))), tensors(np.zeros((2, 2))))
    batch, _, _ = pair_batch(rng, 2, 3)
    with pytest.raises(ContractError):
        cc_loss(batch, -1.0)


# -- config --------------------------------------------------------------------


def test_loss_config_validation():
    LossConfig()  # defaults are valid
    with pytest.raises(ContractError):
        LossConfig(scl_temperature=0.0)
    with pytest.raises(ContractError):
        LossConfig(lambda_con=-0.5)
