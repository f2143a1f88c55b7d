"""The four training loss terms.

Cross entropy and supervised contrastive loss act on the labeled batch;
the two consistency terms act on paired original/augmented views of the
unlabeled batch.  Contrastive quantities are computed in log space via
log_softmax over similarity vectors, never by exponentiating raw dot
products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError

UNIT_NORM_TOL = 1e-8


@dataclass
class LossConfig:
    """Temperatures and term weights for the combined objective."""

    scl_temperature: float = 1.0
    cc_temperature: float = 0.1
    lambda_scl: float = 0.01
    lambda_con: float = 1.0
    lambda_cc: float = 0.5
    cc_symmetric: bool = False

    def __post_init__(self):
        if self.scl_temperature <= 0 or self.cc_temperature <= 0:
            raise ContractError("temperatures must be positive")
        for name in ("lambda_scl", "lambda_con", "lambda_cc"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be >= 0")


def _check_unit(vectors: Sequence[Tensor], what: str) -> None:
    for i, v in enumerate(vectors):
        if v.data.ndim != 1:
            raise ContractError(f"{what}[{i}] must be 1-d, got shape {v.shape}")
        n = float(np.linalg.norm(v.data))
        if abs(n - 1.0) > UNIT_NORM_TOL:
            raise ContractError(f"{what}[{i}] is not unit norm (|{n} - 1| > {UNIT_NORM_TOL})")


@dataclass
class LabeledBatch:
    """Unit embeddings, logits, and integer labels for N labeled examples."""

    embeddings: list[Tensor]
    logits: list[Tensor]
    labels: list[int]

    def __post_init__(self):
        n = len(self.labels)
        if not (len(self.embeddings) == len(self.logits) == n):
            raise ContractError("embeddings, logits, and labels must have equal length")
        _check_unit(self.embeddings, "embeddings")
        for i, l in enumerate(self.logits):
            if l.data.ndim != 1:
                raise ContractError(f"logits[{i}] must be 1-d")
            if not 0 <= self.labels[i] < l.data.shape[0]:
                raise ContractError(f"label {self.labels[i]} out of range for {l.data.shape[0]} classes")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class UnlabeledPairBatch:
    """Original and augmented views of N unlabeled examples, index-aligned."""

    orig_embeddings: list[Tensor]
    aug_embeddings: list[Tensor]
    orig_logits: list[Tensor]
    aug_logits: list[Tensor]

    def __post_init__(self):
        n = len(self.orig_embeddings)
        if not (len(self.aug_embeddings) == len(self.orig_logits) == len(self.aug_logits) == n):
            raise ContractError("all four view lists must have equal length")
        _check_unit(self.orig_embeddings, "orig_embeddings")
        _check_unit(self.aug_embeddings, "aug_embeddings")

    def __len__(self) -> int:
        return len(self.orig_embeddings)


def ce_loss(logits: Sequence[Tensor], labels: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of the true classes."""
    if len(logits) == 0 or len(logits) != len(labels):
        raise ContractError("ce_loss needs one label per logits row, at least one row")
    terms = []
    for row, label in zip(logits, labels):
        if row.data.ndim != 1:
            raise ContractError("each logits row must be 1-d")
        if not 0 <= label < row.data.shape[0]:
            raise ContractError(f"label {label} out of range for {row.data.shape[0]} classes")
        terms.append(ad.log_softmax(row, 1.0).pick(label))
    return -ad.stack(terms).mean()


def scl_loss(batch: LabeledBatch, temperature: float) -> Tensor:
    """Supervised contrastive loss over unit embeddings.

    Per anchor: mean over same-class partners of the negative log
    probability that the partner is picked from the other N-1
    embeddings under a temperature softmax of dot products; anchors sum
    (not average), and anchors whose class has no partner in the batch
    contribute zero.
    """
    n = len(batch)
    if n < 2:
        raise ContractError("scl_loss needs at least two examples")
    if temperature <= 0:
        raise ContractError("temperature must be positive")

    total: Tensor | None = None
    for i in range(n):
        partners = [j for j in range(n) if j != i and batch.labels[j] == batch.labels[i]]
        if not partners:
            continue
        others = [j for j in range(n) if j != i]
        candidates = ad.stack([batch.embeddings[j] for j in others])
        log_probs = ad.log_softmax(ad.matmul(candidates, batch.embeddings[i]), temperature)
        positive_positions = [others.index(j) for j in partners]
        anchor_term = -log_probs.take(positive_positions).mean()
        total = anchor_term if total is None else total + anchor_term
    if total is None:
        # Every class is a singleton in this batch, so the loss is defined as zero.
        return Tensor(0.0)
    return total


def consistency_loss(orig_logits: Sequence[Tensor], aug_logits: Sequence[Tensor]) -> Tensor:
    """Mean KL(p(orig) || p(aug)) over the batch, original side frozen.

    The original-view distribution is the target: it is detached here,
    so no gradient ever flows through the original branch regardless of
    what the caller passes.
    """
    if len(orig_logits) == 0 or len(orig_logits) != len(aug_logits):
        raise ContractError("consistency_loss needs matching nonempty logits lists")
    terms = []
    for orig, aug in zip(orig_logits, aug_logits):
        if orig.data.shape != aug.data.shape:
            raise ContractError(f"paired logits shapes differ: {orig.shape} vs {aug.shape}")
        target = ad.softmax(orig.detach(), 1.0)
        terms.append(ad.kl_div(target, ad.log_softmax(aug, 1.0)))
    return ad.stack(terms).mean()


def _negatives(batch: UnlabeledPairBatch, i: int) -> list[Tensor]:
    # Fixed order: original embeddings excluding i (ascending index),
    # then augmented embeddings excluding i (ascending index).
    n = len(batch)
    return [batch.orig_embeddings[j] for j in range(n) if j != i] + [
        batch.aug_embeddings[j] for j in range(n) if j != i
    ]


def _anchor_similarities(batch: UnlabeledPairBatch, i: int) -> tuple[Tensor, Tensor]:
    candidates = ad.stack(_negatives(batch, i))
    sims_orig = ad.matmul(candidates, batch.orig_embeddings[i])
    sims_aug = ad.matmul(candidates, batch.aug_embeddings[i])
    return sims_orig, sims_aug


def cc_distributions(batch: UnlabeledPairBatch, i: int, temperature: float) -> tuple[Tensor, Tensor]:
    """Anchor i's two negative distributions (original view, augmented view).

    Both views score the same 2(N-1) candidates: every embedding of the
    doubled batch except the anchor's own pair.
    """
    n = len(batch)
    if n < 2:
        raise ContractError("cc_distributions needs at least two pairs")
    if not 0 <= i < n:
        raise ContractError(f"anchor index {i} out of range for batch of {n}")
    if temperature <= 0:
        raise ContractError("temperature must be positive")
    sims_orig, sims_aug = _anchor_similarities(batch, i)
    return ad.softmax(sims_orig, temperature), ad.softmax(sims_aug, temperature)


def cc_loss(batch: UnlabeledPairBatch, temperature: float, stop_grad_target: bool = True) -> Tensor:
    """Mean over anchors of KL(P || Q) between the two negative distributions.

    P comes from the original view and is the target: by default its
    similarity scores are detached, mirroring the consistency loss.
    Setting ``stop_grad_target=False`` lets gradients flow through both
    views (symmetric mode).
    """
    n = len(batch)
    if n < 2:
        raise ContractError("cc_loss needs at least two pairs")
    if temperature <= 0:
        raise ContractError("temperature must be positive")
    terms = []
    for i in range(n):
        sims_orig, sims_aug = _anchor_similarities(batch, i)
        if stop_grad_target:
            sims_orig = sims_orig.detach()
        target = ad.softmax(sims_orig, temperature)
        terms.append(ad.kl_div(target, ad.log_softmax(sims_aug, temperature)))
    return ad.stack(terms).mean()
