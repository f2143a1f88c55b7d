"""Finite-difference verification of every gradient path.

The reference side is plain numpy with no graph: each loss is
re-evaluated from scratch while one input entry is nudged by +/-h
(central differences, h = 1e-5, float64).  Losses with a frozen target
branch are checked against the surrogate that holds the target at its
base-point value, which is exactly what the stop-gradient semantics
promise the analytic gradient computes.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import FeatureVector, encode, init_params
from .losses import (
    LabeledBatch,
    UnlabeledPairBatch,
    cc_loss,
    ce_loss,
    consistency_loss,
    scl_loss,
)

FD_STEP = 1e-5
TOLERANCE = 1e-4


def central_difference(f: Callable[[], float], array: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of f with respect to ``array``, in place.

    ``f`` must recompute its value from the current contents of
    ``array``; entries are restored after probing.
    """
    grad = np.empty_like(array)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        base = flat[i]
        flat[i] = base + h
        fp = f()
        flat[i] = base - h
        fm = f()
        flat[i] = base
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def max_rel_error(analytic: np.ndarray, fd: np.ndarray) -> float:
    """Largest entry difference, scaled by the larger gradient magnitude."""
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(fd))), 1e-12)
    return float(np.max(np.abs(analytic - fd))) / scale


# -- plain-numpy reference pieces ---------------------------------------------


def np_softmax(x: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    z = x / temperature
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


def np_log_softmax(x: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    z = x / temperature
    z = z - np.max(z)
    return z - np.log(np.exp(z).sum())


def np_normalize(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x)


def np_kl(p: np.ndarray, log_q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - log_q[mask])))


def np_ce(logit_rows: Sequence[np.ndarray], labels: Sequence[int]) -> float:
    total = 0.0
    for row, y in zip(logit_rows, labels):
        total += np_log_softmax(row)[y]
    return -total / len(labels)


def np_scl(raw_rows: Sequence[np.ndarray], labels: Sequence[int], tau: float) -> float:
    z = [np_normalize(r) for r in raw_rows]
    n = len(labels)
    total = 0.0
    for i in range(n):
        partners = [j for j in range(n) if j != i and labels[j] == labels[i]]
        if not partners:
            continue
        denom = sum(np.exp(float(z[i] @ z[k]) / tau) for k in range(n) if k != i)
        inner = 0.0
        for j in partners:
            inner += np.log(np.exp(float(z[i] @ z[j]) / tau) / denom)
        total -= inner / len(partners)
    return total


def np_con_pinned(pinned_targets: Sequence[np.ndarray], aug_rows: Sequence[np.ndarray]) -> float:
    total = 0.0
    for p, aug in zip(pinned_targets, aug_rows):
        total += np_kl(p, np_log_softmax(aug))
    return total / len(aug_rows)


def _np_cc_candidates(orig_z: list[np.ndarray], aug_z: list[np.ndarray], i: int) -> np.ndarray:
    n = len(orig_z)
    rows = [orig_z[j] for j in range(n) if j != i] + [aug_z[j] for j in range(n) if j != i]
    return np.stack(rows)


def np_cc(
    raw_orig: Sequence[np.ndarray],
    raw_aug: Sequence[np.ndarray],
    tau: float,
    pinned_targets: Sequence[np.ndarray] | None = None,
) -> float:
    """Anchor-mean KL(P || Q); pass ``pinned_targets`` to hold P fixed."""
    orig_z = [np_normalize(r) for r in raw_orig]
    aug_z = [np_normalize(r) for r in raw_aug]
    n = len(orig_z)
    total = 0.0
    for i in range(n):
        cand = _np_cc_candidates(orig_z, aug_z, i)
        p = pinned_targets[i] if pinned_targets is not None else np_softmax(cand @ orig_z[i], tau)
        q_log = np_log_softmax(cand @ aug_z[i], tau)
        total += np_kl(p, q_log)
    return total / n


def np_encode(param_arrays: dict, x: np.ndarray, floor: float = ad.NORM_EPS):
    h = np.tanh(param_arrays["w1"] @ x + param_arrays["b1"])
    emb = param_arrays["w2"] @ h + param_arrays["b2"]
    logits = param_arrays["wc"] @ emb + param_arrays["bc"]
    z = emb / max(float(np.linalg.norm(emb)), floor)
    return z, logits


# -- randomized instance checks ------------------------------------------------


def _leaf_rows(rng: np.random.Generator, n: int, d: int) -> list[Tensor]:
    return [Tensor(rng.normal(size=d), requires_grad=True) for _ in range(n)]


def _dummy_logits(n: int, classes: int = 2) -> list[Tensor]:
    return [Tensor(np.zeros(classes)) for _ in range(n)]


def check_ce(rng: np.random.Generator) -> float:
    n = int(rng.integers(1, 9))
    classes = int(rng.integers(2, 5))
    rows = [Tensor(rng.normal(size=classes), requires_grad=True) for _ in range(n)]
    labels = [int(rng.integers(classes)) for _ in range(n)]

    loss = ce_loss(rows, labels)
    ad.backward(loss)

    worst = 0.0
    for row in rows:
        fd = central_difference(lambda: np_ce([r.data for r in rows], labels), row.data)
        worst = max(worst, max_rel_error(row.grad, fd))
    return worst


def check_scl(rng: np.random.Generator) -> float:
    n = int(rng.integers(2, 9))
    d = int(rng.integers(2, 9))
    tau = float(rng.uniform(0.05, 1.0))
    raws = _leaf_rows(rng, n, d)
    labels = [int(rng.integers(2)) for _ in range(n)]
    labels[1] = labels[0]  # guarantee at least one positive pair

    batch = LabeledBatch(
        embeddings=[ad.l2_normalize(r) for r in raws],
        logits=_dummy_logits(n),
        labels=labels,
    )
    loss = scl_loss(batch, tau)
    ad.backward(loss)

    worst = 0.0
    for raw in raws:
        fd = central_difference(lambda: np_scl([r.data for r in raws], labels, tau), raw.data)
        worst = max(worst, max_rel_error(raw.grad, fd))
    return worst


def check_con(rng: np.random.Generator) -> tuple[float, bool]:
    """Returns (max rel error on the augmented side, original side exactly zero)."""
    n = int(rng.integers(1, 9))
    classes = int(rng.integers(2, 5))
    orig = [Tensor(rng.normal(size=classes), requires_grad=True) for _ in range(n)]
    aug = [Tensor(rng.normal(size=classes), requires_grad=True) for _ in range(n)]

    loss = consistency_loss(orig, aug)
    ad.backward(loss)

    pinned = [np_softmax(o.data) for o in orig]
    worst = 0.0
    for row in aug:
        fd = central_difference(lambda: np_con_pinned(pinned, [a.data for a in aug]), row.data)
        worst = max(worst, max_rel_error(row.grad, fd))
    orig_zero = all(np.all(o.grad == 0.0) for o in orig)
    return worst, orig_zero


def _cc_instance(rng: np.random.Generator):
    n = int(rng.integers(2, 9))
    d = int(rng.integers(2, 9))
    tau = float(rng.uniform(0.05, 1.0))
    raw_orig = _leaf_rows(rng, n, d)
    raw_aug = _leaf_rows(rng, n, d)
    return n, tau, raw_orig, raw_aug


def _cc_batch(raw_orig: list[Tensor], raw_aug: list[Tensor]) -> UnlabeledPairBatch:
    n = len(raw_orig)
    return UnlabeledPairBatch(
        orig_embeddings=[ad.l2_normalize(r) for r in raw_orig],
        aug_embeddings=[ad.l2_normalize(r) for r in raw_aug],
        orig_logits=_dummy_logits(n),
        aug_logits=_dummy_logits(n),
    )


def check_cc(rng: np.random.Generator, stop_grad_target: bool) -> float:
    _, tau, raw_orig, raw_aug = _cc_instance(rng)
    loss = cc_loss(_cc_batch(raw_orig, raw_aug), tau, stop_grad_target=stop_grad_target)
    ad.backward(loss)

    pinned = None
    if stop_grad_target:
        orig_z = [np_normalize(r.data) for r in raw_orig]
        aug_z = [np_normalize(r.data) for r in raw_aug]
        pinned = [
            np_softmax(_np_cc_candidates(orig_z, aug_z, i) @ orig_z[i], tau)
            for i in range(len(orig_z))
        ]

    def f() -> float:
        return np_cc([r.data for r in raw_orig], [r.data for r in raw_aug], tau, pinned)

    worst = 0.0
    for leaf in raw_orig + raw_aug:
        fd = central_difference(f, leaf.data)
        worst = max(worst, max_rel_error(leaf.grad, fd))
    return worst


def check_encoder(rng: np.random.Generator) -> float:
    features = int(rng.integers(4, 17))
    hidden = int(rng.integers(2, 7))
    d = int(rng.integers(2, 9))
    classes = int(rng.integers(2, 5))
    params = init_params(int(rng.integers(1 << 30)), features, hidden, d, classes)
    x = rng.integers(0, 3, size=features).astype(np.float64)
    probe_logits = rng.normal(size=classes)
    probe_z = rng.normal(size=d)

    z, logits = encode(params, FeatureVector(dim=features, values=x))
    loss = ad.dot(Tensor(probe_logits), logits) + ad.dot(Tensor(probe_z), z)
    ad.backward(loss)

    arrays = {name: t.data for name, t in params.named_parameters()}

    def f() -> float:
        zz, ll = np_encode(arrays, x)
        return float(probe_logits @ ll + probe_z @ zz)

    worst = 0.0
    for name, t in params.named_parameters():
        fd = central_difference(f, t.data)
        worst = max(worst, max_rel_error(t.grad, fd))
    return worst


def run_suite(instances: int = 20, seed: int = 2024) -> dict[str, float]:
    """Max relative error per gradient path over random instances."""
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = {"l_ce": 0.0, "l_scl": 0.0, "l_con": 0.0, "l_cc": 0.0, "encoder": 0.0}
    for _ in range(instances):
        worst["l_ce"] = max(worst["l_ce"], check_ce(rng))
        worst["l_scl"] = max(worst["l_scl"], check_scl(rng))
        err, orig_zero = check_con(rng)
        if not orig_zero:
            worst["l_con"] = float("inf")
        worst["l_con"] = max(worst["l_con"], err)
        worst["l_cc"] = max(worst["l_cc"], check_cc(rng, stop_grad_target=True))
        worst["l_cc"] = max(worst["l_cc"], check_cc(rng, stop_grad_target=False))
        worst["encoder"] = max(worst["encoder"], check_encoder(rng))
    return worst
