"""Training loop, schedules, and the Adam optimizer.

One step samples a labeled batch and (when any unlabeled term is
active) a paired unlabeled batch, combines the loss terms with their
weights, backpropagates, and applies one Adam update under a linear
warmup/decay learning rate.  The contrastive-consistency weight is
gated by a release schedule that stays at exactly zero for the first
half of training.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .augment import EXTERNAL, ExternalPairSource, LexicalNoiseSource, load_paired
from .autodiff import Tensor
from .config import RunConfig
from .corpus import CorpusSplit, Example, LabelMap
from .encoder import EncoderParams, encode, featurize, init_params
from .errors import ConfigError, ContractError, NumericFault
from .losses import (
    LabeledBatch,
    LossConfig,
    UnlabeledPairBatch,
    ce_loss,
    cc_loss,
    consistency_loss,
    scl_loss,
)


def alpha_schedule(t: float, total_steps: int) -> float:
    """Release weight max(0, (2t - T) / T): zero through the first half
    of training, then linear up to exactly 1 at t = T."""
    if total_steps < 1:
        raise ContractError("total_steps must be >= 1")
    if not 0 <= t <= total_steps:
        raise ContractError(f"step {t} outside [0, {total_steps}]")
    return max(0.0, (2.0 * t - total_steps) / total_steps)


def lr_schedule(t: float, total_steps: int, warmup_percent: float, peak_lr: float) -> float:
    """Linear ramp 0 -> peak over the warmup span, then linear decay to 0 at T."""
    if total_steps < 1:
        raise ContractError("total_steps must be >= 1")
    if not 0 <= t <= total_steps:
        raise ContractError(f"step {t} outside [0, {total_steps}]")
    if not 0.0 <= warmup_percent < 1.0:
        raise ContractError("warmup_percent must be in [0, 1)")
    if peak_lr <= 0:
        raise ContractError("peak_lr must be positive")
    warmup_end = warmup_percent * total_steps
    if t <= warmup_end and warmup_end > 0:
        return peak_lr * t / warmup_end
    return peak_lr * (total_steps - t) / (total_steps - warmup_end)


def total_loss(
    l_ce: Tensor | float,
    l_scl: Tensor | float | None,
    l_con: Tensor | float | None,
    l_cc: Tensor | float | None,
    config: LossConfig,
    alpha: float,
) -> Tensor:
    """Weighted sum ce + w_scl*scl + w_con*con + alpha*w_cc*cc.

    Terms whose effective weight is exactly zero are left out of the
    graph entirely, so they contribute exactly nothing to gradients; a
    zero-weight term may be passed as None.  Any non-finite component
    aborts with the component named.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"alpha must be in [0, 1], got {alpha}")

    def prepared(value, name: str, weight: float) -> Tensor | None:
        if value is None:
            if weight != 0.0:
                raise ContractError(f"{name} is required (weight {weight}) but missing")
            return None
        t = value if isinstance(value, Tensor) else Tensor(float(value))
        if not np.isfinite(t.data):
            raise NumericFault(f"non-finite loss component {name}={float(t.data)!r}")
        return t

    total = prepared(l_ce, "l_ce", 1.0)
    assert total is not None
    for name, value, weight in (
        ("l_scl", l_scl, config.lambda_scl),
        ("l_con", l_con, config.lambda_con),
        ("l_cc", l_cc, alpha * config.lambda_cc),
    ):
        term = prepared(value, name, weight)
        if weight != 0.0 and term is not None:
            total = total + weight * term
    return total


@dataclass
class AdamState:
    beta1: float
    beta2: float
    eps: float
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: EncoderParams, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        state = cls(beta1=beta1, beta2=beta2, eps=eps)
        for name, t in params.named_parameters():
            state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        return state


def adam_step(params: EncoderParams, state: AdamState, lr: float, weight_decay: float) -> None:
    """One bias-corrected Adam update, with decoupled weight decay on the
    weight matrices only (biases are never decayed)."""
    if lr < 0:
        raise ContractError("lr must be >= 0")
    if weight_decay < 0:
        raise ContractError("weight_decay must be >= 0")
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, p in params.named_parameters():
        g = p.grad
        if g is None or g.shape != p.data.shape:
            raise ContractError(f"parameter {name} has no gradient of matching shape")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
        if weight_decay != 0.0 and p.data.ndim == 2:
            p.data -= lr * weight_decay * p.data


@dataclass
class StepState:
    step: int
    alpha: float
    lr: float
    l_ce: float
    l_scl: float
    l_con: float
    l_cc: float
    l_total: float


@dataclass
class TrainResult:
    params: EncoderParams
    states: list[StepState]
    best_params: EncoderParams
    best_step: int
    best_dev_accuracy: float


def write_step_log(states: Sequence[StepState], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for st in states:
            fh.write(json.dumps(asdict(st)) + "\n")


def read_step_log(path: str | Path) -> list[StepState]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(StepState(**json.loads(line)))
    return out


def build_augment_source(config: RunConfig, split: CorpusSplit):
    if config.augmentation == EXTERNAL:
        if not config.paired_path:
            raise ConfigError("augmentation=external needs paired_path")
        pairs = load_paired(config.paired_path, split.unlabeled)
        return ExternalPairSource(pairs, split.unlabeled)
    return LexicalNoiseSource(config.drop_prob, config.swap_prob, base_seed=config.seed)


class _FeatureCache:
    def __init__(self, params: EncoderParams):
        self.params = params
        self._by_text: dict[str, object] = {}

    def get(self, text: str):
        fv = self._by_text.get(text)
        if fv is None:
            fv = featurize(text, self.params.features, self.params.max_length)
            self._by_text[text] = fv
        return fv


def _encode_all(params: EncoderParams, cache: _FeatureCache, texts: Sequence[str]):
    zs, logits = [], []
    for text in texts:
        z, lg = encode(params, cache.get(text))
        zs.append(z)
        logits.append(lg)
    return zs, logits


def train(
    split: CorpusSplit,
    config: RunConfig,
    label_map: LabelMap,
    aug_source=None,
) -> TrainResult:
    """Run the full objective for config.max_step steps.

    Sampling uses independent seeded streams for the labeled and
    unlabeled batches, so disabling the unlabeled terms does not
    perturb the labeled trajectory: with lambda_con = lambda_cc = 0 the
    parameter path is bitwise identical to supervised-only training.
    """
    config.validate()
    if not split.labeled:
        raise ConfigError("split has no labeled examples")
    if any(ex.label is None for ex in split.labeled):
        raise ConfigError("labeled bucket contains unlabeled examples")
    needs_unlabeled_ever = config.lambda_con != 0.0 or config.lambda_cc != 0.0
    if needs_unlabeled_ever and not split.unlabeled:
        raise ConfigError("unlabeled terms are active but the split has no unlabeled examples")

    params = init_params(
        seed=config.seed,
        features=config.features,
        hidden=config.hidden,
        embedding_dim=config.embedding_dim,
        classes=label_map.num_classes,
        max_length=config.max_length,
        label_names=label_map.names,
    )
    adam = AdamState.for_params(
        params, beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps
    )
    loss_cfg = config.loss_config()
    if aug_source is None and needs_unlabeled_ever:
        aug_source = build_augment_source(config, split)

    rng_labeled = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed % 2**64, 1])))
    rng_unlabeled = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed % 2**64, 2])))

    cache = _FeatureCache(params)
    T = config.max_step
    n_lab = len(split.labeled)

    # Unlabeled stream: cycle epoch-wise without replacement, reshuffling
    # at each epoch boundary; augmentation seeds advance with the epoch.
    unl_order = rng_unlabeled.permutation(len(split.unlabeled)) if split.unlabeled else None
    unl_cursor = 0
    unl_epoch = 0

    def draw_unlabeled(batch_size: int) -> list[tuple[Example, int]]:
        nonlocal unl_cursor, unl_epoch, unl_order
        out = []
        for _ in range(batch_size):
            if unl_cursor >= len(unl_order):
                unl_order = rng_unlabeled.permutation(len(split.unlabeled))
                unl_cursor = 0
                unl_epoch += 1
            out.append((split.unlabeled[unl_order[unl_cursor]], unl_epoch))
            unl_cursor += 1
        return out

    # Evaluation imports this module, so pull accuracy in lazily.
    from .evaluate import accuracy

    states: list[StepState] = []
    best_params = params.copy()
    best_step = 0
    best_acc = -1.0

    for step in range(1, T + 1):
        alpha = alpha_schedule(step, T)
        lr = lr_schedule(step, T, config.warmup_percent, config.learning_rate)

        lab_idx = rng_labeled.choice(n_lab, size=config.labeled_batch, replace=n_lab < config.labeled_batch)
        lab_examples = [split.labeled[i] for i in lab_idx]
        lab_z, lab_logits = _encode_all(params, cache, [ex.text for ex in lab_examples])
        lab_batch = LabeledBatch(
            embeddings=lab_z, logits=lab_logits, labels=[ex.label for ex in lab_examples]
        )

        l_ce = ce_loss(lab_batch.logits, lab_batch.labels)
        l_scl = scl_loss(lab_batch, config.scl_temperature) if config.lambda_scl != 0.0 else None

        cc_weight = alpha * config.lambda_cc
        need_unlabeled = config.lambda_con != 0.0 or cc_weight != 0.0
        l_con = None
        l_cc = None
        if need_unlabeled:
            drawn = draw_unlabeled(config.unlabeled_batch)
            orig_texts = [ex.text for ex, _ in drawn]
            aug_texts = [aug_source.augment(ex, epoch) for ex, epoch in drawn]
            orig_z, orig_logits = _encode_all(params, cache, orig_texts)
            aug_z, aug_logits = _encode_all(params, cache, aug_texts)
            pair_batch = UnlabeledPairBatch(
                orig_embeddings=orig_z,
                aug_embeddings=aug_z,
                orig_logits=orig_logits,
                aug_logits=aug_logits,
            )
            if config.lambda_con != 0.0:
                l_con = consistency_loss(pair_batch.orig_logits, pair_batch.aug_logits)
            if cc_weight != 0.0:
                l_cc = cc_loss(
                    pair_batch, config.cc_temperature, stop_grad_target=not config.cc_symmetric
                )

        try:
            loss = total_loss(l_ce, l_scl, l_con, l_cc, loss_cfg, alpha)
        except NumericFault as exc:
            raise NumericFault(
                f"step {step}: {exc} (l_ce={_val(l_ce)!r}, l_scl={_val(l_scl)!r}, "
                f"l_con={_val(l_con)!r}, l_cc={_val(l_cc)!r})"
            ) from None

        params.zero_grads()
        ad.backward(loss)
        adam_step(params, adam, lr, config.weight_decay)

        states.append(
            StepState(
                step=step,
                alpha=alpha,
                lr=lr,
                l_ce=_val(l_ce),
                l_scl=_val(l_scl),
                l_con=_val(l_con),
                l_cc=_val(l_cc),
                l_total=float(loss.data),
            )
        )

        if split.dev and (step % config.eval_every == 0 or step == T):
            acc = accuracy(params, split.dev)
            if acc > best_acc:
                best_acc = acc
                best_step = step
                best_params = params.copy()

    if best_acc < 0:
        # No dev evaluations happened (empty dev set): fall back to final.
        best_params = params.copy()
        best_step = T
        best_acc = float("nan")

    return TrainResult(
        params=params,
        states=states,
        best_params=best_params,
        best_step=best_step,
        best_dev_accuracy=best_acc,
    )


def _val(term) -> float:
    if term is None:
        return 0.0
    return float(term.data)
