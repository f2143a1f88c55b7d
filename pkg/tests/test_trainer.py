"""Schedules, the combined objective, Adam, and the training loop."""

import math

import numpy as np
import pytest

import fewtext.trainer as trainer_mod
from fewtext.autodiff import Tensor
from fewtext.config import RunConfig
from fewtext.corpus import make_split
from fewtext.encoder import init_params
from fewtext.errors import ConfigError, ContractError, NumericFault
from fewtext.losses import LossConfig
from fewtext.synthetic import SyntheticSpec, synthetic_corpus, synthetic_label_map
from fewtext.trainer import (
    AdamState,
    adam_step,
    alpha_schedule,
    build_augment_source,
    lr_schedule,
    read_step_log,
    total_loss,
    train,
    write_step_log,
)


def micro_setup(seed=1, **overrides):
    spec = SyntheticSpec()
    lm = synthetic_label_map(spec)
    pool = synthetic_corpus(260, seed=21, spec=spec)
    cfg = RunConfig(
        max_step=24,
        features=128,
        hidden=12,
        embedding_dim=8,
        shots_per_class=4,
        unlabeled_count=100,
        dev_count=40,
        unlabeled_batch=6,
        labeled_batch=4,
        eval_every=8,
        seed=seed,
    ).replace(**overrides)
    split = make_split(pool, lm, cfg.shots_per_class, cfg.unlabeled_count, cfg.dev_count, seed=seed)
    return split, cfg, lm


# -- schedules -----------------------------------------------------------------


def test_alpha_schedule_exact():
    for total in (2, 4, 100, 1000):
        for t in range(total + 1):
            a = alpha_schedule(t, total)
            if t * 2 <= total:
                assert a == 0.0
            else:
                assert a == (2 * t - total) / total
        assert alpha_schedule(total, total) == 1.0
    assert alpha_schedule(75, 100) == 0.5
    assert alpha_schedule(750, 1000) == 0.5


def test_alpha_schedule_monotone():
    prev = -1.0
    for t in range(501):
        a = alpha_schedule(t, 500)
        assert a >= prev
        prev = a


def test_alpha_schedule_contracts():
    with pytest.raises(ContractError):
        alpha_schedule(-1, 10)
    with pytest.raises(ContractError):
        alpha_schedule(11, 10)
    with pytest.raises(ContractError):
        alpha_schedule(0, 0)


def test_lr_schedule_exact():
    T, peak = 100, 0.002
    assert lr_schedule(0, T, 0.1, peak) == 0.0
    assert lr_schedule(10, T, 0.1, peak) == peak
    assert lr_schedule(T, T, 0.1, peak) == 0.0
    assert lr_schedule(5, T, 0.1, peak) == peak * 0.5
    assert lr_schedule(55, T, 0.1, peak) == peak * 0.5
    # No warmup: straight decay from the peak.
    assert lr_schedule(0, T, 0.0, peak) == peak
    assert lr_schedule(50, T, 0.0, peak) == peak * 0.5
    assert lr_schedule(T, T, 0.0, peak) == 0.0


# -- total objective -----------------------------------------------------------


def test_total_loss_weighted_sums():
    cfg = LossConfig(lambda_scl=1.0, lambda_con=1.0, lambda_cc=1.0)
    comps = (Tensor(1.0), Tensor(2.0), Tensor(3.0), Tensor(4.0))
    assert total_loss(*comps, cfg, alpha=0.0).item() == 6.0
    assert total_loss(*comps, cfg, alpha=1.0).item() == 10.0
    assert total_loss(*comps, cfg, alpha=0.5).item() == 8.0


def test_total_loss_zero_weights_reduce_to_ce():
    cfg = LossConfig(lambda_scl=0.0, lambda_con=0.0, lambda_cc=0.0)
    ce = Tensor(1.25)
    out = total_loss(ce, Tensor(9.0), Tensor(9.0), Tensor(9.0), cfg, alpha=1.0)
    assert out is ce  # not merely equal: the graph is untouched
    assert total_loss(ce, None, None, None, cfg, alpha=1.0) is ce


def test_total_loss_missing_required_component():
    cfg = LossConfig(lambda_scl=0.5, lambda_con=0.0, lambda_cc=0.0)
    with pytest.raises(ContractError, match="l_scl"):
        total_loss(Tensor(1.0), None, None, None, cfg, alpha=0.0)


def test_total_loss_names_nonfinite_component():
    cfg = LossConfig()
    with pytest.raises(NumericFault, match="l_con"):
        total_loss(Tensor(1.0), Tensor(0.5), Tensor(float("nan")), Tensor(0.0), cfg, alpha=0.0)
    with pytest.raises(ContractError):
        total_loss(Tensor(1.0), Tensor(0.0), Tensor(0.0), Tensor(0.0), cfg, alpha=1.5)


# -- Adam ----------------------------------------------------------------------


def zero_grads(params):
    for _, t in params.named_parameters():
        t.zero_grad_()


def test_adam_zero_grad_no_decay_is_identity():
    p = init_params(1, features=16, hidden=4, embedding_dim=4, classes=2)
    zero_grads(p)
    before = {n: t.data.copy() for n, t in p.named_parameters()}
    adam_step(p, AdamState.for_params(p), lr=0.1, weight_decay=0.0)
    for n, t in p.named_parameters():
        np.testing.assert_array_equal(t.data, before[n])


def test_adam_first_step_closed_form():
    # With constant gradient g, the bias-corrected first step moves by
    # exactly lr * g / (|g| + eps).
    p = init_params(2, features=16, hidden=4, embedding_dim=4, classes=2)
    zero_grads(p)
    g = 2.0
    p.w1.grad[:] = g
    before = p.w1.data.copy()
    state = AdamState.for_params(p)
    adam_step(p, state, lr=0.1, weight_decay=0.0)
    expected = before - 0.1 * g / (abs(g) + state.eps)
    np.testing.assert_allclose(p.w1.data, expected, rtol=1e-15)


def test_adam_decoupled_decay_matrices_only():
    p = init_params(3, features=16, hidden=4, embedding_dim=4, classes=2)
    p.b1.data[:] = 0.7
    zero_grads(p)
    w_before = p.w1.data.copy()
    adam_step(p, AdamState.for_params(p), lr=0.1, weight_decay=0.01)
    np.testing.assert_allclose(p.w1.data, w_before * (1.0 - 0.1 * 0.01), rtol=1e-15)
    np.testing.assert_array_equal(p.b1.data, np.full(4, 0.7))  # bias untouched


def test_adam_requires_gradients():
    p = init_params(4, features=16, hidden=4, embedding_dim=4, classes=2)
    for _, t in p.named_parameters():
        t.grad = None
    with pytest.raises(ContractError):
        adam_step(p, AdamState.for_params(p), lr=0.1, weight_decay=0.0)


# -- training loop -------------------------------------------------------------


def test_train_step_log_invariants():
    split, cfg, lm = micro_setup()
    result = train(split, cfg, lm)
    assert len(result.states) == cfg.max_step
    for st in result.states:
        assert st.alpha == alpha_schedule(st.step, cfg.max_step)
        assert st.lr == lr_schedule(st.step, cfg.max_step, cfg.warmup_percent, cfg.learning_rate)
        recon = (st.l_ce + cfg.lambda_scl * st.l_scl + cfg.lambda_con * st.l_con
                 + st.alpha * cfg.lambda_cc * st.l_cc)
        assert abs(st.l_total - recon) <= 1e-12
        assert st.l_ce >= 0.0 and st.l_scl >= 0.0


def test_train_deterministic():
    split, cfg, lm = micro_setup()
    a = train(split, cfg, lm)
    b = train(split, cfg, lm)
    assert a.states == b.states
    for (n, ta), (_, tb) in zip(a.params.named_parameters(), b.params.named_parameters()):
        np.testing.assert_array_equal(ta.data, tb.data)
    assert a.best_step == b.best_step
    assert a.best_dev_accuracy == b.best_dev_accuracy


def test_train_supervised_only_ignores_unlabeled_stream():
    # With both unlabeled weights at zero the trajectory cannot depend
    # on the unlabeled bucket's contents.
    split, cfg, lm = micro_setup(lambda_con=0.0, lambda_cc=0.0)
    a = train(split, cfg, lm)
    mutated = micro_setup(lambda_con=0.0, lambda_cc=0.0)[0]
    for ex in mutated.unlabeled:
        object.__setattr__(ex, "text", "scrambled beyond recognition")
    b = train(mutated, cfg, lm)
    for (n, ta), (_, tb) in zip(a.params.named_parameters(), b.params.named_parameters()):
        np.testing.assert_array_equal(ta.data, tb.data)
    # And the consistency terms never hit the log.
    assert all(st.l_con == 0.0 and st.l_cc == 0.0 for st in a.states)


def test_train_cc_is_alpha_gated():
    split, cfg, lm = micro_setup()
    result = train(split, cfg, lm)
    for st in result.states:
        if st.alpha == 0.0:
            assert st.l_cc == 0.0


def test_train_tracks_best_dev_checkpoint():
    from fewtext.evaluate import accuracy

    split, cfg, lm = micro_setup()
    result = train(split, cfg, lm)
    assert 1 <= result.best_step <= cfg.max_step
    got = accuracy(result.best_params, split.dev)
    assert got == result.best_dev_accuracy


def test_train_empty_unlabeled_rejected():
    split, cfg, lm = micro_setup()
    split.unlabeled.clear()
    with pytest.raises(ConfigError):
        train(split, cfg, lm)


def test_train_numeric_fault_reports_step(monkeypatch):
    split, cfg, lm = micro_setup()
    monkeypatch.setattr(trainer_mod, "ce_loss", lambda *a, **k: Tensor(float("nan")))
    with pytest.raises(NumericFault, match="step 1"):
        train(split, cfg, lm)


def test_step_log_round_trip(tmp_path):
    split, cfg, lm = micro_setup()
    result = train(split, cfg, lm)
    p = tmp_path / "steps.jsonl"
    write_step_log(result.states, p)
    assert read_step_log(p) == result.states


def test_build_augment_source_kinds(tmp_path):
    split, cfg, lm = micro_setup()
    src = build_augment_source(cfg, split)
    assert src.source == "lexical_noise"
    with pytest.raises(ConfigError):
        cfg.replace(augmentation="external")  # needs paired_path
