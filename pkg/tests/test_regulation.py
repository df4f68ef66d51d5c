import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regprompt3d.autodiff import Tensor, backward, finite_diff_check, log_softmax, softmax
from regprompt3d.regulation import (
    EnsembleAccumulator,
    RegulationWeights,
    auto_mu_sigma,
    gaussian_weights,
    kl_rows,
    l1_rows,
    mac_loss,
    mec_accumulate,
    mec_finalize,
    tdc_pool,
    total_loss,
)


def unit(rng, *shape):
    x = rng.normal(size=shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


# ---------------------------------------------------------------- MAC


def test_mac_identical_is_zero(rng):
    h, t = unit(rng, 4, 8), unit(rng, 4, 8)
    d = softmax(Tensor(rng.normal(size=(4, 3)))).data
    terms = mac_loss(h, h, t, t, D_tilde=d, D_frozen=d)
    assert (terms.l_p.item(), terms.l_t.item()) == (0.0, 0.0)
    assert abs(terms.l_d.item()) < 1e-15 and not terms.clamped


def test_l1_orthogonal_pair():
    assert l1_rows(np.array([0.0, 1.0]), np.array([1.0, 0.0])).item() == 2.0


def test_kl_closed_form():
    got, clamped = kl_rows(np.array([0.5, 0.5]), q=Tensor([0.25, 0.75]))
    assert got.item() == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), abs=1e-12)
    assert got.item() == pytest.approx(0.1438, abs=1e-4)
    assert not clamped


def test_kl_log_path_matches_prob_path(rng):
    z = Tensor(rng.normal(size=(3, 5)))
    p = softmax(Tensor(rng.normal(size=(3, 5)))).data
    a, _ = kl_rows(p, q=softmax(z))
    b, _ = kl_rows(p, log_q=log_softmax(z))
    assert a.item() == pytest.approx(b.item(), abs=1e-12)


def test_kl_clamp_flag():
    _, clamped = kl_rows(np.array([0.5, 0.5]), q=Tensor([1.0, 0.0]))
    assert clamped


def test_kl_zero_reference_entries_ignored():
    got, _ = kl_rows(np.array([1.0, 0.0]), q=Tensor([0.5, 0.5]))
    assert got.item() == pytest.approx(math.log(2), abs=1e-12)


def test_mac_shape_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        l1_rows(np.ones((2, 3)), np.ones((2, 4)))


def test_mac_needs_frozen_distribution():
    with pytest.raises(ValueError):
        mac_loss(np.ones(2), np.ones(2), np.ones(2), np.ones(2))


def test_gradients_reach_only_promptable_side(rng):
    tilde = Tensor(unit(rng, 2, 4), requires_grad=True)
    frozen = Tensor(unit(rng, 2, 4), requires_grad=True)
    backward(l1_rows(tilde, frozen))
    assert tilde.grad is not None and frozen.grad is None


def test_mac_gradcheck(rng):
    hp = Tensor(rng.normal(size=(3, 4)), requires_grad=True, name="hp")
    ht = Tensor(rng.normal(size=(3, 4)), requires_grad=True, name="ht")
    z = Tensor(rng.normal(size=(3, 5)), requires_grad=True, name="z")
    hp0, ht0 = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    d0 = softmax(Tensor(rng.normal(size=(3, 5)))).data
    w = RegulationWeights()

    def fn():
        t = mac_loss(hp, hp0, ht, ht0, D_frozen=d0, log_D_tilde=log_softmax(z))
        return total_loss(Tensor(0.0), t.l_p, t.l_t, t.l_d, w)

    assert finite_diff_check(fn, [hp, ht, z], tol=1e-4).passed


# ---------------------------------------------------------------- TDC


def test_tdc_single_row(rng):
    f = unit(rng, 1, 6)
    assert np.array_equal(tdc_pool(f), f[0])


def test_tdc_antipodal_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        tdc_pool(np.array([[1.0, 0.0], [-1.0, 0.0]]))


def test_tdc_empty_rejected():
    with pytest.raises(ValueError):
        tdc_pool(np.zeros((0, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_tdc_permutation_invariant(seed, m):
    rng = np.random.default_rng(seed)
    f = unit(rng, m, 8)
    pooled = tdc_pool(f)
    assert np.array_equal(pooled, tdc_pool(f[rng.permutation(m)]))
    assert abs(np.linalg.norm(pooled) - 1) < 1e-12


# ---------------------------------------------------------------- MEC weights


def test_twenty_epoch_schedule_peak():
    w = gaussian_weights(20, 15, 1)
    assert int(np.argmax(w)) + 1 == 15
    assert w[14] == pytest.approx(0.39894, abs=1e-5)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


def test_flat_limit():
    np.testing.assert_allclose(gaussian_weights(20, 15, 1e6), 1 / 20, atol=1e-9)


def test_unnormalized_formula():
    raw = gaussian_weights(3, 2, 1, normalize=False)
    assert raw[1] == pytest.approx(1 / math.sqrt(2 * math.pi))


def test_far_tail_falls_back_to_nearest_epoch():
    w = gaussian_weights(5, 1000, 0.01)
    assert w.tolist() == [0, 0, 0, 0, 1]


@pytest.mark.parametrize("e,sigma", [(0, 1.0), (3, 0.0), (3, -1.0)])
def test_weights_reject_bad_args(e, sigma):
    with pytest.raises(ValueError):
        gaussian_weights(e, 1.0, sigma)


def test_auto_mu_sigma():
    assert auto_mu_sigma(20) == (15.0, 1.0)
    assert auto_mu_sigma(50) == (37.5, 2.5)


# ---------------------------------------------------------------- MEC streaming


def test_single_epoch_exact(rng):
    theta = rng.normal(size=5)
    acc = EnsembleAccumulator(5, 1, *auto_mu_sigma(1))
    mec_accumulate(acc, theta, 1)
    assert np.array_equal(mec_finalize(acc), theta)


def test_identical_snapshots(rng):
    theta = rng.normal(size=4)
    acc = EnsembleAccumulator(4, 6, 4.5, 0.3)
    for i in range(1, 7):
        acc.accumulate(theta, i)
    np.testing.assert_allclose(acc.finalize(), theta, atol=1e-15)


def test_two_equal_weights_midpoint():
    acc = EnsembleAccumulator(1, 2, 1.5, 1.0)
    acc.accumulate([0.0], 1)
    acc.accumulate([2.0], 2)
    assert acc.finalize().tolist() == [1.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60), st.floats(0.5, 60), st.floats(0.05, 20))
def test_streaming_matches_batch(seed, e, mu, sigma):
    rng = np.random.default_rng(seed)
    snaps = rng.normal(size=(e, 6))
    acc = EnsembleAccumulator(6, e, mu, sigma)
    for i, s in enumerate(snaps, start=1):
        acc.accumulate(s, i)
    w = gaussian_weights(e, mu, sigma)
    np.testing.assert_allclose(acc.finalize(), (w[:, None] * snaps).sum(0), atol=1e-12)
    assert acc.weight_total > 0


def test_accumulator_order_and_size_checks():
    acc = EnsembleAccumulator(2, 3, 2, 1)
    with pytest.raises(ValueError, match="expected epoch 1"):
        acc.accumulate([0, 0], 2)
    with pytest.raises(ValueError, match="entries"):
        acc.accumulate([0, 0, 0], 1)
    acc.accumulate([0, 0], 1)
    with pytest.raises(ValueError, match="of 3"):
        acc.finalize()


# ---------------------------------------------------------------- total loss


def test_total_loss_default_weights():
    assert total_loss(1.0, 0.1, 0.2, 0.3, RegulationWeights(10, 25, 1)) == pytest.approx(7.3)


def test_total_loss_zero_terms_is_ce():
    assert total_loss(0.7, 0.0, 0.0, 0.0, RegulationWeights()) == 0.7
    assert total_loss(0.7, 0.5, 0.5, 0.5, RegulationWeights(0, 0, 0)) == 0.7


def test_total_loss_rejects_nonfinite_and_negative():
    with pytest.raises(ValueError, match="L_t"):
        total_loss(1.0, 0.0, float("nan"), 0.0, RegulationWeights())
    with pytest.raises(ValueError, match="negative"):
        total_loss(1.0, -1.0, 0.0, 0.0, RegulationWeights())


def test_weights_validation():
    with pytest.raises(ValueError, match="alpha"):
        RegulationWeights(alpha=-1)
    with pytest.raises(ValueError, match="gamma"):
        RegulationWeights(gamma=float("inf"))
