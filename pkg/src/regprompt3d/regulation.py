"""Regulation constraints for prompt tuning.

* mutual agreement (:func:`mac_loss`): L1 feature distances to the frozen
  model plus KL between the frozen and promptable class distributions;
* text diversity (:func:`tdc_pool`): class anchors averaged over many
  descriptions;
* model ensemble (:class:`EnsembleAccumulator`): Gaussian-weighted running
  average of the prompt parameters over epochs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .autodiff import Tensor, abs_, as_tensor, clamp_min, log, mean, mul, reshape, scale, sub, sum_

log_ = logging.getLogger(__name__)

KL_FLOOR = 1e-12


@dataclass(frozen=True)
class RegulationWeights:
    alpha: float = 10.0
    beta: float = 25.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite non-negative number, got {v}")


class MacTerms(NamedTuple):
    l_p: Tensor
    l_t: Tensor
    l_d: Tensor
    clamped: bool = False


def _rows(t) -> Tensor:
    t = as_tensor(t)
    return reshape(t, (1, -1)) if t.ndim == 1 else t


def _frozen(x) -> Tensor:
    return Tensor(x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64))


def l1_rows(tilde, frozen) -> Tensor:
    """Mean over rows of the per-row L1 distance; gradients reach ``tilde`` only."""
    tilde, frozen = _rows(tilde), _rows(_frozen(frozen))
    if tilde.shape != frozen.shape:
        raise ValueError(f"feature shape mismatch between {tilde.shape} and {frozen.shape}")
    return mean(sum_(abs_(sub(frozen, tilde)), axis=-1))


def kl_rows(p_ref, q=None, log_q=None) -> tuple[Tensor, bool]:
    """Mean over rows of KL(p_ref || q), with the frozen ``p_ref`` as reference.

    Pass ``log_q`` when available (exact); otherwise ``q`` is floored at
    ``KL_FLOOR`` before the log and the returned flag reports whether the
    floor was hit where ``p_ref`` is positive.
    """
    p = np.atleast_2d(_frozen(p_ref).data)
    clamped = False
    if log_q is None:
        q = _rows(q)
        clamped = bool(np.any((q.data < KL_FLOOR) & (p > 0)))
        if clamped:
            log_.warning("KL: promptable distribution below %.0e where the reference is positive", KL_FLOOR)
        log_q = log(clamp_min(q, KL_FLOOR))
    else:
        log_q = _rows(log_q)
    if log_q.shape != p.shape:
        raise ValueError(f"distribution shape mismatch between {p.shape} and {log_q.shape}")
    pos = p > 0
    log_p = np.where(pos, np.log(np.where(pos, p, 1.0)), 0.0)
    per_row = sum_(mul(Tensor(p), sub(Tensor(log_p), log_q)), axis=-1)
    return mean(per_row), clamped


def mac_loss(hP_tilde, hP_frozen, hT_tilde, hT_frozen, D_tilde=None, D_frozen=None,
             log_D_tilde=None) -> MacTerms:
    """(L_p, L_t, L_D) for batched or single features and distributions."""
    l_p = l1_rows(hP_tilde, hP_frozen)
    l_t = l1_rows(hT_tilde, hT_frozen)
    if D_frozen is None:
        raise ValueError("mac_loss needs the frozen class distribution")
    l_d, clamped = kl_rows(D_frozen, q=D_tilde, log_q=log_D_tilde)
    return MacTerms(l_p, l_t, l_d, clamped)


def tdc_pool(description_features) -> np.ndarray:
    """Order-invariant class anchor: mean of unit rows, re-normalized."""
    feats = np.asarray(description_features.data if isinstance(description_features, Tensor)
                       else description_features, dtype=np.float64)
    if feats.ndim != 2 or len(feats) == 0:
        raise ValueError(f"tdc_pool needs a non-empty (M, d) matrix, got shape {feats.shape}")
    if len(feats) == 1:
        return feats[0].copy()
    # sort rows so the float summation order is permutation-independent
    order = np.lexsort(feats.T[::-1])
    pooled = feats[order].mean(axis=0)
    norm = np.linalg.norm(pooled)
    if norm < 1e-12:
        raise ValueError("degenerate pool: description features cancel to the zero vector")
    return pooled / norm


def gaussian_weights(e: int, mu: float, sigma: float, normalize: bool = True) -> np.ndarray:
    """w_i = exp(-(i - mu)^2 / (2 sigma^2)) / (sigma sqrt(2 pi)) for i = 1..e."""
    if e < 1:
        raise ValueError(f"e must be >= 1, got {e}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    i = np.arange(1, e + 1, dtype=np.float64)
    w = np.exp(-((i - mu) ** 2) / (2 * sigma**2)) / (sigma * math.sqrt(2 * math.pi))
    if not normalize:
        return w
    total = w.sum()
    if total == 0:
        # every epoch sits in the far tail; fall back to the nearest epoch
        w = np.zeros(e)
        w[int(np.clip(round(mu), 1, e)) - 1] = 1.0
        return w
    return w / total


def auto_mu_sigma(e: int) -> tuple[float, float]:
    """Scale the (15, 1) setting used for 20 epochs to other epoch counts."""
    return 0.75 * e, e / 20


@dataclass
class EnsembleAccumulator:
    """Streaming Gaussian-weighted parameter average; keeps one running sum."""

    size: int
    e_total: int
    mu: float
    sigma: float
    weighted_sum: np.ndarray = field(init=False)
    weight_total: float = field(init=False, default=0.0)
    epochs_seen: int = field(init=False, default=0)
    _weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.weighted_sum = np.zeros(self.size)
        self._weights = gaussian_weights(self.e_total, self.mu, self.sigma)

    def accumulate(self, snapshot, epoch_i: int) -> None:
        snapshot = np.asarray(snapshot, dtype=np.float64).reshape(-1)
        if snapshot.size != self.size:
            raise ValueError(f"snapshot has {snapshot.size} entries, accumulator holds {self.size}")
        if epoch_i != self.epochs_seen + 1:
            raise ValueError(f"expected epoch {self.epochs_seen + 1}, got {epoch_i}")
        if epoch_i > self.e_total:
            raise ValueError(f"epoch {epoch_i} beyond e_total={self.e_total}")
        w = float(self._weights[epoch_i - 1])
        self.weighted_sum += w * snapshot
        self.weight_total += w
        self.epochs_seen = epoch_i

    def finalize(self) -> np.ndarray:
        if self.epochs_seen < self.e_total:
            raise ValueError(f"only {self.epochs_seen} of {self.e_total} epochs accumulated")
        return self.weighted_sum / self.weight_total


def mec_accumulate(acc: EnsembleAccumulator, params_snapshot, epoch_i: int) -> None:
    acc.accumulate(params_snapshot, epoch_i)


def mec_finalize(acc: EnsembleAccumulator) -> np.ndarray:
    return acc.finalize()


def total_loss(ce, l_p, l_t, l_d, w: RegulationWeights):
    """ce + alpha * L_p + beta * L_t + gamma * L_D (tensors or floats)."""
    terms = {"ce": ce, "L_p": l_p, "L_t": l_t, "L_D": l_d}
    for name, t in terms.items():
        v = np.asarray(t.data if isinstance(t, Tensor) else t, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite {name} term: {v}")
        if name != "ce" and np.any(v < -1e-12):
            raise ValueError(f"regulation term {name} is negative: {v}")
    if not any(isinstance(t, Tensor) for t in terms.values()):
        return ce + w.alpha * l_p + w.beta * l_t + w.gamma * l_d
    out = as_tensor(ce)
    for coef, t in ((w.alpha, l_p), (w.beta, l_t), (w.gamma, l_d)):
        out = out + scale(as_tensor(t), coef)
    return out
