"""Triplet objective, Adam, and the training loop."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import expit

from rogue_sensors.data import Dataset
from rogue_sensors.encoder import EncoderConfig, EncoderParams, backward, forward_cached, init_params
from rogue_sensors.errors import ConfigError, DataError, NumericError
from rogue_sensors.sampler import Triplet, sample_triplet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    K: int = 6
    batch_size: int = 3
    steps: int = 500
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    negative_mode: str = "dtw"

    def __post_init__(self):
        if self.K < 1 or self.batch_size < 1 or self.steps < 1:
            raise ConfigError("K, batch_size and steps must be >= 1")
        if self.lr < 0 or not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps <= 0:
            raise ConfigError("invalid Adam hyperparameters")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def fresh(cls, p: EncoderParams) -> AdamState:
        return cls(p.zeros_like(), p.zeros_like(), 0)


@dataclass
class TrainRecord:
    step: int
    epoch: int
    loss: float
    seconds: float


@dataclass
class TrainLog:
    records: list[TrainRecord] = field(default_factory=list)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def write_csv(self, path: str | Path, timings: bool = False) -> None:
        """Wall-clock seconds are only written when ``timings`` is set (they break reproducibility)."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "epoch", "loss"] + (["seconds"] if timings else []))
            for r in self.records:
                row = [r.step, r.epoch, repr(r.loss)]
                w.writerow(row + ([f"{r.seconds:.6f}"] if timings else []))


def _check_vectors(z_anchor, z_pos, z_negs):
    za = np.asarray(z_anchor, dtype=np.float64)
    zp = np.asarray(z_pos, dtype=np.float64)
    zn = np.asarray(z_negs, dtype=np.float64)
    if zn.ndim == 1:
        zn = zn[None, :]
    if za.ndim != 1 or zp.shape != za.shape or zn.ndim != 2 or zn.shape[1] != za.shape[0]:
        raise DataError("triplet embeddings must share one dimension")
    return za, zp, zn


def triplet_loss(z_anchor, z_pos, z_negs) -> float:
    """-log sig(a.p) - sum_k log sig(-a.n_k), evaluated through softplus."""
    za, zp, zn = _check_vectors(z_anchor, z_pos, z_negs)
    return float(np.logaddexp(0.0, -(za @ zp)) + np.logaddexp(0.0, zn @ za).sum())


def triplet_loss_grad(z_anchor, z_pos, z_negs):
    """Loss value and its gradients with respect to anchor, positive and each negative."""
    za, zp, zn = _check_vectors(z_anchor, z_pos, z_negs)
    ap = za @ zp
    an = zn @ za
    loss = float(np.logaddexp(0.0, -ap) + np.logaddexp(0.0, an).sum())
    c_pos = -expit(-ap)
    c_neg = expit(an)
    g_anchor = c_pos * zp + c_neg @ zn
    g_pos = c_pos * za
    g_negs = c_neg[:, None] * za[None, :]
    return loss, g_anchor, g_pos, g_negs


def adam_step(
    state: AdamState, p: EncoderParams, g: dict[str, np.ndarray], cfg: TrainConfig
) -> tuple[EncoderParams, AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    for name, grad in g.items():
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient in {name}; step aborted")
    t = state.t + 1
    b1, b2 = cfg.beta1, cfg.beta2
    new_m, new_v, new_p = {}, {}, {}
    for name, theta in p.tensors.items():
        grad = g[name]
        m = b1 * state.m[name] + (1 - b1) * grad
        v = b2 * state.v[name] + (1 - b2) * grad * grad
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p[name] = theta - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        new_m[name], new_v[name] = m, v
    return EncoderParams(p.cfg, new_p), AdamState(new_m, new_v, t)


def triplet_grad(p: EncoderParams, d: Dataset, trip: Triplet, grads: dict[str, np.ndarray]) -> float:
    """Accumulate the gradient of one triplet's loss into ``grads``; returns the loss."""
    za, ca = forward_cached(p, trip.anchor.take(d))
    zp, cp = forward_cached(p, trip.positive.take(d))
    neg = [forward_cached(p, s.take(d)) for s in trip.negatives]
    zn = np.stack([z for z, _ in neg])
    loss, ga, gp, gn = triplet_loss_grad(za, zp, zn)
    backward(p, ca, ga, grads)
    backward(p, cp, gp, grads)
    for (_, c), g in zip(neg, gn):
        backward(p, c, g, grads)
    return loss


def steps_per_epoch(n: int, batch_size: int) -> int:
    return math.ceil(n / batch_size)


def train(
    d: Dataset,
    m: np.ndarray | None,
    ecfg: EncoderConfig,
    tcfg: TrainConfig,
    *,
    init: EncoderParams | None = None,
    on_step: Callable[[int, list[Triplet]], None] | None = None,
) -> tuple[EncoderParams, TrainLog]:
    """Fit the encoder with Adam on the mean triplet loss of each batch.

    Every epoch visits all series once in a freshly shuffled order,
    ``batch_size`` series per optimization step, each series contributing
    one sampled triplet. Training stops after exactly ``tcfg.steps`` steps,
    so the last epoch may be partial. Randomness for initialization,
    shuffling and sampling comes from independent children of ``tcfg.seed``.
    """
    if not d.normalized:
        raise DataError("training expects a normalized dataset")
    n = len(d)
    init_ss, order_ss, sample_ss = np.random.SeedSequence(tcfg.seed).spawn(3)
    params = init if init is not None else init_params(ecfg, np.random.default_rng(init_ss))
    order_rng = np.random.default_rng(order_ss)
    sample_rng = np.random.default_rng(sample_ss)
    state = AdamState.fresh(params)
    tlog = TrainLog()
    step, epoch = 0, 0
    t0 = time.perf_counter()
    while step < tcfg.steps:
        epoch += 1
        order = order_rng.permutation(n)
        for b in range(0, n, tcfg.batch_size):
            batch = [int(i) for i in order[b : b + tcfg.batch_size]]
            trips = [sample_triplet(d, i, m, tcfg.K, sample_rng, tcfg.negative_mode) for i in batch]
            grads = params.zeros_like()
            losses = [triplet_grad(params, d, trip, grads) for trip in trips]
            loss = float(np.mean(losses))
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at step {step + 1} (epoch {epoch})")
            for g in grads.values():
                g /= len(trips)
            params, state = adam_step(state, params, grads, tcfg)
            step += 1
            tlog.records.append(TrainRecord(step, epoch, loss, time.perf_counter() - t0))
            if on_step is not None:
                on_step(step, trips)
            if step % 50 == 0:
                log.info("step %d/%d epoch %d loss %.4f", step, tcfg.steps, epoch, loss)
            if step >= tcfg.steps:
                break
    return params, tlog
