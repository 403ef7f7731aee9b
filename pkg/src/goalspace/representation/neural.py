"""Auto-encoder, VAE and radial-flow VAE losses, gradients and training."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from goalspace.errors import DimensionError, DivergenceError, NonFiniteLossError
from goalspace.representation.base import EmbeddingModel, Variant, as_data_matrix
from goalspace.representation.flows import (
    RadialFlowParams,
    radial_flow_backward,
    radial_flow_forward,
    sigmoid,
)
from goalspace.representation.nn import DenseNet, make_optimizer

LOG_VAR_MIN, LOG_VAR_MAX = -10.0, 10.0
DIVERGENCE_THRESHOLD = 1e6


class LossTerms(NamedTuple):
    total: float
    reconstruction: float
    kl: float
    logdet: float


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 100
    n_updates: int = 10_000
    warmup_updates: int = 1_000
    seed: int = 0
    n_flows: int = 10
    hidden: tuple = (512, 256)

    def __post_init__(self):
        if self.batch_size < 1 or self.n_updates < 0:
            raise ValueError("batch_size must be >= 1 and n_updates >= 0")
        if not 0 <= self.warmup_updates <= max(self.n_updates, 0):
            raise ValueError("warmup_updates must lie in [0, n_updates]")

    @classmethod
    def for_variant(cls, variant, paper_scale: bool = False, **overrides):
        """Default budget per variant (desk scale unless ``paper_scale``)."""
        v = Variant.parse(variant)
        if v is Variant.AE:
            base = dict(optimizer="adagrad", n_updates=200_000 if paper_scale else 20_000,
                        warmup_updates=0)
        elif v is Variant.VAE:
            base = dict(optimizer="adam", n_updates=100_000 if paper_scale else 10_000,
                        warmup_updates=10_000 if paper_scale else 1_000)
        elif v is Variant.RFVAE:
            base = dict(optimizer="adam", n_updates=50_000 if paper_scale else 10_000,
                        warmup_updates=10_000 if paper_scale else 1_000)
        else:
            raise ValueError(f"{v.value} is not a neural variant")
        base.update(overrides)
        if "warmup_updates" not in overrides and base["warmup_updates"] > base["n_updates"]:
            # a shortened budget keeps the ramp at a tenth of the updates
            base["warmup_updates"] = base["n_updates"] // 10
        return cls(**base)

    def kl_weight(self, update: int) -> float:
        """Deterministic warm-up: linear ramp from 0 to 1 over ``warmup_updates``."""
        if self.warmup_updates <= 0:
            return 1.0
        return min(1.0, update / self.warmup_updates)


def bernoulli_cross_entropy(logits, x):
    """Per-sample summed cross-entropy ``-sum x log p + (1-x) log(1-p)``, p = sigmoid(logits)."""
    return (np.logaddexp(0.0, logits) - x * logits).sum(axis=1)


def gaussian_kl(mu, log_var):
    """Per-sample KL(N(mu, diag exp(log_var)) || N(0, I))."""
    return -0.5 * (1.0 + log_var - mu ** 2 - np.exp(log_var)).sum(axis=1)


def _check(name, value):
    if not np.all(np.isfinite(value)):
        raise NonFiniteLossError(name)


def loss_and_grad(net: DenseNet, flows: RadialFlowParams | None, batch, variant,
                  kl_weight: float = 1.0, rng: np.random.Generator | None = None,
                  eps=None):
    """Mean loss over ``batch`` and gradients for every parameter.

    VAE/RFVAE draw the reparameterization noise from ``rng`` unless ``eps``
    is given explicitly.  RFVAE minimizes
    ``recon + kl_weight * (KL(q(z0|x) || N(0, I)) - 2 * sum_k log|det dt_k/dz|)``.
    Returns ``(LossTerms, grads)``.
    """
    v = Variant.parse(variant)
    x = as_data_matrix(batch)
    if x.shape[0] == 0:
        raise DimensionError("batch size", ">= 1", 0)
    if not 0.0 <= kl_weight <= 1.0:
        raise ValueError("kl_weight must lie in [0, 1]")
    B = x.shape[0]
    l = net.latent_dim
    grads = {}

    enc_out, enc_cache = net.encoder.forward(x)
    kl = np.zeros(B)
    log_det = np.zeros(B)
    if v is Variant.AE:
        z = enc_out
    else:
        mu = enc_out[:, :l]
        raw_lv = enc_out[:, l:]
        log_var = np.clip(raw_lv, LOG_VAR_MIN, LOG_VAR_MAX)
        std = np.exp(0.5 * log_var)
        if eps is None:
            if rng is None:
                raise ValueError("variational losses need an rng or explicit eps")
            eps = rng.standard_normal(mu.shape)
        z0 = mu + std * eps
        kl = gaussian_kl(mu, log_var)
        if v is Variant.RFVAE:
            z, log_det, flow_cache = radial_flow_forward(flows, z0)
        else:
            z = z0

    logits, dec_cache = net.decoder.forward(z)
    recon = bernoulli_cross_entropy(logits, x)
    _check("reconstruction", recon)
    _check("kl", kl)
    _check("logdet", log_det)

    total = recon + kl_weight * (kl - 2.0 * log_det)
    terms = LossTerms(float(total.mean()), float(recon.mean()), float(kl.mean()),
                      float(log_det.mean()))
    _check("total", terms.total)

    # reverse pass; every per-sample term is averaged over the batch
    g_logits = (sigmoid(logits) - x) / B
    g_z = net.decoder.backward(g_logits, dec_cache, grads)
    if v is Variant.AE:
        g_enc = g_z
    else:
        if v is Variant.RFVAE:
            g_z0, flow_grads = radial_flow_backward(
                flows, flow_cache, g_z, np.full(B, -2.0 * kl_weight / B))
            grads.update(flow_grads)
        else:
            g_z0 = g_z
        g_mu = g_z0 + kl_weight * mu / B
        g_lv = g_z0 * eps * 0.5 * std + kl_weight * 0.5 * (np.exp(log_var) - 1.0) / B
        g_lv = g_lv * ((raw_lv > LOG_VAR_MIN) & (raw_lv < LOG_VAR_MAX))
        g_enc = np.concatenate([g_mu, g_lv], axis=1)
    net.encoder.backward(g_enc, enc_cache, grads)
    return terms, grads


class NeuralModel(EmbeddingModel):
    """Trained AE / VAE / RFVAE; encodes with the deterministic code (``mu`` for VAEs)."""

    def __init__(self, variant, latent_dim, net: DenseNet | None = None,
                 flows: RadialFlowParams | None = None, loss_curve=None):
        super().__init__(variant, latent_dim)
        self.net = net
        self.flows = flows
        self.loss_curve = [] if loss_curve is None else loss_curve

    @property
    def fitted(self):
        return self.net is not None

    @property
    def input_dim(self):
        return self.net.input_dim

    def _encode_batch(self, x):
        out, _ = self.net.encoder.forward(x)
        return out[:, :self.latent_dim].copy()

    def posterior(self, images):
        """``(mu, log_var)`` for variational models."""
        out, _ = self.net.encoder.forward(as_data_matrix(images))
        l = self.latent_dim
        return out[:, :l], np.clip(out[:, l:], LOG_VAR_MIN, LOG_VAR_MAX)

    def reconstruct(self, images):
        x = as_data_matrix(images)
        z = self._encode_batch(x)
        if self.variant is Variant.RFVAE:
            z, _, _ = radial_flow_forward(self.flows, z)
        return self.net.decode_probabilities(z)

    def evaluate(self, images, kl_weight=1.0, seed=0) -> LossTerms:
        terms, _ = loss_and_grad(self.net, self.flows, images, self.variant, kl_weight,
                                 rng=np.random.default_rng(seed))
        return terms


@dataclass
class LossRecord:
    update: int
    total: float
    reconstruction: float
    kl: float
    logdet: float


def init_model(input_dim, latent_dim, variant, cfg: TrainConfig, rng):
    v = Variant.parse(variant)
    net = DenseNet(input_dim, latent_dim, cfg.hidden, variational=v is not Variant.AE, rng=rng)
    flows = None
    if v is Variant.RFVAE:
        flows = RadialFlowParams.init(cfg.n_flows, latent_dim, rng)
        net.params.update(flows.as_dict())
    return net, flows


def fit_neural(data, latent_dim: int, variant, cfg: TrainConfig | None = None,
               callback=None) -> NeuralModel:
    """Minibatch training; returns a fitted :class:`NeuralModel` with its loss curve.

    ``callback(update, terms)`` is called after every update when given.
    """
    v = Variant.parse(variant)
    if not v.is_neural:
        raise ValueError(f"{v.value} is not a neural variant")
    cfg = cfg or TrainConfig.for_variant(v)
    x = as_data_matrix(data)
    n = x.shape[0]
    if n < 2:
        raise DimensionError("number of samples", ">= 2", n)
    if cfg.batch_size > n:
        raise DimensionError("batch_size", f"<= {n}", cfg.batch_size)

    init_rng, batch_rng, noise_rng = (np.random.default_rng(s)
                                      for s in np.random.SeedSequence(cfg.seed).spawn(3))
    net, flows = init_model(x.shape[1], latent_dim, v, cfg, init_rng)
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    curve = []
    order = batch_rng.permutation(n)
    cursor = 0
    for update in range(cfg.n_updates):
        if cursor + cfg.batch_size > n:
            order = batch_rng.permutation(n)
            cursor = 0
        idx = order[cursor:cursor + cfg.batch_size]
        cursor += cfg.batch_size
        w = cfg.kl_weight(update) if v is not Variant.AE else 0.0
        try:
            if flows is not None:
                flows = RadialFlowParams.from_dict(net.params)
            terms, grads = loss_and_grad(net, flows, x[idx], v, w, rng=noise_rng)
        except NonFiniteLossError:
            raise DivergenceError(update - 1, float("nan")) from None
        if terms.total > DIVERGENCE_THRESHOLD:
            raise DivergenceError(update - 1, terms.total)
        opt.step(net.params, grads)
        curve.append(LossRecord(update, *terms))
        if callback is not None:
            callback(update, terms)
    if flows is not None:
        flows = RadialFlowParams.from_dict(net.params)
    return NeuralModel(v, latent_dim, net, flows, curve)


def write_loss_curve(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["update_index", "total", "reconstruction", "kl", "logdet"])
        for rec in curve:
            w.writerow([rec.update, repr(rec.total), repr(rec.reconstruction),
                        repr(rec.kl), repr(rec.logdet)])
