"""Radial normalizing flows with closed-form log-determinants.

Each transform is ``t(z) = z + beta * h(alpha, r) * (z - c)`` with
``r = |z - c|`` and ``h = 1 / (alpha + r)``.  ``alpha`` is kept positive by a
softplus and ``beta = -alpha + softplus(beta_hat)`` keeps every transform
invertible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


def inverse_softplus(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class RadialFlowParams:
    """Parameters of ``K`` chained radial transforms in ``dim`` dimensions."""

    alpha_raw: np.ndarray  # (K,)
    beta_hat: np.ndarray   # (K,)
    centers: np.ndarray    # (K, dim)

    @classmethod
    def init(cls, n_flows: int, dim: int, rng: np.random.Generator, scale=0.1):
        return cls(alpha_raw=rng.normal(0.0, scale, n_flows),
                   beta_hat=rng.normal(0.0, scale, n_flows),
                   centers=rng.normal(0.0, scale, (n_flows, dim)))

    @classmethod
    def identity(cls, n_flows: int, dim: int, alpha=1.0):
        a = np.full(n_flows, float(alpha))
        return cls(alpha_raw=inverse_softplus(a),
                   beta_hat=inverse_softplus(a),
                   centers=np.zeros((n_flows, dim)))

    @property
    def n_flows(self) -> int:
        return len(self.alpha_raw)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def alpha(self) -> np.ndarray:
        return softplus(self.alpha_raw)

    @property
    def beta(self) -> np.ndarray:
        return -self.alpha + softplus(self.beta_hat)

    def as_dict(self, prefix="flow.") -> dict:
        return {prefix + "alpha_raw": self.alpha_raw,
                prefix + "beta_hat": self.beta_hat,
                prefix + "centers": self.centers}

    @classmethod
    def from_dict(cls, params: dict, prefix="flow."):
        return cls(params[prefix + "alpha_raw"], params[prefix + "beta_hat"],
                   params[prefix + "centers"])


def radial_flow_forward(flows: RadialFlowParams, z0):
    """Batched forward pass.  Returns ``(z_K, log_det (B,), cache)``."""
    z = np.atleast_2d(np.asarray(z0, dtype=float))
    D = z.shape[1]
    alpha, beta = flows.alpha, flows.beta
    log_det = np.zeros(z.shape[0])
    cache = []
    for k in range(flows.n_flows):
        d = z - flows.centers[k]
        r = np.sqrt((d * d).sum(axis=1))
        s = alpha[k] + r
        u = beta[k] / s                     # beta * h
        v = beta[k] * alpha[k] / s ** 2     # beta * (h + h' r)
        log_det += (D - 1) * np.log1p(u) + np.log1p(v)
        cache.append((d, r, s, u, v))
        z = z + u[:, None] * d
    return z, log_det, cache


def radial_flow_apply(flows: RadialFlowParams, z0):
    """Apply the chain to one vector or a batch; returns ``(z_K, log_det_sum)``."""
    single = np.ndim(z0) == 1
    zk, log_det, _ = radial_flow_forward(flows, z0)
    if single:
        return zk[0], float(log_det[0])
    return zk, log_det


def radial_flow_backward(flows: RadialFlowParams, cache, g_zk, g_logdet):
    """Reverse-mode pass.

    ``g_zk`` is dL/dz_K ``(B, D)`` and ``g_logdet`` is dL/dlog_det ``(B,)``.
    Returns ``(dL/dz_0, grads)`` with grads keyed like :meth:`RadialFlowParams.as_dict`.
    """
    alpha, beta = flows.alpha, flows.beta
    D = flows.dim
    g_z = np.array(g_zk, dtype=float)
    g_logdet = np.asarray(g_logdet, dtype=float)
    g_alpha = np.zeros(flows.n_flows)
    g_beta = np.zeros(flows.n_flows)
    g_c = np.zeros_like(flows.centers)
    for k in reversed(range(flows.n_flows)):
        d, r, s, u, v = cache[k]
        a, b = alpha[k], beta[k]
        # z' = z + u d
        gd_dot = (g_z * d).sum(axis=1)           # g_z' . d
        g_u = gd_dot + g_logdet * (D - 1) / (1.0 + u)
        g_v = g_logdet / (1.0 + v)
        # u = b / s, v = b a / s^2, s = a + r
        g_s = -g_u * b / s ** 2 - 2.0 * g_v * b * a / s ** 3
        g_beta[k] = (g_u / s).sum() + (g_v * a / s ** 2).sum()
        g_alpha[k] = g_s.sum() + (g_v * b / s ** 2).sum()
        g_r = g_s
        safe_r = np.where(r > 0, r, 1.0)
        # d = z - c; the identity term of z' = z + u d does not involve c
        g_d = g_z * u[:, None] + (g_r / safe_r * (r > 0))[:, None] * d
        g_c[k] = -g_d.sum(axis=0)
        g_z = g_z + g_d
    sig_a = sigmoid(flows.alpha_raw)
    sig_b = sigmoid(flows.beta_hat)
    grads = {"flow.alpha_raw": (g_alpha - g_beta) * sig_a,
             "flow.beta_hat": g_beta * sig_b,
             "flow.centers": g_c}
    return g_z, grads
