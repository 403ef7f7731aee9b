"""Stationary goal policies: Gaussian KDE over embedded observations, the
isotropic Gaussian prior of the variational models, and a uniform box."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from goalspace.errors import DimensionError

REGULARIZATION = 1e-9


def scott_factor(n: int, d: int) -> float:
    return n ** (-1.0 / (d + 4))


@dataclass(frozen=True)
class KdeModel:
    samples: np.ndarray      # (n, d)
    bandwidth: np.ndarray    # (d, d)
    cholesky: np.ndarray     # lower factor of bandwidth
    regularized: bool = False

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def kde_fit(outcomes, scott_squared: bool = False) -> KdeModel:
    """Gaussian KDE whose bandwidth is the sample covariance times ``n^(-1/(d+4))``.

    With ``scott_squared`` the covariance is scaled by the square of that
    factor instead (the usual standard-deviation form of Scott's rule).
    """
    x = np.asarray(outcomes, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n == 0:
        raise DimensionError("number of outcomes", ">= 1", 0)
    cov = np.cov(x, rowvar=False).reshape(d, d) if n > 1 else np.zeros((d, d))
    factor = scott_factor(n, d)
    H = cov * (factor ** 2 if scott_squared else factor)
    H = 0.5 * (H + H.T)
    regularized = False
    try:
        L = np.linalg.cholesky(H)
        if np.min(np.diag(L)) <= 0:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        H = H + REGULARIZATION * np.eye(d)
        L = np.linalg.cholesky(H)
        regularized = True
    return KdeModel(x.copy(), H, L, regularized)


def kde_log_density(model: KdeModel, points) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if p.shape[1] != model.dim:
        raise DimensionError("query dimension", model.dim, p.shape[1])
    d = model.dim
    log_norm = -0.5 * d * math.log(2 * math.pi) - np.log(np.diag(model.cholesky)).sum()
    # whiten once: (o - o_i)^T H^-1 (o - o_i) = |L^-1 o - L^-1 o_i|^2
    sw = solve_triangular(model.cholesky, model.samples.T, lower=True).T
    out = np.empty(p.shape[0])
    chunk = max(1, 2 ** 22 // model.n)
    for start in range(0, p.shape[0], chunk):
        qw = solve_triangular(model.cholesky, p[start:start + chunk].T, lower=True).T
        d2 = ((qw[:, None, :] - sw[None, :, :]) ** 2).sum(axis=2)
        out[start:start + chunk] = logsumexp(log_norm - 0.5 * d2, axis=1) - math.log(model.n)
    return out


def kde_density(model: KdeModel, point):
    """Mixture density; scalar for one point, array for a batch."""
    dens = np.exp(kde_log_density(model, point))
    return float(dens[0]) if np.ndim(point) == 1 else dens


class GoalPolicy:
    """Samples goals.  ``kind`` is ``"kde"``, ``"gaussian_prior"`` or ``"uniform"``."""

    KINDS = ("kde", "gaussian_prior", "uniform")

    def __init__(self, kind: str, dim: int, kde: KdeModel | None = None,
                 low=0.0, high=1.0):
        if kind not in self.KINDS:
            raise ValueError(f"unknown goal policy kind {kind!r}")
        if kind == "kde" and kde is None:
            raise ValueError("a KDE goal policy needs a fitted KdeModel")
        if kde is not None and kde.dim != dim:
            raise DimensionError("KDE dimension", dim, kde.dim)
        self.kind = kind
        self.dim = int(dim)
        self.kde = kde
        self.low = low
        self.high = high

    @classmethod
    def from_outcomes(cls, outcomes, scott_squared=False):
        kde = kde_fit(outcomes, scott_squared)
        return cls("kde", kde.dim, kde)

    @classmethod
    def gaussian_prior(cls, dim):
        return cls("gaussian_prior", dim)

    @classmethod
    def uniform(cls, dim, low=0.0, high=1.0):
        return cls("uniform", dim, low=low, high=high)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        n = 1 if size is None else int(size)
        if self.kind == "kde":
            idx = rng.integers(0, self.kde.n, size=n)
            eps = rng.standard_normal((n, self.dim))
            out = self.kde.samples[idx] + eps @ self.kde.cholesky.T
        elif self.kind == "gaussian_prior":
            out = rng.standard_normal((n, self.dim))
        else:
            out = rng.uniform(self.low, self.high, size=(n, self.dim))
        return out[0] if size is None else out

    def __repr__(self):
        return f"<GoalPolicy {self.kind} d={self.dim}>"


def sample_goal(policy: GoalPolicy, rng: np.random.Generator) -> np.ndarray:
    return policy.sample(rng)
