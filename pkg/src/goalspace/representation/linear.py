"""Principal component embedding."""
from __future__ import annotations

import numpy as np

from goalspace.errors import DimensionError
from goalspace.representation.base import EmbeddingModel, Variant, as_data_matrix


def _fix_signs(vectors):
    # largest-magnitude entry of each column made positive, for reproducibility
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


class PCAModel(EmbeddingModel):
    def __init__(self, latent_dim, mean=None, components=None, eigenvalues=None):
        super().__init__(Variant.PCA, latent_dim)
        self.mean = mean
        self.components = components      # (D, l), orthonormal columns
        self.eigenvalues = eigenvalues    # (l,), decreasing

    @property
    def fitted(self):
        return self.components is not None

    @property
    def input_dim(self):
        return self.mean.size

    def _encode_batch(self, x):
        return (x - self.mean) @ self.components

    def reconstruct(self, codes):
        return np.atleast_2d(codes) @ self.components.T + self.mean


def fit_pca(data, latent_dim: int) -> PCAModel:
    """Top-``latent_dim`` eigenvectors of the sample covariance (via a thin SVD)."""
    x = as_data_matrix(data)
    n, D = x.shape
    if n < 2:
        raise DimensionError("number of samples", ">= 2", n)
    if not 1 <= latent_dim <= min(n, D):
        raise DimensionError("latent_dim", f"between 1 and {min(n, D)}", latent_dim)
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    components = _fix_signs(vt[:latent_dim].T.copy())
    eigenvalues = s[:latent_dim] ** 2 / (n - 1)
    return PCAModel(latent_dim, mean, components, eigenvalues)
