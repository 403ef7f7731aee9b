"""Isomap: classical MDS on geodesic distances of a k-nearest-neighbour graph."""
from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from goalspace.errors import DimensionError, DisconnectedGraphError
from goalspace.representation.base import EmbeddingModel, Variant, as_data_matrix
from goalspace.representation.linear import _fix_signs


def squared_distances(a, b=None):
    b = a if b is None else b
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T
    return np.maximum(sq, 0.0)


def knn_graph(points, kappa: int) -> csr_matrix:
    """Symmetric kappa-NN graph weighted by Euclidean distance."""
    x = as_data_matrix(points)
    n = x.shape[0]
    if not 1 <= kappa < n:
        raise DimensionError("kappa", f"between 1 and {n - 1}", kappa)
    d2 = squared_distances(x)
    np.fill_diagonal(d2, np.inf)
    # stable sort: ties resolved towards the lower index
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :kappa]
    rows = np.repeat(np.arange(n), kappa)
    cols = nbrs.reshape(-1)
    w = np.sqrt(d2[rows, cols])
    # zero-length edges would vanish from a sparse matrix
    w = np.maximum(w, 1e-300)
    g = csr_matrix((w, (rows, cols)), shape=(n, n))
    return g.maximum(g.T).tocsr()


def geodesic_distances(points, kappa: int) -> np.ndarray:
    """All-pairs shortest paths (Dijkstra from every node) on the kappa-NN graph."""
    g = knn_graph(points, kappa)
    n_comp, _ = connected_components(g, directed=False)
    if n_comp > 1:
        raise DisconnectedGraphError(n_comp, kappa)
    geo = shortest_path(g, method="D", directed=False)
    return 0.5 * (geo + geo.T)


def classical_mds(dist, latent_dim: int):
    """Embedding from the top eigenpairs of the double-centred squared distances."""
    n = dist.shape[0]
    d2 = dist ** 2
    row = d2.mean(axis=1, keepdims=True)
    b = -0.5 * (d2 - row - row.T + d2.mean())
    vals, vecs = scipy.linalg.eigh(b, subset_by_index=[n - latent_dim, n - 1])
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], _fix_signs(vecs[:, order])
    return vecs * np.sqrt(np.maximum(vals, 0.0)), vals


class IsomapModel(EmbeddingModel):
    """Unseen images are embedded at their nearest training image."""

    def __init__(self, latent_dim, kappa=None, train_data=None, embedding=None, eigenvalues=None):
        super().__init__(Variant.ISOMAP, latent_dim)
        self.kappa = kappa
        self.train_data = train_data
        self.embedding = embedding
        self.eigenvalues = eigenvalues
        self._train_sq = None if train_data is None else (train_data ** 2).sum(axis=1)

    @property
    def fitted(self):
        return self.embedding is not None

    @property
    def input_dim(self):
        return self.train_data.shape[1]

    def nearest_training_index(self, x):
        x = as_data_matrix(x)
        d2 = self._train_sq[None, :] - 2.0 * x @ self.train_data.T
        return np.argmin(d2, axis=1)

    def _encode_batch(self, x):
        return self.embedding[self.nearest_training_index(x)]


def fit_isomap(data, latent_dim: int, kappa: int = 10) -> IsomapModel:
    x = as_data_matrix(data)
    n = x.shape[0]
    if not 1 <= latent_dim <= n:
        raise DimensionError("latent_dim", f"between 1 and {n}", latent_dim)
    geo = geodesic_distances(x, kappa)
    emb, vals = classical_mds(geo, latent_dim)
    return IsomapModel(latent_dim, kappa, x.copy(), emb, vals)
