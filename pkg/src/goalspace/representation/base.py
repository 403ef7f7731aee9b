from __future__ import annotations

import enum

import numpy as np

from goalspace.errors import NotFittedError


class Variant(str, enum.Enum):
    PCA = "PCA"
    ISOMAP = "Isomap"
    AE = "AE"
    VAE = "VAE"
    RFVAE = "RFVAE"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        for v in cls:
            if str(value).lower() == v.value.lower():
                return v
        raise ValueError(f"unknown representation variant {value!r}")

    @property
    def is_neural(self) -> bool:
        return self in (Variant.AE, Variant.VAE, Variant.RFVAE)


def as_data_matrix(data) -> np.ndarray:
    """Coerce images or vectors to an ``(n, D)`` float matrix."""
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        return x[None, :]
    if x.ndim == 3:
        return x.reshape(x.shape[0], -1)
    return x


class EmbeddingModel:
    """Maps raw images to ``latent_dim`` outcome vectors.

    Subclasses implement :meth:`_encode_batch`; ``encode`` handles shapes:
    a single image (``(70, 70)`` or flat) gives an ``(l,)`` vector, a batch
    gives ``(n, l)``.
    """

    variant: Variant

    def __init__(self, variant, latent_dim: int):
        self.variant = Variant.parse(variant)
        self.latent_dim = int(latent_dim)

    @property
    def fitted(self) -> bool:
        return False

    def _encode_batch(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def encode(self, image) -> np.ndarray:
        if not self.fitted:
            raise NotFittedError(f"{self.variant.value} model has not been fitted")
        arr = np.asarray(image, dtype=float)
        single = arr.ndim == 1 or (arr.ndim == 2 and arr.shape[0] == arr.shape[1]
                                   and arr.size == self.input_dim)
        x = arr.reshape(1, -1) if single else as_data_matrix(arr)
        out = self._encode_batch(x)
        return out[0] if single else out

    @property
    def input_dim(self) -> int:
        raise NotImplementedError

    def __repr__(self):
        state = "fitted" if self.fitted else "unfitted"
        return f"<{type(self).__name__} {self.variant.value} l={self.latent_dim} {state}>"


def encode(model: EmbeddingModel, image) -> np.ndarray:
    return model.encode(image)
