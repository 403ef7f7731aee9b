"""Goal-space learning from raw images: PCA, Isomap, AE, VAE, radial-flow VAE."""
from goalspace.representation.base import EmbeddingModel, Variant, encode
from goalspace.representation.flows import RadialFlowParams, radial_flow_apply
from goalspace.representation.isomap import IsomapModel, fit_isomap
from goalspace.representation.linear import PCAModel, fit_pca
from goalspace.representation.neural import (
    LossTerms,
    NeuralModel,
    TrainConfig,
    fit_neural,
    loss_and_grad,
)
from goalspace.representation.nn import DenseNet


def fit_embedding(data, latent_dim, variant, train_config=None, kappa=10):
    """Fit any variant by name."""
    v = Variant.parse(variant)
    if v is Variant.PCA:
        return fit_pca(data, latent_dim)
    if v is Variant.ISOMAP:
        return fit_isomap(data, latent_dim, kappa)
    return fit_neural(data, latent_dim, v, train_config)


__all__ = [
    "DenseNet", "EmbeddingModel", "IsomapModel", "LossTerms", "NeuralModel",
    "PCAModel", "RadialFlowParams", "TrainConfig", "Variant", "encode",
    "fit_embedding", "fit_isomap", "fit_neural", "fit_pca", "loss_and_grad",
    "radial_flow_apply",
]
