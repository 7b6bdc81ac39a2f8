"""Multilayer random dot product graphs and their unfolded spectral embedding."""

from .chernoff import chernoff_gaussians, chernoff_gmsbm, limiting_covariance_left, limiting_covariance_right, subset_comparison
from .embed import alignment_transform, ase, estimate_p, mase, mean_embedding, omnibus_embedding, uase
from .errors import (ConfigError, DataError, DimensionError, DomainError, GraphfoldError,
                     InputError, ModelValidityError, ParameterError, SingularityError,
                     UndefinedAUCError, UnsupportedOperationError)
from .models import AdjacencyStack, GmsbmParams, LatentState, LayerKind, sample_gmsbm, sample_mrdpg
from .spectral import joint_procrustes, truncated_svd, two_to_infinity_norm, unfold

__version__ = "0.1.0"

__all__ = [
    "AdjacencyStack", "ConfigError", "DataError", "DimensionError", "DomainError",
    "GmsbmParams", "GraphfoldError", "InputError", "LatentState", "LayerKind",
    "ModelValidityError", "ParameterError", "SingularityError", "UndefinedAUCError",
    "UnsupportedOperationError", "alignment_transform", "ase", "chernoff_gaussians",
    "chernoff_gmsbm", "estimate_p", "joint_procrustes", "limiting_covariance_left",
    "limiting_covariance_right", "mase", "mean_embedding", "omnibus_embedding",
    "sample_gmsbm", "sample_mrdpg", "subset_comparison", "truncated_svd",
    "two_to_infinity_norm", "uase", "unfold",
]
