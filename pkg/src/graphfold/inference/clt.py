"""Scaled residuals between aligned embeddings and true latent positions."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..embed import AlignmentTransform, EmbeddingPair, uase
from ..errors import DimensionError, UnsupportedOperationError
from ..models import LatentState


def _group_rows(rows):
    """Integer label per distinct latent row, in order of first appearance."""
    _, first, inverse = np.unique(rows, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    # relabel so communities are numbered by first occurrence
    order = np.argsort(first)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.size)
    return relabel[inverse]


def clt_residuals(stack, latents: LatentState, transform: AlignmentTransform,
                  side: str = "left", layer: Optional[int] = None,
                  labels=None, embedding: Optional[EmbeddingPair] = None) -> dict:
    """Residual clouds ``sqrt(n) (X_A L^{-1} - X)`` grouped by community.

    Parameters
    ----------
    stack : AdjacencyStack
    latents : LatentState
        The latent positions the transform was built from.
    transform : AlignmentTransform
    side : {"left", "right"}
        ``right`` gives ``sqrt(n) (Y_A^(r) R_r^{-1} - Y^(r))`` for ``layer``.
    layer : int, optional
        Required for the right side.
    labels : array_like, optional
        Community of each row. By default rows with identical latent
        positions form a community.
    embedding : EmbeddingPair, optional
        Reused if given, otherwise recomputed from ``stack``.

    Returns
    -------
    dict
        Community label -> ``m x d`` array of residuals.
    """
    if embedding is None:
        embedding = uase(stack, transform.l.shape[0])
    n = latents.x.shape[0]
    if side == "left":
        est = transform.align_left(embedding.left)
        truth = latents.x_scaled
    elif side == "right":
        if layer is None:
            raise DimensionError("the right side needs a layer index")
        lam = latents.lams[layer]
        if lam.shape[0] != lam.shape[1]:
            raise UnsupportedOperationError(f"mixing matrix of layer {layer} is not square")
        s = np.linalg.svd(lam, compute_uv=False)
        if s[-1] <= 1e-10 * max(s[0], np.finfo(float).tiny):
            raise UnsupportedOperationError(
                f"mixing matrix of layer {layer} is singular; no right-side limit law")
        r_mat = transform.r_list[layer]
        est = np.linalg.solve(r_mat.T, embedding.rights[layer].T).T
        truth = latents.y_scaled(layer)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    resid = np.sqrt(n) * (est - truth)
    if labels is None:
        labels = _group_rows(truth)
    labels = np.asarray(labels)
    if labels.shape[0] != resid.shape[0]:
        raise DimensionError("one label per row is required")
    return {int(g): resid[labels == g] for g in np.unique(labels)}


def empirical_covariance(resid) -> np.ndarray:
    """Covariance about the sample mean (1/m normalization)."""
    resid = np.asarray(resid, dtype=float)
    diff = resid - resid.mean(axis=0)
    return diff.T @ diff / resid.shape[0]


def relative_frobenius(a, b) -> float:
    """``|a - b|_F / |b|_F``."""
    return float(np.linalg.norm(np.asarray(a) - b) / np.linalg.norm(b))
