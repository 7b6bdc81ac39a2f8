"""Link prediction scores from projected probability estimates."""

from __future__ import annotations

import numpy as np

from ..embed import estimate_p, uase
from ..errors import DimensionError, ParameterError
from ..models import AdjacencyStack, LayerKind
from .metrics import RocCurve, roc_auc

AVERAGED = "averaged"
PER_LAYER = "per_layer"


def link_predict(train_stack: AdjacencyStack, d: int, mode: str = AVERAGED,
                 method: str = "auto"):
    """Edge scores from the UASE projection estimates of a training stack.

    ``averaged`` returns the mean of the per-layer estimates (layers must
    share a shape); ``per_layer`` returns the list. Estimates of undirected
    layers are symmetrized, and every score is clipped to [0, 1].
    """
    if mode not in (AVERAGED, PER_LAYER):
        raise ParameterError(f"mode must be {AVERAGED!r} or {PER_LAYER!r}")
    if not isinstance(train_stack, AdjacencyStack):
        train_stack = AdjacencyStack(list(train_stack))
    emb = uase(train_stack, d, method=method)
    p_hats = estimate_p(train_stack, d, embedding=emb)
    for r, kind in enumerate(train_stack.kinds):
        if kind is LayerKind.UNDIRECTED:
            p_hats[r] = (p_hats[r] + p_hats[r].T) / 2
        p_hats[r] = np.clip(p_hats[r], 0.0, 1.0)
    if mode == PER_LAYER:
        return p_hats
    shapes = {p.shape for p in p_hats}
    if len(shapes) != 1:
        raise DimensionError("averaged mode needs layers of equal shape")
    return sum(p_hats) / len(p_hats)


def candidate_mask(train, symmetric: bool = True) -> np.ndarray:
    """Node pairs eligible as new edges: absent from training, off-diagonal.

    For symmetric graphs only the strict upper triangle is kept so each
    pair is counted once.
    """
    train = np.asarray(train)
    mask = train == 0
    if train.shape[0] == train.shape[1]:
        if symmetric:
            mask &= np.triu(np.ones(train.shape, dtype=bool), 1)
        else:
            np.fill_diagonal(mask, False)
    return mask


def score_new_edges(scores, train, test, symmetric: bool = True) -> RocCurve:
    """ROC curve for predicting edges of ``test`` that are absent from ``train``."""
    scores = np.asarray(scores, dtype=float)
    test = np.asarray(test)
    if scores.shape != test.shape or np.shape(train) != test.shape:
        raise DimensionError("scores, train and test must share a shape")
    mask = candidate_mask(train, symmetric)
    return roc_auc(scores[mask], test[mask] != 0)
