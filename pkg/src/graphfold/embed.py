"""Unfolded adjacency spectral embedding and its rivals.

Also provides the alignment transforms used to compare estimates with true
latent positions, and the projection estimator of the probability matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, SingularityError
from .models import AdjacencyStack, LatentState, LayerKind
from .spectral import factored_svd, joint_procrustes, top_eigh, truncated_svd

PINV_RCOND = 1e-10
RANK_TOL = 1e-10


class EmbeddingRankWarning(UserWarning):
    pass


@dataclass
class EmbeddingPair:
    """Left and right UASE point clouds.

    ``left = u * sqrt(sigma)`` and ``rights[r] = v_blocks[r] * sqrt(sigma)``.
    """

    left: np.ndarray
    rights: list
    sigma: np.ndarray
    u: np.ndarray
    v_blocks: list
    rank_deficient: bool = False

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    @property
    def v(self) -> np.ndarray:
        return np.vstack(self.v_blocks)

    def reconstruct(self) -> list:
        return [self.left @ y.T for y in self.rights]


def _as_stack(stack) -> AdjacencyStack:
    if isinstance(stack, AdjacencyStack):
        return stack
    return AdjacencyStack(list(stack))


def _unique_layers(layers):
    """Map each layer to the first bit-identical layer, return (uniques, index)."""
    uniques, index = [], []
    for a in layers:
        for u_idx, u in enumerate(uniques):
            if u.shape == a.shape and np.array_equal(u, a):
                index.append(u_idx)
                break
        else:
            uniques.append(a)
            index.append(len(uniques) - 1)
    return uniques, index


def uase(stack, d: int, method: str = "auto") -> EmbeddingPair:
    """Unfolded adjacency spectral embedding.

    Parameters
    ----------
    stack : AdjacencyStack or sequence of arrays
        Layers ``A^(r)`` with a shared row set.
    d : int
        Embedding dimension, at most ``min(n, sum n_r)``.
    method : str
        SVD backend, see :func:`graphfold.spectral.truncated_svd`.

    Returns
    -------
    EmbeddingPair

    Notes
    -----
    Bit-identical layers are merged before the SVD: the unfolding
    ``[A|A]`` has the same left singular vectors as ``sqrt(2) A``, and each
    copy's right block is the merged block divided by ``sqrt(2)``. This gives
    identical layers identical right embeddings, bit for bit.
    """
    stack = _as_stack(stack)
    n, total = stack.n, sum(stack.sizes)
    if not 1 <= d <= min(n, total):
        raise DimensionError(f"d={d} outside [1, {min(n, total)}]")
    uniques, index = _unique_layers(stack.layers)
    mult = np.bincount(index, minlength=len(uniques)).astype(float)
    if len(uniques) == 1:
        reduced = uniques[0] * np.sqrt(mult[0]) if mult[0] > 1 else uniques[0]
    else:
        reduced = np.hstack([a * np.sqrt(m) if m > 1 else a for a, m in zip(uniques, mult)])
    svd = truncated_svd(reduced, d, method=method)
    bounds = np.cumsum([0] + [a.shape[1] for a in uniques])
    v_unique = [svd.v[bounds[i]:bounds[i + 1]] for i in range(len(uniques))]
    v_blocks = [v_unique[i] / np.sqrt(mult[i]) if mult[i] > 1 else v_unique[i].copy()
                for i in index]
    root = np.sqrt(svd.sigma)
    deficient = bool(svd.sigma[-1] <= RANK_TOL * max(svd.sigma[0], np.finfo(float).tiny))
    if deficient:
        warnings.warn("d exceeds the numerical rank of the unfolding; trailing "
                      "embedding columns are near zero", EmbeddingRankWarning, stacklevel=2)
    return EmbeddingPair(left=svd.u * root, rights=[v * root for v in v_blocks],
                         sigma=svd.sigma, u=svd.u, v_blocks=v_blocks,
                         rank_deficient=deficient)


def ase(a, d: int, return_signature: bool = False, method: str = "auto"):
    """Adjacency spectral embedding with largest-in-magnitude eigenvalues.

    The embedding is ``V |D|^{1/2}`` for the ``d`` eigenpairs of largest
    absolute value. With ``return_signature`` the counts ``(p, q)`` of
    positive and negative selected eigenvalues are returned too.

    A non-symmetric input (a directed graph) is embedded by its scaled left
    singular vectors instead; its signature is reported as ``(d, 0)``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"ase needs a square matrix, got shape {a.shape}")
    if not 1 <= d <= a.shape[0]:
        raise DimensionError(f"d={d} outside [1, {a.shape[0]}]")
    if np.array_equal(a, a.T):
        vals, vecs = top_eigh(a, d, method=method)
        emb = vecs * np.sqrt(np.abs(vals))
        sig = (int(np.sum(vals > 0)), int(np.sum(vals < 0)))
    else:
        svd = truncated_svd(a, d, method=method)
        emb = svd.u * np.sqrt(svd.sigma)
        sig = (d, 0)
    if return_signature:
        return emb, sig
    return emb


def _square_layers(stack: AdjacencyStack):
    for r, (a, kind) in enumerate(zip(stack.layers, stack.kinds)):
        if kind is LayerKind.BIPARTITE or a.shape[0] != a.shape[1]:
            raise DimensionError(f"layer {r} is not square")
    return stack.layers


def mean_embedding(stack, d: int, method: str = "auto") -> np.ndarray:
    """ASE of the layer average."""
    layers = _square_layers(_as_stack(stack))
    uniques, index = _unique_layers(layers)
    if len(uniques) == 1:
        mean = uniques[0]
    else:
        mean = sum(layers) / len(layers)
    return ase(mean, d, method=method)


def omnibus_matrix(a1, a2) -> np.ndarray:
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.shape != a2.shape or a1.ndim != 2 or a1.shape[0] != a1.shape[1]:
        raise DimensionError(f"omnibus needs equal square inputs, got {a1.shape} and {a2.shape}")
    avg = (a1 + a2) / 2
    return np.block([[a1, avg], [avg, a2]])


def omnibus_embedding(a1, a2, d: int, method: str = "auto"):
    """First and last ``n`` rows of the ASE of ``[[A1, M], [M, A2]]``.

    ``M`` is the average of the two inputs. For bit-identical inputs the
    omnibus matrix is ``[[A, A], [A, A]]`` whose embedding rows both equal
    the ASE of ``A``; that closed form is used so the two blocks coincide
    exactly.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.shape != a2.shape or a1.ndim != 2 or a1.shape[0] != a1.shape[1]:
        raise DimensionError(f"omnibus needs equal square inputs, got {a1.shape} and {a2.shape}")
    n = a1.shape[0]
    if np.array_equal(a1, a2):
        emb = ase(a1, d, method=method)
        return emb, emb.copy()
    emb = ase(omnibus_matrix(a1, a2), d, method=method)
    return emb[:n], emb[n:]


def mase(stack, d: int, d_r: Sequence[int], return_sigma: bool = False,
         method: str = "auto"):
    """Multiple adjacency spectral embedding.

    Each layer is embedded by ASE at ``d_r[r]``; the embeddings are
    concatenated column-wise and the ``d`` leading left singular vectors of
    the result are returned (with the singular values if ``return_sigma``).
    """
    layers = _square_layers(_as_stack(stack))
    if len(d_r) != len(layers):
        raise DimensionError("need one d_r per layer")
    blocks = [ase(a, int(dr), method=method) for a, dr in zip(layers, d_r)]
    m = np.hstack(blocks)
    if not 1 <= d <= min(m.shape):
        raise DimensionError(f"d={d} outside [1, {min(m.shape)}]")
    svd = truncated_svd(m, d, method=method)
    if return_sigma:
        return svd.u, svd.sigma
    return svd.u


def pinv(m) -> np.ndarray:
    """Moore-Penrose inverse with singular values below 1e-10 * max cut."""
    return np.linalg.pinv(np.asarray(m, dtype=float), rcond=PINV_RCOND)


@dataclass
class AlignmentTransform:
    """Maps between estimated and true latent coordinates.

    ``l = l_tilde @ w`` and ``r_list[r] = r_tilde[r] @ w`` with
    ``l @ r_list[r].T`` equal to the scaled mixing matrix of layer ``r``.
    """

    l: np.ndarray
    r_list: list
    w: np.ndarray
    l_tilde: np.ndarray
    r_tilde: list
    procrustes_rank_deficient: bool = False

    def align_left(self, x_a) -> np.ndarray:
        """``X_A L^{-1}``, an estimate of the scaled ``X``."""
        return np.linalg.solve(self.l.T, np.asarray(x_a, dtype=float).T).T

    def align_right(self, y_a, r: int) -> np.ndarray:
        """``Y_A^(r) R_r^+``, an estimate of the scaled ``Y^(r)``."""
        return np.asarray(y_a, dtype=float) @ pinv(self.r_list[r])


def _full_column_rank(m, name):
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[-1] <= RANK_TOL * max(s[0], np.finfo(float).tiny):
        raise SingularityError(f"{name} is not of full column rank")


def alignment_transform(stack, latents: LatentState, d: Optional[int] = None,
                        embedding: Optional[EmbeddingPair] = None,
                        method: str = "auto") -> AlignmentTransform:
    """Constructive alignment between the UASE of ``stack`` and ``latents``.

    ``X_P`` and ``Y_P^(r)`` come from the rank-``d`` SVD of the expected
    unfolding. ``L~`` solves ``X L~ = X_P`` by least squares (exact when
    ``X`` has full column rank), and ``R~_r`` solves ``Y^(r) R~_r = Y_P^(r)``.
    ``W`` is the joint Procrustes rotation from ``(U_P, V_P)`` to
    ``(U_A, V_A)``.

    Raises
    ------
    SingularityError
        If the scaled ``X`` is rank deficient.
    """
    if embedding is None:
        if d is None:
            d = latents.d
        embedding = uase(stack, d, method=method)
    d = embedding.d
    x = latents.x_scaled
    if x.shape[1] != d:
        raise DimensionError(f"latent dimension {x.shape[1]} differs from d={d}")
    _full_column_rank(x, "X")
    p_svd = expected_svd(latents, d)
    root = np.sqrt(p_svd.sigma)
    x_p = p_svd.u * root
    sizes = [y.shape[0] for y in latents.ys]
    bounds = np.cumsum([0] + sizes)
    v_p_blocks = [p_svd.v[bounds[r]:bounds[r + 1]] for r in range(latents.k)]
    l_tilde = np.linalg.lstsq(x, x_p, rcond=None)[0]
    r_tilde = [np.linalg.lstsq(latents.y_scaled(r), v_p_blocks[r] * root, rcond=None)[0]
               for r in range(latents.k)]
    w, diag = joint_procrustes(embedding.u, embedding.v, p_svd.u, p_svd.v,
                               return_diagnostics=True)
    return AlignmentTransform(l=l_tilde @ w, r_list=[rt @ w for rt in r_tilde], w=w,
                              l_tilde=l_tilde, r_tilde=r_tilde,
                              procrustes_rank_deficient=diag["rank_deficient"])


def expected_svd(latents: LatentState, d: int):
    """Rank-``d`` SVD of the expected unfolding, computed from its factors."""
    right = np.vstack([latents.y_scaled(r) @ latents.lam_eps(r).T for r in range(latents.k)])
    return factored_svd(latents.x_scaled, right, d)


def align_least_squares(estimate, target) -> np.ndarray:
    """Best linear map of ``estimate`` onto ``target``, applied to ``estimate``."""
    estimate = np.asarray(estimate, dtype=float)
    t = np.linalg.lstsq(estimate, np.asarray(target, dtype=float), rcond=None)[0]
    return estimate @ t


def estimate_p(stack, d: int, embedding: Optional[EmbeddingPair] = None,
               method: str = "auto") -> list:
    """Projection estimates ``U U^T A^(r) U U^T`` from the unscaled left UASE.

    Bipartite layers have columns outside the row space, so only the left
    projection ``U U^T A^(r)`` is applied to them.
    """
    stack = _as_stack(stack)
    if embedding is None:
        embedding = uase(stack, d, method=method)
    u = embedding.u
    out = []
    for a, kind in zip(stack.layers, stack.kinds):
        left = u @ (u.T @ a)
        if kind is LayerKind.BIPARTITE:
            out.append(left)
        else:
            out.append((left @ u) @ u.T)
    return out


def projection_estimate(u, a) -> np.ndarray:
    """``U U^T A U U^T`` for any orthonormal basis ``U`` (e.g. from MASE)."""
    u = np.asarray(u, dtype=float)
    return u @ ((u.T @ np.asarray(a, dtype=float)) @ u) @ u.T


def nmse(p_hat, p) -> float:
    """Relative Frobenius error ``|P_hat - P|_F / |P|_F``."""
    return float(np.linalg.norm(np.asarray(p_hat) - p) / np.linalg.norm(p))
