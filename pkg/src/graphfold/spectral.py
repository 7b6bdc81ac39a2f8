"""Numerical kernel: unfolding, truncated SVD, Procrustes alignment and norms.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import eigsh, svds

from .errors import DimensionError, InputError

# Dense LAPACK is used when the problem is small or when d is a sizeable
# fraction of the smaller dimension; ARPACK otherwise.
DENSE_MAX_DIM = 300
DENSE_RANK_FRACTION = 0.25

ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True)
class TruncatedSvd:
    """Top-``d`` singular triplets of a matrix.

    ``u`` is ``m x d``, ``sigma`` has length ``d`` (nonincreasing) and ``v`` is
    ``p x d`` so that ``u @ diag(sigma) @ v.T`` is the best rank-``d``
    approximation.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def _as_matrix(m, name="matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be non-empty, got shape {arr.shape}")
    return arr


def unfold(blocks) -> np.ndarray:
    """Adjoin matrices column-wise: ``[B1 | B2 | ... | Bk]``."""
    blocks = [_as_matrix(b, "block") for b in blocks]
    if not blocks:
        raise DimensionError("unfold needs at least one block")
    n = blocks[0].shape[0]
    for r, b in enumerate(blocks):
        if b.shape[0] != n:
            raise DimensionError(
                f"block {r} has {b.shape[0]} rows, expected {n}")
    if len(blocks) == 1:
        return blocks[0].copy()
    return np.hstack(blocks)


def use_dense(min_dim: int, d: int) -> bool:
    return min_dim <= DENSE_MAX_DIM or d > DENSE_RANK_FRACTION * min_dim


def _start_vector(size: int) -> np.ndarray:
    # fixed, non-degenerate starting vector so ARPACK runs are reproducible
    v = np.cos(np.arange(size) * 0.7548776662466927) + 1.5
    return v / np.linalg.norm(v)


def _canonical_order(u, sigma, v):
    """Sign-fix and order singular triplets deterministically.

    Each column of ``u`` is flipped so its largest-magnitude entry is positive
    (first index on ties). Columns are ordered by decreasing singular value;
    exactly equal values are ordered by the sign-fixed ``u`` column,
    lexicographically descending.
    """
    d = sigma.shape[0]
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(d)])
    signs[signs == 0] = 1.0
    u = u * signs
    v = v * signs
    keys = [tuple(-u[:, j]) for j in range(d)]
    order = sorted(range(d), key=lambda j: (-sigma[j], keys[j]))
    return u[:, order], sigma[order], v[:, order]


def truncated_svd(m, d: int, method: str = "auto") -> TruncatedSvd:
    """Leading ``d`` singular triplets of ``m``.

    Parameters
    ----------
    m : array_like, shape (rows, cols)
    d : int
        Number of triplets, ``1 <= d <= min(rows, cols)``.
    method : {"auto", "dense", "iterative"}
        ``dense`` runs LAPACK's full thin SVD and truncates; ``iterative``
        runs ARPACK (implicitly restarted Lanczos) to machine precision from
        a fixed starting vector. ``auto`` picks by problem size.

    Returns
    -------
    TruncatedSvd
        Sign-fixed so that the largest-magnitude entry of each left singular
        vector is positive.
    """
    m = _as_matrix(m)
    if not np.all(np.isfinite(m)):
        raise InputError("matrix has non-finite entries")
    min_dim = min(m.shape)
    if not 1 <= d <= min_dim:
        raise DimensionError(f"d={d} outside [1, {min_dim}]")
    if method == "auto":
        method = "dense" if (use_dense(min_dim, d) or d >= min_dim - 1) else "iterative"
    if method == "iterative" and d >= min_dim - 1:
        # ARPACK needs k < min(shape)
        method = "dense"

    if method == "dense":
        u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
        u, s, v = u[:, :d], s[:d], vt[:d].T
    elif method == "iterative":
        u, s, vt = svds(m, k=d, tol=0, v0=_start_vector(min_dim),
                        return_singular_vectors=True)
        order = np.argsort(-s, kind="stable")
        u, s, v = u[:, order], s[order], vt[order].T
    else:
        raise ValueError(f"unknown SVD method {method!r}")
    s = np.clip(s, 0.0, None)
    u, s, v = _canonical_order(u, s, v)
    return TruncatedSvd(u=u, sigma=s, v=v)


def factored_svd(left, right, d: int) -> TruncatedSvd:
    """Top-``d`` SVD of ``left @ right.T`` without forming the product.

    Both factors are tall (``m x q`` and ``p x q``); the work is two thin QR
    factorizations and a ``q x q`` SVD.
    """
    left, right = _as_matrix(left, "left factor"), _as_matrix(right, "right factor")
    if left.shape[1] != right.shape[1]:
        raise DimensionError("factors must share their column count")
    q = left.shape[1]
    if not 1 <= d <= min(q, left.shape[0], right.shape[0]):
        raise DimensionError(f"d={d} exceeds the rank bound of the factors")
    ql, rl = np.linalg.qr(left)
    qr_, rr = np.linalg.qr(right)
    cu, s, cvt = np.linalg.svd(rl @ rr.T)
    u = ql @ cu[:, :d]
    v = qr_ @ cvt[:d].T
    u, s, v = _canonical_order(u, np.clip(s[:d], 0.0, None), v)
    return TruncatedSvd(u=u, sigma=s, v=v)


def top_eigh(a, d: int, method: str = "auto"):
    """The ``d`` largest-in-magnitude eigenpairs of a symmetric matrix.

    Eigenvalues come back sorted by decreasing magnitude; eigenvectors are
    sign-fixed like singular vectors.
    """
    a = _as_matrix(a)
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    if not 1 <= d <= n:
        raise DimensionError(f"d={d} outside [1, {n}]")
    if method == "auto":
        method = "dense" if (use_dense(n, d) or d >= n - 1) else "iterative"
    if method == "iterative" and d >= n - 1:
        method = "dense"

    if method == "dense":
        if 2 * d >= n:
            vals, vecs = scipy.linalg.eigh(a)
        else:
            # largest-magnitude values sit at one of the two ends of the spectrum
            lo_vals, lo_vecs = scipy.linalg.eigh(a, subset_by_index=[0, d - 1])
            hi_vals, hi_vecs = scipy.linalg.eigh(a, subset_by_index=[n - d, n - 1])
            vals = np.concatenate([lo_vals, hi_vals])
            vecs = np.hstack([lo_vecs, hi_vecs])
    elif method == "iterative":
        vals, vecs = eigsh(a, k=d, which="LM", tol=0, v0=_start_vector(n))
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")

    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    # decreasing magnitude, positive before negative, then by vector
    order = sorted(range(vals.shape[0]),
                   key=lambda j: (-abs(vals[j]), -vals[j], tuple(-vecs[:, j])))[:d]
    return vals[order], vecs[:, order]


def joint_procrustes(u_a, v_a, u_p, v_p, return_diagnostics: bool = False):
    """Orthogonal ``W`` minimising ``|U_A - U_P W|_F^2 + |V_A - V_P W|_F^2``.

    With ``U_P^T U_A + V_P^T V_A = W1 S W2^T`` the minimiser is ``W1 W2^T``.
    When ``return_diagnostics`` is set a dict is returned alongside ``W`` with
    the singular values of the cross product and a ``rank_deficient`` flag
    (the solution is then not unique, but ``W`` is still orthogonal).
    """
    u_a, v_a, u_p, v_p = (_as_matrix(x) for x in (u_a, v_a, u_p, v_p))
    d = u_a.shape[1]
    if any(x.shape[1] != d for x in (v_a, u_p, v_p)):
        raise DimensionError("all inputs must have the same number of columns")
    if u_a.shape[0] != u_p.shape[0] or v_a.shape[0] != v_p.shape[0]:
        raise DimensionError("row counts of paired inputs differ")
    cross = u_p.T @ u_a + v_p.T @ v_a
    w1, s, w2t = np.linalg.svd(cross)
    w = w1 @ w2t
    if not return_diagnostics:
        return w
    smax = s[0] if s.size else 0.0
    deficient = bool(smax == 0.0 or s[-1] <= 1e-10 * smax)
    return w, {"singular_values": s, "rank_deficient": deficient}


def two_to_infinity_norm(m) -> float:
    """Largest Euclidean norm over the rows of ``m``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0.0
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", m, m))))


def subspace_distance(u1, u2) -> float:
    """Spectral norm of ``u1 u1^T - u2 u2^T`` for orthonormal-column inputs.

    Computed as the sine of the largest principal angle, which keeps small
    distances accurate.
    """
    u1, u2 = _as_matrix(u1), _as_matrix(u2)
    if u1.shape != u2.shape:
        raise DimensionError(f"shape mismatch {u1.shape} vs {u2.shape}")
    angles = scipy.linalg.subspace_angles(u1, u2)
    return float(np.sin(np.max(angles)))


def symmetrize_directed(a):
    """Return ``(Sym(A), Sym(A^T))``.

    ``Sym(M)`` is the hollow symmetric matrix sharing the strict upper
    triangle of ``M``.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    upper = np.triu(a, 1)
    lower = np.triu(a.T, 1)
    return upper + upper.T, lower + lower.T
