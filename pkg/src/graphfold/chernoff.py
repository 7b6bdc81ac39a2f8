"""Limiting Gaussian laws of block-model embeddings and their Chernoff information."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DimensionError, DomainError, ParameterError, SingularityError

DENSE = "dense"
SPARSE = "sparse"
EIG_FLOOR = 1e-12
GRID_POINTS = 101
T_TOL = 1e-8


@dataclass(frozen=True)
class LimitLaw:
    """Gaussian limit of one community: ``N(mean, covariance)``.

    ``covariance`` is the n-free part; the law of an individual embedded
    point at graph size ``n`` is ``N(mean, covariance / n)``.
    """

    mean: np.ndarray
    covariance: np.ndarray
    regime: str = DENSE

    def scaled(self, n: float) -> "LimitLaw":
        return LimitLaw(self.mean, self.covariance / float(n), self.regime)


def _check_regime(regime):
    if regime not in (DENSE, SPARSE):
        raise ParameterError(f"regime must be {DENSE!r} or {SPARSE!r}, got {regime!r}")


def _clean_cov(s):
    s = (s + s.T) / 2
    vals = np.linalg.eigvalsh(s)
    scale = max(np.max(np.abs(vals)), np.finfo(float).tiny)
    if vals.min() < -EIG_FLOOR * scale:
        raise DomainError("covariance is not positive semidefinite")
    if vals.min() < 0:
        w, v = np.linalg.eigh(s)
        s = (v * np.maximum(w, 0.0)) @ v.T
    return s


def _layer_inputs(b_blocks, pi_y, c_r):
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in b_blocks]
    if not blocks:
        raise ParameterError("need at least one block matrix")
    k = len(blocks)
    if pi_y is None:
        raise ParameterError("column probabilities are required")
    first = np.asarray(pi_y[0]) if len(pi_y) else None
    if first is not None and first.ndim == 0:
        pis = [np.asarray(pi_y, dtype=float)] * k
    else:
        pis = [np.asarray(p, dtype=float) for p in pi_y]
    if len(pis) != k:
        raise DimensionError(f"got {len(pis)} probability vectors for {k} layers")
    c = np.ones(k) if c_r is None else np.asarray(c_r, dtype=float).ravel()
    if c.size != k or np.any(c <= 0):
        raise ParameterError("need one positive size ratio per layer")
    big_k = blocks[0].shape[0]
    for r, (b, p) in enumerate(zip(blocks, pis)):
        if b.shape[0] != big_k:
            raise DimensionError(f"B^({r}) has {b.shape[0]} rows, expected {big_k}")
        if p.shape != (b.shape[1],):
            raise DimensionError(f"probability vector {r} has length {p.size}, "
                                 f"B^({r}) has {b.shape[1]} columns")
        if np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
            raise ParameterError(f"probability vector {r} must be positive and sum to 1")
    return blocks, pis, c


def _row_rank_check(lam, what):
    s = np.linalg.svd(lam, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * max(s[0], np.finfo(float).tiny)))
    if rank < lam.shape[0]:
        raise SingularityError(
            f"{what} has rank {rank} < {lam.shape[0]}; the limiting covariance "
            f"needs full row rank")


def _sigma_y_diag(blocks, pis, c, x, regime):
    var = []
    for cr, p, b in zip(c, pis, blocks):
        row = b[x]
        var.append(cr * p * (row * (1 - row) if regime == DENSE else row))
    return np.concatenate(var)


def sigma_y(b_blocks, pi_y, c_r=None, x: int = 0, regime: str = DENSE) -> np.ndarray:
    """Block-diagonal ``Sigma_Y(e_x)`` of a block model, as a dense matrix.

    Layer ``r`` contributes ``c_r diag(pi_r * b_xm (1 - b_xm))``; the sparse
    regime drops the ``1 - b_xm`` factor.
    """
    _check_regime(regime)
    blocks, pis, c = _layer_inputs(b_blocks, pi_y, c_r)
    if not 0 <= x < blocks[0].shape[0]:
        raise DimensionError(f"community {x} outside [0, {blocks[0].shape[0]})")
    return np.diag(_sigma_y_diag(blocks, pis, c, x, regime))


def limiting_covariance_left(b_blocks, pi_y, c_r=None, x: int = 0,
                             regime: str = DENSE) -> LimitLaw:
    """Limit law of a left UASE point from community ``x`` of a block model.

    Parameters
    ----------
    b_blocks : sequence of ndarray
        ``B^(r)``, each ``K x K_r``.
    pi_y : sequence
        Column community probabilities, one vector per layer, or a single
        vector shared by all layers.
    c_r : sequence of float, optional
        Limiting ratios ``n_r / n``; default all ones.
    x : int
        Community index (0-based).
    regime : {"dense", "sparse"}
        The sparse regime drops the ``1 - p`` variance factor.

    Returns
    -------
    LimitLaw
        Mean ``e_x`` and covariance
        ``D^{-1} B Sigma_Y(e_x) B^T D^{-1}`` with ``B = [B^(1)|...|B^(k)]``,
        ``D = B Delta_Y B^T``, and ``Delta_Y``, ``Sigma_Y`` block diagonal
        over layers with blocks ``c_r diag(pi_r)`` and
        ``c_r diag(pi_r * b_xm (1 - b_xm))``.
    """
    _check_regime(regime)
    blocks, pis, c = _layer_inputs(b_blocks, pi_y, c_r)
    big_k = blocks[0].shape[0]
    if not 0 <= x < big_k:
        raise DimensionError(f"community {x} outside [0, {big_k})")
    lam = np.hstack(blocks)
    _row_rank_check(lam, "the unfolded block matrix [B^(1)|...|B^(k)]")
    delta_y = np.concatenate([cr * p for cr, p in zip(c, pis)])
    sig = _sigma_y_diag(blocks, pis, c, x, regime)
    d_inv = np.linalg.inv((lam * delta_y) @ lam.T)
    cov = d_inv @ (lam * sig) @ lam.T @ d_inv
    return LimitLaw(np.eye(big_k)[x], _clean_cov(cov), regime)


def limiting_covariance_right(b, pi_x, y: int = 0, regime: str = DENSE) -> LimitLaw:
    """Limit law of a right UASE point from column community ``y`` of one layer.

    The covariance is ``B^{-1} Delta_X^{-1} Sigma_X(e_y) Delta_X^{-1} B^{-T}``
    with ``Delta_X = diag(pi_x)`` and
    ``Sigma_X(e_y) = diag(pi_x * b_my (1 - b_my))``.

    Raises
    ------
    SingularityError
        If ``b`` is not invertible.
    """
    _check_regime(regime)
    b = np.atleast_2d(np.asarray(b, dtype=float))
    pi_x = np.asarray(pi_x, dtype=float).ravel()
    if b.shape[0] != b.shape[1] or pi_x.size != b.shape[0]:
        raise DimensionError("need a square B matching the length of pi_x")
    if np.any(pi_x <= 0) or abs(pi_x.sum() - 1) > 1e-12:
        raise ParameterError("pi_x must be positive and sum to 1")
    if not 0 <= y < b.shape[1]:
        raise DimensionError(f"community {y} outside [0, {b.shape[1]})")
    s = np.linalg.svd(b, compute_uv=False)
    if s[-1] <= 1e-10 * max(s[0], np.finfo(float).tiny):
        raise SingularityError("B is singular; the right limit law needs an invertible B")
    col = b[:, y]
    sigma_x = pi_x * (col * (1 - col) if regime == DENSE else col)
    b_inv = np.linalg.inv(b)
    left = b_inv / pi_x
    cov = (left * sigma_x) @ left.T
    return LimitLaw(np.eye(b.shape[0])[y], _clean_cov(cov), regime)


def _factor(cov):
    """Cholesky factor after flooring eigenvalues at 1e-12 of the largest."""
    cov = (cov + cov.T) / 2
    vals, vecs = np.linalg.eigh(cov)
    top = vals.max()
    if top <= 0 or vals.min() < -EIG_FLOOR * top:
        raise DomainError("covariance is not positive definite")
    floor = EIG_FLOOR * top
    if vals.min() < floor:
        cov = (vecs * np.maximum(vals, floor)) @ vecs.T
    return np.linalg.cholesky(cov)


def chernoff_divergence(f1: LimitLaw, f2: LimitLaw, t: float,
                        include_log_term: bool = True) -> float:
    """``C_t(f1, f2)`` for Gaussians at a single ``t`` in [0, 1]."""
    return _divergence_fn(f1, f2, include_log_term)(t)


def _divergence_fn(f1, f2, include_log_term):
    dmu = np.asarray(f1.mean, dtype=float) - np.asarray(f2.mean, dtype=float)
    s1 = np.asarray(f1.covariance, dtype=float)
    s2 = np.asarray(f2.covariance, dtype=float)
    if s1.shape != s2.shape or s1.shape != (dmu.size, dmu.size):
        raise DimensionError("laws must share a dimension")
    c1, c2 = _factor(s1), _factor(s2)
    s1 = c1 @ c1.T
    s2 = c2 @ c2.T
    logdet1 = 2 * np.sum(np.log(np.diag(c1)))
    logdet2 = 2 * np.sum(np.log(np.diag(c2)))

    def value(t):
        if t <= 0 or t >= 1:
            return 0.0
        ct = np.linalg.cholesky(t * s1 + (1 - t) * s2)
        z = np.linalg.solve(ct, dmu)
        out = t * (1 - t) / 2 * float(z @ z)
        if include_log_term:
            logdet_t = 2 * np.sum(np.log(np.diag(ct)))
            out += 0.5 * (logdet_t - t * logdet1 - (1 - t) * logdet2)
        return out

    return value


def chernoff_gaussians(f1: LimitLaw, f2: LimitLaw, include_log_term: bool = True):
    """Chernoff information ``sup_t C_t(f1, f2)`` of two Gaussians.

    The supremum over ``t`` in (0, 1) is located on a 101-point grid and
    refined by bounded Brent search (tolerance 1e-8 on ``t``) inside the
    bracket around the best grid point. ``include_log_term=False`` drops the
    log-determinant term.

    Returns
    -------
    value : float
    t_star : float
    """
    fn = _divergence_fn(f1, f2, include_log_term)
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    vals = np.array([fn(t) for t in grid])
    j = int(np.argmax(vals))
    if vals[j] <= 0:
        return 0.0, 0.5
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, GRID_POINTS - 1)]
    res = minimize_scalar(lambda t: -fn(t), bounds=(lo, hi), method="bounded",
                          options={"xatol": T_TOL})
    if -res.fun >= vals[j]:
        return float(-res.fun), float(res.x)
    return float(vals[j]), float(grid[j])


@dataclass
class ChernoffReport:
    """Pairwise Chernoff information between community limit laws.

    ``pairwise[i, j]`` is symmetric; ``t_star[i, j]`` is the optimiser with
    law ``i`` first (so ``t_star[j, i] = 1 - t_star[i, j]``). ``value`` is
    the minimum over pairs, attained at ``critical_pair``.
    """

    pairwise: np.ndarray
    critical_pair: tuple
    value: float
    t_star: np.ndarray
    truncated: bool
    laws: list = field(default_factory=list)


def _merge_identical_rows(blocks, pis):
    """Collapse communities whose rows agree in every block matrix.

    Returns the merged blocks, merged probability vectors, and for each
    original community the index of its merged representative.
    """
    lam = np.hstack(blocks)
    reps, index = [], []
    for i in range(lam.shape[0]):
        for g, rep in enumerate(reps):
            if np.array_equal(lam[i], lam[rep]):
                index.append(g)
                break
        else:
            reps.append(i)
            index.append(len(reps) - 1)
    if len(reps) == lam.shape[0]:
        return blocks, pis, list(range(lam.shape[0]))
    merged = [b[reps] for b in blocks]
    return merged, pis, index


def chernoff_gmsbm(b_blocks, pi, c_r=None, regime: str = DENSE, truncated: bool = True,
                   n: Optional[float] = None) -> ChernoffReport:
    """Critical-pair Chernoff information of the left UASE limit of a block model.

    Parameters
    ----------
    b_blocks : sequence of ndarray
    pi : array_like or sequence of array_like
        Column community probabilities, shared or per layer.
    c_r : sequence of float, optional
    regime : {"dense", "sparse"}
    truncated : bool
        If true, the log-determinant term is dropped and the n-free
        covariances are used, giving the large-``n`` comparison value.
        Otherwise ``n`` is required and the laws are scaled by ``1 / n``.
    n : float, optional

    Notes
    -----
    Communities with identical rows in every ``B^(r)`` generate identically
    distributed nodes; their pairwise value is 0 and the remaining pairs are
    evaluated on the model with those communities merged.
    """
    if not truncated and n is None:
        raise ParameterError("the untruncated Chernoff information needs a graph size n")
    blocks, pis, c = _layer_inputs(b_blocks, pi, c_r)
    big_k = blocks[0].shape[0]
    merged, pis, index = _merge_identical_rows(blocks, pis)
    m = merged[0].shape[0]
    laws = [limiting_covariance_left(merged, pis, c, x=g, regime=regime) for g in range(m)]
    if not truncated:
        laws = [law.scaled(n) for law in laws]
    group_vals = np.zeros((m, m))
    group_t = np.full((m, m), 0.5)
    for g, h in itertools.combinations(range(m), 2):
        v, t = chernoff_gaussians(laws[g], laws[h], include_log_term=not truncated)
        group_vals[g, h] = group_vals[h, g] = v
        group_t[g, h], group_t[h, g] = t, 1 - t
    idx = np.asarray(index)
    pairwise = group_vals[np.ix_(idx, idx)]
    t_star = group_t[np.ix_(idx, idx)]
    if big_k < 2:
        raise ParameterError("need at least two communities")
    best, pair = np.inf, (0, 1)
    for i, j in itertools.combinations(range(big_k), 2):
        if pairwise[i, j] < best:
            best, pair = pairwise[i, j], (i, j)
    return ChernoffReport(pairwise=pairwise, critical_pair=pair, value=float(best),
                          t_star=t_star, truncated=truncated,
                          laws=[laws[g] for g in index])


@dataclass
class SubsetResult:
    subset: tuple
    ratio: Optional[float]
    rank: int
    value: Optional[float] = None


def subset_comparison(b_blocks, pi, c_r=None, subsets: Sequence = (),
                      regime: str = DENSE) -> list:
    """Ratios ``rho_A / rho_{A_K}`` of truncated Chernoff information.

    ``subsets`` holds 0-based layer index sets. A subset whose block
    concatenation has rank below ``K`` gets ``ratio=None`` and its rank
    recorded instead.
    """
    blocks, pis, c = _layer_inputs(b_blocks, pi, c_r)
    k = len(blocks)
    big_k = blocks[0].shape[0]
    full = chernoff_gmsbm(blocks, pis, c, regime=regime, truncated=True).value
    out = []
    for subset in subsets:
        subset = tuple(sorted(int(s) for s in subset))
        if not subset or any(not 0 <= s < k for s in subset) or len(set(subset)) != len(subset):
            raise ParameterError(f"invalid subset {subset} for {k} layers")
        sub_blocks = [blocks[s] for s in subset]
        rank = int(np.linalg.matrix_rank(np.hstack(sub_blocks), tol=None))
        if rank < big_k:
            out.append(SubsetResult(subset, None, rank))
            continue
        try:
            val = chernoff_gmsbm(sub_blocks, [pis[s] for s in subset], c[list(subset)],
                                 regime=regime, truncated=True).value
        except SingularityError:
            out.append(SubsetResult(subset, None, rank))
            continue
        ratio = full / val if val > 0 else np.inf
        out.append(SubsetResult(subset, float(ratio), rank, float(val)))
    return out


def all_subsets(k: int) -> list:
    """Every nonempty subset of ``range(k)``, ordered by size then lexicographically."""
    return [s for size in range(1, k + 1) for s in itertools.combinations(range(k), size)]
