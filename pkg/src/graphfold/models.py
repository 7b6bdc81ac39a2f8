"""Multilayer random dot product graphs and block models.

Samplers, exact expectation builders, and the canonical latent positions of a
block model. Community labels are 0-based integer arrays throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ModelValidityError, ParameterError
from .rng import substream
from .spectral import truncated_svd, unfold

PROB_TOL = 1e-12


class RankDeficiencyWarning(UserWarning):
    pass


class LayerKind(str, Enum):
    UNDIRECTED = "undirected"
    DIRECTED = "directed"
    BIPARTITE = "bipartite"

    @classmethod
    def parse(cls, value) -> "LayerKind":
        if isinstance(value, LayerKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ParameterError(f"unknown layer kind {value!r}") from None


def _kinds(kinds, k) -> list[LayerKind]:
    if kinds is None:
        return [LayerKind.UNDIRECTED] * k
    kinds = [LayerKind.parse(t) for t in kinds]
    if len(kinds) != k:
        raise DimensionError(f"got {len(kinds)} layer kinds for {k} layers")
    return kinds


@dataclass
class AdjacencyStack:
    """Ordered layers ``A^(r)`` (each ``n x n_r``) sharing the row node set."""

    layers: list
    kinds: list = None

    def __post_init__(self):
        self.layers = [np.asarray(a, dtype=float) for a in self.layers]
        if not self.layers:
            raise DimensionError("a stack needs at least one layer")
        self.kinds = _kinds(self.kinds, len(self.layers))
        n = self.layers[0].shape[0]
        for r, (a, kind) in enumerate(zip(self.layers, self.kinds)):
            if a.ndim != 2 or a.shape[0] != n:
                raise DimensionError(f"layer {r} has shape {a.shape}, expected {n} rows")
            if kind is not LayerKind.BIPARTITE and a.shape[1] != n:
                raise DimensionError(f"{kind.value} layer {r} must be square, got {a.shape}")

    @property
    def n(self) -> int:
        return self.layers[0].shape[0]

    @property
    def k(self) -> int:
        return len(self.layers)

    @property
    def sizes(self) -> list[int]:
        return [a.shape[1] for a in self.layers]

    def unfold(self) -> np.ndarray:
        return unfold(self.layers)

    def permute(self, perm) -> "AdjacencyStack":
        """Relabel row nodes (and the columns of square layers) by ``perm``."""
        perm = np.asarray(perm)
        out = []
        for a, kind in zip(self.layers, self.kinds):
            a = a[perm]
            if kind is not LayerKind.BIPARTITE:
                a = a[:, perm]
            out.append(a)
        return AdjacencyStack(out, list(self.kinds))


@dataclass
class LatentState:
    """Unscaled latent positions and mixing matrices of an MRDPG.

    ``x`` is ``n x d``, ``ys[r]`` is ``n_r x d_r`` and ``lams[r]`` is
    ``d x d_r``. The global sparsity ``rho`` scales positions by
    ``rho**0.5`` and ``eps[r]`` scales ``lams[r]``, so that
    ``P^(r) = rho * x @ (eps[r] * lams[r]) @ ys[r].T``.
    """

    x: np.ndarray
    ys: list
    lams: list
    rho: float = 1.0
    eps: Optional[list] = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.ys = [np.atleast_2d(np.asarray(y, dtype=float)) for y in self.ys]
        self.lams = [np.atleast_2d(np.asarray(lam, dtype=float)) for lam in self.lams]
        if len(self.ys) != len(self.lams) or not self.ys:
            raise DimensionError("need one mixing matrix per layer and at least one layer")
        if self.eps is None:
            self.eps = [1.0] * len(self.ys)
        self.eps = [float(e) for e in self.eps]
        if len(self.eps) != len(self.ys):
            raise DimensionError("need one sparsity factor per layer")
        if not 0 < self.rho <= 1 or any(not 0 < e <= 1 for e in self.eps):
            raise ParameterError("sparsity factors must lie in (0, 1]")
        d = self.x.shape[1]
        for r, (y, lam) in enumerate(zip(self.ys, self.lams)):
            if lam.shape != (d, y.shape[1]):
                raise DimensionError(
                    f"layer {r}: mixing matrix {lam.shape} incompatible with "
                    f"X ({self.x.shape}) and Y ({y.shape})")

    @property
    def k(self) -> int:
        return len(self.ys)

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def x_scaled(self) -> np.ndarray:
        return np.sqrt(self.rho) * self.x

    def y_scaled(self, r: int) -> np.ndarray:
        return np.sqrt(self.rho) * self.ys[r]

    def lam_eps(self, r: int) -> np.ndarray:
        return self.eps[r] * self.lams[r]

    def probability(self, r: int) -> np.ndarray:
        return self.x_scaled @ self.lam_eps(r) @ self.y_scaled(r).T


def expected_unfolding(latents: LatentState) -> np.ndarray:
    """Exact ``[P^(1) | ... | P^(k)]``."""
    return unfold([latents.probability(r) for r in range(latents.k)])


def _check_probs(p, r):
    bad = (p < -PROB_TOL) | (p > 1 + PROB_TOL) | ~np.isfinite(p)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ModelValidityError(
            f"layer {r}: probability P[{i}, {j}] = {p[i, j]:.6g} outside [0, 1]",
            layer=r, entry=(int(i), int(j)))
    return np.clip(p, 0.0, 1.0)


def bernoulli_layer(p: np.ndarray, kind: LayerKind, rng: np.random.Generator) -> np.ndarray:
    """Draw one layer with the edge convention of ``kind``."""
    draws = rng.random(p.shape) < p
    if kind is LayerKind.UNDIRECTED:
        upper = np.triu(draws, 1)
        draws = upper | upper.T
    elif kind is LayerKind.DIRECTED:
        np.fill_diagonal(draws, False)
    return draws.astype(float)


def sample_mrdpg(latents: LatentState, kinds=None, rng_seed: int = 0) -> AdjacencyStack:
    """Sample ``A^(r)_ij ~ Bernoulli(P^(r)_ij)`` for every layer.

    Layer ``r`` uses its own random stream, so a layer's draw does not depend
    on the other layers. Undirected layers sample the upper triangle and
    mirror it; undirected and directed layers are hollow.

    Raises
    ------
    ModelValidityError
        If any probability leaves [0, 1]; no graph is produced in that case.
    """
    kinds = _kinds(kinds, latents.k)
    probs = []
    for r in range(latents.k):
        p = latents.probability(r)
        if kinds[r] is not LayerKind.BIPARTITE and p.shape[0] != p.shape[1]:
            raise DimensionError(f"{kinds[r].value} layer {r} needs n_r = n")
        probs.append(_check_probs(p, r))
    layers = [bernoulli_layer(p, kinds[r], substream(rng_seed, 2, r))
              for r, p in enumerate(probs)]
    return AdjacencyStack(layers, kinds)


def _prob_vector(pi, name) -> np.ndarray:
    pi = np.asarray(pi, dtype=float).ravel()
    if pi.size == 0 or np.any(pi < 0) or not np.all(np.isfinite(pi)):
        raise ParameterError(f"{name} must be a non-empty nonnegative vector")
    if abs(pi.sum() - 1.0) > 1e-12:
        raise ParameterError(f"{name} sums to {pi.sum():.15g}, not 1")
    return pi


@dataclass
class GmsbmParams:
    """Parameters of a generalised multilayer stochastic block model.

    Attributes
    ----------
    b_blocks : list of ndarray
        ``B^(r)`` of shape ``K x K_r`` with entries in [0, 1].
    pi_x : ndarray
        Row community probabilities, length ``K``.
    pi_y : list
        Column community probabilities per layer. ``None`` ties the columns
        to the row nodes (required for undirected and directed layers).
    kinds : list of LayerKind
    rho, eps : float, list of float
        Global and per-layer sparsity factors.
    column_groups : list of int, optional
        Bipartite layers sharing a group id share their column nodes and
        memberships. By default every bipartite layer gets its own group.
    """

    b_blocks: list
    pi_x: np.ndarray
    pi_y: list = None
    kinds: list = None
    rho: float = 1.0
    eps: list = None
    column_groups: list = None

    def __post_init__(self):
        self.b_blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in self.b_blocks]
        k = len(self.b_blocks)
        if k == 0:
            raise ParameterError("need at least one layer")
        self.kinds = _kinds(self.kinds, k)
        self.pi_x = _prob_vector(self.pi_x, "pi_x")
        big_k = self.pi_x.size
        if self.pi_y is None:
            self.pi_y = [None] * k
        if len(self.pi_y) != k:
            raise DimensionError("need one pi_y entry per layer")
        self.pi_y = [None if p is None else _prob_vector(p, f"pi_y[{r}]")
                     for r, p in enumerate(self.pi_y)]
        self.eps = [1.0] * k if self.eps is None else [float(e) for e in self.eps]
        if len(self.eps) != k:
            raise DimensionError("need one eps per layer")
        if not 0 < self.rho <= 1 or any(not 0 < e <= 1 for e in self.eps):
            raise ParameterError("sparsity factors must lie in (0, 1]")
        for r, b in enumerate(self.b_blocks):
            if b.shape[0] != big_k:
                raise DimensionError(f"B^({r}) has {b.shape[0]} rows, pi_x has {big_k}")
            if not np.all(np.isfinite(b)) or b.min() < 0 or b.max() > 1:
                raise ParameterError(f"B^({r}) entries must lie in [0, 1]")
            if self.rho * self.eps[r] * b.max() > 1 + PROB_TOL:
                raise ModelValidityError(f"layer {r}: scaled probability exceeds 1", layer=r)
            if self.kinds[r] is not LayerKind.BIPARTITE:
                if self.pi_y[r] is not None:
                    raise ParameterError(f"{self.kinds[r].value} layer {r} must tie columns to rows")
                if b.shape[1] != big_k:
                    raise DimensionError(f"square layer {r} needs a {big_k}x{big_k} block matrix")
            elif self.pi_y[r] is None:
                if b.shape[1] != big_k:
                    raise DimensionError(f"tied bipartite layer {r} needs {big_k} columns")
            elif self.pi_y[r].size != b.shape[1]:
                raise DimensionError(f"pi_y[{r}] length differs from B^({r}) columns")
        if self.column_groups is None:
            self.column_groups = list(range(k))
        self.column_groups = [int(g) for g in self.column_groups]
        if len(self.column_groups) != k:
            raise DimensionError("need one column group per layer")
        for r in range(k):
            for s in range(r):
                if (self.column_groups[r] == self.column_groups[s]
                        and self.pi_y[r] is not None):
                    if self.pi_y[s] is None or not np.array_equal(self.pi_y[r], self.pi_y[s]):
                        raise ParameterError(
                            f"layers {s} and {r} share columns but not column probabilities")

    @property
    def k(self) -> int:
        return len(self.b_blocks)

    @property
    def n_communities(self) -> int:
        return self.pi_x.size

    def column_pi(self, r: int) -> np.ndarray:
        return self.pi_x if self.pi_y[r] is None else self.pi_y[r]


def one_hot(labels, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


def sample_gmsbm(params: GmsbmParams, n: int, n_r: Optional[Sequence[int]] = None,
                 rng_seed: int = 0):
    """Sample a GMSBM.

    Parameters
    ----------
    params : GmsbmParams
    n : int
        Number of row nodes.
    n_r : sequence of int, optional
        Column counts per layer; defaults to ``n``. Square layers must use
        ``n``.
    rng_seed : int

    Returns
    -------
    stack : AdjacencyStack
    z : ndarray of int
        Row memberships.
    w : list of ndarray of int
        Column memberships per layer (``z`` itself for tied layers).
    """
    k = params.k
    n_r = [n] * k if n_r is None else [int(m) for m in n_r]
    if len(n_r) != k:
        raise DimensionError("need one column count per layer")
    z = substream(rng_seed, 0).choice(params.n_communities, size=n, p=params.pi_x)
    group_labels = {}
    w = []
    for r in range(k):
        if params.pi_y[r] is None:
            if n_r[r] != n:
                raise DimensionError(f"layer {r} is tied to the rows and needs n_r = n")
            w.append(z)
            continue
        g = params.column_groups[r]
        if g not in group_labels:
            group_labels[g] = substream(rng_seed, 1, g).choice(
                params.pi_y[r].size, size=n_r[r], p=params.pi_y[r])
        elif group_labels[g].size != n_r[r]:
            raise DimensionError(f"layer {r} shares columns but has a different size")
        w.append(group_labels[g])
    layers = []
    for r, b in enumerate(params.b_blocks):
        p = params.rho * params.eps[r] * b[np.ix_(z, w[r])]
        layers.append(bernoulli_layer(p, params.kinds[r], substream(rng_seed, 2, r)))
    return AdjacencyStack(layers, list(params.kinds)), z, w


def gmsbm_latents(params: GmsbmParams, z, w) -> LatentState:
    """Basis-vector encoding: rows of X and Y^(r) are standard basis vectors."""
    x = one_hot(z, params.n_communities)
    ys = [one_hot(w[r], b.shape[1]) for r, b in enumerate(params.b_blocks)]
    return LatentState(x, ys, list(params.b_blocks), rho=params.rho, eps=list(params.eps))


def canonical_latents(b_blocks, tol: float = 1e-10):
    """Community-level latent positions from the SVD of ``[B^(1)|...|B^(k)]``.

    Returns ``(x_tilde, y_tildes)`` with ``x_tilde = U Sigma^{1/2}`` and
    ``y_tildes[r] = V_r Sigma^{1/2}``, so ``x_tilde @ y_tildes[r].T`` equals
    ``B^(r)``. If the unfolding is rank deficient the rank is used as the
    dimension and a ``RankDeficiencyWarning`` is issued.
    """
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in b_blocks]
    b = unfold(blocks)
    s = np.linalg.svd(b, compute_uv=False)
    rank = int(np.sum(s > tol * max(s[0], np.finfo(float).tiny))) if s[0] > 0 else 0
    if rank == 0:
        raise ParameterError("block matrices are all zero")
    if rank < b.shape[0]:
        warnings.warn(f"block unfolding has rank {rank} < {b.shape[0]} communities; "
                      f"using d = {rank}", RankDeficiencyWarning, stacklevel=2)
    svd = truncated_svd(b, rank, method="dense")
    root = np.sqrt(svd.sigma)
    x = svd.u * root
    bounds = np.cumsum([0] + [blk.shape[1] for blk in blocks])
    ys = [svd.v[bounds[r]:bounds[r + 1]] * root for r in range(len(blocks))]
    return x, ys


def dirichlet_latents(rng: np.random.Generator, n: int, alpha=(1.0, 1.0, 1.0)) -> np.ndarray:
    return rng.dirichlet(np.asarray(alpha, dtype=float), size=n)
