"""Monte Carlo two-graph test for a shared set of latent positions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..embed import omnibus_embedding, uase
from ..errors import DimensionError, ParameterError
from ..models import LatentState, LayerKind, sample_mrdpg
from ..rng import child_seed

UASE = "uase"
OMNIBUS = "omnibus"
METHODS = (UASE, OMNIBUS)
MIN_MC = 100


class UnstableQuantileWarning(UserWarning):
    pass


@dataclass
class TestReport:
    """Outcome of a two-graph test; ``reject`` is ``statistic > critical_value``."""

    __test__ = False  # not a pytest class

    statistic: float
    critical_value: float
    mc_iterates: int
    reject: bool
    alpha: float
    method: str = UASE
    warnings: list = field(default_factory=list)

    def as_record(self) -> dict:
        return {"statistic": self.statistic, "critical_value": self.critical_value,
                "mc_iterates": self.mc_iterates, "reject": self.reject,
                "alpha": self.alpha, "method": self.method, "warnings": list(self.warnings)}


@dataclass
class RdpgNull:
    """Null model: both graphs are independent undirected draws from ``P = X Lam X^T``."""

    x: np.ndarray
    lam: Optional[np.ndarray] = None

    def latents(self) -> LatentState:
        x = np.asarray(self.x, dtype=float)
        lam = np.eye(x.shape[1]) if self.lam is None else np.asarray(self.lam, dtype=float)
        return LatentState(x, [x, x], [lam, lam])

    @property
    def d(self) -> int:
        return np.asarray(self.x).shape[1]

    def sample_pair(self, seed: int):
        stack = sample_mrdpg(self.latents(), [LayerKind.UNDIRECTED] * 2, rng_seed=seed)
        return stack.layers[0], stack.layers[1]


def two_graph_statistic(a1, a2, d: int, method: str = UASE, svd_method: str = "auto") -> float:
    """``T = sum_i |Xhat_i - Yhat_i|^2`` for the paired node estimates.

    For ``uase`` the estimates are the two right blocks of the UASE of
    ``[A1|A2]``; for ``omnibus`` they are the first and last ``n`` rows of
    the omnibus embedding. Both pairs share a single orthogonal ambiguity, so
    ``T`` needs no further alignment.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.shape != a2.shape or a1.ndim != 2 or a1.shape[0] != a1.shape[1]:
        raise DimensionError("two equal-size square graphs are required")
    if method == UASE:
        emb = uase([a1, a2], d, method=svd_method)
        y1, y2 = emb.rights
    elif method == OMNIBUS:
        y1, y2 = omnibus_embedding(a1, a2, d, method=svd_method)
    else:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
    diff = y1 - y2
    return float(np.einsum("ij,ij->", diff, diff))


def null_statistics(null_sampler: RdpgNull, d: int, n_mc: int, rng_seed: int,
                    methods=METHODS, svd_method: str = "auto") -> dict:
    """Monte Carlo null draws of ``T`` for each method from shared graph pairs."""
    out = {m: np.empty(n_mc) for m in methods}
    for it in range(n_mc):
        a1, a2 = null_sampler.sample_pair(child_seed(rng_seed, it))
        for m in methods:
            out[m][it] = two_graph_statistic(a1, a2, d, m, svd_method)
    return out


def critical_value(null_stats, alpha: float) -> float:
    """Empirical ``1 - alpha`` quantile (inverted-CDF definition)."""
    return float(np.quantile(np.asarray(null_stats), 1 - alpha, method="inverted_cdf"))


def two_graph_test(a1, a2, d: int, method: str = UASE, n_mc: int = 2000,
                   alpha: float = 0.05, null_sampler: Optional[RdpgNull] = None,
                   rng_seed: int = 0, null_stats=None,
                   svd_method: str = "auto") -> TestReport:
    """Test whether two graphs share their latent positions.

    Parameters
    ----------
    a1, a2 : ndarray
        Symmetric adjacency matrices on the same nodes.
    d : int
    method : {"uase", "omnibus"}
    n_mc : int
        Monte Carlo draws of the null distribution of ``T``.
    alpha : float
    null_sampler : RdpgNull
        Latent description of the null model; there is no bootstrap fallback.
    rng_seed : int
    null_stats : array_like, optional
        Precomputed null draws of ``T`` (reused across repeated tests on the
        same null). Overrides ``n_mc`` and ``null_sampler``.

    Returns
    -------
    TestReport
    """
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    notes = []
    if null_stats is None:
        if null_sampler is None:
            raise ParameterError("a null sampler is required")
        if n_mc < 1:
            raise ParameterError("n_mc must be positive")
        null_stats = null_statistics(null_sampler, d, n_mc, rng_seed, (method,),
                                     svd_method)[method]
    null_stats = np.asarray(null_stats, dtype=float)
    if null_stats.size < MIN_MC:
        msg = f"only {null_stats.size} Monte Carlo iterates; the critical value is unstable"
        warnings.warn(msg, UnstableQuantileWarning, stacklevel=2)
        notes.append(msg)
    stat = two_graph_statistic(a1, a2, d, method, svd_method)
    crit = critical_value(null_stats, alpha)
    return TestReport(statistic=stat, critical_value=crit, mc_iterates=int(null_stats.size),
                      reject=bool(stat > crit), alpha=alpha, method=method, warnings=notes)
