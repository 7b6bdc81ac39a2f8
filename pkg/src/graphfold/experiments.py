"""Simulation harnesses for the block-model and testing studies.

Each trial is a pure function of ``(seed, trial index)`` so trial sweeps can
run in any order, or concurrently, with identical results.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chernoff import all_subsets, limiting_covariance_left, subset_comparison
from .embed import (alignment_transform, ase, estimate_p, mase, mean_embedding, nmse,
                    projection_estimate, uase)
from .inference.clt import clt_residuals, empirical_covariance, relative_frobenius
from .inference.gmm import cluster
from .inference.metrics import classification_error
from .inference.testing import OMNIBUS, UASE, RdpgNull, critical_value, null_statistics, two_graph_statistic
from .models import (GmsbmParams, LatentState, LayerKind, gmsbm_latents,
                     one_hot, sample_gmsbm, sample_mrdpg)
from .rng import child_seed, substream
from .spectral import subspace_distance, symmetrize_directed, two_to_infinity_norm

FIG1_B = np.array([[0.42, 0.42], [0.42, 0.5]])
FIG1_PI = np.array([0.6, 0.4])
FIG2_B1 = np.array([[0.58, 0.58], [0.58, 0.5]])
RANK_B1 = np.array([[0.47, 0.47, 0.39], [0.47, 0.47, 0.39], [0.39, 0.39, 0.56]])
RANK_B2 = np.array([[0.53, 0.61, 0.61], [0.61, 0.44, 0.44], [0.61, 0.44, 0.44]])
RANK_SIZES = (1750, 500, 1750)

IDENTICAL = "identical"
COMMON = "common"
DIFFERENT = "different"
REGIMES = (IDENTICAL, COMMON, DIFFERENT)


def n_threads() -> int:
    """Worker count from ``GRAPHFOLD_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("GRAPHFOLD_THREADS", "1")))
    except ValueError:
        return 1


def trial_map(fn, items) -> list:
    """``[fn(x) for x in items]``, spread over ``GRAPHFOLD_THREADS`` workers."""
    items = list(items)
    workers = n_threads()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- block models

def signature(b) -> tuple:
    vals = np.linalg.eigvalsh(np.asarray(b, dtype=float))
    return int(np.sum(vals > 0)), int(np.sum(vals < 0))


def random_symmetric_b(rng, k: int = 2) -> np.ndarray:
    upper = np.triu(rng.uniform(size=(k, k)))
    return upper + np.triu(upper, 1).T


def random_pi(rng, k: int = 2, alpha: float = 1.0, min_weight: float = 0.2) -> np.ndarray:
    """Dirichlet draw, redrawn until every weight is at least ``min_weight``."""
    while True:
        pi = rng.dirichlet(np.full(k, alpha))
        if pi.min() >= min_weight:
            return pi


def random_two_layer_sbm(rng, regime: str) -> tuple:
    """Two symmetric 2x2 block matrices and community weights.

    ``regime`` is ``identical`` (same matrix), ``common`` (same signature) or
    ``different`` (different signatures). Block matrices are redrawn until
    they are nonsingular and meet the regime.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    while True:
        b1 = random_symmetric_b(rng)
        b2 = b1.copy() if regime == IDENTICAL else random_symmetric_b(rng)
        if min(abs(np.linalg.det(b1)), abs(np.linalg.det(b2))) < 1e-3:
            continue
        same = signature(b1) == signature(b2)
        if regime == COMMON and not same or regime == DIFFERENT and same:
            continue
        return b1, b2, random_pi(rng)


@dataclass
class DetectionResult:
    uase: float
    ase: float
    mean: float


def community_detection_trial(seed: int, trial: int, n: int = 1000,
                              regime: str = DIFFERENT, restarts: int = 5) -> DetectionResult:
    """GMM classification error for UASE, per-layer ASE (averaged) and mean embedding."""
    rng = substream(seed, 10, trial)
    b1, b2, pi = random_two_layer_sbm(rng, regime)
    params = GmsbmParams([b1, b2], pi)
    stack, z, _ = sample_gmsbm(params, n, rng_seed=child_seed(seed, 11, trial))
    gseed = child_seed(seed, 12, trial)
    e_uase = classification_error(cluster(uase(stack, 2).left, 2, restarts, gseed), z)
    e_ase = np.mean([classification_error(cluster(ase(a, 2), 2, restarts, gseed), z)
                     for a in stack.layers])
    e_mean = classification_error(cluster(mean_embedding(stack, 2), 2, restarts, gseed), z)
    return DetectionResult(e_uase, float(e_ase), e_mean)


def directed_detection_trial(seed: int, trial: int, n: int = 1000,
                             restarts: int = 5) -> DetectionResult:
    """Directed 2-community SBM: UASE of [Sym(A)|Sym(A^T)] against ASE of A."""
    rng = substream(seed, 20, trial)
    while True:
        b = rng.uniform(size=(2, 2))
        if abs(np.linalg.det(b)) >= 1e-3:
            break
    pi = random_pi(rng)
    params = GmsbmParams([b], pi, kinds=[LayerKind.DIRECTED])
    stack, z, _ = sample_gmsbm(params, n, rng_seed=child_seed(seed, 21, trial))
    a = stack.layers[0]
    s1, s2 = symmetrize_directed(a)
    gseed = child_seed(seed, 22, trial)
    e_uase = classification_error(cluster(uase([s1, s2], 2).left, 2, restarts, gseed), z)
    e_ase = classification_error(cluster(ase(a, 2), 2, restarts, gseed), z)
    e_mean = classification_error(cluster(ase((s1 + s2) / 2, 2), 2, restarts, gseed), z)
    return DetectionResult(e_uase, e_ase, e_mean)


# -------------------------------------------------------------- consistency

def consistency_trial(seed: int, trial: int, n: int, b=FIG1_B, pi=FIG1_PI, k: int = 2) -> float:
    """``|X_A L^{-1} - X|_{2->inf}`` for an identical-layer block model."""
    params = GmsbmParams([b] * k, pi)
    stack, z, w = sample_gmsbm(params, n, rng_seed=child_seed(seed, 30, n, trial))
    latents = gmsbm_latents(params, z, w)
    emb = uase(stack, latents.d)
    tr = alignment_transform(stack, latents, embedding=emb)
    return two_to_infinity_norm(tr.align_left(emb.left) - latents.x_scaled)


def consistency_sweep(seed: int, sizes=(500, 1000, 2000, 4000), trials: int = 20):
    """Median two-to-infinity error per size and the log-log slope of the medians."""
    medians = []
    for n in sizes:
        errs = trial_map(lambda t: consistency_trial(seed, t, n), range(trials))
        medians.append(float(np.median(errs)))
    slope = float(np.polyfit(np.log(sizes), np.log(medians), 1)[0])
    return np.asarray(medians), slope


# ---------------------------------------------------------------------- CLT

def clt_check(seed: int, n: int = 4000, b_blocks=(FIG1_B, FIG1_B), pi=FIG1_PI) -> dict:
    """Relative Frobenius error between empirical and limiting residual covariances."""
    b_blocks = [np.asarray(b) for b in b_blocks]
    params = GmsbmParams(b_blocks, pi)
    stack, z, w = sample_gmsbm(params, n, rng_seed=child_seed(seed, 40))
    latents = gmsbm_latents(params, z, w)
    emb = uase(stack, latents.d)
    tr = alignment_transform(stack, latents, embedding=emb)
    clouds = clt_residuals(stack, latents, tr, labels=z, embedding=emb)
    out = {}
    for g, resid in clouds.items():
        theory = limiting_covariance_left(b_blocks, [pi] * len(b_blocks), x=g).covariance
        out[g] = relative_frobenius(empirical_covariance(resid), theory)
    return out


# ----------------------------------------------------------- rank obscured

def rank_obscured_trial(seed: int, sizes=RANK_SIZES, restarts: int = 10) -> dict:
    """GMM error of the UASE at d=3 and of each single-layer ASE at d=2."""
    z = np.repeat(np.arange(len(sizes)), sizes)
    latents = LatentState(one_hot(z, 3), [one_hot(z, 3)] * 2, [RANK_B1, RANK_B2])
    stack = sample_mrdpg(latents, rng_seed=child_seed(seed, 50))
    gseed = child_seed(seed, 51)
    out = {"uase": classification_error(cluster(uase(stack, 3).left, 3, restarts, gseed), z)}
    for r, a in enumerate(stack.layers):
        out[f"ase{r + 1}"] = classification_error(cluster(ase(a, 2), 3, restarts, gseed), z)
    return out


# -------------------------------------------------------- two-graph testing

def size_power_study(seed: int, n: int = 1000, n_mc: int = 2000, size_reps: int = 500,
                     power_reps: int = 200, altered: int = 100, alpha: float = 0.05,
                     methods=(UASE, OMNIBUS)) -> dict:
    """Empirical size and power of the Monte Carlo two-graph tests.

    The latent positions ``X`` are drawn once from Dirichlet(1, 1, 1). The
    null distribution of ``T`` is estimated from ``n_mc`` pairs drawn from
    ``P = X X^T`` and reused for every repetition. Size repetitions draw
    fresh null pairs; power repetitions replace ``altered`` random rows of
    ``X`` by fresh Dirichlet draws for the second graph.
    """
    rng = substream(seed, 60)
    x = rng.dirichlet(np.ones(3), size=n)
    null = RdpgNull(x)
    stats = null_statistics(null, 3, n_mc, child_seed(seed, 61), methods)
    crit = {m: critical_value(stats[m], alpha) for m in methods}

    def size_rep(i):
        a1, a2 = null.sample_pair(child_seed(seed, 62, i))
        return {m: two_graph_statistic(a1, a2, 3, m) > crit[m] for m in methods}

    def power_rep(i):
        prng = substream(seed, 63, i)
        y = x.copy()
        idx = prng.choice(n, size=altered, replace=False)
        y[idx] = prng.dirichlet(np.ones(3), size=altered)
        a1 = sample_mrdpg(LatentState(x, [x], [np.eye(3)]),
                          rng_seed=child_seed(seed, 64, i)).layers[0]
        a2 = sample_mrdpg(LatentState(y, [y], [np.eye(3)]),
                          rng_seed=child_seed(seed, 65, i)).layers[0]
        return {m: two_graph_statistic(a1, a2, 3, m) > crit[m] for m in methods}

    sizes = trial_map(size_rep, range(size_reps))
    powers = trial_map(power_rep, range(power_reps))
    return {
        "critical_value": crit,
        "size": {m: float(np.mean([r[m] for r in sizes])) for m in methods},
        "power": {m: float(np.mean([r[m] for r in powers])) for m in methods},
        "size_reps": size_reps,
        "power_reps": power_reps,
    }


# ------------------------------------------------------- UASE versus MASE

def random_three_block(rng) -> np.ndarray:
    while True:
        b = random_symmetric_b(rng, 3)
        if abs(np.linalg.det(b)) > 1e-3:
            return b


def mase_comparison_trial(seed: int, trial: int, n: int = 750, k: int = 2) -> dict:
    """Subspace distance and model-estimation error of UASE and MASE."""
    rng = substream(seed, 70, trial)
    while True:
        z = rng.integers(0, 3, size=n)
        if np.unique(z).size == 3:
            break
    blocks = [random_three_block(rng) for _ in range(k)]
    x = one_hot(z, 3)
    latents = LatentState(x, [x] * k, blocks)
    stack = sample_mrdpg(latents, rng_seed=child_seed(seed, 71, trial))
    u_true = np.linalg.qr(x)[0]
    emb = uase(stack, 3)
    u_mase = mase(stack, 3, [3] * k)
    p_uase = estimate_p(stack, 3, embedding=emb)
    probs = [latents.probability(r) for r in range(k)]
    return {
        "dist_uase": subspace_distance(emb.u, u_true),
        "dist_mase": subspace_distance(u_mase, u_true),
        "nmse_uase": float(np.mean([nmse(p_uase[r], probs[r]) for r in range(k)])),
        "nmse_mase": float(np.mean([nmse(projection_estimate(u_mase, stack.layers[r]), probs[r])
                                    for r in range(k)])),
    }


# ------------------------------------------------------------- Chernoff

def identical_layers_check(seed: int, trials: int = 50, ks=(2, 3, 4, 5)) -> list:
    """Subset ratios for random identically distributed 2-community models.

    Returns one record per trial with the smallest ratio over all proper
    subsets; a value below 1 would contradict the embedding-more-is-better
    property for identical layers.
    """
    out = []
    for t in range(trials):
        rng = substream(seed, 80, t)
        k = int(ks[t % len(ks)])
        while True:
            b = rng.uniform(size=(2, 2))
            if abs(np.linalg.det(b)) > 1e-6:
                break
        pi = rng.dirichlet(np.ones(2))
        results = subset_comparison([b] * k, [pi] * k, subsets=all_subsets(k)[:-1])
        ratios = [r.ratio for r in results]
        out.append({"k": k, "min_ratio": float(min(ratios)), "ratios": ratios})
    return out


def monotone_subset_metric(seed: int, trials: int = 50, k: int = 3) -> dict:
    """Share of random k-layer models where every subset size has a ratio above 1.

    Layers carry independent uniform 2x2 block matrices with shared community
    weights. This is a tracked quantity, not a guarantee.
    """
    hits, records = 0, []
    for t in range(trials):
        rng = substream(seed, 81, t)
        while True:
            blocks = [rng.uniform(size=(2, 2)) for _ in range(k)]
            if all(abs(np.linalg.det(b)) > 1e-3 for b in blocks):
                break
        pi = rng.dirichlet(np.ones(2) * 2)
        subsets = all_subsets(k)[:-1]
        results = subset_comparison(blocks, [pi] * k, subsets=subsets)
        best = {}
        for res in results:
            if res.ratio is not None:
                size = len(res.subset)
                best[size] = max(best.get(size, 0.0), res.ratio)
        ok = all(best.get(size, 0.0) > 1 for size in range(1, k))
        hits += ok
        records.append({"trial": t, "holds": bool(ok), "max_ratio_by_size": best})
    return {"fraction": hits / trials, "trials": records}


def chernoff_example() -> tuple:
    """Subset ratios for the two-layer example with community weights (0.6, 0.4)."""
    b1 = np.array([[0.67, 0.46], [0.46, 0.36]])
    b2 = np.array([[0.98, 0.49], [0.49, 0.10]])
    res = subset_comparison([b1, b2], [FIG1_PI, FIG1_PI], subsets=[(0,), (1,)])
    return res[0].ratio, res[1].ratio

