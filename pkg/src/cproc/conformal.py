"""Non-conformity scores, order-statistic quantiles, and soft conformal
intervals for latent class probabilities (marginal, label-conditional, and
locally calibrated).

A score is s_i = pi_tilde(G_i) - f_hat(G_i), where pi_tilde averages the
model probabilities of the K nearest training graphs under the similarity
matrix. Scores depend only on the calibration graph, so they are computed
once and reused by every test point; the conditional variant changes which
scores are selected, never their values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StratumError
from .similarity import SimilarityMatrix, knn, knn_indices


@dataclass(frozen=True)
class NonconformityScore:
    graph_id: int
    s: float
    label: int


@dataclass(frozen=True)
class SoftInterval:
    """Conformal interval for the latent positive-class probability.

    Raw endpoints are kept (they may leave [0,1]); clamping happens only when
    reporting. Band indicators always use the raw endpoints.
    """

    graph_id: int
    lo: float
    up: float
    alpha: float
    conditioning: str

    def clamped(self) -> tuple[float, float]:
        return (min(max(self.lo, 0.0), 1.0), min(max(self.up, 0.0), 1.0))


def quantile(values, gamma: float) -> float:
    """The floor(gamma * n)-th order statistic, clamped to [1, n]."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("quantile of an empty multiset")
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    m = min(max(int(np.floor(gamma * arr.size)), 1), arr.size)
    return float(arr[m - 1])


def conformal_p_value(pi: float, f_hat: float, calib_scores) -> float:
    """Diagnostic p-value: (#{s_j < pi - f_hat} + 1) / n over calibration scores."""
    arr = np.asarray(calib_scores, dtype=float)
    if arr.size == 0:
        raise ValueError("p-value needs a nonempty calibration score set")
    return float((np.count_nonzero(arr < (pi - f_hat)) + 1) / arr.size)


def soft_prob_estimate(
    query: int,
    matrix: SimilarityMatrix,
    train_pool,
    train_probs: np.ndarray,
    K: int,
) -> float:
    """Nonparametric probability estimate: mean model probability of the K
    nearest training graphs."""
    neigh = knn(matrix, query, train_pool, K, pool_tag="train")
    return float(np.mean([train_probs[gid] for gid in neigh.ids()]))


def score_table(
    matrix: SimilarityMatrix,
    calib_ids: np.ndarray,
    train_ids: np.ndarray,
    probs: np.ndarray,
    K: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized scores for every calibration graph.

    Returns (sorted calibration ids, scores aligned to them).
    """
    calib_sorted = np.sort(np.asarray(calib_ids, dtype=np.int64))
    neigh = knn_indices(matrix.values, calib_sorted, train_ids, K)
    pi_tilde = probs[neigh].mean(axis=1)
    return calib_sorted, pi_tilde - probs[calib_sorted]


def calibration_scores(
    matrix: SimilarityMatrix,
    calib_pool,
    train_pool,
    probs: np.ndarray,
    labels: np.ndarray,
    K: int,
) -> list[NonconformityScore]:
    ids, scores = score_table(
        matrix, np.asarray(sorted(calib_pool)), np.asarray(sorted(train_pool)), probs, K
    )
    return [
        NonconformityScore(graph_id=int(g), s=float(s), label=int(labels[g]))
        for g, s in zip(ids, scores)
    ]


def _interval(gid: int, f_hat: float, scores: np.ndarray, alpha: float, conditioning: str) -> SoftInterval:
    lo = f_hat + quantile(scores, alpha / 2.0)
    up = f_hat + quantile(scores, 1.0 - alpha / 2.0)
    return SoftInterval(graph_id=gid, lo=lo, up=up, alpha=alpha, conditioning=conditioning)


def marginal_interval(gid: int, f_hat: float, scores, alpha: float) -> SoftInterval:
    """[f_hat + q_{a/2}(s), f_hat + q_{1-a/2}(s)] over the full calibration set."""
    arr = np.asarray([sc.s if isinstance(sc, NonconformityScore) else sc for sc in scores], dtype=float)
    if arr.size == 0:
        raise ValueError("marginal interval needs a nonempty calibration set")
    return _interval(gid, f_hat, arr, alpha, "marginal")


def label_conditional_interval(gid: int, f_hat: float, k: int, scores_k, alpha: float) -> SoftInterval:
    """Same construction with the score multiset restricted to calibration
    graphs of label k."""
    arr = np.asarray([sc.s if isinstance(sc, NonconformityScore) else sc for sc in scores_k], dtype=float)
    if arr.size == 0:
        raise StratumError(f"no calibration scores with label {k}")
    return _interval(gid, f_hat, arr, alpha, f"label:{k}")


def local_conditional_interval(
    gid: int,
    k: int,
    matrix: SimilarityMatrix,
    calib_pool,
    train_pool,
    probs: np.ndarray,
    labels: np.ndarray,
    K: int,
    alpha: float,
    min_stratum: int = 5,
    widen: bool = False,
    score_cache: dict[int, float] | None = None,
) -> SoftInterval:
    """Interval from the label-k scores inside the query's K-nearest
    calibration neighborhood.

    When the stratum holds fewer than `min_stratum` graphs this raises
    StratumError, unless `widen` is set, in which case the neighborhood is
    extended just far enough to reach `min_stratum` label-k members.
    """
    calib_sorted = np.sort(np.asarray(list(calib_pool), dtype=np.int64))
    order = knn_indices(matrix.values, np.array([gid]), calib_sorted, calib_sorted.size)[0]
    neighborhood = order[: min(K, order.size)]
    stratum = neighborhood[labels[neighborhood] == k]
    if stratum.size < min_stratum:
        if not widen:
            raise StratumError(
                f"graph {gid}: {stratum.size} label-{k} graph(s) among its {neighborhood.size} "
                f"nearest calibration neighbors (need {min_stratum})"
            )
        stratum = order[labels[order] == k][:min_stratum]
        if stratum.size < min_stratum:
            raise StratumError(
                f"graph {gid}: calibration pool holds only {stratum.size} label-{k} graph(s) "
                f"(need {min_stratum})"
            )
    if score_cache is not None:
        scores = np.array([score_cache[int(i)] for i in stratum])
    else:
        train_sorted = np.asarray(sorted(train_pool), dtype=np.int64)
        neigh = knn_indices(matrix.values, stratum, train_sorted, K)
        scores = probs[neigh].mean(axis=1) - probs[stratum]
    return _interval(gid, float(probs[gid]), scores, alpha, f"local:{k}:K={K}")
