"""Bootstrap ROC confidence bands, the head-to-head baseline for CP-ROC.

Resampling is stratified by class so every resample keeps both classes (an
unstratified resample of an imbalanced test set can lose the minority class
entirely and leave TPR/FPR undefined). Bounds are plain percentiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTestError
from .rocbands import _frac_above


@dataclass(frozen=True)
class BootstrapBand:
    lambda_grid: np.ndarray
    tpr_lo: np.ndarray
    tpr_up: np.ndarray
    fpr_lo: np.ndarray
    fpr_up: np.ndarray
    B: int
    level: float

    def mean_bandwidth_tpr(self) -> float:
        return float(np.mean(self.tpr_up - self.tpr_lo))

    def mean_bandwidth_fpr(self) -> float:
        return float(np.mean(self.fpr_up - self.fpr_lo))


def bootstrap_bands(
    positive_mask: np.ndarray,
    scores: np.ndarray,
    lambda_grid: np.ndarray,
    B: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapBand:
    """Percentile bands over B class-stratified resamples of the test set."""
    if B < 1:
        raise ValueError(f"need at least one resample, got B={B}")
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level}")
    positive_mask = np.asarray(positive_mask, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    pos = scores[positive_mask]
    neg = scores[~positive_mask]
    if pos.size == 0 or neg.size == 0:
        raise DegenerateTestError("bootstrap needs both classes in the test set")
    lambda_grid = np.asarray(lambda_grid, dtype=float)

    tprs = np.empty((B, lambda_grid.size))
    fprs = np.empty((B, lambda_grid.size))
    for b in range(B):
        rng = np.random.default_rng(seed + b)
        pos_b = pos[rng.integers(0, pos.size, pos.size)]
        neg_b = neg[rng.integers(0, neg.size, neg.size)]
        tprs[b] = _frac_above(pos_b, lambda_grid)
        fprs[b] = _frac_above(neg_b, lambda_grid)

    lo_q, up_q = (1.0 - level) / 2.0, 1.0 - (1.0 - level) / 2.0
    return BootstrapBand(
        lambda_grid=lambda_grid,
        tpr_lo=np.quantile(tprs, lo_q, axis=0),
        tpr_up=np.quantile(tprs, up_q, axis=0),
        fpr_lo=np.quantile(fprs, lo_q, axis=0),
        fpr_up=np.quantile(fprs, up_q, axis=0),
        B=B,
        level=level,
    )
