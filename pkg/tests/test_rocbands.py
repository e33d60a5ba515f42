import numpy as np
import pytest

from cproc.conformal import SoftInterval
from cproc.errors import DegenerateTestError, StratumError
from cproc.graphdata import ScoredDataset, SplitAssignment
from cproc.rocbands import (
    band_from_intervals,
    cp_roc_bands,
    default_lambda_grid,
    empirical_roc,
    multilabel_bands,
    oracle_rates,
    read_band_csv,
    roc_from_arrays,
    staircase_auc,
    write_band_csv,
)
from cproc.synthetic import (
    SyntheticSpec,
    covariate_distance_matrix,
    generate,
    scored_dataset,
)


def iv(gid, lo, up, alpha=0.1, cond="label:1"):
    return SoftInterval(graph_id=gid, lo=lo, up=up, alpha=alpha, conditioning=cond)


def degenerate(values, alpha=0.1):
    return [iv(i, v, v, alpha) for i, v in enumerate(values)]


# --- empirical ROC ------------------------------------------------------------


def test_roc_perfect_separation():
    curve = roc_from_arrays(np.array([1, 1, 0, 0], dtype=bool), np.array([0.9, 0.8, 0.2, 0.1]))
    assert curve.auc == pytest.approx(1.0)


def test_roc_concordant_pairs_example():
    # scores 0.9:+, 0.8:-, 0.7:+, 0.6:- -> 3 of 4 concordant pairs
    curve = roc_from_arrays(np.array([1, 0, 1, 0], dtype=bool), np.array([0.9, 0.8, 0.7, 0.6]))
    assert curve.auc == pytest.approx(0.75)


def test_roc_random_scores_auc_half():
    rng = np.random.default_rng(4)
    labels = rng.random(20000) < 0.5
    scores = rng.random(20000)
    curve = roc_from_arrays(labels, scores)
    assert curve.auc == pytest.approx(0.5, abs=0.05)


def test_roc_staircase_monotone():
    rng = np.random.default_rng(14)
    curve = roc_from_arrays(rng.random(200) < 0.4, rng.random(200))
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)
    assert curve.fpr[0] == 0.0 and curve.tpr[-1] == 1.0


def test_roc_single_class_rejected():
    with pytest.raises(DegenerateTestError):
        roc_from_arrays(np.array([True, True]), np.array([0.5, 0.6]))


def test_staircase_auc_pads_to_unit_square():
    # flat curve at tpr=0.5 spanning fpr in [0.2, 0.6] only
    assert staircase_auc(np.array([0.6, 0.2]), np.array([0.5, 0.5])) == pytest.approx(0.5)


# --- bands ----------------------------------------------------------------------


def test_band_degenerate_intervals_equal_empirical_rates():
    rng = np.random.default_rng(6)
    pos = rng.uniform(0, 1, 40)
    neg = rng.uniform(0, 1, 60)
    band = band_from_intervals(degenerate(pos), degenerate(neg), alpha=0.1)
    for lam in np.linspace(0, 1, 97):
        tpr = np.mean(pos > lam)
        fpr = np.mean(neg > lam)
        lo, up = band.sen_at(lam)
        assert lo == up == pytest.approx(tpr)
        lo, up = band.spe_at(lam)
        assert lo == up == pytest.approx(fpr)


def test_band_boundary_strict_inequality():
    band = band_from_intervals(
        [iv(0, 0.2, 1.0), iv(1, 0.3, 0.9)], [iv(2, 0.1, 0.8)], alpha=0.1
    )
    assert band.lambda_grid[-1] == 1.0
    assert band.sen_up[-1] == 0.0  # no endpoint exceeds 1, strict > makes it 0


def test_band_widened_intervals_contain_original():
    rng = np.random.default_rng(61)
    for _ in range(20):
        f_pos = rng.uniform(0, 1, 30)
        f_neg = rng.uniform(0, 1, 30)
        w_pos = rng.uniform(0, 0.2, (30, 2))
        w_neg = rng.uniform(0, 0.2, (30, 2))
        delta = 0.07
        grid = np.linspace(0, 1, 257)
        base = band_from_intervals(
            [iv(i, f - a, f + b) for i, (f, (a, b)) in enumerate(zip(f_pos, w_pos))],
            [iv(i, f - a, f + b) for i, (f, (a, b)) in enumerate(zip(f_neg, w_neg))],
            lambda_grid=grid,
        )
        wide = band_from_intervals(
            [iv(i, f - a - delta, f + b + delta) for i, (f, (a, b)) in enumerate(zip(f_pos, w_pos))],
            [iv(i, f - a - delta, f + b + delta) for i, (f, (a, b)) in enumerate(zip(f_neg, w_neg))],
            lambda_grid=grid,
        )
        assert np.all(wide.sen_lo <= base.sen_lo) and np.all(base.sen_up <= wide.sen_up)
        assert np.all(wide.spe_lo <= base.spe_lo) and np.all(base.spe_up <= wide.spe_up)


def test_band_invariants_ordering_and_monotone():
    rng = np.random.default_rng(62)
    intervals_pos = [iv(i, f - w, f + w) for i, (f, w) in
                     enumerate(zip(rng.uniform(0, 1, 50), rng.uniform(0, 0.3, 50)))]
    intervals_neg = [iv(i, f - w, f + w) for i, (f, w) in
                     enumerate(zip(rng.uniform(0, 1, 50), rng.uniform(0, 0.3, 50)))]
    band = band_from_intervals(intervals_pos, intervals_neg)
    for lo, up in ((band.sen_lo, band.sen_up), (band.spe_lo, band.spe_up)):
        assert np.all(lo <= up)
        assert np.all(np.diff(lo) <= 0) and np.all(np.diff(up) <= 0)
        assert np.all((0 <= lo) & (up <= 1))


def test_band_sandwich_and_auc_ordering_under_straddle():
    rng = np.random.default_rng(63)
    for _ in range(25):
        n_pos, n_neg = int(rng.integers(5, 60)), int(rng.integers(5, 60))
        f_pos, f_neg = rng.uniform(0, 1, n_pos), rng.uniform(0, 1, n_neg)
        grid = default_lambda_grid(f_pos, f_neg)
        pos = [iv(i, f - rng.uniform(0, 0.3), f + rng.uniform(0, 0.3)) for i, f in enumerate(f_pos)]
        neg = [iv(i, f - rng.uniform(0, 0.3), f + rng.uniform(0, 0.3)) for i, f in enumerate(f_neg)]
        band = band_from_intervals(pos, neg, lambda_grid=grid)
        point = band_from_intervals(degenerate(f_pos), degenerate(f_neg), lambda_grid=grid)
        # exact indicator arithmetic: lo <= f <= up lifts through the sums
        assert np.all(band.sen_lo <= point.sen_lo) and np.all(point.sen_up <= band.sen_up)
        assert np.all(band.spe_lo <= point.spe_lo) and np.all(point.spe_up <= band.spe_up)
        assert band.auc_lo <= point.auc_lo + 1e-12
        assert point.auc_up <= band.auc_up + 1e-12


def test_band_empty_class_rejected():
    with pytest.raises(DegenerateTestError):
        band_from_intervals([], [iv(0, 0.1, 0.2)])


def test_band_grid_validation():
    with pytest.raises(ValueError, match="grid"):
        band_from_intervals([iv(0, 0.1, 0.2)], [iv(1, 0.1, 0.2)], lambda_grid=np.array([-0.5, 1.0]))


def test_default_grid_contains_endpoints():
    grid = default_lambda_grid(np.array([0.123, -0.2]), np.array([0.987, 1.7]))
    assert 0.123 in grid and 0.987 in grid
    assert grid.min() == 0.0 and grid.max() == 1.0


# --- oracle rates ----------------------------------------------------------------


def test_oracle_rates_boundaries():
    pis = np.array([1.0, 1.0, 0.4, 0.2])
    mask = np.array([True, True, False, False])
    rates = oracle_rates(pis, mask, [0.5])
    assert rates.tpr[0] == 1.0
    rates = oracle_rates(pis, mask, [0.0])
    assert rates.tpr[0] == 1.0 and rates.fpr[0] == 1.0  # pi >= 0 always


def test_oracle_rates_brute_force():
    rng = np.random.default_rng(64)
    pis = rng.uniform(0, 1, 200)
    mask = rng.random(200) < 0.5
    lams = rng.uniform(0, 1, 50)
    rates = oracle_rates(pis, mask, lams)
    for i, lam in enumerate(lams):
        assert rates.tpr[i] == np.mean(pis[mask] >= lam)
        assert rates.fpr[i] == np.mean(pis[~mask] >= lam)


# --- pipeline --------------------------------------------------------------------


def _pipeline_inputs(seed=11, n_train=300, n_calib=120, n_test=80, shift=None):
    spec = SyntheticSpec(
        n_train=n_train, n_calib=n_calib, n_test=n_test, dim=3,
        beta=(1.0, -0.8, 0.6), shift=shift, seed=seed,
    )
    ds = generate(spec)
    scored = scored_dataset(ds, ds.pi)
    return scored, covariate_distance_matrix(ds)


def test_reduction_identity_bit_exact():
    scored, mat = _pipeline_inputs()
    n_calib = len(scored.part_ids("calib"))
    cond = cp_roc_bands(scored, mat, K=n_calib, alpha=0.1, mode="conditional")
    exch = cp_roc_bands(scored, mat, K=n_calib, alpha=0.1, mode="exchangeable")
    assert np.array_equal(cond.sen_lo, exch.sen_lo)
    assert np.array_equal(cond.sen_up, exch.sen_up)
    assert np.array_equal(cond.spe_lo, exch.spe_lo)
    assert np.array_equal(cond.spe_up, exch.spe_up)
    assert cond.auc_lo == exch.auc_lo and cond.auc_up == exch.auc_up


def test_pipeline_thin_stratum_policies():
    # shift the test part toward the high-probability region so that test
    # negatives see few label-0 calibration neighbors
    scored, mat = _pipeline_inputs(seed=13, shift=(1.2, -1.0, 0.6))
    with pytest.raises(StratumError):
        cp_roc_bands(scored, mat, K=20, alpha=0.1, mode="conditional", thin_stratum="error")
    band = cp_roc_bands(scored, mat, K=20, alpha=0.1, mode="conditional", thin_stratum="widen")
    assert np.all(band.sen_lo <= band.sen_up)


def test_pipeline_degenerate_test_part():
    scored, mat = _pipeline_inputs(seed=17)
    labels = scored.labels.copy()
    labels[scored.part_ids("test")] = 1
    scored = ScoredDataset(labels=labels, probs=scored.probs, split=scored.split)
    with pytest.raises(DegenerateTestError):
        cp_roc_bands(scored, mat, K=10, alpha=0.1)


def test_multilabel_binary_reduces_to_binary_pipeline():
    scored, mat = _pipeline_inputs(seed=19)
    bands = multilabel_bands(scored, mat, K=25, alpha=0.1, mode="conditional", thin_stratum="widen")
    direct = cp_roc_bands(
        scored, mat, K=25, alpha=0.1, mode="conditional", positive_label=1, thin_stratum="widen"
    )
    assert np.array_equal(bands[1].sen_lo, direct.sen_lo)
    assert np.array_equal(bands[1].spe_up, direct.spe_up)


def test_multilabel_three_classes():
    rng = np.random.default_rng(23)
    n = 360
    x = rng.normal(size=(n, 2))
    logits = np.column_stack([x @ np.array([1.0, 0.0]), x @ np.array([0.0, 1.0]), x @ np.array([-1.0, -1.0])])
    probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    labels = np.array([rng.choice(3, p=p) for p in probs])
    parts = ("train",) * 200 + ("calib",) * 100 + ("test",) * 60
    split = SplitAssignment(parts, seed=0, pool_split=0.55, calib_split=0.6)
    scored = ScoredDataset(labels=labels, probs=probs, split=split)
    from cproc.similarity import SimilarityMatrix
    from scipy.spatial.distance import pdist, squareform

    mat = SimilarityMatrix(values=squareform(pdist(x)), p=2.0, kinds=("euclidean",), cap=0.0)
    bands = multilabel_bands(scored, mat, K=30, alpha=0.1, mode="conditional", thin_stratum="widen")
    assert sorted(bands) == [0, 1, 2]
    for band in bands.values():
        assert np.all(band.sen_lo <= band.sen_up)
        assert np.all(np.diff(band.sen_up) <= 0)


def test_multilabel_missing_test_label():
    # three probability columns but label 2 never appears in the test part
    scored, mat = _pipeline_inputs(seed=29)
    probs3 = np.column_stack([scored.probs, np.full(scored.n, 1e-9)])
    probs3 = probs3 / probs3.sum(axis=1, keepdims=True)
    bad = ScoredDataset(labels=scored.labels, probs=probs3, split=scored.split)
    with pytest.raises(StratumError, match="absent"):
        multilabel_bands(bad, mat, K=10, alpha=0.1, mode="exchangeable")


def test_empirical_roc_from_scored_dataset():
    scored, _ = _pipeline_inputs(seed=31)
    curve = empirical_roc(scored)
    assert 0.5 < curve.auc <= 1.0  # oracle probabilities rank well above chance


# --- CSV ------------------------------------------------------------------------


def test_band_csv_roundtrip(tmp_path):
    scored, mat = _pipeline_inputs(seed=37)
    band = cp_roc_bands(scored, mat, K=15, alpha=0.1, mode="exchangeable")
    write_band_csv(
        tmp_path / "band.csv", band.lambda_grid, band.sen_lo, band.sen_up,
        band.spe_lo, band.spe_up, comments=("version x", "config: {}"),
    )
    data = read_band_csv(tmp_path / "band.csv")
    assert np.array_equal(data["lambda"], band.lambda_grid)
    assert np.array_equal(data["sen_lo"], band.sen_lo)
    assert np.array_equal(data["spe_up"], band.spe_up)


def test_band_csv_rejects_garbage(tmp_path):
    (tmp_path / "bad.csv").write_text("# comment\nnot,a,band\n")
    with pytest.raises(ValueError, match="band CSV"):
        read_band_csv(tmp_path / "bad.csv")
