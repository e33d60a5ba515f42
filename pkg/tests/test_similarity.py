import itertools

import numpy as np
import pytest

from cproc.errors import ParseError
from cproc.similarity import (
    SimilarityMatrix,
    build_similarity_matrix,
    capped_diagram,
    export_matrix_csv,
    knn,
    knn_indices,
    load_matrix,
    save_matrix,
    wasserstein_distance,
)
from cproc.topology import PersistenceDiagram


def exhaustive_matching_cost(a: np.ndarray, b: np.ndarray, p: float) -> float:
    """Minimum p-power matching cost over every partial bijection, the rest
    matched to the diagonal. Exponential; fine for <= 4 points."""

    def linf(x, y):
        return max(abs(x[0] - y[0]), abs(x[1] - y[1]))

    def diag(x):
        return (x[1] - x[0]) / 2.0

    best = np.inf
    idx_a, idx_b = range(len(a)), range(len(b))
    for k in range(min(len(a), len(b)) + 1):
        for sub_a in itertools.combinations(idx_a, k):
            for sub_b in itertools.permutations(idx_b, k):
                cost = sum(linf(a[i], b[j]) ** p for i, j in zip(sub_a, sub_b))
                cost += sum(diag(a[i]) ** p for i in idx_a if i not in sub_a)
                cost += sum(diag(b[j]) ** p for j in idx_b if j not in sub_b)
                best = min(best, cost)
    return best


def exhaustive_wasserstein(d1, d2, p):
    total = 0.0
    for dim in (0, 1):
        total += exhaustive_matching_cost(d1.points(dim), d2.points(dim), p)
    return total ** (1.0 / p)


def random_diagram(rng, gid=0, max_points=4):
    def pts(k):
        births = rng.uniform(0, 1, size=k)
        deaths = births + rng.uniform(0, 1, size=k)
        return np.column_stack([births, deaths])

    return PersistenceDiagram(gid, pts(int(rng.integers(0, max_points + 1))),
                              pts(int(rng.integers(0, max_points + 1))))


def diag_only(points, gid=0):
    return PersistenceDiagram(gid, np.asarray(points, dtype=float).reshape(-1, 2), np.zeros((0, 2)))


def test_identity_distance_zero():
    rng = np.random.default_rng(0)
    for _ in range(10):
        d = random_diagram(rng)
        assert wasserstein_distance(d, d, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_single_point_vs_empty():
    assert wasserstein_distance(diag_only([[0.0, 1.0]]), diag_only([], 1), 1.0) == pytest.approx(0.5)


def test_direct_match_beats_double_diagonal():
    d1, d2 = diag_only([[0.0, 2.0]]), diag_only([[0.0, 1.0]], 1)
    assert wasserstein_distance(d1, d2, 1.0) == pytest.approx(1.0)


def test_matches_exhaustive_oracle():
    rng = np.random.default_rng(12345)
    for _ in range(200):
        d1, d2 = random_diagram(rng, 0), random_diagram(rng, 1)
        p = float(rng.choice([1.0, 2.0]))
        assert wasserstein_distance(d1, d2, p) == pytest.approx(
            exhaustive_wasserstein(d1, d2, p), abs=1e-9
        )


def test_symmetry_exact():
    rng = np.random.default_rng(21)
    for _ in range(50):
        d1, d2 = random_diagram(rng, 0), random_diagram(rng, 1)
        assert wasserstein_distance(d1, d2, 1.0) == wasserstein_distance(d2, d1, 1.0)


def test_triangle_inequality():
    rng = np.random.default_rng(22)
    for _ in range(100):
        a, b, c = (random_diagram(rng, i) for i in range(3))
        for p in (1.0, 2.0):
            ab = wasserstein_distance(a, b, p)
            bc = wasserstein_distance(b, c, p)
            ac = wasserstein_distance(a, c, p)
            assert ac <= ab + bc + 1e-9


def test_dims_matched_separately():
    d1 = PersistenceDiagram(0, np.array([[0.0, 1.0]]), np.array([[0.0, 2.0]]))
    d2 = PersistenceDiagram(1, np.zeros((0, 2)), np.zeros((0, 2)))
    # p=2: (0.5^2 + 1.0^2)^(1/2)
    assert wasserstein_distance(d1, d2, 2.0) == pytest.approx(np.sqrt(1.25))


def test_rejects_infinite_points():
    d = PersistenceDiagram(0, np.array([[0.0, np.inf]]), np.zeros((0, 2)))
    with pytest.raises(ValueError, match="cap"):
        wasserstein_distance(d, diag_only([], 1), 1.0)


def test_rejects_bad_order():
    with pytest.raises(ValueError, match="order"):
        wasserstein_distance(diag_only([]), diag_only([], 1), 0.5)


def test_capped_diagram_policy():
    d = PersistenceDiagram(
        0, np.array([[0.0, np.inf], [0.2, 0.7]]), np.array([[0.5, np.inf]])
    )
    capped = capped_diagram(d, cap=2.0)
    assert capped.dim0.tolist() == [[0.2, 0.7]]  # dim0 essentials dropped
    assert capped.dim1.tolist() == [[0.5, 2.0]]  # dim1 essentials capped
    kept = capped_diagram(d, cap=2.0, keep_dim0_essential=True)
    assert kept.dim0.tolist() == [[0.0, 2.0], [0.2, 0.7]]
    only0 = capped_diagram(d, cap=2.0, dims=(0,))
    assert len(only0.dim1) == 0


# --- similarity matrix -------------------------------------------------------


def test_identical_diagrams_zero_matrix():
    d = diag_only([[0.0, 1.0]])
    mat = build_similarity_matrix([d, d, d], p=1.0, cap=1.0)
    assert np.array_equal(mat.values, np.zeros((3, 3)))


def test_matrix_entries_match_pairwise_calls():
    rng = np.random.default_rng(33)
    diagrams = [random_diagram(rng, gid) for gid in range(4)]
    cap = 3.0
    mat = build_similarity_matrix(diagrams, p=1.0, cap=cap)
    for i, j in itertools.combinations(range(4), 2):
        want = wasserstein_distance(capped_diagram(diagrams[i], cap), capped_diagram(diagrams[j], cap), 1.0)
        assert mat.values[i, j] == pytest.approx(want, abs=1e-12)
        assert mat.values[i, j] == mat.values[j, i]
    assert np.array_equal(np.diag(mat.values), np.zeros(4))


def test_parallel_matches_serial():
    rng = np.random.default_rng(44)
    diagrams = [random_diagram(rng, gid) for gid in range(8)]
    serial = build_similarity_matrix(diagrams, p=1.0)
    parallel = build_similarity_matrix(diagrams, p=1.0, workers=2)
    assert np.array_equal(serial.values, parallel.values)


# --- knn ----------------------------------------------------------------------


def _matrix_from(values: np.ndarray) -> SimilarityMatrix:
    return SimilarityMatrix(values=values, p=1.0, kinds=("test",), cap=1.0)


def test_knn_singleton_pool():
    vals = np.array([[0.0, 2.5], [2.5, 0.0]])
    got = knn(_matrix_from(vals), 0, [1], K=5)
    assert got.neighbors == ((1, 2.5),)


def test_knn_sorts_by_distance():
    vals = np.zeros((4, 4))
    vals[0, 1], vals[0, 2], vals[0, 3] = 3.0, 1.0, 2.0
    vals += vals.T
    got = knn(_matrix_from(vals), 0, [1, 2, 3], K=2)
    assert [g for g, _ in got.neighbors] == [2, 3]


def test_knn_brute_force_oracle():
    rng = np.random.default_rng(55)
    raw = rng.uniform(0, 1, size=(200, 200))
    vals = np.triu(raw, 1)
    vals = vals + vals.T
    mat = _matrix_from(vals)
    pool = list(range(1, 200))
    for _ in range(300):
        q = 0
        K = int(rng.integers(1, 25))
        got = knn(mat, q, pool, K)
        want = sorted(((vals[q, j], j) for j in pool))[:K]
        assert [g for g, _ in got.neighbors] == [j for _, j in want]


def test_knn_tie_break_by_id_and_pool_order_invariance():
    vals = np.zeros((4, 4))
    vals[0, 1] = vals[0, 2] = vals[0, 3] = 1.0
    vals += vals.T
    mat = _matrix_from(vals)
    a = knn(mat, 0, [3, 1, 2], K=2)
    b = knn(mat, 0, [1, 2, 3], K=2)
    assert a.neighbors == b.neighbors == ((1, 1.0), (2, 1.0))


def test_knn_argument_errors():
    mat = _matrix_from(np.zeros((2, 2)))
    with pytest.raises(ValueError, match="K"):
        knn(mat, 0, [1], K=0)
    with pytest.raises(ValueError, match="pool"):
        knn(mat, 0, [0, 1], K=1)
    with pytest.raises(ValueError, match="empty"):
        knn(mat, 0, [], K=1)


def test_knn_indices_matches_single_queries():
    rng = np.random.default_rng(66)
    raw = rng.uniform(0, 1, (30, 30))
    vals = np.triu(raw, 1)
    vals = vals + vals.T
    mat = _matrix_from(vals)
    queries = np.array([0, 5, 7])
    pool = np.array(sorted(set(range(30)) - {0, 5, 7}))
    block = knn_indices(vals, queries, pool, 6)
    for row, q in zip(block, queries):
        assert row.tolist() == [g for g, _ in knn(mat, int(q), pool, 6).neighbors]


# --- disk format ---------------------------------------------------------------


def test_matrix_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(77)
    raw = rng.uniform(0, 1, (5, 5))
    vals = np.triu(raw, 1)
    vals = vals + vals.T
    mat = SimilarityMatrix(values=vals, p=2.0, kinds=("degree",), cap=4.0, key="k1")
    save_matrix(mat, tmp_path / "m.simmat")
    back = load_matrix(tmp_path / "m.simmat", expect_key="k1")
    assert np.array_equal(back.values, mat.values)
    assert back.p == 2.0 and back.kinds == ("degree",) and back.cap == 4.0


def test_matrix_key_mismatch(tmp_path):
    mat = SimilarityMatrix(values=np.zeros((2, 2)), p=1.0, kinds=(), cap=1.0, key="a")
    save_matrix(mat, tmp_path / "m.simmat")
    with pytest.raises(ParseError, match="key mismatch"):
        load_matrix(tmp_path / "m.simmat", expect_key="b")


def test_matrix_corruption_detected(tmp_path):
    mat = SimilarityMatrix(values=np.eye(3), p=1.0, kinds=(), cap=1.0, key="a")
    save_matrix(mat, tmp_path / "m.simmat")
    blob = (tmp_path / "m.simmat").read_bytes()
    (tmp_path / "m.simmat").write_bytes(blob[: len(blob) - 16])  # truncate values
    with pytest.raises(ParseError, match="truncated"):
        load_matrix(tmp_path / "m.simmat")
    (tmp_path / "m.simmat").write_bytes(b"garbage" + blob[7:])
    with pytest.raises(ParseError, match="magic"):
        load_matrix(tmp_path / "m.simmat")


def test_matrix_csv_export(tmp_path):
    mat = SimilarityMatrix(values=np.array([[0.0, 1.5], [1.5, 0.0]]), p=1.0, kinds=(), cap=1.0)
    export_matrix_csv(mat, tmp_path / "m.csv")
    rows = (tmp_path / "m.csv").read_text().strip().splitlines()
    assert [float(v) for v in rows[0].split(",")] == [0.0, 1.5]
