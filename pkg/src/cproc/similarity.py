"""Wasserstein distances between persistence diagrams, pairwise distance
matrices, and K-nearest-neighbor queries restricted to split parts.

Matching follows the diagonal-augmented square assignment construction: a
point of one diagram may match a point of the other or its own diagonal
projection ((b+d)/2, (b+d)/2); ground cost is the L-infinity norm raised to
the p-th power. The solver is exact, so oracle tests can demand equality.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ParseError
from .topology import PersistenceDiagram, max_finite_value

_MAGIC = b"CPROCSIM"
_FORMAT_VERSION = 1


def _matching_cost(a: np.ndarray, b: np.ndarray, p: float) -> float:
    """Optimal matching cost (sum of p-th powers) between two finite point sets."""
    # canonical orientation makes the computation literally identical under
    # argument swap, so W(a,b) == W(b,a) exactly
    if (len(a), a.tobytes()) > (len(b), b.tobytes()):
        a, b = b, a
    n1, n2 = len(a), len(b)
    if n1 == 0 and n2 == 0:
        return 0.0
    diag_a = ((a[:, 1] - a[:, 0]) / 2.0) ** p if n1 else np.zeros(0)
    diag_b = ((b[:, 1] - b[:, 0]) / 2.0) ** p if n2 else np.zeros(0)
    size = n1 + n2
    cost = np.zeros((size, size))
    if n1 and n2:
        cost[:n1, :n2] = (
            np.maximum(
                np.abs(a[:, None, 0] - b[None, :, 0]),
                np.abs(a[:, None, 1] - b[None, :, 1]),
            )
            ** p
        )
    # a-point -> own diagonal slot; all other slots forbidden
    cost[:n1, n2:] = np.inf
    cost[:n1, n2:][np.arange(n1), np.arange(n1)] = diag_a
    cost[n1:, :n2] = np.inf
    cost[n1:, :n2][np.arange(n2), np.arange(n2)] = diag_b
    # diagonal-to-diagonal matches are free (the zero block is already zero)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def _finite_points(arr: np.ndarray, label: str) -> np.ndarray:
    pts = np.asarray(arr, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{label} contains non-finite points; cap essential deaths first")
    return pts


def wasserstein_distance(d1: PersistenceDiagram, d2: PersistenceDiagram, p: float = 1.0) -> float:
    """p-Wasserstein distance; dim0 and dim1 are matched separately and
    combined as (W0^p + W1^p)^(1/p). Essential deaths must be capped already."""
    if p < 1.0:
        raise ValueError(f"Wasserstein order must be >= 1, got {p}")
    total = 0.0
    for dim in (0, 1):
        a = _finite_points(d1.points(dim), f"diagram {d1.graph_id} dim{dim}")
        b = _finite_points(d2.points(dim), f"diagram {d2.graph_id} dim{dim}")
        total += _matching_cost(a, b, p)
    return total ** (1.0 / p)


def capped_diagram(
    d: PersistenceDiagram,
    cap: float,
    dims: tuple[int, ...] = (0, 1),
    keep_dim0_essential: bool = False,
) -> PersistenceDiagram:
    """Finite version of a diagram for distance computation.

    dim0 keeps only finite pairs unless `keep_dim0_essential` (then deaths are
    capped); dim1 deaths are capped. Dimensions missing from `dims` come back
    empty.
    """
    empty = np.zeros((0, 2))
    if 0 in dims:
        d0 = d.dim0
        if keep_dim0_essential:
            d0 = np.column_stack([d0[:, 0], np.minimum(d0[:, 1], cap)])
        else:
            d0 = d0[np.isfinite(d0[:, 1])]
    else:
        d0 = empty
    if 1 in dims:
        d1 = np.column_stack([d.dim1[:, 0], np.minimum(d.dim1[:, 1], cap)]) if len(d.dim1) else empty
    else:
        d1 = empty
    return PersistenceDiagram(graph_id=d.graph_id, dim0=d0, dim1=d1)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric pairwise-distance table over all graphs."""

    values: np.ndarray
    p: float
    kinds: tuple[str, ...]
    cap: float
    key: str = ""

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class NeighborSet:
    query: int
    neighbors: tuple[tuple[int, float], ...]  # ascending distance, ties by id
    pool_tag: str = ""

    def ids(self) -> np.ndarray:
        return np.array([gid for gid, _ in self.neighbors], dtype=np.int64)


_WORKER_DIAGRAMS: list[PersistenceDiagram] = []
_WORKER_P = 1.0


def _pool_init(diagrams: list[PersistenceDiagram], p: float) -> None:
    global _WORKER_DIAGRAMS, _WORKER_P
    _WORKER_DIAGRAMS = diagrams
    _WORKER_P = p


def _pool_pairs(pairs: list[tuple[int, int]]) -> list[tuple[int, int, float]]:
    return [
        (i, j, wasserstein_distance(_WORKER_DIAGRAMS[i], _WORKER_DIAGRAMS[j], _WORKER_P))
        for i, j in pairs
    ]


def build_similarity_matrix(
    diagrams: list[PersistenceDiagram],
    p: float = 1.0,
    cap: float | None = None,
    dims: tuple[int, ...] = (0, 1),
    kinds: tuple[str, ...] = (),
    key: str = "",
    workers: int | None = None,
) -> SimilarityMatrix:
    """All-pairs Wasserstein distances (symmetric, zero diagonal).

    `cap` defaults to the largest finite birth/death in the dataset and is
    applied to every diagram before matching.
    """
    if cap is None:
        cap = max_finite_value(diagrams)
    finite = [capped_diagram(d, cap, dims=dims) for d in diagrams]
    n = len(finite)
    values = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if workers and workers > 1 and len(pairs) > 1:
        chunks = [pairs[k::workers] for k in range(workers) if pairs[k::workers]]
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_pool_init, initargs=(finite, p)
        ) as pool:
            for result in pool.map(_pool_pairs, chunks):
                for i, j, dist in result:
                    values[i, j] = values[j, i] = dist
    else:
        for i, j in pairs:
            dist = wasserstein_distance(finite[i], finite[j], p)
            values[i, j] = values[j, i] = dist
    return SimilarityMatrix(values=values, p=p, kinds=kinds, cap=cap, key=key)


def knn(matrix: SimilarityMatrix, query: int, pool, K: int, pool_tag: str = "") -> NeighborSet:
    """K smallest-distance pool members; ties broken by ascending graph id."""
    if K <= 0:
        raise ValueError(f"K must be positive, got {K}")
    pool_ids = np.asarray(sorted(pool), dtype=np.int64)
    if pool_ids.size == 0:
        raise ValueError("empty neighbor pool")
    if query in set(pool_ids.tolist()):
        raise ValueError(f"query {query} must not be a member of the pool")
    dists = matrix.values[query, pool_ids]
    order = np.argsort(dists, kind="stable")[: min(K, pool_ids.size)]
    return NeighborSet(
        query=query,
        neighbors=tuple((int(pool_ids[i]), float(dists[i])) for i in order),
        pool_tag=pool_tag,
    )


def knn_indices(values: np.ndarray, query_ids: np.ndarray, pool_ids: np.ndarray, K: int) -> np.ndarray:
    """Vectorized knn: row r holds the ids of the K nearest pool members of
    query_ids[r] (same distance/tie rules as `knn`). Queries must not be in the pool."""
    pool_sorted = np.sort(np.asarray(pool_ids, dtype=np.int64))
    sub = values[np.ix_(np.asarray(query_ids, dtype=np.int64), pool_sorted)]
    order = np.argsort(sub, axis=1, kind="stable")[:, : min(K, pool_sorted.size)]
    return pool_sorted[order]


def save_matrix(matrix: SimilarityMatrix, path: str | Path, extra_meta: dict | None = None) -> None:
    """Binary layout: magic, format version, n, p, sha256(key), JSON metadata,
    row-major float64 values."""
    meta = {
        "kinds": list(matrix.kinds),
        "cap": matrix.cap,
        "key": matrix.key,
        **(extra_meta or {}),
    }
    blob = json.dumps(meta, sort_keys=True).encode()
    digest = hashlib.sha256(matrix.key.encode()).digest()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQd", _FORMAT_VERSION, matrix.n, matrix.p))
        fh.write(digest)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())


def load_matrix(path: str | Path, expect_key: str | None = None) -> SimilarityMatrix:
    """Read a matrix file; raises ParseError on corruption or key mismatch."""
    try:
        with open(path, "rb") as fh:
            if fh.read(len(_MAGIC)) != _MAGIC:
                raise ParseError(f"{path}: bad magic")
            version, n, p = struct.unpack("<IQd", fh.read(20))
            if version != _FORMAT_VERSION:
                raise ParseError(f"{path}: unsupported format version {version}")
            digest = fh.read(32)
            (meta_len,) = struct.unpack("<Q", fh.read(8))
            meta = json.loads(fh.read(meta_len).decode())
            raw = fh.read(n * n * 8)
            if len(raw) != n * n * 8:
                raise ParseError(f"{path}: truncated value block")
            values = np.frombuffer(raw, dtype="<f8").reshape(n, n).copy()
    except (OSError, struct.error, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    key = meta.get("key", "")
    if hashlib.sha256(key.encode()).digest() != digest:
        raise ParseError(f"{path}: metadata hash mismatch")
    if expect_key is not None and key != expect_key:
        raise ParseError(f"{path}: cache key mismatch (have {key!r}, want {expect_key!r})")
    return SimilarityMatrix(
        values=values, p=p, kinds=tuple(meta.get("kinds", ())), cap=float(meta.get("cap", 0.0)), key=key
    )


def export_matrix_csv(matrix: SimilarityMatrix, path: str | Path, comments: tuple[str, ...] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        for row in matrix.values:
            writer.writerow([repr(float(x)) for x in row])
