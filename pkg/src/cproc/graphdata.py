"""TU-format graph datasets, deterministic splits, and classifier score ingestion.

TU benchmark files are 1-indexed; everything here is rebased to 0-indexed
graphs and per-graph 0-indexed nodes. Duplicate and reversed edges collapse
to a single undirected edge, and self-loops are dropped (counted in a
warning).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ParseError, ScoreIngestError, SplitError

PARTS = ("train", "valid", "calib", "test")


@dataclass(frozen=True)
class Graph:
    """One undirected graph: unit of classification."""

    id: int
    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    label: int
    node_attributes: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"graph {self.id}: self-loop ({u},{v})")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValueError(f"graph {self.id}: edge ({u},{v}) out of range")

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix."""
        a = np.zeros((self.num_nodes, self.num_nodes))
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_nodes)
        for u, v in self.edges:
            d[u] += 1.0
            d[v] += 1.0
        return d


def _read_int_rows(path: Path) -> list[list[int]]:
    rows = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([int(tok) for tok in line.replace(",", " ").split()])
            except ValueError as exc:
                raise ParseError(f"{path.name}:{ln}: {exc}") from None
    return rows


def parse_tu_dataset(dir_path: str | Path, name: str) -> list[Graph]:
    """Parse a dataset directory in the TU benchmark layout.

    Mandatory files: ``NAME_A.txt`` (edge list, 1-indexed global node ids),
    ``NAME_graph_indicator.txt`` (node -> graph id), ``NAME_graph_labels.txt``.
    Optional: ``NAME_node_labels.txt``, ``NAME_node_attributes.txt``.

    Graph labels are remapped onto {0, 1, ...} preserving the sorted order of
    the original values.
    """
    root = Path(dir_path)
    for fname in (f"{name}_A.txt", f"{name}_graph_indicator.txt", f"{name}_graph_labels.txt"):
        if not (root / fname).exists():
            raise ParseError(f"missing mandatory file {fname} in {root}")

    indicator = [row[0] for row in _read_int_rows(root / f"{name}_graph_indicator.txt")]
    raw_labels = [row[0] for row in _read_int_rows(root / f"{name}_graph_labels.txt")]
    if not raw_labels:
        raise ParseError(f"{name}: empty dataset (no graph labels)")
    label_map = {lab: i for i, lab in enumerate(sorted(set(raw_labels)))}

    n_graphs = len(raw_labels)
    # nodes per graph, in file order; TU node ids are global and 1-indexed
    node_graph = {}
    local_index: list[int] = []
    counts = [0] * n_graphs
    for node_1idx, g_1idx in enumerate(indicator, 1):
        if not (1 <= g_1idx <= n_graphs):
            raise ParseError(f"{name}_graph_indicator.txt: node {node_1idx} points at graph {g_1idx}")
        node_graph[node_1idx] = g_1idx - 1
        local_index.append(counts[g_1idx - 1])
        counts[g_1idx - 1] += 1

    edges: list[set[tuple[int, int]]] = [set() for _ in range(n_graphs)]
    dropped_loops = 0
    for ln, row in enumerate(_read_int_rows(root / f"{name}_A.txt"), 1):
        if len(row) != 2:
            raise ParseError(f"{name}_A.txt:{ln}: expected two node ids, got {row}")
        u, v = row
        if u not in node_graph or v not in node_graph:
            raise ParseError(f"{name}_A.txt:{ln}: edge ({u},{v}) references unknown node")
        if node_graph[u] != node_graph[v]:
            raise ParseError(f"{name}_A.txt:{ln}: edge ({u},{v}) crosses graphs")
        if u == v:
            dropped_loops += 1
            continue
        a, b = local_index[u - 1], local_index[v - 1]
        edges[node_graph[u]].add((min(a, b), max(a, b)))
    if dropped_loops:
        warnings.warn(f"{name}: dropped {dropped_loops} self-loop(s)", stacklevel=2)

    attrs: list[list[tuple[float, ...]]] | None = None
    attr_path = root / f"{name}_node_attributes.txt"
    nl_path = root / f"{name}_node_labels.txt"
    if attr_path.exists():
        attrs = [[] for _ in range(n_graphs)]
        with open(attr_path) as fh:
            for node_1idx, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    vec = tuple(float(tok) for tok in line.replace(",", " ").split())
                except ValueError as exc:
                    raise ParseError(f"{name}_node_attributes.txt:{node_1idx}: {exc}") from None
                attrs[node_graph[node_1idx]].append(vec)
    elif nl_path.exists():
        attrs = [[] for _ in range(n_graphs)]
        for node_1idx, row in enumerate(_read_int_rows(nl_path), 1):
            attrs[node_graph[node_1idx]].append((float(row[0]),))

    graphs = []
    for gid in range(n_graphs):
        if counts[gid] == 0:
            raise ParseError(f"{name}: graph {gid} has no nodes")
        graphs.append(
            Graph(
                id=gid,
                num_nodes=counts[gid],
                edges=tuple(sorted(edges[gid])),
                label=label_map[raw_labels[gid]],
                node_attributes=tuple(attrs[gid]) if attrs is not None else None,
            )
        )
    return graphs


def write_tu_dataset(graphs: list[Graph], dir_path: str | Path, name: str) -> None:
    """Serialize graphs back into the TU layout (fixture format, 1-indexed)."""
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    offset = 0
    a_lines, ind_lines, attr_lines = [], [], []
    for g in graphs:
        for u, v in g.edges:
            a_lines.append(f"{offset + u + 1}, {offset + v + 1}")
            a_lines.append(f"{offset + v + 1}, {offset + u + 1}")
        ind_lines.extend([str(g.id + 1)] * g.num_nodes)
        if g.node_attributes is not None:
            attr_lines.extend(", ".join(repr(x) for x in vec) for vec in g.node_attributes)
        offset += g.num_nodes
    (root / f"{name}_A.txt").write_text("\n".join(a_lines) + "\n")
    (root / f"{name}_graph_indicator.txt").write_text("\n".join(ind_lines) + "\n")
    (root / f"{name}_graph_labels.txt").write_text("\n".join(str(g.label) for g in graphs) + "\n")
    if any(g.node_attributes is not None for g in graphs):
        (root / f"{name}_node_attributes.txt").write_text("\n".join(attr_lines) + "\n")


@dataclass(frozen=True)
class SplitAssignment:
    """Four-way train/valid/calib/test partition, pure function of (n, seed, ratios)."""

    parts: tuple[str, ...]
    seed: int
    pool_split: float
    calib_split: float
    valid_split: float = 0.0

    def ids(self, part: str) -> np.ndarray:
        if part not in PARTS:
            raise ValueError(f"unknown part {part!r}")
        return np.array([i for i, p in enumerate(self.parts) if p == part], dtype=np.int64)

    def sizes(self) -> dict[str, int]:
        return {part: int(sum(p == part for p in self.parts)) for part in PARTS}


def split_dataset(
    n: int,
    seed: int,
    pool_split: float = 0.8,
    calib_split: float = 0.5,
    valid_split: float = 0.0,
) -> SplitAssignment:
    """Shuffle 0..n-1 with `seed` and cut into train/valid/calib/test.

    Rounding rule (fixed for determinism): |train pool| = floor(n * pool_split),
    |calib| = floor(remainder * calib_split), test takes the rest. A nonzero
    valid fraction is carved from the tail of the train pool.
    """
    if not (0.0 < pool_split < 1.0 and 0.0 < calib_split < 1.0):
        raise ValueError("pool_split and calib_split must lie strictly inside (0, 1)")
    if not (0.0 <= valid_split < 1.0):
        raise ValueError("valid_split must lie in [0, 1)")
    if n < 4:
        raise SplitError(f"need at least 4 graphs, got {n}")

    perm = np.random.default_rng(seed).permutation(n)
    n_train_pool = int(np.floor(n * pool_split))
    rest = perm[n_train_pool:]
    n_calib = int(np.floor(len(rest) * calib_split))
    n_valid = int(np.floor(n_train_pool * valid_split))

    parts = [""] * n
    for i in perm[: n_train_pool - n_valid]:
        parts[i] = "train"
    for i in perm[n_train_pool - n_valid : n_train_pool]:
        parts[i] = "valid"
    for i in rest[:n_calib]:
        parts[i] = "calib"
    for i in rest[n_calib:]:
        parts[i] = "test"

    assignment = SplitAssignment(tuple(parts), seed, pool_split, calib_split, valid_split)
    sizes = assignment.sizes()
    required = ["train", "calib", "test"] + (["valid"] if valid_split > 0 else [])
    for part in required:
        if sizes[part] == 0:
            raise SplitError(f"split leaves {part} empty: {sizes}")
    return assignment


def write_split_manifest(split: SplitAssignment, path: str | Path, comments: tuple[str, ...] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["graph_id", "part"])
        for gid, part in enumerate(split.parts):
            writer.writerow([gid, part])


def read_split_manifest(path: str | Path, seed: int = -1) -> SplitAssignment:
    parts: list[str] = []
    with open(path, newline="") as fh:
        lines = (line for line in fh if not line.startswith("#"))
        reader = csv.reader(lines)
        header = next(reader, None)
        if header != ["graph_id", "part"]:
            raise ParseError(f"{path}: bad split manifest header {header}")
        for row in reader:
            if len(row) != 2 or row[1] not in PARTS:
                raise ParseError(f"{path}: bad manifest row {row}")
            parts.append(row[1])
    # ratios are unknown when reading back; stored as NaN-ish sentinels
    return SplitAssignment(tuple(parts), seed, 0.5, 0.5)


@dataclass(frozen=True)
class ScoredDataset:
    """Labels plus per-label predicted probabilities for every graph."""

    labels: np.ndarray
    probs: np.ndarray  # (n, L), rows sum to 1
    split: SplitAssignment | None = None

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def num_labels(self) -> int:
        return self.probs.shape[1]

    def binary_scores(self) -> np.ndarray:
        """f-hat for the positive class of a binary problem."""
        if self.num_labels != 2:
            raise ValueError(f"binary_scores on a {self.num_labels}-label dataset")
        return self.probs[:, 1]

    def with_split(self, split: SplitAssignment) -> "ScoredDataset":
        if len(split.parts) != self.n:
            raise ValueError("split size does not match dataset size")
        return replace(self, split=split)

    def part_ids(self, part: str) -> np.ndarray:
        if self.split is None:
            raise ValueError("dataset carries no split assignment")
        return self.split.ids(part)


def load_scores(path: str | Path, dataset: list[Graph]) -> ScoredDataset:
    """Read a `graph_id,label,p0,p1[,p2...]` CSV and validate it against the graphs."""
    n = len(dataset)
    labels = np.full(n, -1, dtype=np.int64)
    probs: np.ndarray | None = None
    seen = np.zeros(n, dtype=bool)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 4 or header[:2] != ["graph_id", "label"]:
            raise ScoreIngestError(f"{path}: bad header {header}")
        num_labels = len(header) - 2
        if [h.strip() for h in header[2:]] != [f"p{k}" for k in range(num_labels)]:
            raise ScoreIngestError(f"{path}: probability columns must be p0..p{num_labels - 1}")
        probs = np.zeros((n, num_labels))
        for rownum, row in enumerate(reader, 2):
            if len(row) != 2 + num_labels:
                raise ScoreIngestError(f"row {rownum}: expected {2 + num_labels} fields")
            gid, label = int(row[0]), int(row[1])
            if not (0 <= gid < n):
                raise ScoreIngestError(f"row {rownum}: unknown graph_id {gid}")
            if seen[gid]:
                raise ScoreIngestError(f"row {rownum}: duplicate graph_id {gid}")
            if label != dataset[gid].label:
                raise ScoreIngestError(
                    f"row {rownum}: label {label} does not match parsed label {dataset[gid].label}"
                )
            vec = np.array([float(x) for x in row[2:]])
            if np.any(vec < 0.0) or np.any(vec > 1.0):
                raise ScoreIngestError(f"row {rownum}: probability outside [0,1]")
            if abs(float(vec.sum()) - 1.0) > 1e-6:
                raise ScoreIngestError(f"row {rownum}: probabilities sum to {vec.sum():.8f}")
            labels[gid] = label
            probs[gid] = vec
            seen[gid] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise ScoreIngestError(f"graph_id {missing} has no score row")
    return ScoredDataset(labels=labels, probs=probs)


def read_scores_csv(path: str | Path) -> ScoredDataset:
    """Read a scores CSV without a graph dataset to validate against (used
    when the distance matrix comes from an external source, e.g. synthetic
    covariates). Row-sum and range checks still apply."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 4 or header[:2] != ["graph_id", "label"]:
            raise ScoreIngestError(f"{path}: bad header {header}")
        num_labels = len(header) - 2
        for rownum, row in enumerate(reader, 2):
            if len(row) != 2 + num_labels:
                raise ScoreIngestError(f"row {rownum}: expected {2 + num_labels} fields")
            vec = np.array([float(x) for x in row[2:]])
            if np.any(vec < 0.0) or np.any(vec > 1.0) or abs(float(vec.sum()) - 1.0) > 1e-6:
                raise ScoreIngestError(f"row {rownum}: invalid probability vector")
            rows.append((int(row[0]), int(row[1]), vec))
    if not rows:
        raise ScoreIngestError(f"{path}: no score rows")
    n = len(rows)
    labels = np.full(n, -1, dtype=np.int64)
    probs = np.zeros((n, num_labels))
    for gid, label, vec in rows:
        if not (0 <= gid < n) or labels[gid] != -1:
            raise ScoreIngestError(f"graph_id {gid}: ids must cover 0..{n - 1} exactly once")
        labels[gid] = label
        probs[gid] = vec
    return ScoredDataset(labels=labels, probs=probs)


def write_scores(scored: ScoredDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["graph_id", "label"] + [f"p{k}" for k in range(scored.num_labels)])
        for gid in range(scored.n):
            writer.writerow([gid, int(scored.labels[gid])] + [repr(float(p)) for p in scored.probs[gid]])
