import numpy as np
import pytest

from cproc.graphdata import Graph


@pytest.fixture
def triangle() -> Graph:
    return Graph(id=0, num_nodes=3, edges=((0, 1), (0, 2), (1, 2)), label=1)


@pytest.fixture
def path3() -> Graph:
    return Graph(id=0, num_nodes=3, edges=((0, 1), (1, 2)), label=0)


def random_er_graph(rng: np.random.Generator, gid: int = 0, max_nodes: int = 30) -> Graph:
    n = int(rng.integers(1, max_nodes + 1))
    p = float(rng.uniform(0.05, 0.6))
    edges = tuple(
        (u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p
    )
    return Graph(id=gid, num_nodes=n, edges=edges, label=int(rng.integers(0, 2)))


def write_tiny_fixture(root, name="TINY"):
    """Two graphs: a triangle labeled 1 and a single edge labeled -1."""
    root.mkdir(parents=True, exist_ok=True)
    (root / f"{name}_A.txt").write_text(
        "1, 2\n2, 1\n1, 3\n3, 1\n2, 3\n3, 2\n4, 5\n5, 4\n"
    )
    (root / f"{name}_graph_indicator.txt").write_text("1\n1\n1\n2\n2\n")
    (root / f"{name}_graph_labels.txt").write_text("1\n-1\n")
    return root
