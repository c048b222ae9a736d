import os
from pathlib import Path

import numpy as np
import pytest

from gnnaudit.graph import Graph, load_graph

DATA_DIR = Path(__file__).parent / "data"
MINISET_DIR = DATA_DIR / "miniset"

# Conversions of the real benchmark datasets are not shipped with the
# repository; point GNNAUDIT_CORA_DIR at a converted Cora directory to
# enable the quantitative checks that reference it.
CORA_DIR = os.environ.get("GNNAUDIT_CORA_DIR", "")


def cora_available() -> bool:
    return bool(CORA_DIR) and (Path(CORA_DIR) / "meta.json").is_file()


requires_cora = pytest.mark.skipif(
    not cora_available(),
    reason="set GNNAUDIT_CORA_DIR to a converted Cora dataset directory",
)


def make_graph(n, edge_list, labels=None, features=None, num_classes=None):
    labels = np.zeros(n, dtype=np.int64) if labels is None else np.asarray(labels)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if n else 1
    if features is None:
        rng = np.random.default_rng(n * 1000 + len(edge_list))
        features = rng.standard_normal((n, 3))
    return Graph(
        node_count=n,
        edges=np.array(edge_list, dtype=np.int64).reshape(-1, 2),
        features=features,
        labels=labels,
        num_classes=num_classes,
    )


def random_graph(n, p, seed, num_classes=2, feature_dim=3):
    rng = np.random.default_rng(seed)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return make_graph(
        n,
        edges,
        labels=rng.integers(0, num_classes, size=n),
        features=rng.standard_normal((n, feature_dim)),
        num_classes=num_classes,
    )


@pytest.fixture(scope="session")
def miniset() -> Graph:
    return load_graph(MINISET_DIR)


@pytest.fixture()
def triangle():
    return make_graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture()
def path3():
    # a-b-c path
    return make_graph(3, [(0, 1), (1, 2)])


@pytest.fixture()
def star5():
    # center 0 with leaves 1..5
    return make_graph(6, [(0, i) for i in range(1, 6)])
