"""Immutable undirected attributed graphs and their structural statistics.

A graph is stored as a sorted, deduplicated edge array over integer node
ids plus dense feature and label arrays. All arrays are frozen after
construction so a single graph instance can be shared freely between
concurrent jobs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "DatasetMeta",
    "GraphFormatError",
    "load_graph",
    "save_graph",
    "average_degree",
    "label_homophily",
    "induced_subgraph",
    "l_hop_neighborhood",
]


class GraphFormatError(ValueError):
    """Raised when graph data violates the canonical format."""


def _canonical_edges(pairs: np.ndarray) -> np.ndarray:
    """Normalize an (E, 2) int array to sorted, deduplicated u < v pairs."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size == 0:
        return pairs.reshape(0, 2)
    if np.any(pairs[:, 0] == pairs[:, 1]):
        bad = pairs[pairs[:, 0] == pairs[:, 1]][0]
        raise GraphFormatError(f"self-loop edge {bad[0]},{bad[1]} is not allowed")
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    stacked = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return stacked


@dataclass(frozen=True)
class Graph:
    """Undirected attributed graph over nodes 0..node_count-1.

    edges holds unordered pairs as rows (u, v) with u < v, sorted
    lexicographically and free of duplicates and self-loops. Adjacency is
    materialized as a CSR-style sorted neighbor list for O(deg) iteration.
    """

    node_count: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    _indptr: np.ndarray = field(init=False, repr=False, compare=False)
    _neighbors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = _canonical_edges(self.edges)
        features = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] != self.node_count:
            raise GraphFormatError(
                f"feature matrix has {features.shape[0] if features.ndim == 2 else '?'} rows, "
                f"expected {self.node_count}"
            )
        if labels.shape != (self.node_count,):
            raise GraphFormatError(
                f"label vector has length {labels.shape}, expected {self.node_count}"
            )
        if self.node_count > 0 and labels.size > 0:
            if labels.min() < 0 or labels.max() >= self.num_classes:
                raise GraphFormatError(
                    f"label out of range [0, {self.num_classes}): {labels.min()}..{labels.max()}"
                )
        if edges.size > 0 and (edges.min() < 0 or edges.max() >= self.node_count):
            raise GraphFormatError("edge endpoint out of range")

        indptr, neighbors = _build_adjacency(self.node_count, edges)
        for arr in (edges, features, labels, indptr, neighbors):
            arr.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_indptr", indptr)
        object.__setattr__(self, "_neighbors", neighbors)

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted neighbor ids of node v."""
        self._check_node(v)
        return self._neighbors[self._indptr[v] : self._indptr[v + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self._indptr)

    def degree(self, v: int) -> int:
        self._check_node(v)
        return int(self._indptr[v + 1] - self._indptr[v])

    def _check_node(self, v: int) -> None:
        if not 0 <= v < self.node_count:
            raise IndexError(f"node id {v} out of range [0, {self.node_count})")


def _build_adjacency(n: int, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if edges.size == 0:
        return np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst


@dataclass(frozen=True)
class DatasetMeta:
    """Summary statistics of a dataset, as reported alongside benchmarks."""

    name: str
    node_count: int
    edge_count: int
    num_classes: int
    feature_dim: int
    avg_degree: float
    avg_homophily: float

    @classmethod
    def from_graph(cls, name: str, g: Graph) -> "DatasetMeta":
        _, avg_hom = label_homophily(g)
        return cls(
            name=name,
            node_count=g.node_count,
            edge_count=g.edge_count,
            num_classes=g.num_classes,
            feature_dim=g.feature_dim,
            avg_degree=average_degree(g),
            avg_homophily=avg_hom,
        )


def load_graph(path: str | Path) -> Graph:
    """Load a graph from a canonical dataset directory.

    The directory must contain meta.json, edges.csv, features.csv and
    labels.csv; row i of features.csv/labels.csv describes node i.
    Duplicate or reversed edge lines are tolerated and deduplicated;
    self-loop lines are rejected.
    """
    path = Path(path)
    for fname in ("meta.json", "edges.csv", "features.csv", "labels.csv"):
        if not (path / fname).is_file():
            raise GraphFormatError(f"missing dataset file: {path / fname}")

    meta = json.loads((path / "meta.json").read_text())
    n = int(meta["node_count"])
    num_classes = int(meta["num_classes"])

    edge_text = (path / "edges.csv").read_text().strip()
    if edge_text:
        try:
            rows = [tuple(int(tok) for tok in line.split(",")) for line in edge_text.splitlines()]
        except ValueError as exc:
            raise GraphFormatError(f"non-integer edge entry: {exc}") from exc
        if any(len(r) != 2 for r in rows):
            raise GraphFormatError("edge lines must contain exactly two node ids")
        edges = np.array(rows, dtype=np.int64)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)

    try:
        features = np.loadtxt(path / "features.csv", delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise GraphFormatError(f"non-numeric feature entry: {exc}") from exc
    labels = np.loadtxt(path / "labels.csv", dtype=np.int64, ndmin=1)

    if features.shape[0] != n:
        raise GraphFormatError(f"features.csv has {features.shape[0]} rows, meta says {n}")
    if labels.shape[0] != n:
        raise GraphFormatError(f"labels.csv has {labels.shape[0]} rows, meta says {n}")
    if features.shape[1] != int(meta["feature_dim"]):
        raise GraphFormatError(
            f"features.csv has {features.shape[1]} columns, meta says {meta['feature_dim']}"
        )

    g = Graph(node_count=n, edges=edges, features=features, labels=labels, num_classes=num_classes)
    if g.edge_count != int(meta["edge_count"]):
        raise GraphFormatError(
            f"edges.csv holds {g.edge_count} unique edges, meta says {meta['edge_count']}"
        )
    return g


def save_graph(g: Graph, path: str | Path, name: str) -> None:
    """Write a graph to a canonical dataset directory (inverse of load_graph)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "name": name,
        "node_count": g.node_count,
        "edge_count": g.edge_count,
        "num_classes": g.num_classes,
        "feature_dim": g.feature_dim,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    with open(path / "edges.csv", "w") as f:
        for u, v in g.edges:
            f.write(f"{u},{v}\n")
    with open(path / "features.csv", "w") as f:
        for row in g.features:
            f.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(path / "labels.csv", "w") as f:
        for y in g.labels:
            f.write(f"{y}\n")


def average_degree(g: Graph) -> float:
    """Mean degree 2|E| / |V|."""
    if g.node_count == 0:
        raise ValueError("average degree is undefined for an empty graph")
    return 2.0 * g.edge_count / g.node_count


def label_homophily(g: Graph) -> tuple[list[float | None], float]:
    """Per-node fraction of neighbors sharing the node's label.

    The per-node value is defined only for nodes of degree >= 1; isolated
    nodes get None. The returned average is the arithmetic mean over
    non-isolated nodes.
    """
    per_node: list[float | None] = []
    defined = []
    for v in range(g.node_count):
        nbrs = g.neighbors(v)
        if nbrs.size == 0:
            per_node.append(None)
            continue
        frac = float(np.mean(g.labels[nbrs] == g.labels[v]))
        per_node.append(frac)
        defined.append(frac)
    if not defined:
        raise ValueError("label homophily is undefined: all nodes are isolated")
    return per_node, float(np.mean(defined))


def induced_subgraph(g: Graph, nodes) -> tuple[Graph, dict[int, int]]:
    """Subgraph on a node set, keeping edges with both endpoints inside.

    Returns the re-indexed subgraph and the old-id -> new-id mapping;
    new ids follow ascending old-id order.
    """
    nodes = np.unique(np.asarray(list(nodes), dtype=np.int64))
    if nodes.size > 0 and (nodes.min() < 0 or nodes.max() >= g.node_count):
        raise IndexError("node id out of range")
    mapping = {int(old): new for new, old in enumerate(nodes)}
    mask = np.zeros(g.node_count, dtype=bool)
    mask[nodes] = True
    if g.edge_count > 0:
        keep = mask[g.edges[:, 0]] & mask[g.edges[:, 1]]
        kept = g.edges[keep]
        relabel = np.full(g.node_count, -1, dtype=np.int64)
        relabel[nodes] = np.arange(nodes.size)
        new_edges = relabel[kept]
    else:
        new_edges = np.zeros((0, 2), dtype=np.int64)
    sub = Graph(
        node_count=int(nodes.size),
        edges=new_edges,
        features=g.features[nodes] if nodes.size else np.zeros((0, g.feature_dim)),
        labels=g.labels[nodes],
        num_classes=g.num_classes,
    )
    return sub, mapping


def l_hop_neighborhood(g: Graph, v: int, hops: int) -> set[int]:
    """Nodes within hop distance <= hops of v, excluding v itself."""
    if hops < 0:
        raise ValueError("hop count must be non-negative")
    g._check_node(v)
    seen = {v}
    frontier = [v]
    result: set[int] = set()
    for _ in range(hops):
        nxt = []
        for u in frontier:
            for w in g.neighbors(u):
                w = int(w)
                if w not in seen:
                    seen.add(w)
                    result.add(w)
                    nxt.append(w)
        frontier = nxt
        if not frontier:
            break
    return result
