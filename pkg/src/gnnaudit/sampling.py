"""Train/test split construction by random-node and snowball sampling.

Both samplers are pure functions of (graph, params, seed) and produce a
full edge partition: edges internal to the train set, internal to the
test set, and crossing between the two. Snowball splits additionally
carry their traversal history so the expansion can be replayed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, induced_subgraph

__all__ = [
    "SamplingParams",
    "Split",
    "TraversalEvent",
    "DegreeDistribution",
    "random_node_split",
    "snowball_split",
    "empirical_degree_distribution",
    "predicted_degree_distribution",
]

SPLIT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SamplingParams:
    """Knobs shared by the samplers.

    k and seeds_per_class only apply to snowball sampling: each frontier
    node draws up to k neighbors per stage, and the initial set holds
    seeds_per_class uniformly chosen nodes of every class.
    """

    train_fraction: float
    k: int = 3
    seeds_per_class: int = 10

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.seeds_per_class < 1:
            raise ValueError("seeds_per_class must be >= 1")


@dataclass(frozen=True)
class TraversalEvent:
    """One step of a snowball expansion.

    kind is one of "seed", "reseed" or "draw". Seed and reseed events put
    `node` into the sample; a draw event records `parent` sampling the
    neighbor list `drawn` (in draw order), of which `new` were first
    discoveries.
    """

    kind: str
    node: int | None = None
    label: int | None = None
    parent: int | None = None
    drawn: tuple[int, ...] = ()
    new: tuple[int, ...] = ()

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind in ("seed", "reseed"):
            d["node"] = self.node
            if self.kind == "seed":
                d["label"] = self.label
        else:
            d["parent"] = self.parent
            d["drawn"] = list(self.drawn)
            d["new"] = list(self.new)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "TraversalEvent":
        if d["kind"] in ("seed", "reseed"):
            return cls(kind=d["kind"], node=d["node"], label=d.get("label"))
        return cls(kind=d["kind"], parent=d["parent"], drawn=tuple(d["drawn"]), new=tuple(d["new"]))


@dataclass(frozen=True)
class Split:
    """A train/test node partition with its induced edge partition."""

    node_count: int
    train_nodes: np.ndarray
    test_nodes: np.ndarray
    train_edges: np.ndarray
    test_edges: np.ndarray
    cross_edges: np.ndarray
    strategy: str
    params: SamplingParams
    rng_seed: int
    traversal: tuple[TraversalEvent, ...] | None = None
    traversal_edges: np.ndarray | None = None
    initial_seeds: tuple[int, ...] | None = None

    def train_mask(self) -> np.ndarray:
        mask = np.zeros(self.node_count, dtype=bool)
        mask[self.train_nodes] = True
        return mask

    def to_json(self) -> str:
        doc = {
            "format_version": SPLIT_FORMAT_VERSION,
            "strategy": self.strategy,
            "params": {
                "train_fraction": self.params.train_fraction,
                "k": self.params.k,
                "seeds_per_class": self.params.seeds_per_class,
            },
            "rng_seed": self.rng_seed,
            "node_count": self.node_count,
            "train_nodes": [int(v) for v in self.train_nodes],
            "train_edges": [[int(u), int(v)] for u, v in self.train_edges],
            "test_edges": [[int(u), int(v)] for u, v in self.test_edges],
            "cross_edges": [[int(u), int(v)] for u, v in self.cross_edges],
        }
        if self.traversal is not None:
            doc["traversal"] = [e.to_json() for e in self.traversal]
            doc["traversal_edges"] = [[int(u), int(v)] for u, v in self.traversal_edges]
        if self.initial_seeds is not None:
            doc["initial_seeds"] = list(self.initial_seeds)
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "Split":
        doc = json.loads(text)
        n = int(doc["node_count"])
        train = np.array(sorted(doc["train_nodes"]), dtype=np.int64)
        mask = np.zeros(n, dtype=bool)
        mask[train] = True
        test = np.flatnonzero(~mask)

        def arr(key):
            rows = doc[key]
            return np.array(rows, dtype=np.int64).reshape(-1, 2)

        traversal = None
        traversal_edges = None
        if "traversal" in doc:
            traversal = tuple(TraversalEvent.from_json(e) for e in doc["traversal"])
            traversal_edges = arr("traversal_edges")
        return cls(
            node_count=n,
            train_nodes=train,
            test_nodes=test,
            train_edges=arr("train_edges"),
            test_edges=arr("test_edges"),
            cross_edges=arr("cross_edges"),
            strategy=doc["strategy"],
            params=SamplingParams(**doc["params"]),
            rng_seed=int(doc["rng_seed"]),
            traversal=traversal,
            traversal_edges=traversal_edges,
            initial_seeds=tuple(doc["initial_seeds"]) if "initial_seeds" in doc else None,
        )

    @classmethod
    def load(cls, path: str | Path) -> "Split":
        return cls.from_json(Path(path).read_text())


def _partition_edges(g: Graph, train_mask: np.ndarray):
    if g.edge_count == 0:
        empty = np.zeros((0, 2), dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    in_u = train_mask[g.edges[:, 0]]
    in_v = train_mask[g.edges[:, 1]]
    train_edges = g.edges[in_u & in_v]
    test_edges = g.edges[~in_u & ~in_v]
    cross_edges = g.edges[in_u ^ in_v]
    return train_edges.copy(), test_edges.copy(), cross_edges.copy()


def _finish_split(g, train_nodes, strategy, params, seed, traversal=None,
                  traversal_edges=None, initial_seeds=None):
    train_nodes = np.array(sorted(train_nodes), dtype=np.int64)
    mask = np.zeros(g.node_count, dtype=bool)
    mask[train_nodes] = True
    test_nodes = np.flatnonzero(~mask)
    train_edges, test_edges, cross_edges = _partition_edges(g, mask)
    return Split(
        node_count=g.node_count,
        train_nodes=train_nodes,
        test_nodes=test_nodes,
        train_edges=train_edges,
        test_edges=test_edges,
        cross_edges=cross_edges,
        strategy=strategy,
        params=params,
        rng_seed=int(seed),
        traversal=traversal,
        traversal_edges=traversal_edges,
        initial_seeds=initial_seeds,
    )


def random_node_split(g: Graph, fraction: float, seed: int) -> Split:
    """Uniform node sample of round(fraction * n) nodes as the train set."""
    params = SamplingParams(train_fraction=fraction)
    size = int(round(fraction * g.node_count))
    if size < 1 or size >= g.node_count:
        raise ValueError(
            f"fraction {fraction} yields train size {size} on {g.node_count} nodes"
        )
    rng = np.random.default_rng(seed)
    train_nodes = rng.choice(g.node_count, size=size, replace=False)
    return _finish_split(g, train_nodes, "random", params, seed)


def snowball_split(
    g: Graph,
    target_size: int,
    params: SamplingParams,
    seed: int,
    initial_seeds=None,
) -> Split:
    """Frontier expansion from per-class seeds until target_size nodes.

    Each stage processes the previous stage's new nodes in ascending id
    order; every frontier node draws up to k of its neighbors uniformly
    without replacement, and only first-discovered nodes join the next
    frontier. The drawn incident edges are kept as the traversal edge set;
    the split's train_edges are the full induced edge set over the sampled
    nodes (a superset). If the frontier empties early, one uniformly
    random unvisited node is reseeded. Collection stops exactly at
    target_size, mid-stage if necessary.

    initial_seeds overrides the per-class seed selection with an explicit
    node list (recorded in the traversal like ordinary seeds).
    """
    if target_size >= g.node_count:
        raise ValueError("target_size must leave at least one test node")
    rng = np.random.default_rng(seed)
    events: list[TraversalEvent] = []
    visited: set[int] = set()

    if initial_seeds is None:
        if target_size < params.seeds_per_class * g.num_classes:
            raise ValueError(
                f"target_size {target_size} below seed set size "
                f"{params.seeds_per_class} x {g.num_classes} classes"
            )
        seed_nodes = []
        for c in range(g.num_classes):
            members = np.flatnonzero(g.labels == c)
            if members.size < params.seeds_per_class:
                raise ValueError(
                    f"class {c} has {members.size} nodes, fewer than "
                    f"seeds_per_class={params.seeds_per_class}"
                )
            seed_nodes.extend(int(v) for v in rng.choice(members, params.seeds_per_class, replace=False))
    else:
        seed_nodes = [int(v) for v in initial_seeds]
        if len(seed_nodes) > target_size:
            raise ValueError("more initial seeds than target_size")

    for s in seed_nodes:
        if s not in visited:
            visited.add(s)
            events.append(TraversalEvent(kind="seed", node=s, label=int(g.labels[s])))

    traversal_edges: set[tuple[int, int]] = set()
    frontier = sorted(visited)
    done = len(visited) >= target_size

    while not done:
        if not frontier:
            unvisited = np.array(sorted(set(range(g.node_count)) - visited), dtype=np.int64)
            r = int(rng.choice(unvisited))
            visited.add(r)
            events.append(TraversalEvent(kind="reseed", node=r))
            frontier = [r]
            if len(visited) >= target_size:
                break
            continue
        next_frontier: list[int] = []
        for u in sorted(frontier):
            nbrs = g.neighbors(u)
            if nbrs.size == 0:
                continue
            m = min(params.k, nbrs.size)
            drawn = [int(w) for w in rng.choice(nbrs, size=m, replace=False)]
            applied: list[int] = []
            new: list[int] = []
            for w in drawn:
                applied.append(w)
                traversal_edges.add((min(u, w), max(u, w)))
                if w not in visited:
                    visited.add(w)
                    new.append(w)
                    next_frontier.append(w)
                if len(visited) >= target_size:
                    done = True
                    break
            events.append(TraversalEvent(kind="draw", parent=u, drawn=tuple(applied), new=tuple(new)))
            if done:
                break
        frontier = next_frontier

    tre = (
        np.array(sorted(traversal_edges), dtype=np.int64).reshape(-1, 2)
        if traversal_edges
        else np.zeros((0, 2), dtype=np.int64)
    )
    return _finish_split(
        g, visited, "snowball", params, seed, traversal=tuple(events),
        traversal_edges=tre,
        initial_seeds=None if initial_seeds is None else tuple(seed_nodes),
    )


def train_graph(g: Graph, split: Split) -> tuple[Graph, dict[int, int]]:
    """The induced train graph (nodes and edges visible during training)."""
    return induced_subgraph(g, split.train_nodes)


@dataclass(frozen=True)
class DegreeDistribution:
    """Probability of each degree value, indexed 0..max_degree."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D array")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probs must be non-negative and sum to 1")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def total_variation(self, other: "DegreeDistribution") -> float:
        k = max(self.probs.size, other.probs.size)
        a = np.zeros(k)
        b = np.zeros(k)
        a[: self.probs.size] = self.probs
        b[: other.probs.size] = other.probs
        return 0.5 * float(np.abs(a - b).sum())


def empirical_degree_distribution(g: Graph) -> DegreeDistribution:
    """Degree histogram of the graph, normalized by node count."""
    if g.node_count == 0:
        raise ValueError("degree distribution undefined for an empty graph")
    counts = np.bincount(g.degrees())
    return DegreeDistribution(counts / g.node_count)


def predicted_degree_distribution(dist: DegreeDistribution, p: float) -> DegreeDistribution:
    """Degree law of a uniformly node-sampled induced subgraph.

    A node of original degree l keeps each neighbor independently with
    probability p, so its sampled degree is Binomial(l, p); mixing over
    the original degree distribution gives
    q_k = sum_{l >= k} C(l, k) p^k (1-p)^(l-k) P_l.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"retention probability p must be in [0, 1], got {p}")
    P = dist.probs
    q = np.zeros_like(P)
    for ell in range(P.size):
        if P[ell] == 0.0:
            continue
        pmf = _binomial_pmf(ell, p)
        q[: ell + 1] += P[ell] * pmf
    # exact binomial mixtures sum to 1; renormalize away accumulated roundoff
    q /= q.sum()
    return DegreeDistribution(q)


def _binomial_pmf(n: int, p: float) -> np.ndarray:
    if n == 0:
        return np.ones(1)
    if p == 0.0:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    if p == 1.0:
        out = np.zeros(n + 1)
        out[n] = 1.0
        return out
    k = np.arange(n + 1)
    log_comb = np.array([math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1) for i in k])
    return np.exp(log_comb + k * math.log(p) + (n - k) * math.log(1.0 - p))
