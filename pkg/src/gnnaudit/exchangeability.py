"""Swap-compatibility checks for train/test exchangeability.

A member/non-member pair is exchangeable only if swapping them leaves
every sample tuple's neighborhood unchanged. Member tuples read their
neighborhoods from the sampled train view (the induced train subgraph);
the non-member's query neighborhood comes from the underlying graph. For
snowball splits the recorded traversal is additionally replayed to see
whether the swapped node set is even producible by the same expansion
history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .models import Regime, build_view
from .sampling import SamplingParams, Split, snowball_split

__all__ = [
    "NodeTuple",
    "SwapVerdict",
    "ViolationRate",
    "build_tuples",
    "check_swap",
    "check_swap_snowball",
    "replay_split",
    "violation_rate",
]


@dataclass(frozen=True)
class NodeTuple:
    """One sample of the node-tuple distribution: features, label, and the
    L-hop neighborhood with its feature map."""

    node_id: int
    features: np.ndarray
    label: int
    neighborhood: frozenset[int]
    neighbor_features: dict[int, np.ndarray]


@dataclass(frozen=True)
class SwapVerdict:
    compatible: bool
    witnesses: tuple[tuple[int, frozenset[int], frozenset[int]], ...]
    support_break: bool


def _lhop(g: Graph, v: int, hops: int, allowed: frozenset[int] | None) -> frozenset[int]:
    """L-hop neighborhood of v, optionally restricted to an induced node
    set (v must belong to it); excludes v itself."""
    if allowed is not None and v not in allowed:
        raise ValueError(f"node {v} is not part of the restricted view")
    seen = {v}
    frontier = [v]
    out: set[int] = set()
    for _ in range(hops):
        nxt = []
        for u in frontier:
            for w in g.neighbors(u):
                w = int(w)
                if w in seen or (allowed is not None and w not in allowed):
                    continue
                seen.add(w)
                out.add(w)
                nxt.append(w)
        frontier = nxt
        if not frontier:
            break
    return frozenset(out)


def build_tuples(g: Graph, split: Split, hops: int, regime: Regime) -> list[NodeTuple]:
    """One tuple per node (train and test) with neighborhoods taken from
    the regime's edge view."""
    if hops < 1:
        raise ValueError("hops must be >= 1")
    view = build_view(g, split, regime)
    adj: list[list[int]] = [[] for _ in range(g.node_count)]
    for u, v in view.edges:
        adj[int(u)].append(int(v))
        adj[int(v)].append(int(u))
    tuples = []
    for v in range(g.node_count):
        seen = {v}
        frontier = [v]
        hood: set[int] = set()
        for _ in range(hops):
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if w not in seen:
                        seen.add(w)
                        hood.add(w)
                        nxt.append(w)
            frontier = nxt
        tuples.append(
            NodeTuple(
                node_id=v,
                features=g.features[v],
                label=int(g.labels[v]),
                neighborhood=frozenset(hood),
                neighbor_features={u: g.features[u] for u in sorted(hood)},
            )
        )
    return tuples


def _tuple_witnesses(g: Graph, train_set: frozenset[int], member: int, nonmember: int,
                     hops: int) -> tuple[tuple[int, frozenset[int], frozenset[int]], ...]:
    """Nodes whose tuple neighborhood changes when member and nonmember
    trade places.

    Members are viewed through the induced train subgraph before and
    after; the node on the non-member side is viewed through the full
    graph. Only nodes within `hops` of either swapped node can change, so
    the scan is restricted to those candidates.
    """
    swapped = frozenset((train_set - {member}) | {nonmember})

    def before(v: int) -> frozenset[int]:
        if v == nonmember:
            return _lhop(g, v, hops, None)
        return _lhop(g, v, hops, train_set)

    def after(v: int) -> frozenset[int]:
        if v == member:
            return _lhop(g, v, hops, None)
        return _lhop(g, v, hops, swapped)

    candidates = {member, nonmember}
    candidates |= _lhop(g, member, hops, train_set)
    candidates |= _lhop(g, nonmember, hops, swapped)
    witnesses = []
    for v in sorted(candidates):
        b, a = before(v), after(v)
        if b != a:
            witnesses.append((v, b, a))
    return tuple(witnesses)


def check_swap(g: Graph, split: Split, member: int, nonmember: int, hops: int = 1) -> SwapVerdict:
    """Verdict for exchanging one member with one non-member.

    At one hop the swap is compatible exactly when both nodes are
    isolated in the underlying graph; larger neighborhoods are compared
    explicitly.
    """
    train_set = frozenset(int(v) for v in split.train_nodes)
    if member not in train_set:
        raise ValueError(f"node {member} is not a train (member) node")
    if nonmember in train_set or not 0 <= nonmember < g.node_count:
        raise ValueError(f"node {nonmember} is not a test (non-member) node")
    witnesses = _tuple_witnesses(g, train_set, member, nonmember, hops)
    return SwapVerdict(compatible=not witnesses, witnesses=witnesses, support_break=False)


# ---------------------------------------------------------------------------
# snowball traversal replay
# ---------------------------------------------------------------------------


def replay_split(g: Graph, split: Split) -> Split:
    """Re-derive a snowball split from its recorded traversal alone."""
    if split.traversal is None:
        raise ValueError("split carries no traversal history")
    visited: set[int] = set()
    edges: set[tuple[int, int]] = set()
    for ev in split.traversal:
        if ev.kind in ("seed", "reseed"):
            visited.add(int(ev.node))
        elif ev.kind == "draw":
            parent = int(ev.parent)
            if parent not in visited:
                raise ValueError(f"traversal draws from unvisited node {parent}")
            new = []
            for w in ev.drawn:
                w = int(w)
                edges.add((min(parent, w), max(parent, w)))
                if w not in visited:
                    visited.add(w)
                    new.append(w)
            if tuple(new) != ev.new:
                raise ValueError("traversal event is inconsistent with replay")
        else:
            raise ValueError(f"unknown traversal event kind {ev.kind!r}")
    from .sampling import _finish_split  # shared constructor, not public API

    tre = (
        np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
        if edges
        else np.zeros((0, 2), dtype=np.int64)
    )
    return _finish_split(
        g, visited, "snowball", split.params, split.rng_seed,
        traversal=split.traversal, traversal_edges=tre,
        initial_seeds=split.initial_seeds,
    )


def _replay_support_break(g: Graph, split: Split, member: int, nonmember: int) -> bool:
    """Whether the recorded expansion history rules out the swapped set.

    The swap edits only the member's entry slot; the history is then
    re-read for contradictions: the member re-appearing in later draws,
    draws parented by the member that discovered nodes, a seed slot of
    the wrong class, an entry draw whose parent is not adjacent to the
    incoming node, or a drawing turn the incoming node could not spend
    without discovering someone new. Edits beyond the entry slot are not
    searched, so the check is conservative.
    """
    k = split.params.k
    entered = False
    visited: set[int] = set()
    t_nbrs = frozenset(int(w) for w in g.neighbors(nonmember))
    for ev in split.traversal:
        if ev.kind in ("seed", "reseed"):
            node = int(ev.node)
            if node == member:
                if ev.kind == "seed" and g.labels[nonmember] != g.labels[member]:
                    return True
                entered = True
                visited.add(nonmember)
            else:
                visited.add(node)
            continue
        parent = int(ev.parent)
        if parent == member:
            if ev.new:
                return True
            # the incoming node takes this drawing turn: it must be able to
            # draw min(k, deg) neighbors without discovering new nodes
            need = min(k, len(t_nbrs))
            if need > 0 and len(t_nbrs & visited) < need:
                return True
            continue
        for w in ev.drawn:
            w = int(w)
            if w == member:
                if entered:
                    return True
                if parent not in t_nbrs:
                    return True
                entered = True
                visited.add(nonmember)
            else:
                visited.add(w)
    return not entered


def check_swap_snowball(g: Graph, split: Split, member: int, nonmember: int,
                        hops: int = 1, verify: bool = True) -> SwapVerdict:
    """Swap verdict for a snowball split, combining the tuple comparison
    with a replay of the recorded traversal.

    With verify=True the split is first regenerated from its stored
    (params, seed) and compared, guarding against a stale or edited
    history.
    """
    if split.strategy != "snowball" or split.traversal is None:
        raise ValueError("split is not a snowball split with a traversal history")
    if verify:
        regen = snowball_split(
            g, int(split.train_nodes.size), split.params, split.rng_seed,
            initial_seeds=split.initial_seeds,
        )
        if regen.to_json() != split.to_json():
            raise ValueError("stored split does not match its (params, seed) regeneration")
    train_set = frozenset(int(v) for v in split.train_nodes)
    if member not in train_set:
        raise ValueError(f"node {member} is not a train (member) node")
    if nonmember in train_set or not 0 <= nonmember < g.node_count:
        raise ValueError(f"node {nonmember} is not a test (non-member) node")
    support_break = _replay_support_break(g, split, member, nonmember)
    witnesses = _tuple_witnesses(g, train_set, member, nonmember, hops)
    return SwapVerdict(
        compatible=not witnesses and not support_break,
        witnesses=witnesses,
        support_break=support_break,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo violation rate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ViolationRate:
    rate: float
    wilson_low: float
    wilson_high: float
    trials: int


def _wilson(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def violation_rate(g: Graph, strategy: str, params: SamplingParams, hops: int,
                   trials: int, seed: int) -> ViolationRate:
    """Monte-Carlo fraction of uniformly drawn (member, non-member) swaps
    judged incompatible, with a 95% Wilson interval.

    Trials cycle over min(5, trials) independently sampled splits; the
    pair is drawn uniformly per trial.
    """
    from .sampling import random_node_split

    if trials < 1:
        raise ValueError("trials must be >= 1")
    num_splits = min(5, trials)
    splits = []
    for i in range(num_splits):
        split_seed = int(np.random.default_rng([seed, 0x51, i]).integers(0, 2**63 - 1))
        if strategy == "random":
            splits.append(random_node_split(g, params.train_fraction, split_seed))
        elif strategy == "snowball":
            target = int(round(params.train_fraction * g.node_count))
            splits.append(snowball_split(g, target, params, split_seed))
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
    rng = np.random.default_rng([seed, 0x9A])
    bad = 0
    for i in range(trials):
        split = splits[i % num_splits]
        m = int(rng.choice(split.train_nodes))
        t = int(rng.choice(split.test_nodes))
        if strategy == "snowball":
            verdict = check_swap_snowball(g, split, m, t, hops, verify=False)
        else:
            verdict = check_swap(g, split, m, t, hops)
        if not verdict.compatible:
            bad += 1
    lo, hi = _wilson(bad, trials)
    return ViolationRate(rate=bad / trials, wilson_low=lo, wilson_high=hi, trials=trials)
