"""Two-layer message passing models (GCN, GraphSAGE, GAT) and their
training and inference procedures.

Inference runs under one of three edge-access regimes that control which
edges of the underlying graph feed aggregation:

* ``orig``  -- train-internal plus test-internal edges, no crossing edges
* ``all``   -- every edge of the underlying graph
* ``none``  -- no edges; each node sees only its own features

Layers return pre-activation outputs; the forward pass wires them as
layer -> ReLU (-> dropout while training) -> layer -> softmax. All
arithmetic is float64 and deterministic for a fixed seed.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .autograd import Adam, Tensor
from .graph import Graph, induced_subgraph
from .metaio import read_csv, write_csv
from .sampling import Split

__all__ = [
    "Regime",
    "GraphView",
    "ModelConfig",
    "TrainConfig",
    "ModelParams",
    "PosteriorTable",
    "TrainingDivergedError",
    "build_view",
    "gcn_layer",
    "sage_layer",
    "gat_layer",
    "forward",
    "train",
    "infer",
    "accuracy",
    "gradient_check",
    "init_params",
    "save_params",
    "load_params",
    "params_digest",
    "write_posteriors",
    "read_posteriors",
]

LEAKY_SLOPE = 0.2
CHECKPOINT_MAGIC = b"GNNAUD01"


class Regime(str, Enum):
    ORIG = "orig"
    ALL_EDGES = "all"
    NO_GRAPH = "none"

    @classmethod
    def from_token(cls, token: str) -> "Regime":
        for r in cls:
            if r.value == token:
                return r
        raise ValueError(f"unknown regime {token!r}; expected orig, all or none")


@dataclass(frozen=True)
class GraphView:
    """A graph together with the edge set active for message passing."""

    base: Graph
    regime: Regime
    edges: np.ndarray

    @property
    def node_count(self) -> int:
        return self.base.node_count


def build_view(g: Graph, split: Split, regime: Regime) -> GraphView:
    if regime is Regime.ORIG:
        edges = np.concatenate([split.train_edges, split.test_edges], axis=0)
    elif regime is Regime.ALL_EDGES:
        edges = g.edges
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return GraphView(base=g, regime=regime, edges=np.asarray(edges, dtype=np.int64))


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "gcn"
    hidden_dim: int = 64
    num_layers: int = 2
    gat_heads: int = 8
    dropout: float = 0.5

    def __post_init__(self):
        if self.arch not in ("gcn", "sage", "gat"):
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.num_layers != 2:
            raise ValueError("only 2-layer models are supported")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.arch == "gat" and self.hidden_dim % self.gat_heads != 0:
            raise ValueError("hidden_dim must be divisible by gat_heads")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 200
    optimizer: str = "adam"
    init_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.optimizer != "adam":
            raise ValueError("only the adam optimizer is supported")


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss):
        super().__init__(f"non-finite training loss at epoch {epoch}: {loss}")
        self.epoch = epoch


@dataclass
class ModelParams:
    """Learned weights keyed by tensor name, in checkpoint order.

    GCN layers hold ``layer{i}.W``; GraphSAGE layers hold
    ``layer{i}.W_self`` and ``layer{i}.W_neigh``; GAT layers hold
    ``layer{i}.head{p}.W`` and ``layer{i}.head{p}.a`` per attention head.
    """

    config: ModelConfig
    feature_dim: int
    num_classes: int
    init_seed: int
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "ModelParams":
        return ModelParams(
            config=self.config,
            feature_dim=self.feature_dim,
            num_classes=self.num_classes,
            init_seed=self.init_seed,
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _layer_plan(config: ModelConfig, feature_dim: int, num_classes: int):
    """Per-layer (in_dim, out_dim, heads) sizes; GAT splits the hidden
    width across heads and uses a single-head output layer."""
    if config.arch == "gat":
        head_dim = config.hidden_dim // config.gat_heads
        return [
            (feature_dim, head_dim, config.gat_heads),
            (config.hidden_dim, num_classes, 1),
        ]
    return [(feature_dim, config.hidden_dim, 1), (config.hidden_dim, num_classes, 1)]


def init_params(
    config: ModelConfig, feature_dim: int, num_classes: int, seed: int
) -> ModelParams:
    """Glorot-uniform initialization, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for i, (d_in, d_out, heads) in enumerate(_layer_plan(config, feature_dim, num_classes)):
        if config.arch == "gcn":
            tensors[f"layer{i}.W"] = _glorot(rng, d_in, d_out, (d_in, d_out))
        elif config.arch == "sage":
            tensors[f"layer{i}.W_self"] = _glorot(rng, d_in, d_out, (d_in, d_out))
            tensors[f"layer{i}.W_neigh"] = _glorot(rng, d_in, d_out, (d_in, d_out))
        else:
            for p in range(heads):
                tensors[f"layer{i}.head{p}.W"] = _glorot(rng, d_in, d_out, (d_in, d_out))
                tensors[f"layer{i}.head{p}.a"] = _glorot(rng, 2 * d_out, 1, (2 * d_out, 1))
    return ModelParams(
        config=config,
        feature_dim=feature_dim,
        num_classes=num_classes,
        init_seed=int(seed),
        tensors=tensors,
    )


# ---------------------------------------------------------------------------
# layer math (tensor level, shared by training and inference)
# ---------------------------------------------------------------------------


def _directed(edges: np.ndarray, n: int, with_self: bool):
    if edges.size:
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
    else:
        src = np.zeros(0, dtype=np.int64)
        dst = np.zeros(0, dtype=np.int64)
    if with_self:
        loop = np.arange(n, dtype=np.int64)
        src = np.concatenate([src, loop])
        dst = np.concatenate([dst, loop])
    return src, dst


def _gcn_layer_t(x: Tensor, edges: np.ndarray, n: int, w: Tensor) -> Tensor:
    src, dst = _directed(edges, n, with_self=True)
    deg = np.bincount(dst, minlength=n).astype(np.float64)
    coef = 1.0 / np.sqrt(deg[src] * deg[dst])
    msg = x.rows(src) * Tensor(coef[:, None])
    return msg.segment_sum(dst, n) @ w


def _sage_layer_t(x: Tensor, edges: np.ndarray, n: int, w_self: Tensor, w_neigh: Tensor) -> Tensor:
    src, dst = _directed(edges, n, with_self=False)
    deg = np.bincount(dst, minlength=n).astype(np.float64)
    inv = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
    mean_nbr = x.rows(src).segment_sum(dst, n) * Tensor(inv[:, None])
    return x @ w_self + mean_nbr @ w_neigh


def _gat_head_t(x: Tensor, src, dst, n: int, w: Tensor, a: Tensor) -> Tensor:
    h = x @ w
    h_src = h.rows(src)
    h_dst = h.rows(dst)
    scores = Tensor.concat([h_dst, h_src]).matmul(a).leaky_relu(LEAKY_SLOPE)
    # per-destination max subtraction keeps the softmax finite; the shift
    # is constant per segment so gradients are unaffected
    seg_max = np.full(n, -np.inf)
    np.maximum.at(seg_max, dst, scores.data[:, 0])
    shifted = scores - Tensor(seg_max[dst][:, None])
    ex = shifted.exp()
    denom = ex.segment_sum(dst, n)
    alpha = ex / denom.rows(dst)
    return (alpha * h_src).segment_sum(dst, n)


def _gat_layer_t(x: Tensor, edges: np.ndarray, n: int, heads: list[tuple[Tensor, Tensor]]) -> Tensor:
    src, dst = _directed(edges, n, with_self=True)
    outs = [_gat_head_t(x, src, dst, n, w, a) for w, a in heads]
    return outs[0] if len(outs) == 1 else Tensor.concat(outs)


def _layer_t(params_t: dict[str, Tensor], config: ModelConfig, i: int,
             x: Tensor, edges: np.ndarray, n: int) -> Tensor:
    if config.arch == "gcn":
        return _gcn_layer_t(x, edges, n, params_t[f"layer{i}.W"])
    if config.arch == "sage":
        return _sage_layer_t(x, edges, n, params_t[f"layer{i}.W_self"], params_t[f"layer{i}.W_neigh"])
    heads = []
    p = 0
    while f"layer{i}.head{p}.W" in params_t:
        heads.append((params_t[f"layer{i}.head{p}.W"], params_t[f"layer{i}.head{p}.a"]))
        p += 1
    return _gat_layer_t(x, edges, n, heads)


def _forward_t(params_t: dict[str, Tensor], config: ModelConfig, edges: np.ndarray,
               x: Tensor, n: int, dropout_rng: np.random.Generator | None = None) -> Tensor:
    """Logits for all n nodes. Dropout is applied only when a generator
    is passed (training mode)."""
    h = _layer_t(params_t, config, 0, x, edges, n).relu()
    if dropout_rng is not None and config.dropout > 0.0:
        keep = 1.0 - config.dropout
        mask = (dropout_rng.random(h.data.shape) < keep) / keep
        h = h * Tensor(mask)
    return _layer_t(params_t, config, 1, h, edges, n)


# ---------------------------------------------------------------------------
# public layer operations (numpy in / numpy out)
# ---------------------------------------------------------------------------


def gcn_layer(x: np.ndarray, view: GraphView, w: np.ndarray) -> np.ndarray:
    """Degree-normalized aggregation with implicit self-loops:
    z_i = W sum_{j in N(i) + i} x_j / sqrt(d_i d_j)."""
    return _gcn_layer_t(Tensor(x), view.edges, view.node_count, Tensor(w)).data


def sage_layer(x: np.ndarray, view: GraphView, w_self: np.ndarray, w_neigh: np.ndarray) -> np.ndarray:
    """z_i = W_self x_i + W_neigh mean_{j in N(i)} x_j, with the mean over
    an empty neighborhood defined as the zero vector."""
    return _sage_layer_t(Tensor(x), view.edges, view.node_count, Tensor(w_self), Tensor(w_neigh)).data


def gat_layer(x: np.ndarray, view: GraphView, heads: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Attention-weighted aggregation over N(i) + i, heads concatenated.

    Per head, e_ij = LeakyReLU(a . [W x_i || W x_j]) and the attention
    row alpha_i softmaxes over the node's in-view neighbors plus itself.
    """
    t_heads = [(Tensor(w), Tensor(a)) for w, a in heads]
    return _gat_layer_t(Tensor(x), view.edges, view.node_count, t_heads).data


def gat_attention(x: np.ndarray, view: GraphView, w: np.ndarray, a: np.ndarray):
    """Attention coefficients of one head as (src, dst, alpha) arrays."""
    n = view.node_count
    src, dst = _directed(view.edges, n, with_self=True)
    h = x @ w
    scores = np.concatenate([h[dst], h[src]], axis=1) @ a
    scores = np.where(scores > 0, scores, LEAKY_SLOPE * scores)[:, 0]
    seg_max = np.full(n, -np.inf)
    np.maximum.at(seg_max, dst, scores)
    ex = np.exp(scores - seg_max[dst])
    denom = np.zeros(n)
    np.add.at(denom, dst, ex)
    return src, dst, ex / denom[dst]


# ---------------------------------------------------------------------------
# posteriors, training, inference
# ---------------------------------------------------------------------------


@dataclass
class PosteriorTable:
    """Per-node class probabilities and cross-entropy losses."""

    node_ids: np.ndarray
    probs: np.ndarray
    losses: np.ndarray
    labels: np.ndarray

    @property
    def num_classes(self) -> int:
        return int(self.probs.shape[1])

    def predictions(self) -> np.ndarray:
        return self.probs.argmax(axis=1)

    def subset(self, nodes) -> "PosteriorTable":
        pos = {int(v): i for i, v in enumerate(self.node_ids)}
        idx = np.array([pos[int(v)] for v in nodes], dtype=np.int64)
        return PosteriorTable(
            node_ids=self.node_ids[idx],
            probs=self.probs[idx],
            losses=self.losses[idx],
            labels=self.labels[idx],
        )


def _posteriors_from_logits(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = logits - logits.max(axis=1, keepdims=True)
    lp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    probs = np.exp(lp)
    probs /= probs.sum(axis=1, keepdims=True)
    losses = -lp[np.arange(logits.shape[0]), labels]
    return probs, losses


def forward(params: ModelParams, view: GraphView, features: np.ndarray | None = None) -> PosteriorTable:
    """Evaluation-mode posteriors and losses for every node in the view."""
    g = view.base
    x = g.features if features is None else features
    params_t = {k: Tensor(v) for k, v in params.tensors.items()}
    logits = _forward_t(params_t, params.config, view.edges, Tensor(x), view.node_count)
    probs, losses = _posteriors_from_logits(logits.data, g.labels)
    return PosteriorTable(
        node_ids=np.arange(view.node_count, dtype=np.int64),
        probs=probs,
        losses=losses,
        labels=g.labels.copy(),
    )


def _training_loss(params_t, config, edges, x, labels, n, dropout_rng=None) -> Tensor:
    logits = _forward_t(params_t, config, edges, x, n, dropout_rng)
    return -(logits.log_softmax().take_per_row(labels).mean())


def train(g: Graph, split: Split, mconfig: ModelConfig, tconfig: TrainConfig) -> ModelParams:
    """Full-batch training on the induced train graph.

    Only the split's train nodes and train-internal edges take part; test
    nodes and crossing edges are never read.
    """
    sub, _ = induced_subgraph(g, split.train_nodes)
    params = init_params(mconfig, g.feature_dim, g.num_classes, tconfig.init_seed)
    params_t = {k: Tensor(v.copy(), requires_grad=True) for k, v in params.tensors.items()}
    opt = Adam(list(params_t.values()), lr=tconfig.learning_rate, weight_decay=tconfig.weight_decay)
    dropout_rng = np.random.default_rng([tconfig.init_seed, 0xD0])
    x = Tensor(sub.features)
    for epoch in range(tconfig.epochs):
        opt.zero_grad()
        loss = _training_loss(
            params_t, mconfig, sub.edges, x, sub.labels, sub.node_count, dropout_rng
        )
        if not np.isfinite(loss.data):
            raise TrainingDivergedError(epoch, float(loss.data))
        loss.backward()
        opt.step()
    params.tensors = {k: t.data.copy() for k, t in params_t.items()}
    return params


def infer(params: ModelParams, g: Graph, split: Split, regime: Regime) -> PosteriorTable:
    """Posteriors for all nodes with frozen parameters under a regime."""
    return forward(params, build_view(g, split, regime))


def accuracy(table: PosteriorTable, nodes) -> float:
    sub = table.subset(nodes)
    return float(np.mean(sub.predictions() == sub.labels))


def gradient_check(mconfig: ModelConfig, view: GraphView, probe_seed: int,
                   fd_step: float = 1e-5) -> float:
    """Max relative error between backprop gradients of the training loss
    and central finite differences, over every parameter entry."""
    g = view.base
    params = init_params(mconfig, g.feature_dim, g.num_classes, probe_seed)
    x = Tensor(g.features)

    params_t = {k: Tensor(v.copy(), requires_grad=True) for k, v in params.tensors.items()}
    loss = _training_loss(params_t, mconfig, view.edges, x, g.labels, g.node_count)
    loss.backward()
    analytic = {k: t.grad.copy() for k, t in params_t.items()}

    def loss_at(tensors: dict[str, np.ndarray]) -> float:
        pt = {k: Tensor(v) for k, v in tensors.items()}
        return float(_training_loss(pt, mconfig, view.edges, x, g.labels, g.node_count).data)

    worst = 0.0
    work = {k: v.copy() for k, v in params.tensors.items()}
    for name, arr in work.items():
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + fd_step
            up = loss_at(work)
            flat[i] = orig - fd_step
            down = loss_at(work)
            flat[i] = orig
            fd = (up - down) / (2.0 * fd_step)
            an = analytic[name].reshape(-1)[i]
            rel = abs(an - fd) / max(1e-6, abs(an) + abs(fd))
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# checkpoint and posterior files
# ---------------------------------------------------------------------------


def _checkpoint_bytes(params: ModelParams) -> bytes:
    header = {
        "arch": params.config.arch,
        "hidden_dim": params.config.hidden_dim,
        "num_layers": params.config.num_layers,
        "gat_heads": params.config.gat_heads,
        "dropout": params.config.dropout,
        "feature_dim": params.feature_dim,
        "num_classes": params.num_classes,
        "init_seed": params.init_seed,
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in params.tensors.items()],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", len(blob)), blob]
    for v in params.tensors.values():
        parts.append(np.ascontiguousarray(v, dtype="<f8").tobytes())
    return b"".join(parts)


def save_params(params: ModelParams, path: str | Path) -> None:
    Path(path).write_bytes(_checkpoint_bytes(params))


def load_params(path: str | Path) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a model checkpoint")
    off = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    header = json.loads(raw[off : off + hlen])
    off += hlen
    config = ModelConfig(
        arch=header["arch"],
        hidden_dim=header["hidden_dim"],
        num_layers=header["num_layers"],
        gat_heads=header["gat_heads"],
        dropout=header["dropout"],
    )
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape)
        tensors[entry["name"]] = arr.astype(np.float64)
        off += count * 8
    return ModelParams(
        config=config,
        feature_dim=header["feature_dim"],
        num_classes=header["num_classes"],
        init_seed=header["init_seed"],
        tensors=tensors,
    )


def params_digest(params: ModelParams) -> str:
    return hashlib.sha256(_checkpoint_bytes(params)).hexdigest()[:12]


def write_posteriors(table: PosteriorTable, member_mask: np.ndarray,
                     path: str | Path, meta: dict | None = None) -> None:
    cols = ["node_id", "label", "member_flag", "loss"]
    cols += [f"p_{j}" for j in range(table.num_classes)]
    rows = []
    for i, v in enumerate(table.node_ids):
        row = [int(v), int(table.labels[i]), int(bool(member_mask[i])), float(table.losses[i])]
        row += [float(p) for p in table.probs[i]]
        rows.append(row)
    write_csv(path, cols, rows, meta)


def read_posteriors(path: str | Path) -> tuple[PosteriorTable, np.ndarray, dict]:
    meta, header, rows = read_csv(path)
    c = len([h for h in header if h.startswith("p_")])
    node_ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    labels = np.array([int(r[1]) for r in rows], dtype=np.int64)
    member = np.array([bool(int(r[2])) for r in rows])
    losses = np.array([float(r[3]) for r in rows])
    probs = np.array([[float(x) for x in r[4 : 4 + c]] for r in rows])
    table = PosteriorTable(node_ids=node_ids, probs=probs, losses=losses, labels=labels)
    return table, member, meta
