"""The membership-inference adversary.

Attack examples pair a node's posterior vector with its cross-entropy
loss; a small MLP scores membership and the advantage metric is the best
TPR - FPR over all decision thresholds. The adversary sees true
membership for 80% of members and non-members and predicts the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Adam, Tensor
from .models import PosteriorTable

__all__ = [
    "AttackConfig",
    "AttackExample",
    "AttackTrial",
    "AttackModel",
    "AdvantageReport",
    "build_attack_dataset",
    "make_trial",
    "train_attack",
    "membership_advantage",
]

MEMBER, NONMEMBER = 0, 1
LOSS_CLAMP = 50.0


@dataclass(frozen=True)
class AttackConfig:
    hidden_dim: int = 64
    learning_rate: float = 0.001
    epochs: int = 300
    weight_decay: float = 0.0
    train_share: float = 0.8
    balance: bool = True


@dataclass(frozen=True)
class AttackExample:
    """Feature vector [posterior || loss] with a membership label."""

    features: np.ndarray
    label: int
    node_id: int
    target_class: int


@dataclass(frozen=True)
class AttackTrial:
    train_examples: tuple[AttackExample, ...]
    eval_examples: tuple[AttackExample, ...]
    trial_seed: int


def build_attack_dataset(
    members: PosteriorTable,
    nonmembers: PosteriorTable,
    balance: bool,
    seed: int,
) -> list[AttackExample]:
    """Assemble examples from member and non-member posterior rows.

    With balance=True the non-member pool is subsampled uniformly to the
    member count. Losses are clamped to [0, 50] to keep the MLP stable on
    fully memorized nodes.
    """
    if members.node_ids.size == 0 or nonmembers.node_ids.size == 0:
        raise ValueError("attack dataset needs at least one member and one non-member")
    if balance and nonmembers.node_ids.size > members.node_ids.size:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(nonmembers.node_ids.size, members.node_ids.size, replace=False))
        nonmembers = PosteriorTable(
            node_ids=nonmembers.node_ids[keep],
            probs=nonmembers.probs[keep],
            losses=nonmembers.losses[keep],
            labels=nonmembers.labels[keep],
        )

    def rows(table: PosteriorTable, label: int) -> list[AttackExample]:
        out = []
        for i, v in enumerate(table.node_ids):
            loss = float(np.clip(table.losses[i], 0.0, LOSS_CLAMP))
            feats = np.concatenate([table.probs[i], [loss]])
            out.append(AttackExample(feats, label, int(v), int(table.labels[i])))
        return out

    return rows(members, MEMBER) + rows(nonmembers, NONMEMBER)


def make_trial(examples: list[AttackExample], trial_seed: int,
               train_share: float = 0.8) -> AttackTrial:
    """Split examples into the adversary's labelled 80% and held-out 20%.

    The split is applied to members and non-members separately and is
    stratified by the target node's class so tiny member pools do not end
    up label-skewed.
    """
    rng = np.random.default_rng(trial_seed)
    train: list[AttackExample] = []
    evaluation: list[AttackExample] = []
    for side in (MEMBER, NONMEMBER):
        pool = [e for e in examples if e.label == side]
        by_class: dict[int, list[AttackExample]] = {}
        for e in pool:
            by_class.setdefault(e.target_class, []).append(e)
        for cls in sorted(by_class):
            group = by_class[cls]
            perm = rng.permutation(len(group))
            cut = int(round(train_share * len(group)))
            train.extend(group[i] for i in perm[:cut])
            evaluation.extend(group[i] for i in perm[cut:])
    if not train or not evaluation:
        raise ValueError("trial split produced an empty train or eval side")
    return AttackTrial(tuple(train), tuple(evaluation), int(trial_seed))


@dataclass
class AttackModel:
    """2-layer ReLU MLP emitting a membership probability.

    The output layer starts at zero so an untrained model scores every
    input 0.5.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, seed: int) -> "AttackModel":
        rng = np.random.default_rng(seed)
        limit = np.sqrt(6.0 / (input_dim + hidden_dim))
        return cls(
            w1=rng.uniform(-limit, limit, size=(input_dim, hidden_dim)),
            b1=np.zeros(hidden_dim),
            w2=np.zeros((hidden_dim, 1)),
            b2=np.zeros(1),
        )

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Membership probabilities in [0, 1], one per row."""
        h = np.maximum(features @ self.w1 + self.b1, 0.0)
        z = (h @ self.w2 + self.b2)[:, 0]
        return 1.0 / (1.0 + np.exp(-z))


def _stack(examples) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([e.features for e in examples])
    # the MLP predicts membership probability, so members are the class-1 side
    y = np.array([1.0 if e.label == MEMBER else 0.0 for e in examples])
    return x, y


def train_attack(trial: AttackTrial, config: AttackConfig = AttackConfig()) -> AttackModel:
    """Fit the MLP on the trial's labelled side with full-batch Adam on
    binary cross-entropy."""
    x, y = _stack(trial.train_examples)
    model = AttackModel.init(x.shape[1], config.hidden_dim, trial.trial_seed)
    params = {
        "w1": Tensor(model.w1, requires_grad=True),
        "b1": Tensor(model.b1, requires_grad=True),
        "w2": Tensor(model.w2, requires_grad=True),
        "b2": Tensor(model.b2, requires_grad=True),
    }
    opt = Adam(list(params.values()), lr=config.learning_rate, weight_decay=config.weight_decay)
    xt = Tensor(x)
    yt = Tensor(y[:, None])
    for epoch in range(config.epochs):
        opt.zero_grad()
        h = (xt @ params["w1"] + params["b1"]).relu()
        z = h @ params["w2"] + params["b2"]
        # BCE with logits: mean(softplus(z) - y z)
        loss = (z.softplus() - yt * z).mean()
        if not np.isfinite(loss.data):
            raise RuntimeError(f"non-finite attack loss at epoch {epoch}")
        loss.backward()
        opt.step()
    model.w1 = params["w1"].data
    model.b1 = params["b1"].data
    model.w2 = params["w2"].data
    model.b2 = params["b2"].data
    return model


@dataclass(frozen=True)
class AdvantageReport:
    advantage: float
    best_threshold: float
    tpr_at_best: float
    fpr_at_best: float
    roc_points: tuple[tuple[float, float, float], ...] = field(repr=False)


def membership_advantage(scores, labels) -> AdvantageReport:
    """Best TPR - FPR over all thresholds of the rule ``score >= t``.

    Thresholds sweep every distinct score plus -inf/+inf sentinels; ties
    resolve to the smallest threshold attaining the maximum, so the
    advantage is always in [0, 1].
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    member_scores = scores[labels == MEMBER]
    nonmember_scores = scores[labels == NONMEMBER]
    if member_scores.size == 0 or nonmember_scores.size == 0:
        raise ValueError("need at least one member and one non-member score")

    thresholds = np.concatenate([[-np.inf], np.unique(scores), [np.inf]])
    points = []
    best = None
    for t in thresholds:
        tpr = float(np.mean(member_scores >= t))
        fpr = float(np.mean(nonmember_scores >= t))
        points.append((float(t), tpr, fpr))
        if best is None or tpr - fpr > best[0]:
            best = (tpr - fpr, float(t), tpr, fpr)
    return AdvantageReport(
        advantage=best[0],
        best_threshold=best[1],
        tpr_at_best=best[2],
        fpr_at_best=best[3],
        roc_points=tuple(points),
    )


def run_trial(examples: list[AttackExample], trial_seed: int,
              config: AttackConfig = AttackConfig()) -> AdvantageReport:
    """Train on one 80/20 trial split and score the held-out side."""
    trial = make_trial(examples, trial_seed, config.train_share)
    model = train_attack(trial, config)
    x, y = _stack(trial.eval_examples)
    scores = model.scores(x)
    labels = np.where(y > 0.5, MEMBER, NONMEMBER)
    return membership_advantage(scores, labels)
