"""Deterministic audit framework for node-level membership-inference risk
in graph neural networks under different training-graph constructions and
inference-time edge-access regimes."""

from .analysis import (
    js_divergence,
    kl_divergence,
    logit_transform,
    performance_gap,
)
from .attack import build_attack_dataset, membership_advantage, train_attack
from .exchangeability import check_swap, check_swap_snowball, violation_rate
from .experiment import ExperimentConfig, run_experiment
from .graph import (
    DatasetMeta,
    Graph,
    average_degree,
    induced_subgraph,
    l_hop_neighborhood,
    label_homophily,
    load_graph,
    save_graph,
)
from .models import (
    GraphView,
    ModelConfig,
    Regime,
    TrainConfig,
    accuracy,
    build_view,
    forward,
    infer,
    train,
)
from .sampling import (
    SamplingParams,
    Split,
    empirical_degree_distribution,
    predicted_degree_distribution,
    random_node_split,
    snowball_split,
)

__version__ = "0.1.0"
