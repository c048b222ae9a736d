"""End-to-end audit pipeline: sample, train, infer, attack, aggregate.

Every stage is a pure function of its recorded seeds, and every artifact
lands under a name derived from the inputs that produced it, so a rerun
with the same configuration reuses what exists and reproduces identical
bytes. Cells (strategy x fraction x split x arch jobs) are independent;
results are merged in canonical order regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .attack import AttackConfig, build_attack_dataset, run_trial
from .graph import Graph, load_graph
from .metaio import read_csv, write_csv
from .models import (
    ModelConfig,
    Regime,
    TrainConfig,
    accuracy,
    infer,
    load_params,
    params_digest,
    read_posteriors,
    save_params,
    train,
    write_posteriors,
)
from .sampling import SamplingParams, Split, random_node_split, snowball_split

__all__ = [
    "FORMAT_VERSION",
    "ExperimentConfig",
    "AuditRecord",
    "RunReport",
    "derive_seed",
    "enumerate_cells",
    "run_experiment",
    "render_tables",
    "write_records",
    "read_records",
]

FORMAT_VERSION = "1"
WORKERS_ENV = "GNNAUDIT_WORKERS"

RECORD_COLUMNS = [
    "dataset", "strategy", "fraction", "split_id", "arch", "regime", "trial_id",
    "train_acc", "test_acc", "gap_percent", "advantage",
    "hyper_digest", "split_seed", "init_seed", "trial_seed",
]

_REGIME_ORDER = ("orig", "all", "none")
_STRATEGY_ORDER = ("random", "snowball")
_ARCH_ORDER = ("gcn", "sage", "gat")


def derive_seed(base_seed: int, *labels) -> int:
    """Deterministic 63-bit seed for a named pipeline stage.

    The digest of "base:label:label:..." decouples stages and cells from
    one another while keeping each reproducible in isolation.
    """
    text = ":".join([str(int(base_seed))] + [str(x) for x in labels])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


def _digest(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()[:12]


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    strategies: tuple[str, ...] = ("random", "snowball")
    fractions: tuple[float, ...] = (0.10, 0.50)
    archs: tuple[str, ...] = ("gcn", "sage", "gat")
    regimes: tuple[str, ...] = ("orig", "all", "none")
    num_splits: int = 5
    attack_trials: int = 3
    base_seed: int = 0
    sampling_k: int = 3
    seeds_per_class: int = 10
    hidden_dim: int = 64
    gat_heads: int = 8
    dropout: float = 0.5
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 200
    attack_hidden_dim: int = 64
    attack_learning_rate: float = 0.001
    attack_epochs: int = 300
    attack_balance: bool = True

    def __post_init__(self):
        for name in ("strategies", "fractions", "archs", "regimes"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        for s in self.strategies:
            if s not in _STRATEGY_ORDER:
                raise ValueError(f"unknown strategy {s!r}")
        for a in self.archs:
            if a not in _ARCH_ORDER:
                raise ValueError(f"unknown architecture {a!r}")
        for r in self.regimes:
            Regime.from_token(r)
        for f in self.fractions:
            if not 0.0 < f < 1.0:
                raise ValueError(f"fraction {f} outside (0, 1)")
        if self.num_splits < 1 or self.attack_trials < 1:
            raise ValueError("num_splits and attack_trials must be >= 1")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        doc.pop("format_version", None)
        for key in ("strategies", "fractions", "archs", "regimes"):
            if key in doc:
                doc[key] = tuple(doc[key])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ValueError(f"bad config: {exc}") from exc

    def resolved(self) -> dict:
        doc = asdict(self)
        for key in ("strategies", "fractions", "archs", "regimes"):
            doc[key] = list(doc[key])
        doc["format_version"] = FORMAT_VERSION
        return doc

    def model_config(self, arch: str) -> ModelConfig:
        return ModelConfig(
            arch=arch,
            hidden_dim=self.hidden_dim,
            gat_heads=self.gat_heads,
            dropout=self.dropout,
        )

    def train_config(self, init_seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            init_seed=init_seed,
        )

    def attack_config(self) -> AttackConfig:
        return AttackConfig(
            hidden_dim=self.attack_hidden_dim,
            learning_rate=self.attack_learning_rate,
            epochs=self.attack_epochs,
            balance=self.attack_balance,
        )

    def sampling_params(self, fraction: float) -> SamplingParams:
        return SamplingParams(
            train_fraction=fraction, k=self.sampling_k, seeds_per_class=self.seeds_per_class
        )

    def hyper_digest(self) -> str:
        doc = self.resolved()
        doc.pop("dataset")
        return _digest(doc)


@dataclass(frozen=True)
class AuditRecord:
    dataset: str
    strategy: str
    fraction: float
    split_id: int
    arch: str
    regime: str
    trial_id: int
    train_acc: float
    test_acc: float
    gap_percent: float
    advantage: float
    hyper_digest: str = ""
    split_seed: int = 0
    init_seed: int = 0
    trial_seed: int = 0


@dataclass
class RunReport:
    out_dir: Path
    records: list[AuditRecord]
    failures: list[dict] = field(default_factory=list)
    trends: dict = field(default_factory=dict)


def enumerate_cells(config: ExperimentConfig):
    """Canonical (strategy, fraction, split_id, arch) job order."""
    cells = []
    for strategy in config.strategies:
        for fraction in config.fractions:
            for split_id in range(config.num_splits):
                for arch in config.archs:
                    cells.append((strategy, fraction, split_id, arch))
    return cells


# ---------------------------------------------------------------------------
# staged artifact helpers
# ---------------------------------------------------------------------------


def _frac_label(fraction: float) -> str:
    return repr(float(fraction))


def _split_path(out_dir: Path, config: ExperimentConfig, name: str,
                strategy: str, fraction: float, split_id: int) -> tuple[Path, int]:
    seed = derive_seed(config.base_seed, "split", name, strategy, _frac_label(fraction), split_id)
    address = _digest({
        "dataset": name, "strategy": strategy, "fraction": _frac_label(fraction),
        "split_id": split_id, "k": config.sampling_k,
        "seeds_per_class": config.seeds_per_class, "seed": seed,
    })
    fname = f"{name}-{strategy}-{_frac_label(fraction)}-{split_id}-{address}.json"
    return out_dir / "splits" / fname, seed


def ensure_split(g: Graph, config: ExperimentConfig, out_dir: Path, name: str,
                 strategy: str, fraction: float, split_id: int) -> tuple[Split, int, Path]:
    path, seed = _split_path(out_dir, config, name, strategy, fraction, split_id)
    if path.exists():
        return Split.load(path), seed, path
    params = config.sampling_params(fraction)
    if strategy == "random":
        split = random_node_split(g, fraction, seed)
    else:
        target = int(round(fraction * g.node_count))
        split = snowball_split(g, target, params, seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    split.save(path)
    return split, seed, path


def ensure_model(g: Graph, split: Split, config: ExperimentConfig, out_dir: Path,
                 name: str, strategy: str, fraction: float, split_id: int, arch: str):
    init_seed = derive_seed(
        config.base_seed, "train", name, strategy, _frac_label(fraction), split_id, arch
    )
    address = _digest({
        "dataset": name, "strategy": strategy, "fraction": _frac_label(fraction),
        "split_id": split_id, "arch": arch, "init_seed": init_seed,
        "hyper": config.hyper_digest(),
    })
    path = out_dir / "models" / f"{name}-{strategy}-{_frac_label(fraction)}-{split_id}-{arch}-{address}.bin"
    if path.exists():
        return load_params(path), init_seed, path
    params = train(g, split, config.model_config(arch), config.train_config(init_seed))
    path.parent.mkdir(parents=True, exist_ok=True)
    save_params(params, path)
    return params, init_seed, path


def ensure_posteriors(g: Graph, split: Split, params, config: ExperimentConfig,
                      out_dir: Path, name: str, strategy: str, fraction: float,
                      split_id: int, arch: str, regime_token: str, seeds: dict):
    address = _digest({
        "model": params_digest(params), "regime": regime_token,
    })
    path = (out_dir / "posteriors" /
            f"{name}-{strategy}-{_frac_label(fraction)}-{split_id}-{arch}-{regime_token}-{address}.csv")
    if path.exists():
        table, member, _ = read_posteriors(path)
        return table, member, path
    table = infer(params, g, split, Regime.from_token(regime_token))
    member = split.train_mask()
    meta = {
        "dataset": name, "strategy": strategy, "fraction": fraction,
        "split_id": split_id, "arch": arch, "regime": regime_token,
        "model_digest": params_digest(params), **seeds,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    write_posteriors(table, member, path, meta)
    return table, member, path


# ---------------------------------------------------------------------------
# cells
# ---------------------------------------------------------------------------


def _run_cell(g: Graph, config: ExperimentConfig, out_dir: Path, name: str, cell):
    strategy, fraction, split_id, arch = cell
    cell_address = _digest({
        "dataset": name, "strategy": strategy, "fraction": _frac_label(fraction),
        "split_id": split_id, "arch": arch, "hyper": config.hyper_digest(),
        "regimes": list(config.regimes), "trials": config.attack_trials,
        "base_seed": config.base_seed,
    })
    cell_path = (out_dir / "attacks" /
                 f"{name}-{strategy}-{_frac_label(fraction)}-{split_id}-{arch}-{cell_address}.csv")
    if cell_path.exists():
        return read_records(cell_path)
    split, split_seed, _ = ensure_split(g, config, out_dir, name, strategy, fraction, split_id)
    params, init_seed, _ = ensure_model(
        g, split, config, out_dir, name, strategy, fraction, split_id, arch
    )
    records: list[AuditRecord] = []
    for regime_token in config.regimes:
        table, member, _ = ensure_posteriors(
            g, split, params, config, out_dir, name, strategy, fraction,
            split_id, arch, regime_token,
            {"split_seed": split_seed, "init_seed": init_seed},
        )
        train_acc = accuracy(table, split.train_nodes)
        test_acc = accuracy(table, split.test_nodes)
        gap = analysis.performance_gap(train_acc, test_acc)
        members = table.subset(split.train_nodes)
        nonmembers = table.subset(split.test_nodes)
        balance_seed = derive_seed(
            config.base_seed, "balance", name, strategy, _frac_label(fraction),
            split_id, arch, regime_token,
        )
        examples = build_attack_dataset(
            members, nonmembers, config.attack_balance, balance_seed
        )
        for trial_id in range(config.attack_trials):
            trial_seed = derive_seed(
                config.base_seed, "attack", name, strategy, _frac_label(fraction),
                split_id, arch, regime_token, trial_id,
            )
            report = run_trial(examples, trial_seed, config.attack_config())
            records.append(AuditRecord(
                dataset=name, strategy=strategy, fraction=fraction,
                split_id=split_id, arch=arch, regime=regime_token,
                trial_id=trial_id, train_acc=train_acc, test_acc=test_acc,
                gap_percent=gap, advantage=report.advantage,
                hyper_digest=config.hyper_digest(),
                split_seed=split_seed, init_seed=init_seed, trial_seed=trial_seed,
            ))
    cell_path.parent.mkdir(parents=True, exist_ok=True)
    write_records(records, cell_path)
    return records


def _cell_worker(args):
    g, config, out_dir, name, cell = args
    try:
        return cell, _run_cell(g, config, out_dir, name, cell), None
    except Exception as exc:  # noqa: BLE001 - cell failures are reported, not fatal
        return cell, [], f"{type(exc).__name__}: {exc}"


def run_experiment(config: ExperimentConfig, out_dir: str | Path) -> RunReport:
    """Execute every cell of the configuration and write the report.

    Existing artifacts are reused, so rerunning a completed directory is
    a no-op that regenerates identical report bytes. Cell failures are
    collected in the report instead of aborting the run.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_path = out_dir / "config.json"
    resolved = json.dumps(config.resolved(), indent=2, sort_keys=True) + "\n"
    if config_path.exists() and config_path.read_text() != resolved:
        raise ValueError(f"{config_path} holds a different configuration")
    config_path.write_text(resolved)

    g = load_graph(config.dataset)
    name = json.loads((Path(config.dataset) / "meta.json").read_text())["name"]

    cells = enumerate_cells(config)
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    results: dict = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell, records, error in pool.map(
                _cell_worker, [(g, config, out_dir, name, c) for c in cells]
            ):
                results[cell] = (records, error)
    else:
        for cell in cells:
            results[cell] = _cell_worker((g, config, out_dir, name, cell))[1:]

    records: list[AuditRecord] = []
    failures: list[dict] = []
    for cell in cells:  # canonical merge order
        cell_records, error = results[cell]
        if error is not None:
            failures.append({"cell": list(cell), "error": error})
        records.extend(cell_records)

    write_records(records, out_dir / "records.csv")
    (out_dir / "tables.txt").write_text(render_tables(records))
    trends = evaluate_trends(records)
    report = {
        "format_version": FORMAT_VERSION,
        "config": config.resolved(),
        "record_count": len(records),
        "failures": failures,
        "trends": trends,
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return RunReport(out_dir=out_dir, records=records, failures=failures, trends=trends)


# ---------------------------------------------------------------------------
# records and tables
# ---------------------------------------------------------------------------


def write_records(records: list[AuditRecord], path: str | Path) -> None:
    rows = [[getattr(r, c) for c in RECORD_COLUMNS] for r in records]
    write_csv(path, RECORD_COLUMNS, rows, meta={"format_version": FORMAT_VERSION})


def read_records(path: str | Path) -> list[AuditRecord]:
    _, header, rows = read_csv(path)
    if header != RECORD_COLUMNS:
        raise ValueError(f"unexpected records header in {path}")
    out = []
    for r in rows:
        d = dict(zip(header, r))
        out.append(AuditRecord(
            dataset=d["dataset"], strategy=d["strategy"], fraction=float(d["fraction"]),
            split_id=int(d["split_id"]), arch=d["arch"], regime=d["regime"],
            trial_id=int(d["trial_id"]), train_acc=float(d["train_acc"]),
            test_acc=float(d["test_acc"]), gap_percent=float(d["gap_percent"]),
            advantage=float(d["advantage"]), hyper_digest=d["hyper_digest"],
            split_seed=int(d["split_seed"]), init_seed=int(d["init_seed"]),
            trial_seed=int(d["trial_seed"]),
        ))
    return out


_REGIME_TITLE = {"orig": "Orig", "all": "All", "none": "None"}
_METRICS = [
    ("Train Acc", lambda r: r.train_acc),
    ("Test Acc", lambda r: r.test_acc),
    ("Gap %", lambda r: r.gap_percent),
    ("Advantage", lambda r: r.advantage),
]


def render_tables(records: list[AuditRecord]) -> str:
    """Appendix-style mean +/- std tables, one block per dataset and
    train fraction, with strategy/regime column groups."""
    if not records:
        raise ValueError("no records to render")
    blocks = []
    keys = sorted({(r.dataset, r.fraction) for r in records})
    for dataset, fraction in keys:
        subset = [r for r in records if r.dataset == dataset and r.fraction == fraction]
        strategies = [s for s in _STRATEGY_ORDER if any(r.strategy == s for r in subset)]
        regimes = [t for t in _REGIME_ORDER if any(r.regime == t for r in subset)]
        archs = [a for a in _ARCH_ORDER if any(r.arch == a for r in subset)]
        columns = [(s, t) for s in strategies for t in regimes]
        header = ["Model", "Metric"] + [
            f"{s.capitalize()}/{_REGIME_TITLE[t]}" for s, t in columns
        ]
        rows = [header]
        for arch in archs:
            for metric_name, metric_fn in _METRICS:
                row = [arch.upper(), metric_name]
                for s, t in columns:
                    vals = [
                        metric_fn(r) for r in subset
                        if r.arch == arch and r.strategy == s and r.regime == t
                    ]
                    if vals:
                        arr = np.asarray(vals)
                        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
                        row.append(f"{arr.mean():.4f} ± {std:.4f}")
                    else:
                        row.append("-")
                rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = [f"=== {dataset} | train fraction {fraction:g} ==="]
        for r in rows:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def evaluate_trends(records: list[AuditRecord]) -> dict:
    """Directional observations reported as flags, never as failures.

    Checks whether full-edge inference lowers the mean membership
    advantage below the original split, and whether the performance gap
    shrinks when the train fraction grows.
    """
    trends: dict = {"ma_all_below_orig": [], "gap_shrinks_with_size": []}
    by = {}
    for r in records:
        by.setdefault((r.dataset, r.fraction, r.arch, r.strategy, r.regime), []).append(r)

    def mean_of(key, fn):
        return float(np.mean([fn(r) for r in by[key]]))

    datasets = sorted({r.dataset for r in records})
    for dataset in datasets:
        fractions = sorted({r.fraction for r in records if r.dataset == dataset})
        archs = sorted({r.arch for r in records if r.dataset == dataset})
        strategies = sorted({r.strategy for r in records if r.dataset == dataset})
        for fraction in fractions:
            for arch in archs:
                for strategy in strategies:
                    k_all = (dataset, fraction, arch, strategy, "all")
                    k_orig = (dataset, fraction, arch, strategy, "orig")
                    if k_all in by and k_orig in by:
                        ma_all = mean_of(k_all, lambda r: r.advantage)
                        ma_orig = mean_of(k_orig, lambda r: r.advantage)
                        trends["ma_all_below_orig"].append({
                            "dataset": dataset, "fraction": fraction, "arch": arch,
                            "strategy": strategy, "ma_all": ma_all, "ma_orig": ma_orig,
                            "holds": bool(ma_all < ma_orig),
                        })
        if len(fractions) >= 2:
            lo, hi = min(fractions), max(fractions)
            for arch in archs:
                for strategy in strategies:
                    for regime in _REGIME_ORDER:
                        k_lo = (dataset, lo, arch, strategy, regime)
                        k_hi = (dataset, hi, arch, strategy, regime)
                        if k_lo in by and k_hi in by:
                            g_lo = mean_of(k_lo, lambda r: r.gap_percent)
                            g_hi = mean_of(k_hi, lambda r: r.gap_percent)
                            trends["gap_shrinks_with_size"].append({
                                "dataset": dataset, "arch": arch, "strategy": strategy,
                                "regime": regime, "gap_small_fraction": g_lo,
                                "gap_large_fraction": g_hi, "holds": bool(g_hi <= g_lo),
                            })
    return trends
