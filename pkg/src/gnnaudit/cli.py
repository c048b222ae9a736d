"""Command line interface.

Verbs: sample, train, infer, attack, analyze, exchangeability, run,
report. Exit codes: 0 success, 1 configuration error, 2 partial failure.
The worker pool width of `run` is controlled only by GNNAUDIT_WORKERS.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .attack import build_attack_dataset, run_trial
from .exchangeability import check_swap, check_swap_snowball
from .experiment import (
    ExperimentConfig,
    derive_seed,
    read_records,
    render_tables,
    run_experiment,
)
from .graph import load_graph
from .metaio import write_csv
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


def _dataset_name(path: str) -> str:
    return json.loads((Path(path) / "meta.json").read_text())["name"]


def cmd_sample(args) -> int:
    g = load_graph(args.dataset)
    name = _dataset_name(args.dataset)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = SamplingParams(
        train_fraction=args.fraction, k=args.k, seeds_per_class=args.seeds_per_class
    )
    for i in range(args.num_splits):
        seed = derive_seed(args.seed, "split", name, args.strategy, repr(args.fraction), i)
        if args.strategy == "random":
            split = random_node_split(g, args.fraction, seed)
        else:
            target = int(round(args.fraction * g.node_count))
            split = snowball_split(g, target, params, seed)
        path = out_dir / f"{name}-{args.strategy}-{args.fraction}-{i}.json"
        split.save(path)
        print(f"wrote {path} ({split.train_nodes.size} train nodes)")
    return 0


def cmd_train(args) -> int:
    g = load_graph(args.dataset)
    split = Split.load(args.split)
    mconfig = ModelConfig(
        arch=args.arch, hidden_dim=args.hidden_dim,
        gat_heads=args.heads, dropout=args.dropout,
    )
    tconfig = TrainConfig(
        learning_rate=args.lr, weight_decay=args.weight_decay,
        epochs=args.epochs, init_seed=args.seed,
    )
    params = train(g, split, mconfig, tconfig)
    save_params(params, args.out)
    print(f"wrote {args.out} (digest {params_digest(params)})")
    return 0


def cmd_infer(args) -> int:
    g = load_graph(args.dataset)
    split = Split.load(args.split)
    params = load_params(args.model)
    regime = Regime.from_token(args.regime)
    table = infer(params, g, split, regime)
    meta = {
        "dataset": _dataset_name(args.dataset),
        "strategy": split.strategy,
        "fraction": split.params.train_fraction,
        "split_id": args.split_id,
        "arch": params.config.arch,
        "regime": regime.value,
        "model_digest": params_digest(params),
        "split_seed": split.rng_seed,
        "init_seed": params.init_seed,
    }
    write_posteriors(table, split.train_mask(), args.out, meta)
    train_acc = accuracy(table, split.train_nodes)
    test_acc = accuracy(table, split.test_nodes)
    print(f"wrote {args.out} (train acc {train_acc:.4f}, test acc {test_acc:.4f})")
    return 0


def cmd_attack(args) -> int:
    table, member, meta = read_posteriors(args.posteriors)
    members = table.subset(table.node_ids[member])
    nonmembers = table.subset(table.node_ids[~member])
    train_acc = accuracy(table, table.node_ids[member])
    test_acc = accuracy(table, table.node_ids[~member])
    gap = analysis.performance_gap(train_acc, test_acc)
    examples = build_attack_dataset(
        members, nonmembers, args.balance, derive_seed(args.seed, "balance")
    )
    rows = []
    for trial_id in range(args.trials):
        trial_seed = derive_seed(args.seed, "attack", trial_id)
        report = run_trial(examples, trial_seed)
        rows.append([
            meta.get("dataset", "?"), meta.get("strategy", "?"),
            float(meta.get("fraction", float("nan"))), int(meta.get("split_id", -1)),
            meta.get("arch", "?"), meta.get("regime", "?"), trial_id,
            float(train_acc), float(test_acc), float(gap), float(report.advantage),
        ])
    columns = ["dataset", "strategy", "fraction", "split_id", "arch", "regime",
               "trial_id", "train_acc", "test_acc", "gap_percent", "advantage"]
    write_csv(args.out, columns, rows, meta={"balance": args.balance, "seed": args.seed})
    advantages = [r[-1] for r in rows]
    print(f"wrote {args.out} (mean advantage {np.mean(advantages):.4f})")
    return 0


def cmd_analyze(args) -> int:
    if args.what == "kl":
        g = load_graph(args.dataset)
        split = Split.load(args.split)
        params = load_params(args.model)
        ra, rb = Regime.from_token(args.regime_a), Regime.from_token(args.regime_b)
        table_a = infer(params, g, split, ra)
        table_b = infer(params, g, split, rb)
        member = split.train_mask()
        records, hist_m, hist_n = analysis.regime_kl_profile(table_a, table_b, member)
        meta = {
            "regime_a": ra.value, "regime_b": rb.value,
            "model_digest": params_digest(params), "log_base": "e",
            "split_strategy": split.strategy,
            "split_fraction": split.params.train_fraction,
            "split_seed": split.rng_seed,
            "hist_edges": [float(x) for x in hist_m.edges],
            "hist_member_counts": [int(x) for x in hist_m.counts],
            "hist_nonmember_counts": [int(x) for x in hist_n.counts],
        }
        rows = [[r.node_id, int(member[r.node_id]), float(r.kl)] for r in records]
        write_csv(args.out, ["node_id", "member_flag", "kl"], rows, meta)
    elif args.what == "js":
        table, member, meta_in = read_posteriors(args.posteriors)
        split = Split.load(args.split)
        orig_edges = np.concatenate([split.train_edges, split.test_edges], axis=0)
        records, ecdf = analysis.neighbor_js_profile(table, orig_edges)
        flags = dict(zip(table.node_ids.tolist(), member.tolist()))
        rows = [[r.node_id, int(flags[r.node_id]), float(r.mean_js)] for r in records]
        meta = {"log_base": "e", "source_regime": meta_in.get("regime", "?")}
        write_csv(args.out, ["node_id", "member_flag", "mean_js"], rows, meta)
        if args.ecdf_out:
            ecdf_rows = [[float(v), float(f)] for v, f in zip(ecdf.values, ecdf.fractions)]
            write_csv(args.ecdf_out, ["mean_js", "cumulative_fraction"], ecdf_rows, meta)
    elif args.what == "logit":
        table, member, meta_in = read_posteriors(args.posteriors)
        conf = table.probs[np.arange(table.node_ids.size), table.labels]
        logits = np.array([analysis.logit_transform(p) for p in conf])
        sep = analysis.separability_score(logits, member)
        rows = [
            [int(v), int(member[i]), float(conf[i]), float(logits[i])]
            for i, v in enumerate(table.node_ids)
        ]
        meta = {
            "source_regime": meta_in.get("regime", "?"),
            # scalar summary added by this tool, not a reproduced figure metric
            "artifact_separability_tpr_minus_fpr": sep,
        }
        write_csv(args.out, ["node_id", "member_flag", "true_class_conf", "logit"], rows, meta)
    else:  # gap
        table, member, _ = read_posteriors(args.posteriors)
        train_acc = accuracy(table, table.node_ids[member])
        test_acc = accuracy(table, table.node_ids[~member])
        gap = analysis.performance_gap(train_acc, test_acc)
        write_csv(args.out, ["train_acc", "test_acc", "gap_percent"],
                  [[float(train_acc), float(test_acc), float(gap)]])
    print(f"wrote {args.out}")
    return 0


def cmd_exchangeability(args) -> int:
    g = load_graph(args.dataset)
    split = Split.load(args.split)
    rng = np.random.default_rng(args.seed)
    rows = []
    verified = False
    bad = 0
    for _ in range(args.trials):
        m = int(rng.choice(split.train_nodes))
        t = int(rng.choice(split.test_nodes))
        if split.strategy == "snowball":
            verdict = check_swap_snowball(g, split, m, t, args.hops, verify=not verified)
            verified = True
        else:
            verdict = check_swap(g, split, m, t, args.hops)
        bad += 0 if verdict.compatible else 1
        rows.append([m, t, int(verdict.compatible), len(verdict.witnesses),
                     int(verdict.support_break)])
    columns = ["member", "nonmember", "compatible", "num_witnesses", "support_break"]
    write_csv(args.out, columns, rows,
              meta={"hops": args.hops, "seed": args.seed, "trials": args.trials})
    print(f"wrote {args.out} (violation rate {bad / args.trials:.4f})")
    return 0


def cmd_run(args) -> int:
    config = ExperimentConfig.from_json(Path(args.config).read_text())
    report = run_experiment(config, args.out)
    print(f"{len(report.records)} records -> {report.out_dir / 'records.csv'}")
    if report.failures:
        for failure in report.failures:
            print(f"failed cell {failure['cell']}: {failure['error']}", file=sys.stderr)
        return 2
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    records = read_records(run_dir / "records.csv")
    text = render_tables(records)
    (run_dir / "tables.txt").write_text(text)
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gnnaudit")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("sample", help="generate train/test splits")
    p.add_argument("--dataset", required=True)
    p.add_argument("--strategy", required=True, choices=["random", "snowball"])
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seeds-per-class", type=int, default=10)
    p.add_argument("--num-splits", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("train", help="train a model on a split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--arch", required=True, choices=["gcn", "sage", "gat"])
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("infer", help="posteriors under an edge-access regime")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--split-id", type=int, default=0)
    p.add_argument("--model", required=True)
    p.add_argument("--regime", required=True, choices=["orig", "all", "none"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("attack", help="membership inference trials on posteriors")
    p.add_argument("--posteriors", required=True)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--balance", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("analyze", help="divergence and gap diagnostics")
    p.add_argument("what", choices=["kl", "js", "logit", "gap"])
    p.add_argument("--dataset")
    p.add_argument("--split")
    p.add_argument("--model")
    p.add_argument("--regime-a", default="all")
    p.add_argument("--regime-b", default="none")
    p.add_argument("--posteriors")
    p.add_argument("--ecdf-out")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("exchangeability", help="swap-compatibility verdicts")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--L", dest="hops", type=int, default=1)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_exchangeability)

    p = sub.add_parser("run", help="full audit pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("report", help="re-render tables from records.csv")
    p.add_argument("--run", required=True)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
