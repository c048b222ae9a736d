import json

import numpy as np
import pytest

from gnnaudit.cli import main
from gnnaudit.metaio import read_csv
from gnnaudit.sampling import Split

from conftest import MINISET_DIR


@pytest.fixture()
def workdir(tmp_path):
    return tmp_path


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_sample_writes_splits(workdir):
    rc = run_cli(
        "sample", "--dataset", MINISET_DIR, "--strategy", "random",
        "--fraction", "0.3", "--num-splits", "2", "--seed", "1",
        "--out-dir", workdir / "splits",
    )
    assert rc == 0
    files = sorted((workdir / "splits").glob("*.json"))
    assert len(files) == 2
    split = Split.load(files[0])
    assert split.train_nodes.size == 36


def test_snowball_sample_has_traversal(workdir):
    rc = run_cli(
        "sample", "--dataset", MINISET_DIR, "--strategy", "snowball",
        "--fraction", "0.3", "--k", "3", "--seeds-per-class", "2",
        "--num-splits", "1", "--seed", "2", "--out-dir", workdir / "splits",
    )
    assert rc == 0
    split = Split.load(next((workdir / "splits").glob("*.json")))
    assert split.traversal is not None


@pytest.fixture()
def pipeline(workdir):
    """sample -> train -> infer chain shared by the downstream verb tests."""
    run_cli(
        "sample", "--dataset", MINISET_DIR, "--strategy", "random",
        "--fraction", "0.3", "--num-splits", "1", "--seed", "3",
        "--out-dir", workdir / "splits",
    )
    split_path = next((workdir / "splits").glob("*.json"))
    model_path = workdir / "model.bin"
    rc = run_cli(
        "train", "--dataset", MINISET_DIR, "--split", split_path,
        "--arch", "gcn", "--hidden-dim", "16", "--dropout", "0.0",
        "--epochs", "60", "--seed", "4", "--out", model_path,
    )
    assert rc == 0
    posterior_path = workdir / "posteriors.csv"
    rc = run_cli(
        "infer", "--dataset", MINISET_DIR, "--split", split_path,
        "--model", model_path, "--regime", "orig", "--out", posterior_path,
    )
    assert rc == 0
    return workdir, split_path, model_path, posterior_path


def test_infer_posterior_schema(pipeline):
    _, _, _, posterior_path = pipeline
    meta, header, rows = read_csv(posterior_path)
    assert header[:4] == ["node_id", "label", "member_flag", "loss"]
    assert header[4:] == ["p_0", "p_1", "p_2", "p_3"]
    assert len(rows) == 120
    assert meta["regime"] == "orig"
    probs = np.array([[float(x) for x in r[4:]] for r in rows])
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_attack_audit_csv(pipeline):
    workdir, _, _, posterior_path = pipeline
    out = workdir / "audit.csv"
    rc = run_cli(
        "attack", "--posteriors", posterior_path, "--trials", "2",
        "--seed", "5", "--out", out,
    )
    assert rc == 0
    meta, header, rows = read_csv(out)
    assert header == [
        "dataset", "strategy", "fraction", "split_id", "arch", "regime",
        "trial_id", "train_acc", "test_acc", "gap_percent", "advantage",
    ]
    assert len(rows) == 2
    for row in rows:
        assert 0.0 <= float(row[-1]) <= 1.0


def test_analyze_kl(pipeline):
    workdir, split_path, model_path, _ = pipeline
    out = workdir / "kl.csv"
    rc = run_cli(
        "analyze", "kl", "--dataset", MINISET_DIR, "--split", split_path,
        "--model", model_path, "--regime-a", "all", "--regime-b", "none",
        "--out", out,
    )
    assert rc == 0
    meta, header, rows = read_csv(out)
    assert header == ["node_id", "member_flag", "kl"]
    assert len(rows) == 120
    assert len(meta["hist_edges"]) == 51
    assert all(float(r[2]) >= 0.0 for r in rows)


def test_analyze_js_and_ecdf(pipeline):
    workdir, split_path, _, posterior_path = pipeline
    out = workdir / "js.csv"
    ecdf_out = workdir / "js_ecdf.csv"
    rc = run_cli(
        "analyze", "js", "--posteriors", posterior_path, "--split", split_path,
        "--out", out, "--ecdf-out", ecdf_out,
    )
    assert rc == 0
    _, header, rows = read_csv(out)
    assert header == ["node_id", "member_flag", "mean_js"]
    _, eheader, erows = read_csv(ecdf_out)
    assert eheader == ["mean_js", "cumulative_fraction"]
    fractions = [float(r[1]) for r in erows]
    assert fractions[-1] == 1.0
    assert all(a <= b for a, b in zip(fractions, fractions[1:]))


def test_analyze_logit(pipeline):
    workdir, _, _, posterior_path = pipeline
    out = workdir / "logit.csv"
    rc = run_cli("analyze", "logit", "--posteriors", posterior_path, "--out", out)
    assert rc == 0
    meta, header, rows = read_csv(out)
    assert header == ["node_id", "member_flag", "true_class_conf", "logit"]
    assert "artifact_separability_tpr_minus_fpr" in meta
    assert 0.0 <= meta["artifact_separability_tpr_minus_fpr"] <= 1.0


def test_analyze_gap(pipeline):
    workdir, _, _, posterior_path = pipeline
    out = workdir / "gap.csv"
    rc = run_cli("analyze", "gap", "--posteriors", posterior_path, "--out", out)
    assert rc == 0
    _, header, rows = read_csv(out)
    assert header == ["train_acc", "test_acc", "gap_percent"]
    train_acc, test_acc, gap = (float(x) for x in rows[0])
    assert gap == pytest.approx((train_acc - test_acc) / train_acc * 100)


def test_exchangeability_verdicts(pipeline):
    workdir, split_path, _, _ = pipeline
    out = workdir / "verdicts.csv"
    rc = run_cli(
        "exchangeability", "--dataset", MINISET_DIR, "--split", split_path,
        "--L", "1", "--trials", "50", "--seed", "6", "--out", out,
    )
    assert rc == 0
    _, header, rows = read_csv(out)
    assert header == ["member", "nonmember", "compatible", "num_witnesses", "support_break"]
    assert len(rows) == 50


def test_run_and_report(workdir):
    config = {
        "dataset": str(MINISET_DIR),
        "strategies": ["random"],
        "fractions": [0.3],
        "archs": ["gcn"],
        "regimes": ["orig"],
        "num_splits": 1,
        "attack_trials": 1,
        "base_seed": 11,
        "hidden_dim": 16,
        "dropout": 0.0,
        "epochs": 40,
        "attack_epochs": 80,
        "seeds_per_class": 2,
    }
    config_path = workdir / "config.json"
    config_path.write_text(json.dumps(config))
    rc = run_cli("run", "--config", config_path, "--out", workdir / "run")
    assert rc == 0
    assert (workdir / "run" / "records.csv").exists()
    tables_before = (workdir / "run" / "tables.txt").read_text()
    rc = run_cli("report", "--run", workdir / "run")
    assert rc == 0
    assert (workdir / "run" / "tables.txt").read_text() == tables_before


def test_partial_failure_exit_code(workdir):
    config = {
        "dataset": str(MINISET_DIR),
        "strategies": ["random", "snowball"],
        "fractions": [0.3],
        "archs": ["gcn"],
        "regimes": ["orig"],
        "num_splits": 1,
        "attack_trials": 1,
        "base_seed": 1,
        "hidden_dim": 16,
        "dropout": 0.0,
        "epochs": 30,
        "attack_epochs": 60,
        "seeds_per_class": 40,  # impossible on the fixture: snowball cells fail
    }
    config_path = workdir / "config.json"
    config_path.write_text(json.dumps(config))
    rc = run_cli("run", "--config", config_path, "--out", workdir / "run")
    assert rc == 2
    assert (workdir / "run" / "records.csv").exists()


def test_config_error_exit_code(workdir):
    config_path = workdir / "config.json"
    config_path.write_text(json.dumps({"dataset": str(workdir / "nowhere")}))
    rc = run_cli("run", "--config", config_path, "--out", workdir / "run")
    assert rc == 1


def test_bad_dataset_path_is_config_error(workdir):
    rc = run_cli(
        "sample", "--dataset", workdir / "missing", "--strategy", "random",
        "--fraction", "0.3", "--out-dir", workdir / "splits",
    )
    assert rc == 1
