"""Converters from public dataset distributions to the canonical layout.

The canonical directory (consumed by the audit framework) holds
meta.json, edges.csv (one "u,v" per line, u < v, sorted, deduplicated,
no self-loops), features.csv and labels.csv, with row i describing
node i. Conversion symmetrizes directed edges, drops duplicates and
self-loops, keeps the source's node order, and writes a manifest
recording input checksums and reduction counters.

Recognized source layouts:

* cora: the classic citation distribution (`cora.content` with
  tab-separated 0/1 word vectors and a class string, `cora.cites` with
  "cited citing" pairs).
* pubmed: the Pubmed-Diabetes tables (`*.NODE.paper.tab` with sparse
  "w-term=value" TF/IDF entries, `*.DIRECTED.cites.tab`).
* chameleon: either the preprocessed distribution with binned labels
  (`out1_node_feature_label.txt` + `out1_graph_edges.txt`) or the raw
  wiki crawl (`musae_chameleon_edges.csv`, `musae_chameleon_features.json`,
  `musae_chameleon_target.csv`); raw traffic targets are binned into 5
  quantile classes and the manifest records which variant was converted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

__all__ = ["ConversionManifest", "ConversionError", "convert"]

MANIFEST_NAME = "manifest.json"


class ConversionError(ValueError):
    pass


@dataclass(frozen=True)
class ConversionManifest:
    dataset: str
    variant: str
    source: str
    input_checksums: dict[str, str]
    node_count: int
    edge_count: int
    num_classes: int
    feature_dim: int
    directed_edges_in: int
    undirected_edges_out: int
    duplicate_edges_dropped: int
    self_loops_dropped: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path: Path) -> "ConversionManifest":
        return cls(**json.loads(path.read_text()))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _symmetrize(pairs: list[tuple[int, int]], n: int):
    """Directed pairs -> sorted unique undirected edges + reduction counters."""
    self_loops = sum(1 for u, v in pairs if u == v)
    undirected = {(min(u, v), max(u, v)) for u, v in pairs if u != v}
    for u, v in undirected:
        if not (0 <= u < n and 0 <= v < n):
            raise ConversionError(f"edge endpoint out of range: {u},{v}")
    duplicates = len(pairs) - self_loops - len(undirected)
    return sorted(undirected), duplicates, self_loops


def _write_canonical(out_dir: Path, name: str, edges, features, labels, num_classes: int):
    out_dir.mkdir(parents=True, exist_ok=True)
    n = len(labels)
    meta = {
        "name": name,
        "node_count": n,
        "edge_count": len(edges),
        "num_classes": num_classes,
        "feature_dim": int(features.shape[1]),
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    with open(out_dir / "edges.csv", "w") as f:
        for u, v in edges:
            f.write(f"{u},{v}\n")
    with open(out_dir / "features.csv", "w") as f:
        for row in features:
            f.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(out_dir / "labels.csv", "w") as f:
        for y in labels:
            f.write(f"{int(y)}\n")


# ---------------------------------------------------------------------------
# cora
# ---------------------------------------------------------------------------


def _read_cora(src: Path):
    content = src / "cora.content"
    cites = src / "cora.cites"
    ids: list[str] = []
    rows: list[list[float]] = []
    label_names: list[str] = []
    for line in content.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        ids.append(parts[0])
        rows.append([float(x) for x in parts[1:-1]])
        label_names.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    if len(index) != len(ids):
        raise ConversionError("duplicate paper id in cora.content")
    classes = sorted(set(label_names))
    labels = np.array([classes.index(c) for c in label_names], dtype=np.int64)
    pairs = []
    for line in cites.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        cited, citing = parts
        if cited not in index or citing not in index:
            raise ConversionError(f"citation references unknown paper: {line!r}")
        pairs.append((index[citing], index[cited]))
    return np.array(rows, dtype=np.float64), labels, len(classes), pairs, [content, cites]


# ---------------------------------------------------------------------------
# pubmed
# ---------------------------------------------------------------------------


def _read_pubmed(src: Path):
    node_file = next(iter(sorted(src.glob("*.NODE.paper.tab"))), None)
    cite_file = next(iter(sorted(src.glob("*.DIRECTED.cites.tab"))), None)
    if node_file is None or cite_file is None:
        raise ConversionError(f"pubmed tables not found under {src}")

    node_lines = node_file.read_text().splitlines()
    vocab = [
        tok.split(":")[1]
        for tok in node_lines[1].split()
        if tok.startswith("numeric:w-")
    ]
    word_index = {w: j for j, w in enumerate(vocab)}
    ids: list[str] = []
    rows: list[np.ndarray] = []
    labels: list[int] = []
    for line in node_lines[2:]:
        parts = line.split("\t")
        if len(parts) < 2:
            continue
        ids.append(parts[0])
        vec = np.zeros(len(vocab))
        label = None
        for tok in parts[1:]:
            if tok.startswith("label="):
                label = int(tok.split("=")[1]) - 1
            elif tok.startswith("w-"):
                word, value = tok.split("=")
                vec[word_index[word]] = float(value)
        if label is None:
            raise ConversionError(f"paper {parts[0]} has no label")
        labels.append(label)
        rows.append(vec)
    index = {pid: i for i, pid in enumerate(ids)}

    pairs = []
    for line in cite_file.read_text().splitlines()[2:]:
        parts = line.split("\t")
        refs = [tok.split(":")[1] for tok in parts if tok.startswith("paper:")]
        if len(refs) != 2:
            continue
        cited, citing = refs
        if cited not in index or citing not in index:
            raise ConversionError(f"citation references unknown paper: {line!r}")
        pairs.append((index[citing], index[cited]))
    return (
        np.array(rows, dtype=np.float64),
        np.array(labels, dtype=np.int64),
        3,
        pairs,
        [node_file, cite_file],
    )


# ---------------------------------------------------------------------------
# chameleon
# ---------------------------------------------------------------------------


def _read_chameleon_preprocessed(src: Path):
    node_file = src / "out1_node_feature_label.txt"
    edge_file = src / "out1_graph_edges.txt"
    rows, labels = [], []
    for line in node_file.read_text().splitlines()[1:]:
        node_id, feats, label = line.split("\t")
        rows.append([float(x) for x in feats.split(",")])
        labels.append(int(label))
    pairs = []
    for line in edge_file.read_text().splitlines()[1:]:
        u, v = line.split("\t")
        pairs.append((int(u), int(v)))
    labels = np.array(labels, dtype=np.int64)
    return (
        np.array(rows, dtype=np.float64),
        labels,
        int(labels.max()) + 1,
        pairs,
        [node_file, edge_file],
        "preprocessed",
    )


def _read_chameleon_musae(src: Path):
    edge_file = src / "musae_chameleon_edges.csv"
    feat_file = src / "musae_chameleon_features.json"
    target_file = src / "musae_chameleon_target.csv"
    feats_raw = json.loads(feat_file.read_text())
    n = len(feats_raw)
    dim = 1 + max(max(v) for v in feats_raw.values() if v)
    features = np.zeros((n, dim))
    for node, nouns in feats_raw.items():
        features[int(node), nouns] = 1.0
    traffic = np.zeros(n)
    for line in target_file.read_text().splitlines()[1:]:
        node, value = line.split(",")
        traffic[int(node)] = float(value)
    # continuous monthly traffic: bin into 5 quantile classes
    edges_q = np.quantile(traffic, [0.2, 0.4, 0.6, 0.8])
    labels = np.searchsorted(edges_q, traffic, side="right").astype(np.int64)
    pairs = []
    for line in edge_file.read_text().splitlines()[1:]:
        u, v = line.split(",")
        pairs.append((int(u), int(v)))
    return features, labels, 5, pairs, [edge_file, feat_file, target_file], "musae-quantile"


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def convert(src: str | Path, dataset: str, out_dir: str | Path) -> ConversionManifest:
    """Convert a recognized source distribution into a canonical directory.

    Re-running against an existing manifest verifies the input checksums
    and fails on mismatch rather than silently overwriting.
    """
    src = Path(src)
    out_dir = Path(out_dir)
    if not src.is_dir():
        raise ConversionError(f"source directory not found: {src}")

    if dataset == "cora":
        features, labels, num_classes, pairs, inputs = _read_cora(src)
        variant = "classic"
    elif dataset == "pubmed":
        features, labels, num_classes, pairs, inputs = _read_pubmed(src)
        variant = "diabetes-tables"
    elif dataset == "chameleon":
        if (src / "out1_node_feature_label.txt").is_file():
            features, labels, num_classes, pairs, inputs, variant = (
                _read_chameleon_preprocessed(src)
            )
        elif (src / "musae_chameleon_edges.csv").is_file():
            features, labels, num_classes, pairs, inputs, variant = (
                _read_chameleon_musae(src)
            )
        else:
            raise ConversionError(f"no recognized chameleon layout under {src}")
    else:
        raise ConversionError(f"unknown dataset {dataset!r}")

    checksums = {p.name: _sha256(p) for p in inputs}
    manifest_path = out_dir / MANIFEST_NAME
    if manifest_path.is_file():
        previous = ConversionManifest.load(manifest_path)
        if previous.input_checksums != checksums:
            raise ConversionError(
                f"input checksums changed since {manifest_path} was written"
            )

    edges, duplicates, self_loops = _symmetrize(pairs, len(labels))
    _write_canonical(out_dir, dataset, edges, features, labels, num_classes)
    manifest = ConversionManifest(
        dataset=dataset,
        variant=variant,
        source=str(src),
        input_checksums=checksums,
        node_count=len(labels),
        edge_count=len(edges),
        num_classes=num_classes,
        feature_dim=int(features.shape[1]),
        directed_edges_in=len(pairs),
        undirected_edges_out=len(edges),
        duplicate_edges_dropped=duplicates,
        self_loops_dropped=self_loops,
    )
    manifest_path.write_text(manifest.to_json())
    return manifest
