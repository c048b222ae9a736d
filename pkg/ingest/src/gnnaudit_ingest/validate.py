"""Validation of canonical dataset directories.

Structural checks (counts, edge canonicalization, label range) apply to
any directory; for the three benchmark datasets the average degree and
label homophily are additionally compared against their published
statistics. Failures are collected into a report, never raised.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["ValidationReport", "Check", "validate", "BENCHMARK_STATS"]

# name -> (nodes, edges, classes, feature_dim, avg_degree, homophily)
BENCHMARK_STATS = {
    "cora": (2708, 5278, 7, 1433, 3.90, 0.8252),
    "chameleon": (2277, 31371, 5, 2325, 27.55, 0.2471),
    "pubmed": (19717, 44324, 3, 500, 4.496, 0.7924),
}
DEGREE_TOL = 0.01
HOMOPHILY_TOL = 0.0005


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class ValidationReport:
    directory: str
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append(Check(name, ok, detail))

    def render(self) -> str:
        lines = [f"validation of {self.directory}: {'PASS' if self.ok else 'FAIL'}"]
        for c in self.checks:
            lines.append(f"  [{'ok' if c.ok else 'FAIL'}] {c.name}" + (f": {c.detail}" if c.detail else ""))
        return "\n".join(lines)


def _mean_homophily(n: int, edges: np.ndarray, labels: np.ndarray) -> float | None:
    same = np.zeros(n)
    deg = np.zeros(n)
    for u, v in edges:
        agree = 1.0 if labels[u] == labels[v] else 0.0
        same[u] += agree
        same[v] += agree
        deg[u] += 1
        deg[v] += 1
    present = deg > 0
    if not present.any():
        return None
    return float(np.mean(same[present] / deg[present]))


def validate(directory: str | Path) -> ValidationReport:
    directory = Path(directory)
    report = ValidationReport(str(directory))
    for fname in ("meta.json", "edges.csv", "features.csv", "labels.csv"):
        if not (directory / fname).is_file():
            report.add("files present", False, f"missing {fname}")
            return report
    report.add("files present", True)

    meta = json.loads((directory / "meta.json").read_text())
    n = int(meta["node_count"])

    edge_lines = [l for l in (directory / "edges.csv").read_text().splitlines() if l.strip()]
    pairs = []
    ordered = True
    for line in edge_lines:
        u, v = (int(x) for x in line.split(","))
        pairs.append((u, v))
        if u >= v:
            ordered = False
    report.add("edges u < v with no self-loops", ordered)
    unique_sorted = sorted(set(pairs))
    report.add(
        "edges sorted and deduplicated",
        pairs == unique_sorted,
        "" if pairs == unique_sorted else f"{len(pairs) - len(set(pairs))} duplicate line(s)",
    )
    in_range = all(0 <= u < n and 0 <= v < n for u, v in pairs)
    report.add("edge endpoints in range", in_range)
    report.add(
        "edge count matches meta",
        len(pairs) == int(meta["edge_count"]),
        f"{len(pairs)} vs {meta['edge_count']}",
    )

    labels = np.array(
        [int(l) for l in (directory / "labels.csv").read_text().split()], dtype=np.int64
    )
    report.add("label row count", labels.size == n, f"{labels.size} vs {n}")
    labels_ok = labels.size > 0 and 0 <= labels.min() and labels.max() < int(meta["num_classes"])
    report.add(
        "labels in class range", bool(labels_ok),
        f"range {labels.min()}..{labels.max()} vs {meta['num_classes']} classes"
        if labels.size else "no labels",
    )

    feature_rows = [
        l for l in (directory / "features.csv").read_text().splitlines() if l.strip()
    ]
    report.add("feature row count", len(feature_rows) == n, f"{len(feature_rows)} vs {n}")
    try:
        width = {len(row.split(",")) for row in feature_rows}
        numeric = all(
            all(np.isfinite(float(x)) for x in row.split(",")) for row in feature_rows
        )
        report.add(
            "feature width matches meta",
            width == {int(meta["feature_dim"])},
            f"widths {sorted(width)} vs {meta['feature_dim']}",
        )
        report.add("features numeric and finite", numeric)
    except ValueError as exc:
        report.add("features numeric and finite", False, str(exc))
        return report

    name = str(meta.get("name", "")).lower()
    if name in BENCHMARK_STATS and labels.size == n and in_range:
        exp_n, exp_e, exp_c, exp_d, exp_deg, exp_hom = BENCHMARK_STATS[name]
        report.add(
            "benchmark counts",
            (n, len(pairs), int(meta["num_classes"]), int(meta["feature_dim"]))
            == (exp_n, exp_e, exp_c, exp_d),
            f"got ({n}, {len(pairs)}, {meta['num_classes']}, {meta['feature_dim']}), "
            f"expected ({exp_n}, {exp_e}, {exp_c}, {exp_d})",
        )
        edges_arr = np.array(unique_sorted, dtype=np.int64).reshape(-1, 2)
        avg_deg = 2 * len(unique_sorted) / n if n else 0.0
        report.add(
            f"average degree within {DEGREE_TOL} of {exp_deg}",
            abs(avg_deg - exp_deg) <= DEGREE_TOL,
            f"{avg_deg:.4f}",
        )
        hom = _mean_homophily(n, edges_arr, labels)
        report.add(
            f"homophily within {HOMOPHILY_TOL} of {exp_hom}",
            hom is not None and abs(hom - exp_hom) <= HOMOPHILY_TOL,
            "undefined" if hom is None else f"{hom:.4f}",
        )
    return report
