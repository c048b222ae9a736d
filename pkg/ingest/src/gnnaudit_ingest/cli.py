"""Command line interface: `convert` and `validate`."""

from __future__ import annotations

import argparse
import sys

from .convert import ConversionError, convert
from .validate import validate


def cmd_convert(args) -> int:
    manifest = convert(args.src, args.dataset, args.out)
    print(
        f"converted {args.dataset} ({manifest.variant}): "
        f"{manifest.node_count} nodes, {manifest.undirected_edges_out} edges "
        f"({manifest.directed_edges_in} directed in, "
        f"{manifest.duplicate_edges_dropped} duplicates, "
        f"{manifest.self_loops_dropped} self-loops dropped)"
    )
    return 0


def cmd_validate(args) -> int:
    report = validate(args.dir)
    print(report.render())
    return 0 if report.ok else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gnnaudit-ingest")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("convert", help="convert a public distribution to canonical form")
    p.add_argument("--dataset", required=True, choices=["cora", "pubmed", "chameleon"])
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_convert)

    p = sub.add_parser("validate", help="check a canonical dataset directory")
    p.add_argument("--dir", required=True)
    p.set_defaults(fn=cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConversionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
