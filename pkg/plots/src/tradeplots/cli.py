"""CLI: ``plot regret <files...> --out`` and ``plot loglog <file> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import plot_loglog, plot_regret
from .io import parse_results


def _cmd_regret(args: argparse.Namespace) -> int:
    tables = [parse_results(f) for f in args.files]
    labels = args.labels or [Path(f).stem for f in args.files]
    if len(labels) != len(tables):
        raise ValueError("one label per file required")
    out = plot_regret(tables, labels, args.out)
    print(f"wrote {out}")
    return 0


def _cmd_loglog(args: argparse.Namespace) -> int:
    table = parse_results(args.file)
    out = plot_loglog(table, d=args.d, tail_len=args.tail, out_path=args.out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plot",
                                description="Render tradelab results files")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("regret", help="mean regret curves with CI bands")
    pr.add_argument("files", nargs="+")
    pr.add_argument("--labels", nargs="+", default=None)
    pr.add_argument("--out", required=True)
    pr.set_defaults(fn=_cmd_regret)

    pl = sub.add_parser("loglog", help="log-log tail with reference slopes")
    pl.add_argument("file")
    pl.add_argument("--d", type=int, required=True)
    pl.add_argument("--tail", type=int, default=10_000)
    pl.add_argument("--out", required=True)
    pl.set_defaults(fn=_cmd_loglog)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
