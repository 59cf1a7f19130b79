"""Command line entry point: ``bbmlab run | kappa | presets``."""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from typing import Optional, Sequence

from .config import ConfigError, parse_config
from .kernels import kappa

__all__ = ["main", "preset_names", "preset_text"]


def _preset_dir():
    return resources.files("bbmlab") / "presets"


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in _preset_dir().iterdir() if p.name.endswith(".yaml"))


def preset_text(name: str) -> str:
    path = _preset_dir() / f"{name}.yaml"
    if not path.is_file():
        raise KeyError(name)
    return path.read_text()


def _summary(report: dict) -> str:
    lines = [f"{report['name']} ({report['mode']}): verdict={report.get('verdict')} "
             f"exit={report['exit_code']}"]
    cols = report["columns"]
    lines.append("  ".join(f"{c:>14}" for c in cols))
    for row in report["rows"]:
        lines.append("  ".join(f"{row[c]:>14.6g}" if isinstance(row[c], float)
                               else f"{row[c]!s:>14}" for c in cols))
    fit = report.get("fit")
    target = report.get("target")
    if fit:
        lines.append(f"limit {fit['limit']:.6g} ({fit['model']}, residual {fit['residual']:.2g})")
    if target and target.get("value") is not None:
        lines.append(f"target {target['value']:.6g} [{target.get('constant')}]")
    if report.get("deviation") is not None:
        lines.append(f"deviation {report['deviation']:.3g}")
    return "\n".join(lines)


def _run_text(text: str, out: Optional[str], threads: Optional[int]) -> int:
    from .runner import run

    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error {exc}", file=sys.stderr)
        return 1
    try:
        report, code = run(cfg, out, threads)
    except Exception as exc:  # engine failures map to exit status 1
        print(f"engine error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(_summary(report))
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="bbmlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--out", default=None)

    p_kappa = sub.add_parser("kappa", help="print kappa(N, p)")
    p_kappa.add_argument("--dim", type=int, required=True)
    p_kappa.add_argument("--p", type=float, required=True)

    p_pre = sub.add_parser("presets", help="list or run shipped presets")
    pre_sub = p_pre.add_subparsers(dest="action", required=True)
    pre_sub.add_parser("list")
    p_prun = pre_sub.add_parser("run")
    p_prun.add_argument("name")
    p_prun.add_argument("--threads", type=int, default=None)
    p_prun.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    if args.command == "kappa":
        try:
            print(f"{kappa(args.dim, args.p):.12g}")
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0
    if args.command == "run":
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return _run_text(text, args.out, args.threads)
    if args.action == "list":
        for name in preset_names():
            cfg = parse_config(preset_text(name))
            print(f"{name:24s} {cfg.mode:12s} {cfg.description}")
        return 0
    try:
        text = preset_text(args.name)
    except KeyError:
        print(f"error: no preset named {args.name!r}; see 'bbmlab presets list'", file=sys.stderr)
        return 1
    return _run_text(text, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
