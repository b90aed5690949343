"""Command line entry point.

Exit codes:
  0  success
  2  repository error (not a repo, empty, unknown revision) or bad usage
  3  an output file could not be written
  4  dataset.csv missing (run ``mine`` first)
  5  B-SZZ predictions missing (run ``run`` with B first)
  6  report inputs missing
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__, pipeline
from .config import ALL_ALGORITHMS, ConfigError, load_config, parse_algorithms
from .errors import GitError, IoFailure, ScriptInvalid
from .fixture import build_fixture_text


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--repo", help="path to the git repository")
    p.add_argument("--until", help="analyse history up to this revision (default HEAD)")
    p.add_argument("--out", help="output directory for stage artifacts")
    p.add_argument("--workers", type=int, help="parallel worker processes (default: CPU count)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="szzkit", description=(
        "Evaluate SZZ variants against Fixes: trailer ground truth."))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="extract bug-fix/bug-inducing pairs from Fixes: trailers")
    _common(p)

    p = sub.add_parser("run", help="run the selected algorithms over the mined dataset")
    _common(p)
    p.add_argument("--algos", help=f"comma-separated subset of {','.join(ALL_ALGORITHMS)}")
    p.add_argument("--blame-count", type=int,
                   help="TC chain length per line (1 = plain blame, -1 = trace to the initial commit)")
    p.add_argument("--tc-mode", choices=["ChronologicalTrace", "UniqueCommits", "CustomBlame"])
    p.add_argument("--similarity-threshold", type=float,
                   help="minimum line similarity for TC to continue a trace (default 0.75)")
    p.add_argument("--attribution", action="store_true", default=None,
                   help="also write per-line attribution JSON")

    p = sub.add_parser("classify", help="label ghost commits and categorize B-SZZ misses")
    _common(p)
    p.add_argument("--algos", help="algorithms whose predictions to categorize")
    p.add_argument("--emit-prompts", action="store_true", default=None,
                   help="write one prompt file per failed B-SZZ case")

    p = sub.add_parser("report", help="compute metrics and render figures")
    _common(p)
    p.add_argument("--algos", help="algorithms to include")

    p = sub.add_parser("fixture", help="synthetic repository tools")
    fsub = p.add_subparsers(dest="fixture_command", required=True)
    fb = fsub.add_parser("build", help="build a repository from a fixture script")
    fb.add_argument("script", help="fixture script file")
    fb.add_argument("directory", help="empty target directory")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    out = {
        "repo": args.repo, "until": args.until, "out": args.out, "workers": args.workers,
        "blame_count": getattr(args, "blame_count", None),
        "tc_mode": getattr(args, "tc_mode", None),
        "similarity_threshold": getattr(args, "similarity_threshold", None),
        "emit_prompts": getattr(args, "emit_prompts", None),
        "attribution": getattr(args, "attribution", None),
    }
    if getattr(args, "algos", None):
        out["algorithms"] = parse_algorithms(args.algos)
    return out


def _fixture_build(args: argparse.Namespace) -> int:
    try:
        with open(args.script, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return pipeline.EXIT_REPO
    fmap = build_fixture_text(text, args.directory)
    for label, ref in fmap.commits.items():
        print(f"{label} {ref.id}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "fixture":
            return _fixture_build(args)
        try:
            cfg = load_config(args.config, _overrides(args))
        except (ConfigError, OSError, TypeError) as exc:
            parser.error(str(exc))
        if args.command == "mine":
            print(pipeline.stage_mine(cfg).line())
        elif args.command == "run":
            paths = pipeline.stage_run(cfg)
            print("predictions: " + ", ".join(f"{a}={p.name}" for a, p in paths.items()))
        elif args.command == "classify":
            counts = pipeline.stage_classify(cfg)
            print("B-SZZ outcomes: " + ", ".join(f"{k} {counts.get(k, 0)}" for k in pipeline.OUTCOME_ORDER))
        elif args.command == "report":
            report = pipeline.stage_report(cfg)
            for row in report["algorithms"]:
                print(f"{row['algorithm']}: P={row['precision']:.3f} R={row['recall']:.3f} F1={row['f1']:.3f}")
        return 0
    except pipeline.StageInputMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ScriptInvalid as exc:
        print(f"error: invalid fixture script: {exc}", file=sys.stderr)
        return pipeline.EXIT_REPO
    except GitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return pipeline.EXIT_REPO
    except (IoFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return pipeline.EXIT_WRITE


if __name__ == "__main__":
    sys.exit(main())
