"""Command line front end: stimuli file + model lock -> feature tensors.

    sentfeat extract --stimuli sentences.txt --models checkpoints.lock.json --out feats/

Writes one ``<task_id>.npy`` per lock entry plus ``tasks.json``, the
manifest fragment listing the tensors in lock order. Exit codes: 0 all
models extracted, 1 usage error, 2 data or model error (including any
per-model failure; successful tensors are still written).
"""

import argparse
import json
import sys
from pathlib import Path

from sentfeat.errors import SentfeatError, UsageError
from sentfeat.extract import extract_all, load_lock


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sentfeat")
    sub = ap.add_subparsers(dest="command", required=True)

    p_ext = sub.add_parser("extract", help="run every locked checkpoint over a stimuli file")
    p_ext.add_argument("--stimuli", required=True, help="UTF-8 text, one sentence per line")
    p_ext.add_argument("--models", required=True, help="lock file JSON: task id -> checkpoint + revision")
    p_ext.add_argument("--out", required=True)
    p_ext.add_argument("--pooling", choices=("mean", "cls"), default="mean")
    p_ext.add_argument("--layer", type=int, default=None,
                       help="hidden-state layer index (default: final layer)")
    p_ext.add_argument("--max-length", type=int, default=128)
    p_ext.add_argument("--batch-size", type=int, default=32)
    p_ext.add_argument("--only", default=None,
                       help="comma-separated task ids to extract (subset of the lock)")
    p_ext.add_argument("--force", action="store_true")
    return ap


def _run_extract(args) -> int:
    models = load_lock(args.models)
    if args.only is not None:
        wanted = [t.strip() for t in args.only.split(",") if t.strip()]
        unknown = [t for t in wanted if t not in models]
        if unknown:
            raise UsageError(f"--only names unknown task ids: {', '.join(unknown)}")
        models = {t: models[t] for t in wanted}

    out_dir = Path(args.out)
    fragment_path = out_dir / "tasks.json"
    if fragment_path.exists() and not args.force:
        raise UsageError(f"{fragment_path} exists; pass --force to overwrite")

    fragment, failures = extract_all(
        args.stimuli, models, out_dir, pooling=args.pooling, layer=args.layer,
        max_length=args.max_length, batch_size=args.batch_size)

    fragment_path.write_text(json.dumps(fragment, indent=2) + "\n")
    for task_id, message in failures.items():
        print(f"failed {task_id}: {message}", file=sys.stderr)
    print(f"extracted {len(fragment['tasks'])}/{len(models)} models to {out_dir}")
    return 2 if failures else 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    try:
        if args.command == "extract":
            return _run_extract(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    except SentfeatError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
