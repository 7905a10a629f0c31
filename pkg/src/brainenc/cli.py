"""Command-line surface: validate, split, synth, run, report.

Exit codes: 0 success, 1 usage/validation error, 2 data error.  All file
products are deterministic given inputs and seeds; progress and errors go
to stderr, never stdout.

Plan file schema (JSON object, every key optional):

    {
      "methods": ["baseline-per-task", "average", "weighted-average",
                  "dynamic", "stack-pca", "stack-average"],
      "lambda_grid": [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
      "p_values": [5.0],          // exponents for weighted-average
      "pca_k": 64,                // per-task components for stack-pca
      "cv_folds": 4,              // folds for lambda selection
      "accuracy_metric": "two_v_two",   // or "pearson"
      "dynamic": {"learning_rate": 0.05, "max_epochs": 200,
                  "patience": 20, "validation_fraction": 0.2, "seed": 0}
    }

(JSON itself forbids comments; the annotations above are documentation.)
Command-line flags override plan file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data_model import load_manifest, peek_tensor_shape
from .errors import BrainencError, DataError, UsageError
from .figures import write_summary_svg
from .pipeline import (
    ModelCache,
    aggregate,
    load_plan,
    load_reports_json,
    prepare_bundle,
    run_experiment,
    save_artifacts,
    write_reports_csv,
    write_reports_json,
    write_summary_csv,
)
from .synthetic import SyntheticConfig, write_dataset


def _floats(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brainenc",
        description="Ensemble ridge encoders over per-task sentence embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a manifest and its tensor files")
    p_val.add_argument("--manifest", required=True)
    p_val.add_argument("--group-by-passage", action="store_true")

    p_split = sub.add_parser("split", help="materialize a train/test split as JSON")
    p_split.add_argument("--manifest", required=True)
    p_split.add_argument("--out", required=True)
    p_split.add_argument("--seed", type=int, default=None)
    p_split.add_argument("--group-by-passage", action="store_true")
    p_split.add_argument("--force", action="store_true")

    p_synth = sub.add_parser("synth", help="write a synthetic dataset + manifest")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--samples", type=int, default=200)
    p_synth.add_argument("--dim", type=int, default=96)
    p_synth.add_argument("--tasks", type=int, default=5)
    p_synth.add_argument("--voxels", type=int, default=300)
    p_synth.add_argument("--latent-dim", type=int, default=None,
                         help="defaults to min(16, dim)")
    p_synth.add_argument("--subjects", type=int, default=1)
    p_synth.add_argument("--rois", type=int, default=1)
    p_synth.add_argument("--force", action="store_true")

    p_run = sub.add_parser("run", help="run an experiment plan over a manifest")
    p_run.add_argument("--manifest", required=True)
    p_run.add_argument("--plan", default=None)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the manifest's ratio-split seed")
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--p-values", type=_floats, default=None)
    p_run.add_argument("--pca-k", type=int, default=None)
    p_run.add_argument("--lambda-grid", type=_floats, default=None)
    p_run.add_argument("--group-by-passage", action="store_true")
    p_run.add_argument("--literal-power-mean", action="store_true")
    p_run.add_argument("--pc-per-voxel", action="store_true")
    p_run.add_argument("--skip-baselines", action="store_true")
    p_run.add_argument("--force", action="store_true")

    p_rep = sub.add_parser("report", help="re-aggregate an existing reports.json")
    p_rep.add_argument("reports")
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--force", action="store_true")
    return parser


def _refuse_overwrite(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise UsageError(f"{path} exists; pass --force to overwrite")


def _cmd_validate(args) -> int:
    manifest = load_manifest(args.manifest, group_by_passage=args.group_by_passage)
    lines = [
        f"manifest: {args.manifest}",
        f"stimuli: {manifest.stimulus_count}  dim: {manifest.dim}  "
        f"tasks: {manifest.n_tasks}  responses: {len(manifest.responses)}",
        f"split: train={manifest.split.train_indices.size} "
        f"test={manifest.split.test_indices.size} seed={manifest.split.seed}",
        "kind\tid\trows\tcols\tpath",
    ]
    for task_id, path in manifest.tasks:
        rows, cols = peek_tensor_shape(path)
        lines.append(f"task\t{task_id}\t{rows}\t{cols}\t{path}")
    for ref in manifest.responses:
        rows, cols = peek_tensor_shape(ref.path)
        lines.append(f"resp\t{ref.subject_id}/{ref.roi_id}\t{rows}\t{cols}\t{ref.path}")
    print("\n".join(lines))
    return 0


def _cmd_split(args) -> int:
    manifest = load_manifest(args.manifest, group_by_passage=args.group_by_passage,
                             split_seed=args.seed)
    out = Path(args.out)
    _refuse_overwrite(out, args.force)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(manifest.split.to_json_dict(), indent=2) + "\n")
    print(f"wrote {out}", file=sys.stderr)
    return 0


def _cmd_synth(args) -> int:
    out_dir = Path(args.out)
    _refuse_overwrite(out_dir / "manifest.json", args.force)
    latent = args.latent_dim if args.latent_dim is not None else min(16, args.dim)
    cfg = SyntheticConfig(seed=args.seed, n_samples=args.samples, dim=args.dim,
                          n_tasks=args.tasks, n_voxels=args.voxels, latent_dim=latent)
    manifest_path = write_dataset(out_dir, cfg, n_subjects=args.subjects, n_rois=args.rois)
    print(f"wrote {manifest_path}", file=sys.stderr)
    return 0


def _cmd_run(args) -> int:
    out_dir = Path(args.out)
    _refuse_overwrite(out_dir / "reports.json", args.force)
    manifest = load_manifest(args.manifest, group_by_passage=args.group_by_passage,
                             split_seed=args.seed)
    plan = load_plan(
        args.plan,
        threads=args.threads,
        p_values=args.p_values,
        pca_k=args.pca_k,
        lambda_grid=args.lambda_grid,
        literal_power_mean=args.literal_power_mean or None,
        pc_per_voxel=args.pc_per_voxel or None,
        skip_baselines=args.skip_baselines or None,
    )
    bundle = prepare_bundle(manifest)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = ModelCache(out_dir / "cache")
    print(f"running {len(plan.methods)} methods over "
          f"{len(bundle.response_keys)} (subject, ROI) pairs", file=sys.stderr)
    result = run_experiment(bundle, plan, cache)
    meta = {
        "split_seed": manifest.split.seed,
        "methods": list(plan.methods),
        "p_values": list(plan.p_values),
        "pca_k": plan.pca_k,
        "lambda_grid": list(plan.lambda_grid),
        "accuracy_metric": plan.accuracy_metric,
        "pc_per_voxel": plan.pc_per_voxel,
        "literal_power_mean": plan.literal_power_mean,
    }
    write_reports_json(out_dir / "reports.json", result.reports, meta=meta)
    write_reports_csv(out_dir / "reports.csv", result.reports)
    agg = aggregate(result.reports)
    write_summary_csv(out_dir / "summary.csv", agg)
    write_summary_svg(out_dir / "figure.svg", agg)
    save_artifacts(result.artifacts, out_dir / "models")
    print(f"wrote {len(result.reports)} reports to {out_dir}", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    reports = load_reports_json(args.reports)
    out_dir = Path(args.out)
    _refuse_overwrite(out_dir / "summary.csv", args.force)
    out_dir.mkdir(parents=True, exist_ok=True)
    agg = aggregate(reports)
    write_summary_csv(out_dir / "summary.csv", agg)
    write_summary_svg(out_dir / "figure.svg", agg)
    print(f"wrote summary for {len(reports)} reports to {out_dir}", file=sys.stderr)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "split": _cmd_split,
    "synth": _cmd_synth,
    "run": _cmd_run,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; remap (2 is reserved for data errors)
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except (UsageError, BrainencError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
