"""Experiment orchestration: the (subject, ROI, method) grid.

Every fitting step (lambda selection, scalers, PCA, ensemble weights,
encoders) sees training rows only; test rows are touched exclusively at
prediction time.  ``poison_test_rows`` exists so tests can prove that.
Work units are pure and run on a bounded thread pool; reports are
gathered in a canonical order, so results never depend on worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import pca as pca_mod
from .data_model import DatasetManifest, EmbeddingMatrix, SplitSpec, VoxelMatrix, load_tensor
from .ensemble import (
    DynamicWeightConfig,
    TaskAccuracyTable,
    WeightVector,
    combine_average,
    combine_weighted,
    fit_dynamic_weights,
    literal_power_mean_weights,
    power_weights,
)
from .errors import ConfigError, EmptyReports, MissingAccuracyTable, ParseError
from .metrics import EvaluationReport, pearson_metric, pearson_per_voxel, two_v_two
from .regression import (
    DEFAULT_CV_FOLDS,
    DEFAULT_LAMBDA_GRID,
    RidgeModel,
    fit_ridge,
    load_ridge,
    predict,
    save_ridge,
    select_lambda,
)

METHOD_BASELINE = "baseline-per-task"
METHOD_AVERAGE = "average"
METHOD_WEIGHTED = "weighted-average"
METHOD_DYNAMIC = "dynamic"
METHOD_STACK_PCA = "stack-pca"
METHOD_STACK_AVERAGE = "stack-average"
ALL_METHODS = (
    METHOD_BASELINE,
    METHOD_AVERAGE,
    METHOD_WEIGHTED,
    METHOD_DYNAMIC,
    METHOD_STACK_PCA,
    METHOD_STACK_AVERAGE,
)
ACCURACY_METRICS = ("two_v_two", "pearson")
PEARSON_ACCURACY_FLOOR = 1e-6


@dataclass(frozen=True)
class ExperimentPlan:
    """Which methods to run and with what hyperparameters."""

    methods: tuple[str, ...]
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    p_values: tuple[float, ...] = (5.0,)
    pca_k: int = 64
    cv_folds: int = DEFAULT_CV_FOLDS
    dynamic: DynamicWeightConfig = field(default_factory=DynamicWeightConfig)
    threads: int = 1
    accuracy_metric: str = "two_v_two"
    literal_power_mean: bool = False
    pc_per_voxel: bool = False
    skip_baselines: bool = False

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("plan must request at least one method")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {ALL_METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("duplicate methods in plan")
        if not self.lambda_grid:
            raise ConfigError("lambda_grid must be non-empty")
        if METHOD_WEIGHTED in self.methods and not self.p_values:
            raise ConfigError("weighted-average requires at least one p value")
        if self.pca_k < 1:
            raise ConfigError(f"pca_k must be positive, got {self.pca_k}")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        if self.accuracy_metric not in ACCURACY_METRICS:
            raise ConfigError(f"accuracy_metric must be one of {ACCURACY_METRICS}")


def load_plan(path, **overrides) -> ExperimentPlan:
    """Build a plan from a JSON file, with keyword overrides applied on top."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ParseError(f"plan file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ParseError(f"{path}: plan must be a JSON object")
    merged = dict(raw)
    merged.update({k: v for k, v in overrides.items() if v is not None})

    dynamic_raw = merged.pop("dynamic", None)
    dynamic = DynamicWeightConfig(**dynamic_raw) if isinstance(dynamic_raw, dict) else (
        dynamic_raw or DynamicWeightConfig())
    known = {
        "methods", "lambda_grid", "p_values", "pca_k", "cv_folds", "threads",
        "accuracy_metric", "literal_power_mean", "pc_per_voxel", "skip_baselines",
    }
    stray = set(merged) - known
    if stray:
        raise ParseError(f"unknown plan keys: {sorted(stray)}")
    kwargs = {
        key: tuple(value) if key in ("methods", "lambda_grid", "p_values") else value
        for key, value in merged.items()
    }
    if "methods" not in kwargs:
        kwargs["methods"] = ALL_METHODS
    try:
        return ExperimentPlan(dynamic=dynamic, **kwargs)
    except TypeError as exc:
        raise ParseError(f"invalid plan: {exc}") from exc


@dataclass(frozen=True)
class DataBundle:
    """In-memory dataset: raw arrays plus the split, ready for the grid."""

    task_ids: tuple[str, ...]
    task_data: tuple[np.ndarray, ...]
    response_keys: tuple[tuple[str, str], ...]
    response_data: tuple[np.ndarray, ...]
    split: SplitSpec

    @property
    def n_tasks(self) -> int:
        return len(self.task_ids)


def prepare_bundle(manifest: DatasetManifest) -> DataBundle:
    """Load every tensor referenced by a validated manifest."""
    task_data = tuple(load_tensor(path) for _, path in manifest.tasks)
    response_data = tuple(load_tensor(ref.path) for ref in manifest.responses)
    return DataBundle(
        task_ids=manifest.task_ids,
        task_data=task_data,
        response_keys=tuple((ref.subject_id, ref.roi_id) for ref in manifest.responses),
        response_data=response_data,
        split=manifest.split,
    )


def bundle_from_matrices(embeddings, responses, split: SplitSpec) -> DataBundle:
    """Bundle in-memory matrices (synthetic data, tests) without file I/O."""
    return DataBundle(
        task_ids=tuple(e.task_id for e in embeddings),
        task_data=tuple(e.data for e in embeddings),
        response_keys=tuple((v.subject_id, v.roi_id) for v in responses),
        response_data=tuple(v.data for v in responses),
        split=split,
    )


def poison_test_rows(bundle: DataBundle) -> DataBundle:
    """Copy of the bundle with every test row set to NaN.

    Leak canary: fitting on the poisoned bundle must yield byte-identical
    models, because no fitting step may ever read a test row.
    """
    test = bundle.split.test_indices

    def poison(arr):
        out = arr.copy()
        out[test] = np.nan
        return out

    return replace(
        bundle,
        task_data=tuple(poison(a) for a in bundle.task_data),
        response_data=tuple(poison(a) for a in bundle.response_data),
    )


class ModelCache:
    """Content-addressed on-disk store for fitted ridge and PCA models."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(kind: str, arrays, params: str) -> str:
        h = hashlib.sha256(kind.encode())
        for arr in arrays:
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(params.encode())
        return h.hexdigest()

    def _prefix(self, key: str) -> Path:
        return self.root / key / "model"

    def load_ridge(self, key: str) -> RidgeModel | None:
        prefix = self._prefix(key)
        if (prefix.parent / "model.json").is_file():
            return load_ridge(prefix)
        return None

    def store_ridge(self, key: str, model: RidgeModel) -> None:
        prefix = self._prefix(key)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        save_ridge(model, prefix)

    def load_pca(self, key: str) -> pca_mod.PcaModel | None:
        prefix = self._prefix(key)
        if (prefix.parent / "model.json").is_file():
            return pca_mod.load_pca(prefix)
        return None

    def store_pca(self, key: str, model: pca_mod.PcaModel) -> None:
        prefix = self._prefix(key)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        pca_mod.save_pca(prefix=prefix, model=model)


@dataclass
class RunResult:
    reports: list[EvaluationReport]
    accuracy: TaskAccuracyTable | None
    artifacts: dict[str, object]


def _run_units(units, threads: int):
    """Execute zero-arg callables, returning results in submission order."""
    if threads <= 1 or len(units) <= 1:
        return [unit() for unit in units]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(unit) for unit in units]
        return [f.result() for f in futures]


def _score(y_true: np.ndarray, y_pred: np.ndarray, pc_per_voxel: bool) -> tuple[float, float]:
    pc = pearson_per_voxel(y_true, y_pred) if pc_per_voxel else pearson_metric(y_true, y_pred)
    return pc, two_v_two(y_true, y_pred)


def _train_encoder(x, y, train, plan, cache: ModelCache | None, tag: str):
    """Select lambda on the training rows, then fit; cached by content hash."""
    x_tr = x[train]
    y_tr = y[train]
    key = None
    if cache is not None:
        params = f"grid={tuple(plan.lambda_grid)!r};folds={plan.cv_folds}"
        key = cache.key("ridge:" + tag, (x_tr, y_tr), params)
        model = cache.load_ridge(key)
        if model is not None:
            return model
    lam = select_lambda(x_tr, y_tr, plan.lambda_grid, plan.cv_folds)
    model = fit_ridge(x_tr, y_tr, lam)
    if cache is not None:
        cache.store_ridge(key, model)
    return model


def _inner_split(split: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 4:1 inner fold of the training rows (never test rows)."""
    train = split.train_indices
    rng = np.random.default_rng(np.uint64(split.seed))
    perm = rng.permutation(train.size)
    n_val = max(1, int(round(train.size / 5)))
    inner_val = np.sort(train[perm[:n_val]])
    inner_fit = np.sort(train[perm[n_val:]])
    return inner_fit, inner_val


def _accuracy_score(y_true, y_pred, metric: str) -> float:
    if metric == "two_v_two":
        return two_v_two(y_true, y_pred)
    pc = pearson_metric(y_true, y_pred)
    # correlations can be negative; weight derivation needs (0, 1]
    return float(min(1.0, max(PEARSON_ACCURACY_FLOOR, pc)))


def run_baselines(bundle: DataBundle, plan: ExperimentPlan, cache: ModelCache | None = None,
                  emit_reports: bool = True) -> tuple[list[EvaluationReport], TaskAccuracyTable, dict]:
    """Per-task ridge encoders for every (subject, ROI): reports plus accuracies.

    The accuracy table holds each task's score on a deterministic inner
    validation fifth of the training split, measured with the plan's
    accuracy metric; downstream weighted averaging consumes it.
    """
    split = bundle.split
    train, test = split.train_indices, split.test_indices
    inner_fit, inner_val = _inner_split(split)

    def unit(pair_index):
        subject, roi = bundle.response_keys[pair_index]
        y = bundle.response_data[pair_index]
        reports, scores, artifacts = [], [], {}
        for task_id, x in zip(bundle.task_ids, bundle.task_data):
            tag = f"{subject}/{roi}/baseline:{task_id}"
            model = _train_encoder(x, y, train, plan, cache, tag)
            artifacts[f"ridge/{tag}"] = model
            pc, acc = _score(y[test], predict(model, x[test]), plan.pc_per_voxel)
            reports.append(EvaluationReport(
                subject_id=subject, roi_id=roi, method=f"baseline:{task_id}",
                pearson=pc, two_v_two=acc, n_test=test.size, v_voxels=y.shape[1],
                lam=model.lam,
            ))
            inner_model = fit_ridge(x[inner_fit], y[inner_fit], model.lam)
            scores.append(_accuracy_score(
                y[inner_val], predict(inner_model, x[inner_val]), plan.accuracy_metric))
        return reports, np.asarray(scores), artifacts

    results = _run_units([lambda i=i: unit(i) for i in range(len(bundle.response_keys))],
                         plan.threads)
    all_reports: list[EvaluationReport] = []
    table = {}
    artifacts: dict[str, object] = {}
    for key, (reports, scores, arts) in zip(bundle.response_keys, results):
        if emit_reports:
            all_reports.extend(reports)
        table[key] = scores
        artifacts.update(arts)
    return all_reports, TaskAccuracyTable(scores=table, metric_kind=plan.accuracy_metric), artifacts


def run_ensembles(bundle: DataBundle, plan: ExperimentPlan,
                  accuracy: TaskAccuracyTable | None = None,
                  cache: ModelCache | None = None) -> tuple[list[EvaluationReport], dict]:
    """One report per (subject, ROI, ensemble method, hyperparameter point)."""
    methods = [m for m in plan.methods if m != METHOD_BASELINE]
    if METHOD_WEIGHTED in methods and accuracy is None:
        raise MissingAccuracyTable(
            "weighted-average needs per-task baseline accuracies; run baselines first")

    split = bundle.split
    train, test = split.train_indices, split.test_indices

    # raw-array kernels throughout: full matrices may carry poisoned test
    # rows, and only train slices may ever pass finite-validating wrappers
    shared: dict[str, np.ndarray] = {}
    artifacts: dict[str, object] = {}
    if METHOD_AVERAGE in methods:
        shared[METHOD_AVERAGE] = combine_average(bundle.task_data)
    if METHOD_STACK_AVERAGE in methods:
        shared[METHOD_STACK_AVERAGE] = combine_average(bundle.task_data)
    if METHOD_STACK_PCA in methods:
        blocks = []
        for tid, data in zip(bundle.task_ids, bundle.task_data):
            model = None
            key = None
            if cache is not None:
                key = ModelCache.key("pca", (data[train],), f"k={plan.pca_k}")
                model = cache.load_pca(key)
            if model is None:
                model = pca_mod.fit_pca(data[train], plan.pca_k)
                if cache is not None:
                    cache.store_pca(key, model)
            artifacts[f"pca/{tid}"] = model
            blocks.append(pca_mod.transform(model, data))
        shared[METHOD_STACK_PCA] = np.concatenate(blocks, axis=1)

    def evaluate(x, y, subject, roi, method, tag, **extra):
        model = _train_encoder(x, y, train, plan, cache, tag)
        pc, acc = _score(y[test], predict(model, x[test]), plan.pc_per_voxel)
        report = EvaluationReport(
            subject_id=subject, roi_id=roi, method=method, pearson=pc, two_v_two=acc,
            n_test=test.size, v_voxels=y.shape[1], lam=model.lam, **extra)
        return report, model

    def unit(pair_index, method, p):
        subject, roi = bundle.response_keys[pair_index]
        y = bundle.response_data[pair_index]
        arts: dict[str, object] = {}
        if method in (METHOD_AVERAGE, METHOD_STACK_AVERAGE, METHOD_STACK_PCA):
            tag = f"{subject}/{roi}/{method}"
            extra = {"pca_k": plan.pca_k} if method == METHOD_STACK_PCA else {}
            report, model = evaluate(shared[method], y, subject, roi, method, tag, **extra)
            arts[f"ridge/{tag}"] = model
        elif method == METHOD_WEIGHTED:
            x_scores = accuracy.get(subject, roi)
            builder = literal_power_mean_weights if plan.literal_power_mean else power_weights
            w = builder(x_scores, p)
            mixed = combine_weighted(bundle.task_data, w.weights)
            tag = f"{subject}/{roi}/weighted-average[p={p:g}]"
            report, model = evaluate(mixed, y, subject, roi, METHOD_WEIGHTED, tag,
                                     p=p, weights=tuple(w.weights))
            arts[f"ridge/{tag}"] = model
            arts[f"weights/{tag}"] = w
        elif method == METHOD_DYNAMIC:
            train_embeddings = [EmbeddingMatrix(tid, data[train])
                                for tid, data in zip(bundle.task_ids, bundle.task_data)]
            y_train = VoxelMatrix(subject, roi, y[train])
            fit = fit_dynamic_weights(train_embeddings, y_train, plan.dynamic,
                                      lambda_grid=plan.lambda_grid, cv_folds=plan.cv_folds)
            mixed = combine_weighted(bundle.task_data, fit.weights.weights)
            tag = f"{subject}/{roi}/dynamic"
            report, model = evaluate(mixed, y, subject, roi, METHOD_DYNAMIC, tag,
                                     weights=tuple(fit.weights.weights), converged=fit.converged)
            arts[f"ridge/{tag}"] = model
            arts[f"weights/{tag}"] = fit.weights
        else:
            raise ConfigError(f"unhandled method {method!r}")
        return report, arts

    jobs = []
    for pair_index in range(len(bundle.response_keys)):
        for method in methods:
            if method == METHOD_WEIGHTED:
                for p in plan.p_values:
                    jobs.append((pair_index, method, float(p)))
            else:
                jobs.append((pair_index, method, None))

    results = _run_units([lambda j=j: unit(*j) for j in jobs], plan.threads)
    reports = []
    for report, arts in results:
        reports.append(report)
        artifacts.update(arts)
    return reports, artifacts


def run_experiment(bundle: DataBundle, plan: ExperimentPlan,
                   cache: ModelCache | None = None) -> RunResult:
    """Baselines (when requested or needed) followed by the ensemble grid."""
    reports: list[EvaluationReport] = []
    artifacts: dict[str, object] = {}
    accuracy = None
    needs_accuracy = METHOD_WEIGHTED in plan.methods
    wants_baselines = METHOD_BASELINE in plan.methods
    if needs_accuracy and plan.skip_baselines:
        raise MissingAccuracyTable(
            "weighted-average requires baseline accuracies but baselines were skipped")
    if (wants_baselines or needs_accuracy) and not plan.skip_baselines:
        base_reports, accuracy, base_arts = run_baselines(
            bundle, plan, cache, emit_reports=wants_baselines)
        reports.extend(base_reports)
        artifacts.update(base_arts)
    ens_reports, ens_arts = run_ensembles(bundle, plan, accuracy, cache)
    reports.extend(ens_reports)
    artifacts.update(ens_arts)
    return RunResult(reports=reports, accuracy=accuracy, artifacts=artifacts)


def save_artifacts(artifacts: dict, out_dir) -> None:
    """Serialize fitted models and weight vectors under sanitized names."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(artifacts):
        obj = artifacts[name]
        safe = name.replace("/", "__").replace(":", "_").replace("[", "_").replace("]", "_").replace("=", "_")
        prefix = out_dir / safe
        if isinstance(obj, RidgeModel):
            save_ridge(obj, prefix)
        elif isinstance(obj, pca_mod.PcaModel):
            pca_mod.save_pca(obj, prefix)
        elif isinstance(obj, WeightVector):
            payload = {"weights": obj.weights.tolist(), "normalized": obj.normalized}
            (out_dir / (safe + ".json")).write_text(json.dumps(payload, indent=2) + "\n")
        else:
            raise ConfigError(f"cannot serialize artifact {name!r} of type {type(obj)!r}")


def method_label(report: EvaluationReport) -> str:
    """Canonical display label, folding in the hyperparameter point."""
    if report.method == METHOD_WEIGHTED and report.p is not None:
        return f"{report.method}[p={report.p:g}]"
    if report.method == METHOD_STACK_PCA and report.pca_k is not None:
        return f"{report.method}[k={report.pca_k}]"
    return report.method


@dataclass(frozen=True)
class SummaryRow:
    label: str
    mean_pearson: float
    mean_two_v_two: float
    count: int


@dataclass(frozen=True)
class Aggregate:
    """Per-method means over the grid plus per-ROI means across subjects."""

    summary: tuple[SummaryRow, ...]
    rois: tuple[str, ...]
    labels: tuple[str, ...]
    per_roi: dict  # roi -> label -> (mean_pearson, mean_two_v_two)


def aggregate(reports) -> Aggregate:
    """Fold reports into per-method and per-ROI means (deterministic order)."""
    reports = list(reports)
    if not reports:
        raise EmptyReports("no evaluation reports to aggregate")
    labels = list(dict.fromkeys(method_label(r) for r in reports))
    rois = list(dict.fromkeys(r.roi_id for r in reports))

    def mean_over(rs):
        return (
            float(np.mean([r.pearson for r in rs])),
            float(np.mean([r.two_v_two for r in rs])),
        )

    summary = []
    for label in labels:
        group = [r for r in reports if method_label(r) == label]
        pc, acc = mean_over(group)
        summary.append(SummaryRow(label=label, mean_pearson=pc, mean_two_v_two=acc,
                                  count=len(group)))
    per_roi = {}
    for roi in rois:
        row = {}
        for label in labels:
            group = [r for r in reports if r.roi_id == roi and method_label(r) == label]
            if group:
                row[label] = mean_over(group)
        per_roi[roi] = row
    return Aggregate(summary=tuple(summary), rois=tuple(rois), labels=tuple(labels),
                     per_roi=per_roi)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_reports_csv(path, reports) -> None:
    lines = ["subject,roi,method,p,pearson,two_v_two,lambda,n_test,v_voxels"]
    for r in reports:
        lines.append(",".join([
            r.subject_id, r.roi_id, r.method, _fmt(r.p), _fmt(r.pearson),
            _fmt(r.two_v_two), _fmt(r.lam), str(r.n_test), str(r.v_voxels),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_reports_json(path, reports, meta: dict | None = None) -> None:
    payload = {"meta": meta or {}, "reports": [r.to_json_dict() for r in reports]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_reports_json(path) -> list[EvaluationReport]:
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ParseError(f"reports file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict) or "reports" not in payload:
        raise ParseError(f"{path}: expected an object with a 'reports' array")
    out = []
    for raw in payload["reports"]:
        out.append(EvaluationReport(
            subject_id=raw["subject"], roi_id=raw["roi"], method=raw["method"],
            pearson=raw["pearson"], two_v_two=raw["two_v_two"], n_test=raw["n_test"],
            v_voxels=raw["v_voxels"], lam=raw["lambda"], p=raw.get("p"),
            pca_k=raw.get("pca_k"),
            weights=tuple(raw["weights"]) if raw.get("weights") else None,
            converged=raw.get("converged"),
        ))
    return out


def write_summary_csv(path, agg: Aggregate) -> None:
    lines = ["method,mean_pearson,mean_two_v_two,n_reports"]
    for row in agg.summary:
        lines.append(",".join([
            row.label, _fmt(row.mean_pearson), _fmt(row.mean_two_v_two), str(row.count),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")
