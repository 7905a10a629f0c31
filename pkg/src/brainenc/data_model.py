"""On-disk and in-memory data model: tensor files, manifests, splits.

Tensor files are NPY v1.0, little-endian, C-order, 2-D, dtype f4 or f8;
values are widened to float64 on load and non-finite values are rejected
outright.  A dataset manifest is a JSON document binding task feature
files and (subject, ROI) response files to a common stimulus count and a
train/test split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib import format as npy_format

from .errors import (
    ConfigError,
    FormatError,
    MissingFile,
    NonFiniteValue,
    ParseError,
    ShapeMismatch,
    TooFewSamples,
)

DEFAULT_DIM = 768
SUPPORTED_RATIO = "4:1"
_ALLOWED_DTYPES = ("<f4", "<f8")


def _as_matrix(data, what: str) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{what} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatch(f"{what} has an empty axis: shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteValue(f"{what} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class EmbeddingMatrix:
    """One task model's stimulus representations, n_samples x dim.

    The array is treated as immutable after construction; do not write
    to ``data`` in place.
    """

    task_id: str
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_matrix(self.data, f"embeddings[{self.task_id}]"))

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class VoxelMatrix:
    """Measured responses for one (subject, ROI), n_samples x n_voxels."""

    subject_id: str
    roi_id: str
    data: np.ndarray

    def __post_init__(self):
        name = f"responses[{self.subject_id}/{self.roi_id}]"
        object.__setattr__(self, "data", _as_matrix(self.data, name))

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    """A 4:1 train/test partition of sample indices 0..n-1."""

    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int = 0

    def __post_init__(self):
        train = np.asarray(self.train_indices, dtype=np.int64)
        test = np.asarray(self.test_indices, dtype=np.int64)
        object.__setattr__(self, "train_indices", train)
        object.__setattr__(self, "test_indices", test)
        n = train.size + test.size
        combined = np.concatenate([train, test])
        if not np.array_equal(np.sort(combined), np.arange(n)):
            raise ParseError("split is not a partition of 0..N-1")
        if not (np.all(np.diff(train) > 0) and np.all(np.diff(test) > 0)):
            raise ParseError("split index lists must be strictly increasing")

    @property
    def n_samples(self) -> int:
        return self.train_indices.size + self.test_indices.size

    def to_json_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "train_indices": [int(i) for i in self.train_indices],
            "test_indices": [int(i) for i in self.test_indices],
        }


@dataclass(frozen=True)
class ResponseRef:
    subject_id: str
    roi_id: str
    path: Path
    expected_voxels: int | None = None


@dataclass(frozen=True)
class DatasetManifest:
    """Validated description of one dataset on disk.

    ``tasks`` is ordered; its positions fix the task index used by every
    ensembling operation.
    """

    stimulus_count: int
    dim: int
    tasks: tuple[tuple[str, Path], ...]
    responses: tuple[ResponseRef, ...]
    split: SplitSpec
    passage_ids: np.ndarray | None = None
    root: Path = field(default_factory=Path)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def task_ids(self) -> tuple[str, ...]:
        return tuple(tid for tid, _ in self.tasks)


def write_tensor(path, data) -> None:
    """Write a 2-D float64 matrix as NPY v1.0 (little-endian, C-order)."""
    arr = _as_matrix(data, "tensor")
    path = Path(path)
    with path.open("wb") as fh:
        npy_format.write_array(fh, np.ascontiguousarray(arr), version=(1, 0))


def _read_header(fh, path) -> tuple[tuple[int, int], np.dtype]:
    try:
        version = npy_format.read_magic(fh)
    except ValueError as exc:
        raise FormatError(f"{path}: not an NPY file ({exc})") from exc
    if version != (1, 0):
        raise FormatError(f"{path}: NPY version {version} unsupported, need v1.0")
    try:
        shape, fortran_order, dtype = npy_format.read_array_header_1_0(fh)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed NPY header ({exc})") from exc
    if fortran_order:
        raise FormatError(f"{path}: Fortran-order arrays are not supported")
    if dtype.str not in _ALLOWED_DTYPES:
        raise FormatError(f"{path}: dtype {dtype.str!r} unsupported, need one of {_ALLOWED_DTYPES}")
    if len(shape) != 2:
        raise FormatError(f"{path}: expected a 2-D tensor, got shape {shape}")
    if shape[0] < 1 or shape[1] < 1:
        raise FormatError(f"{path}: empty axis in shape {shape}")
    return shape, dtype


def peek_tensor_shape(path) -> tuple[int, int]:
    """Return the (rows, cols) of a tensor file by reading only its header."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"tensor file not found: {path}")
    with path.open("rb") as fh:
        shape, _ = _read_header(fh, path)
    return shape


def load_tensor(path) -> np.ndarray:
    """Load a 2-D tensor file into a read-only float64 matrix."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"tensor file not found: {path}")
    with path.open("rb") as fh:
        shape, dtype = _read_header(fh, path)
        count = shape[0] * shape[1]
        data = np.fromfile(fh, dtype=dtype, count=count)
    if data.size != count:
        raise FormatError(f"{path}: truncated payload, expected {count} values got {data.size}")
    out = data.reshape(shape).astype(np.float64, copy=False)
    if not np.isfinite(out).all():
        raise NonFiniteValue(f"{path}: tensor contains NaN or Inf")
    out = np.ascontiguousarray(out)
    out.flags.writeable = False
    return out


def make_split(n_samples: int, seed: int) -> SplitSpec:
    """Deterministic 4:1 random split with |test| = round(n_samples / 5).

    The permutation comes from numpy's PCG64 generator seeded with
    ``seed``, so the same (n_samples, seed) always yields the same split.
    """
    if n_samples < 5:
        raise TooFewSamples(f"need at least 5 samples for a 4:1 split, got {n_samples}")
    n_test = int(round(n_samples / 5))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_samples)
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    return SplitSpec(train_indices=train, test_indices=test, seed=seed)


def make_grouped_split(passage_ids, seed: int) -> SplitSpec:
    """4:1 split that keeps every passage entirely in train or in test.

    Whole passages are assigned to the test side, in shuffled order,
    until the test size is as close as possible to round(N / 5) while
    keeping both sides non-empty.
    """
    passage_ids = np.asarray(passage_ids)
    n = passage_ids.size
    if n < 5:
        raise TooFewSamples(f"need at least 5 samples for a 4:1 split, got {n}")
    target = int(round(n / 5))
    unique = list(dict.fromkeys(passage_ids.tolist()))
    rng = np.random.default_rng(seed)
    order = [unique[i] for i in rng.permutation(len(unique))]

    chosen: list = []
    size = 0
    for pid in order:
        if size >= target:
            break
        chosen.append(pid)
        size += int(np.sum(passage_ids == pid))
    # dropping the overshooting passage may land closer to the target,
    # but never at the cost of an empty test side
    if len(chosen) > 1:
        without_last = size - int(np.sum(passage_ids == chosen[-1]))
        if abs(without_last - target) < abs(size - target):
            chosen.pop()
    test_mask = np.isin(passage_ids, chosen)
    test = np.flatnonzero(test_mask)
    train = np.flatnonzero(~test_mask)
    if train.size == 0 or test.size == 0:
        raise TooFewSamples("passage grouping produced an empty split side")
    return SplitSpec(train_indices=train, test_indices=test, seed=seed)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ParseError(message)


def _parse_split(raw, n_samples: int, passage_ids, group_by_passage: bool) -> SplitSpec:
    _require(isinstance(raw, dict), "manifest 'split' must be an object")
    if "train_indices" in raw or "test_indices" in raw:
        _require("train_indices" in raw and "test_indices" in raw,
                 "explicit split needs both train_indices and test_indices")
        spec = SplitSpec(
            train_indices=np.asarray(raw["train_indices"], dtype=np.int64),
            test_indices=np.asarray(raw["test_indices"], dtype=np.int64),
            seed=int(raw.get("seed", 0)),
        )
        _require(spec.n_samples == n_samples,
                 f"explicit split covers {spec.n_samples} samples, manifest declares {n_samples}")
        return spec
    _require("seed" in raw, "ratio split needs a 'seed'")
    ratio = raw.get("ratio", SUPPORTED_RATIO)
    _require(ratio == SUPPORTED_RATIO, f"unsupported split ratio {ratio!r}, only {SUPPORTED_RATIO}")
    seed = int(raw["seed"])
    if group_by_passage:
        if passage_ids is None:
            raise ConfigError("--group-by-passage requires 'passage_ids' in the manifest")
        return make_grouped_split(passage_ids, seed)
    return make_split(n_samples, seed)


def load_manifest(path, group_by_passage: bool = False, split_seed: int | None = None) -> DatasetManifest:
    """Load and fully validate a dataset manifest.

    Every referenced tensor file must exist and its header must match the
    declared stimulus count, feature dimension, and (when given) voxel
    count.  ``split_seed`` overrides the manifest's ratio-split seed.

    Raises ParseError, MissingFile, ShapeMismatch, or FormatError.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    _require(isinstance(raw, dict), f"{path}: manifest must be a JSON object")

    for key in ("stimulus_count", "dim", "tasks", "responses", "split"):
        _require(key in raw, f"{path}: missing manifest key {key!r}")
    n = raw["stimulus_count"]
    dim = raw["dim"]
    _require(isinstance(n, int) and n > 0, "stimulus_count must be a positive integer")
    _require(isinstance(dim, int) and dim > 0, "dim must be a positive integer")

    root = path.parent
    _require(isinstance(raw["tasks"], list) and raw["tasks"], "manifest 'tasks' must be a non-empty array")
    tasks: list[tuple[str, Path]] = []
    for entry in raw["tasks"]:
        _require(isinstance(entry, dict) and "id" in entry and "path" in entry,
                 "each task entry needs 'id' and 'path'")
        tasks.append((str(entry["id"]), root / entry["path"]))
    ids = [tid for tid, _ in tasks]
    _require(len(set(ids)) == len(ids), f"duplicate task ids in manifest: {sorted(ids)}")

    responses: list[ResponseRef] = []
    _require(isinstance(raw["responses"], list), "manifest 'responses' must be an array")
    for entry in raw["responses"]:
        _require(isinstance(entry, dict) and "subject" in entry and "roi" in entry and "path" in entry,
                 "each response entry needs 'subject', 'roi' and 'path'")
        voxels = entry.get("voxels")
        _require(voxels is None or (isinstance(voxels, int) and voxels > 0),
                 "'voxels' must be a positive integer when present")
        responses.append(ResponseRef(str(entry["subject"]), str(entry["roi"]), root / entry["path"], voxels))

    passage_ids = None
    if raw.get("passage_ids") is not None:
        passage_ids = np.asarray(raw["passage_ids"], dtype=np.int64)
        _require(passage_ids.size == n,
                 f"passage_ids has {passage_ids.size} entries, expected {n}")

    for tid, tpath in tasks:
        shape = peek_tensor_shape(tpath)
        if shape != (n, dim):
            raise ShapeMismatch(f"task {tid!r}: file {tpath} has shape {shape}, manifest declares ({n}, {dim})")
    for ref in responses:
        shape = peek_tensor_shape(ref.path)
        if shape[0] != n:
            raise ShapeMismatch(
                f"response {ref.subject_id}/{ref.roi_id}: file has {shape[0]} rows, manifest declares {n}")
        if ref.expected_voxels is not None and shape[1] != ref.expected_voxels:
            raise ShapeMismatch(
                f"response {ref.subject_id}/{ref.roi_id}: file has {shape[1]} voxels, "
                f"manifest declares {ref.expected_voxels}")

    split_raw = dict(raw["split"])
    if split_seed is not None and "train_indices" not in split_raw:
        split_raw["seed"] = int(split_seed)
    split = _parse_split(split_raw, n, passage_ids, group_by_passage)

    return DatasetManifest(
        stimulus_count=n,
        dim=dim,
        tasks=tuple(tasks),
        responses=tuple(responses),
        split=split,
        passage_ids=passage_ids,
        root=root,
    )
