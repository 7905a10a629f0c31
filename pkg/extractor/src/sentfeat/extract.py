"""Turn a stimuli file into fixed-size sentence feature tensors.

One tensor per checkpoint: row s is the pooled final-layer hidden state
of stimulus line s. Output files are NPY v1.0, float64, C-order, exactly
what the encoding pipeline's manifest loader expects. Inference is CPU,
no-grad, and deterministic for a fixed checkpoint revision, so reruns
are byte-identical.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from sentfeat.errors import (
    FeatureDimensionError,
    LockFileError,
    ModelLoadError,
    NonFiniteFeatures,
    SentfeatError,
    StimuliError,
    TokenizationError,
    TruncationWarning,
    UsageError,
)

EXPECTED_DIM = 768
POOLING_MODES = ("mean", "cls")


@dataclass(frozen=True)
class ExtractionJob:
    """Everything needed to produce one feature tensor from one checkpoint."""

    stimuli_path: str
    model_id: str
    output_path: str
    pooling: str = "mean"
    layer: int | None = None  # index into hidden_states; None = final layer
    revision: str | None = None
    max_length: int = 128
    batch_size: int = 32

    def __post_init__(self):
        if self.pooling not in POOLING_MODES:
            raise UsageError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")
        if self.max_length < 8:
            raise UsageError(f"max_length must be at least 8, got {self.max_length}")
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be positive, got {self.batch_size}")


def read_stimuli(path) -> list:
    """One sentence per line, UTF-8. Empty files and blank lines are errors."""
    path = Path(path)
    if not path.is_file():
        raise StimuliError(f"stimuli file not found: {path}")
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise StimuliError(f"{path} is not valid UTF-8: {exc}") from exc
    if not lines:
        raise StimuliError(f"stimuli file is empty: {path}")
    for i, line in enumerate(lines):
        if not line.strip():
            raise StimuliError(f"{path}: line {i + 1} is blank; every line must be a sentence")
    return lines


def load_checkpoint(model_id: str, revision=None):
    """Resolve (tokenizer, model) for a hub id or local checkpoint directory."""
    from transformers import AutoModel, AutoTokenizer

    kwargs = {} if revision is None else {"revision": revision}
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id, **kwargs)
        model = AutoModel.from_pretrained(model_id, **kwargs)
    except Exception as exc:
        raise ModelLoadError(f"cannot load checkpoint {model_id!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _encoder_module(model):
    # encoder-decoder checkpoints (e.g. the summarization model) contribute
    # their encoder-side states only; the decoder never runs
    if getattr(model.config, "is_encoder_decoder", False):
        return model.get_encoder()
    return model


def _pool(hidden: torch.Tensor, mask: torch.Tensor, pooling: str) -> torch.Tensor:
    if pooling == "cls":
        return hidden[:, 0, :]
    m = mask.unsqueeze(-1).to(hidden.dtype)
    return (hidden * m).sum(dim=1) / m.sum(dim=1)


def extract(job: ExtractionJob) -> np.ndarray:
    """Run one checkpoint over the stimuli and write the pooled tensor.

    Returns the (n_lines, 768) float64 array that was written. Lines
    longer than the token budget are truncated with a TruncationWarning;
    a checkpoint whose hidden size is not 768 is a hard error, because
    every downstream consumer assumes that width.
    """
    lines = read_stimuli(job.stimuli_path)
    tokenizer, model = load_checkpoint(job.model_id, job.revision)

    width = int(getattr(model.config, "hidden_size", 0))
    if width != EXPECTED_DIM:
        raise FeatureDimensionError(
            f"checkpoint {job.model_id!r} has hidden size {width}, expected {EXPECTED_DIM}")

    try:
        full_lengths = [len(ids) for ids in tokenizer(lines, truncation=False)["input_ids"]]
    except Exception as exc:
        raise TokenizationError(f"tokenizing stimuli failed: {exc}") from exc
    over = sum(length > job.max_length for length in full_lengths)
    if over:
        warnings.warn(
            f"{over} of {len(lines)} stimuli exceed {job.max_length} tokens and were truncated",
            TruncationWarning,
            stacklevel=2,
        )

    module = _encoder_module(model)
    chunks = []
    with torch.no_grad():
        for start in range(0, len(lines), job.batch_size):
            batch = lines[start:start + job.batch_size]
            try:
                enc = tokenizer(batch, padding=True, truncation=True,
                                max_length=job.max_length, return_tensors="pt")
            except Exception as exc:
                raise TokenizationError(f"tokenizing batch at line {start + 1} failed: {exc}") from exc
            out = module(input_ids=enc["input_ids"], attention_mask=enc["attention_mask"],
                         output_hidden_states=job.layer is not None)
            hidden = out.last_hidden_state if job.layer is None else out.hidden_states[job.layer]
            pooled = _pool(hidden, enc["attention_mask"], job.pooling)
            chunks.append(pooled.to(torch.float64).cpu().numpy())

    feats = np.ascontiguousarray(np.vstack(chunks))
    if not np.all(np.isfinite(feats)):
        raise NonFiniteFeatures(f"checkpoint {job.model_id!r} produced non-finite activations")

    out_path = Path(job.output_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "wb") as fh:
        np.lib.format.write_array(fh, feats, version=(1, 0))
    return feats


def load_lock(path) -> dict:
    """Parse a model lock file: {task_id: {"checkpoint": ..., "revision": ...}}.

    Order is significant and preserved; it becomes the task order of the
    emitted manifest fragment.
    """
    path = Path(path)
    if not path.is_file():
        raise LockFileError(f"lock file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LockFileError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise LockFileError(f"{path}: lock file must be a JSON object")
    models = {}
    for task_id, entry in raw.items():
        if not isinstance(entry, dict) or "checkpoint" not in entry:
            raise LockFileError(f"{path}: entry {task_id!r} needs a 'checkpoint' field")
        models[str(task_id)] = {
            "checkpoint": str(entry["checkpoint"]),
            "revision": entry.get("revision"),
        }
    return models


def extract_all(stimuli_path, models: dict, out_dir, pooling: str = "mean",
                layer=None, max_length: int = 128, batch_size: int = 32):
    """Extract every model in the lock mapping, sequentially.

    Returns (fragment, failures): the manifest ``tasks`` array for the
    models that succeeded, in lock order, and a {task_id: message} dict
    for those that did not. A failing model never aborts the rest.
    """
    if not models:
        raise UsageError("model list is empty; nothing to extract")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = []
    failures = {}
    for task_id, spec in models.items():
        job = ExtractionJob(
            stimuli_path=str(stimuli_path),
            model_id=spec["checkpoint"],
            output_path=str(out_dir / f"{task_id}.npy"),
            pooling=pooling,
            layer=layer,
            revision=spec.get("revision"),
            max_length=max_length,
            batch_size=batch_size,
        )
        try:
            extract(job)
        except (StimuliError, UsageError):
            raise  # caller mistakes would fail identically for every model
        except SentfeatError as exc:
            failures[task_id] = str(exc)
        else:
            tasks.append({"id": task_id, "path": f"{task_id}.npy"})
    return {"tasks": tasks}, failures
