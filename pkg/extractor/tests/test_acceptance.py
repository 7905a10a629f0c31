"""Release gate for the extractor, same checklist convention as the
encoding package: one printed ``[acceptance] criterion N`` line per check.

Numbering continues the encoding package's gate (criteria 12-14). The
checkpoints are the tiny local ones from conftest; they honor the 768-d
contract, so every asserted property (shape, pooling, determinism, NPY
handoff) transfers unchanged to the real pinned models.
"""

import csv
import json
import subprocess
import sys
import time
import xml.dom.minidom
from contextlib import contextmanager

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from sentfeat.extract import ExtractionJob, extract, extract_all

from conftest import make_sentences


@contextmanager
def criterion(capsys, n: int, label: str):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"[acceptance] criterion {n:2d}: FAIL ({time.perf_counter() - t0:6.2f}s) {label}")
        raise
    with capsys.disabled():
        print(f"[acceptance] criterion {n:2d}: PASS ({time.perf_counter() - t0:6.2f}s) {label}")


def test_criterion_12(capsys, checkpoints, tmp_path):
    with criterion(capsys, 12, "627-line extraction: 627x768, finite, rerun byte-identical"):
        stim = tmp_path / "stimuli.txt"
        stim.write_text("\n".join(make_sentences(627, seed=29)) + "\n")
        for name in ("bert", "bart"):
            a = tmp_path / f"{name}_a.npy"
            b = tmp_path / f"{name}_b.npy"
            feats = extract(ExtractionJob(str(stim), checkpoints[name], str(a)))
            assert feats.shape == (627, 768)
            assert np.all(np.isfinite(feats))
            extract(ExtractionJob(str(stim), checkpoints[name], str(b)))
            assert a.read_bytes() == b.read_bytes()
            # row order: a shifted stimulus list shifts the features with it
        head = tmp_path / "head.txt"
        lines = stim.read_text().splitlines()
        head.write_text("\n".join(lines[:16]))
        sub = extract(ExtractionJob(str(head), checkpoints["bert"], str(tmp_path / "h.npy"),
                                    batch_size=16))
        full = np.load(tmp_path / "bert_a.npy")
        np.testing.assert_allclose(sub, full[:16], atol=1e-5, rtol=0)


def test_criterion_13(capsys, checkpoints, tmp_path):
    with criterion(capsys, 13, "mean pooling equals token average from the same pass"):
        sentences = make_sentences(10, seed=31)
        stim = tmp_path / "s.txt"
        stim.write_text("\n".join(sentences))
        feats = extract(ExtractionJob(str(stim), checkpoints["bert"], str(tmp_path / "f.npy")))

        tok = AutoTokenizer.from_pretrained(checkpoints["bert"])
        model = AutoModel.from_pretrained(checkpoints["bert"])
        model.eval()
        enc = tok(sentences, padding=True, return_tensors="pt")
        with torch.no_grad():
            hidden = model(input_ids=enc["input_ids"],
                           attention_mask=enc["attention_mask"]).last_hidden_state
        for s in range(10):
            n_tok = int(enc["attention_mask"][s].sum())
            oracle = hidden[s, :n_tok].numpy().mean(axis=0)
            assert np.abs(feats[s] - oracle).max() <= 1e-5


def test_criterion_14(capsys, checkpoints, tmp_path):
    with criterion(capsys, 14, "extracted tensors drive the encoding pipeline end to end"):
        n = 60
        stim = tmp_path / "stimuli.txt"
        stim.write_text("\n".join(make_sentences(n, seed=37)))
        models = {
            "general": {"checkpoint": checkpoints["bert"], "revision": None},
            "summarization": {"checkpoint": checkpoints["bart"], "revision": None},
        }
        data = tmp_path / "data"
        fragment, failures = extract_all(stim, models, data)
        assert failures == {}

        # synthetic voxel targets: plumbing validation only, scores unasserted
        rng = np.random.default_rng(37)
        resp = rng.standard_normal((n, 15))
        with open(data / "resp_S01_R1.npy", "wb") as fh:
            np.lib.format.write_array(fh, resp, version=(1, 0))
        manifest = {
            "stimulus_count": n,
            "dim": 768,
            "tasks": fragment["tasks"],
            "responses": [{"subject": "S01", "roi": "R1", "path": "resp_S01_R1.npy"}],
            "split": {"seed": 3},
        }
        (data / "manifest.json").write_text(json.dumps(manifest, indent=2))
        plan = {"lambda_grid": [0.01, 1.0, 100.0], "pca_k": 8,
                "dynamic": {"max_epochs": 30, "patience": 6}}
        (tmp_path / "plan.json").write_text(json.dumps(plan))

        out = tmp_path / "results"
        proc = subprocess.run(
            [sys.executable, "-m", "brainenc", "run",
             "--manifest", str(data / "manifest.json"),
             "--plan", str(tmp_path / "plan.json"), "--out", str(out)],
            capture_output=True, text=True, timeout=600)
        assert proc.returncode == 0, proc.stderr

        rows = list(csv.DictReader(open(out / "reports.csv")))
        assert rows and {"subject", "roi", "method", "pearson", "two_v_two"} <= set(rows[0])
        methods = {r["method"] for r in rows}
        assert {"average", "dynamic", "stack-pca"} <= methods
        json.load(open(out / "reports.json"))
        xml.dom.minidom.parse(str(out / "figure.svg"))
