"""Shared fixtures: tiny locally built checkpoints, no hub access.

The checkpoints are random-weight BERT and BART models saved to a session
tmp dir. They are narrow in depth but honor the 768-wide hidden size the
extraction contract requires, so every shape/pooling/determinism property
is exercised exactly as it would be on the real pinned models.
"""

import os
import random

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

import pytest
import torch
import transformers

transformers.utils.logging.set_verbosity_error()
try:
    transformers.utils.logging.disable_progress_bar()
except AttributeError:
    pass

WORDS = ["the", "dog", "ran", "fast", "cat", "sat", "mat", "bird", "sky",
         "blue", "tree", "river", "stone", "wind", "light", "dark", "old",
         "new", "small", "big"]
VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS + ["##s", "##ing", "##ed"]


def make_sentences(n: int, seed: int = 0) -> list:
    rng = random.Random(seed)
    return [" ".join(rng.choices(WORDS, k=rng.randint(3, 12))) for _ in range(n)]


def _save_tokenizer(ck_dir, vocab_path):
    tok = transformers.BertTokenizerFast(str(vocab_path), do_lower_case=True)
    tok.save_pretrained(ck_dir)


@pytest.fixture(scope="session")
def checkpoints(tmp_path_factory):
    """{'bert': path, 'bart': path, 'narrow': path} of saved local models."""
    root = tmp_path_factory.mktemp("checkpoints")
    vocab_path = root / "vocab.txt"
    vocab_path.write_text("\n".join(VOCAB))

    torch.manual_seed(1234)
    bert_cfg = transformers.BertConfig(
        vocab_size=len(VOCAB), hidden_size=768, num_hidden_layers=2,
        num_attention_heads=4, intermediate_size=128, max_position_embeddings=160)
    bert_dir = root / "bert"
    transformers.BertModel(bert_cfg).save_pretrained(bert_dir)
    _save_tokenizer(bert_dir, vocab_path)

    bart_cfg = transformers.BartConfig(
        vocab_size=len(VOCAB), d_model=768, encoder_layers=1, decoder_layers=1,
        encoder_attention_heads=4, decoder_attention_heads=4,
        encoder_ffn_dim=128, decoder_ffn_dim=128, max_position_embeddings=160)
    bart_dir = root / "bart"
    transformers.BartModel(bart_cfg).save_pretrained(bart_dir)
    _save_tokenizer(bart_dir, vocab_path)

    # violates the 768-wide contract on purpose
    narrow_cfg = transformers.BertConfig(
        vocab_size=len(VOCAB), hidden_size=64, num_hidden_layers=1,
        num_attention_heads=2, intermediate_size=32, max_position_embeddings=160)
    narrow_dir = root / "narrow"
    transformers.BertModel(narrow_cfg).save_pretrained(narrow_dir)
    _save_tokenizer(narrow_dir, vocab_path)

    return {"bert": str(bert_dir), "bart": str(bart_dir), "narrow": str(narrow_dir)}


@pytest.fixture()
def stimuli_file(tmp_path):
    path = tmp_path / "stimuli.txt"
    path.write_text("\n".join(make_sentences(40, seed=7)) + "\n")
    return path
