import random

import pytest
from transformers import BertConfig, BertForSequenceClassification, BertTokenizerFast

from hf_adapter.records import PREP_HEADER

VOCAB = (["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "="]
         + [str(d) for d in range(10)]
         + [chr(c) for c in range(ord("a"), ord("z") + 1)]
         + [f"##{d}" for d in range(10)]
         + [f"f{i}" for i in range(16)])


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A locally built hub-format sequence-classification model."""
    path = tmp_path_factory.mktemp("tiny-model")
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=16, num_hidden_layers=1,
                        num_attention_heads=2, intermediate_size=32,
                        max_position_embeddings=128, num_labels=1)
    model = BertForSequenceClassification(config)
    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return path


def write_synth_prep(path, n=200, seed=0):
    """Prepared-record file with a simple learnable rule: attack iff f0 > 4."""
    rng = random.Random(seed)
    lines = [PREP_HEADER]
    for i in range(n):
        v0 = rng.randint(0, 9)
        v1 = rng.randint(0, 9)
        label = int(v0 > 4)
        lines.append(f"{i}\t{label}\t{label}\tf0={v0} f1={v1}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def prep_file(tmp_path):
    return write_synth_prep(tmp_path / "synth.prep")
