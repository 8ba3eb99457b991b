"""Synthetic patent-like corpora for desk-scale experiments.

Each document gets a gold label from a balanced assignment; each of its
three sections independently contains the label-revealing token
"sigtok_<label>" with probability p_signal, placed at a random position
among filler tokens drawn uniformly from a filler vocabulary. With
p_signal < 1 the sections carry complementary partial evidence, which is
what gives an averaging ensemble room to beat its members.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import IpcSubclass, PatentDocument, write_corpus_jsonl
from .util import derive_seed


@dataclass
class SyntheticCorpusSpec:
    num_docs: int
    num_labels: int
    vocab_size: int = 200
    p_signal: float = 1.0
    filler_min: int = 5
    filler_max: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.num_labels < 2:
            raise ValueError("num_labels must be >= 2")
        if self.num_labels > 100:
            raise ValueError("synthetic label codes support at most 100 labels")
        if not 0.0 <= self.p_signal <= 1.0:
            raise ValueError("p_signal must be in [0, 1]")
        if not 1 <= self.filler_min <= self.filler_max:
            raise ValueError("need 1 <= filler_min <= filler_max")


def synthetic_label(index: int) -> IpcSubclass:
    """Valid IPC-shaped code for synthetic label `index` (e.g. 3 -> A03Z)."""
    return IpcSubclass(f"A{index:02d}Z")


def generate_synthetic(spec: SyntheticCorpusSpec) -> list[PatentDocument]:
    """Generate documents; label counts are balanced within +/-1."""
    rng = np.random.Generator(np.random.PCG64(derive_seed(spec.seed, "synthetic")))
    labels = [i % spec.num_labels for i in range(spec.num_docs)]
    rng.shuffle(labels)
    docs = []
    for i, label in enumerate(labels):
        sections = [_section_text(rng, spec, label) for _ in range(3)]
        docs.append(
            PatentDocument(
                doc_id=f"syn{i:05d}",
                title_abstract=sections[0],
                description=sections[1],
                claims=sections[2],
                main_label=synthetic_label(label),
            )
        )
    return docs


def _section_text(rng: np.random.Generator, spec: SyntheticCorpusSpec, label: int) -> str:
    length = int(rng.integers(spec.filler_min, spec.filler_max + 1))
    tokens = [f"w{int(j)}" for j in rng.integers(0, spec.vocab_size, size=length)]
    if rng.random() < spec.p_signal:
        position = int(rng.integers(0, length + 1))
        tokens.insert(position, f"sigtok_{label}")
    return " ".join(tokens)


def write_synthetic(spec: SyntheticCorpusSpec, path) -> list[PatentDocument]:
    docs = generate_synthetic(spec)
    write_corpus_jsonl(docs, path)
    return docs
