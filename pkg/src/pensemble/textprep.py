"""Tokenization, first-words feature selection, vocabulary, integer encoding.

The tokenizer lowercases and splits on maximal runs of non-alphanumeric
characters (underscore counts as a separator); no stop words, no stemming.
Sequences are post-padded so leading words keep fixed positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

FIRST_X = "first_x"
FIRST_Y_PER_SECTION = "first_y_per_section"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; empty tokens dropped."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class FeatureSpec:
    """First-X words of one pool text, or first-Y words from each section."""

    mode: str
    words: int

    def __post_init__(self):
        if self.mode not in (FIRST_X, FIRST_Y_PER_SECTION):
            raise ValueError(f"unknown feature mode {self.mode!r}")
        if self.words < 1:
            raise ValueError(f"word count must be >= 1, got {self.words}")

    @property
    def sequence_length(self) -> int:
        return self.words if self.mode == FIRST_X else 3 * self.words

    def to_dict(self) -> dict:
        return {"mode": self.mode, "words": self.words}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(mode=d["mode"], words=int(d["words"]))


def select_words(doc_or_text, spec: FeatureSpec) -> list[str]:
    """Apply the first-words selection.

    first_x mode takes one text (or pre-tokenized list) and keeps its first
    X tokens. first_y_per_section mode takes a (title_abstract, description,
    claims) triple, a document with those attributes, or three token lists,
    and concatenates the first Y tokens of each section in that order.
    """
    if spec.mode == FIRST_X:
        tokens = doc_or_text if isinstance(doc_or_text, list) else tokenize(doc_or_text)
        return tokens[: spec.words]
    sections = _section_triple(doc_or_text)
    selected: list[str] = []
    for section in sections:
        tokens = section if isinstance(section, list) else tokenize(section)
        selected.extend(tokens[: spec.words])
    return selected


def _section_triple(doc_or_triple):
    if isinstance(doc_or_triple, (tuple, list)) and len(doc_or_triple) == 3:
        return tuple(doc_or_triple)
    try:
        return (doc_or_triple.title_abstract, doc_or_triple.description, doc_or_triple.claims)
    except AttributeError:
        raise TypeError(
            "per-section selection needs a (title_abstract, description, claims) "
            "triple or an object with those attributes"
        ) from None


@dataclass
class Vocabulary:
    """Token-to-index map; index 0 is padding, index 1 is the unknown token."""

    token_to_index: dict[str, int]
    index_to_token: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.index_to_token:
            self.index_to_token = [""] * len(self.token_to_index)
            for token, index in self.token_to_index.items():
                self.index_to_token[index] = token

    @property
    def size(self) -> int:
        return len(self.index_to_token)

    def index_of(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_INDEX)

    def token_at(self, index: int) -> str:
        return self.index_to_token[index]

    @classmethod
    def from_tokens(cls, index_to_token: list[str]) -> "Vocabulary":
        return cls({t: i for i, t in enumerate(index_to_token)}, list(index_to_token))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for index, token in enumerate(self.index_to_token):
                fh.write(f"{token}\t{index}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        index_to_token: list[str] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                token, _, index = line.rpartition("\t")
                if int(index) != len(index_to_token):
                    raise ValueError(f"vocabulary file out of order at index {index}")
                index_to_token.append(token)
        return cls.from_tokens(index_to_token)


def build_vocabulary(train_token_lists, min_count: int = 1) -> Vocabulary:
    """Build the token map from training sequences only (leakage guard).

    Tokens with frequency >= min_count are indexed in descending frequency
    order, ties broken lexicographically; everything else maps to unknown.
    """
    counts: dict[str, int] = {}
    for tokens in train_token_lists:
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
    kept = sorted(
        (token for token, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    index_to_token = [PAD_TOKEN, UNK_TOKEN] + kept
    return Vocabulary.from_tokens(index_to_token)


@dataclass
class TokenSequence:
    """Fixed-length integer encoding of one document's selected words."""

    doc_id: str
    indices: np.ndarray
    true_length: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int32)


def encode(tokens: list[str], vocab: Vocabulary, target_length: int, doc_id: str = "") -> TokenSequence:
    """Map tokens to indices (unknown -> 1), truncate, and post-pad with 0."""
    if target_length < 1:
        raise ValueError(f"target_length must be >= 1, got {target_length}")
    indices = np.full(target_length, PAD_INDEX, dtype=np.int32)
    kept = tokens[:target_length]
    for i, token in enumerate(kept):
        indices[i] = vocab.index_of(token)
    return TokenSequence(doc_id=doc_id, indices=indices, true_length=len(kept))


def decode(sequence: TokenSequence, vocab: Vocabulary) -> list[str]:
    """Indices back to tokens, dropping padding positions."""
    return [vocab.token_at(int(i)) for i in sequence.indices[: sequence.true_length]]
