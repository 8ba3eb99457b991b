"""Word vectors: text-format loading, skip-gram training, matrix assembly.

The skip-gram trainer is negative sampling with a unigram^0.75 noise
distribution and the classic per-pair update rule; it exists so the pipeline
can self-train embeddings on a corpus without external toolkits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .textprep import PAD_INDEX, UNK_INDEX, Vocabulary
from .util import derive_seed

PRETRAINED_FILE = "pretrained_file"
SKIPGRAM_TRAINED = "skipgram_trained"


class EmbeddingFormatError(Exception):
    pass


@dataclass
class EmbeddingTable:
    """Token -> vector map with a fixed dimension; entries are finite reals."""

    dim: int
    vectors: dict[str, np.ndarray]
    source: str
    epoch_losses: list[float] = field(default_factory=list)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[token]

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class SkipGramConfig:
    dim: int = 300
    window: int = 8
    epochs: int = 20
    negative_samples: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.epochs < 1:
            raise ValueError("dim, window and epochs must all be >= 1")
        if self.negative_samples < 1:
            raise ValueError("negative_samples must be >= 1")


def load_pretrained(path) -> EmbeddingTable:
    """Load a word-vector text file: optional `count dim` header, then
    one `token v1 ... vdim` line per entry. Dimension is inferred from the
    first vector line and enforced afterwards."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if line_no == 1 and len(parts) == 2 and _is_int(parts[0]) and _is_int(parts[1]):
                continue  # header line
            token, components = parts[0], parts[1:]
            if dim is None:
                if not components:
                    raise EmbeddingFormatError(f"line {line_no}: no vector components")
                dim = len(components)
            elif len(components) != dim:
                raise EmbeddingFormatError(
                    f"line {line_no}: expected {dim} components, found {len(components)}"
                )
            try:
                vec = np.array([float(c) for c in components], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingFormatError(f"line {line_no}: non-numeric component ({exc})") from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"line {line_no}: non-finite component")
            vectors[token] = vec
    if dim is None:
        raise EmbeddingFormatError("no vector lines in file")
    return EmbeddingTable(dim=dim, vectors=vectors, source=PRETRAINED_FILE)


def _is_int(s: str) -> bool:
    try:
        int(s)
        return True
    except ValueError:
        return False


def save_table(table: EmbeddingTable, path, header: bool = True) -> None:
    """Write the word-vector text format; repr components round-trip bit-exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(table.vectors)} {table.dim}\n")
        for token, vec in table.vectors.items():
            fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def train_skipgram(token_stream, config: SkipGramConfig) -> EmbeddingTable:
    """Train skip-gram embeddings with negative sampling.

    For each position a reduced window b ~ U{1..window} is drawn and all
    context words within distance b become positive pairs; each pair draws
    k negatives from the unigram^0.75 distribution. Center vectors start
    uniform in [-0.5/dim, 0.5/dim]; the learning rate decays linearly per
    epoch. Deterministic under the config seed (single worker).
    """
    documents = [list(doc) for doc in token_stream]
    if not documents or all(len(d) == 0 for d in documents):
        raise ValueError("empty token stream")

    counts: dict[str, int] = {}
    for doc in documents:
        for token in doc:
            counts[token] = counts.get(token, 0) + 1
    tokens = sorted((t for t, c in counts.items() if c >= config.min_count),
                    key=lambda t: (-counts[t], t))
    if not tokens:
        raise ValueError("no tokens pass min_count")
    index_of = {t: i for i, t in enumerate(tokens)}
    n = len(tokens)
    dim = config.dim

    noise = np.array([counts[t] ** 0.75 for t in tokens], dtype=np.float64)
    noise_cdf = np.cumsum(noise / noise.sum())

    rng = np.random.Generator(np.random.PCG64(config.seed))
    center = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n, dim))
    context = np.zeros((n, dim))

    encoded = [[index_of[t] for t in doc if t in index_of] for doc in documents]
    encoded = [doc for doc in encoded if doc]

    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        if config.epochs > 1:
            frac = epoch / (config.epochs - 1)
        else:
            frac = 0.0
        lr = config.learning_rate + (config.min_learning_rate - config.learning_rate) * frac
        loss_sum = 0.0
        pair_count = 0
        for doc in encoded:
            length = len(doc)
            for pos, word in enumerate(doc):
                b = int(rng.integers(1, config.window + 1))
                lo = max(0, pos - b)
                hi = min(length, pos + b + 1)
                for ctx_pos in range(lo, hi):
                    if ctx_pos == pos:
                        continue
                    target = doc[ctx_pos]
                    v = center[word]
                    update = np.zeros(dim)
                    # positive pair
                    score = _stable_sigmoid(context[target] @ v)
                    loss_sum -= _log_clamped(score)
                    g = lr * (1.0 - score)
                    update += g * context[target]
                    context[target] += g * v
                    # negatives from the noise distribution; accidental hits skipped
                    draws = np.searchsorted(noise_cdf, rng.random(config.negative_samples))
                    for neg in draws:
                        if neg == target:
                            continue
                        score = _stable_sigmoid(context[neg] @ v)
                        loss_sum -= _log_clamped(1.0 - score)
                        g = lr * (0.0 - score)
                        update += g * context[neg]
                        context[neg] += g * v
                    center[word] += update
                    pair_count += 1
        epoch_losses.append(loss_sum / max(pair_count, 1))

    vectors = {t: center[i].copy() for t, i in index_of.items()}
    return EmbeddingTable(dim=dim, vectors=vectors, source=SKIPGRAM_TRAINED, epoch_losses=epoch_losses)


def _stable_sigmoid(x: float) -> float:
    if x >= 0:
        z = math.exp(-x)
        return 1.0 / (1.0 + z)
    z = math.exp(x)
    return z / (1.0 + z)


def _log_clamped(x: float) -> float:
    return math.log(max(x, 1e-12))


def assemble_matrix(vocab: Vocabulary, table: EmbeddingTable, seed: int = 0,
                    unknown_policy: str = "shared") -> np.ndarray:
    """Build the model's (vocab size x dim) embedding matrix.

    Row i is the table vector for token i when present. Absent tokens get
    the unknown row under the "shared" policy, or their own uniform draw in
    [-0.05, 0.05] under "random". The pad row is all zeros.
    """
    if unknown_policy not in ("shared", "random"):
        raise ValueError(f"unknown unknown_policy {unknown_policy!r}")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "unknown-row")))
    matrix = np.zeros((vocab.size, table.dim), dtype=np.float64)
    unknown_row = rng.uniform(-0.05, 0.05, size=table.dim)
    matrix[UNK_INDEX] = unknown_row
    for index in range(vocab.size):
        if index in (PAD_INDEX, UNK_INDEX):
            continue
        token = vocab.token_at(index)
        if token in table:
            matrix[index] = table[token]
        elif unknown_policy == "shared":
            matrix[index] = unknown_row
        else:
            matrix[index] = rng.uniform(-0.05, 0.05, size=table.dim)
    return matrix
