"""The five standalone classifiers: CNN, LSTM, GRU, Bi-LSTM, Bi-GRU.

Each model maps a padded token sequence to a probability distribution over
the label set. Training is minibatch cross-entropy with Adam; validation is
monitored only (epoch counts are fixed, no early stopping). Checkpoints are
self-contained: config, label set, and vocabulary ride along with the
parameters, so a saved model can be reloaded and queried on raw text.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autograd as ag
from . import layers as nn
from .autograd import Tensor
from .textprep import Vocabulary
from .util import derive_seed

ARCHITECTURES = ("cnn", "lstm", "gru", "bilstm", "bigru")

CHECKPOINT_MAGIC = b"PENS"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    pass


class LabelVocabulary:
    """Bijective IPC sub-class code <-> index map, fixed before training.

    Built from the full label inventory (train + validation + test) so the
    prediction vector position for a code never shifts.
    """

    def __init__(self, codes):
        self.codes = sorted(set(codes))
        if not self.codes:
            raise ValueError("empty label inventory")
        self._index = {code: i for i, code in enumerate(self.codes)}

    @property
    def size(self) -> int:
        return len(self.codes)

    def index_of(self, code: str) -> int:
        return self._index[code]

    def code_at(self, index: int) -> str:
        return self.codes[index]

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelVocabulary) and self.codes == other.codes

    def one_hot(self, label_indices: np.ndarray) -> np.ndarray:
        out = np.zeros((len(label_indices), self.size), dtype=ag.default_dtype())
        out[np.arange(len(label_indices)), label_indices] = 1.0
        return out


@dataclass
class ModelConfig:
    architecture: str
    sequence_length: int
    vocab_size: int
    num_labels: int
    embedding_dim: int = 300
    embedding_trainable: bool = True
    filters: int = 128
    kernel_size: int = 5
    dense_units: int = 1024
    hidden_size: int = 128
    dropout_rate: float = 0.5
    spatial_dropout_rate: float = 0.1
    batch_size: int = 128
    epochs: int | None = None
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs is None:
            self.epochs = 5 if self.architecture == "cnn" else 15

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class TrainingHistory:
    initial_loss: float | None = None
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)


@dataclass
class EncodedDataset:
    """Encoded sequences plus aligned true lengths and label indices."""

    sequences: np.ndarray  # int32 [n, sequence_length]
    lengths: np.ndarray  # int [n]
    labels: np.ndarray  # int [n]

    def __post_init__(self):
        self.sequences = np.asarray(self.sequences, dtype=np.int32)
        self.lengths = np.asarray(self.lengths, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.sequences)

    @classmethod
    def from_token_sequences(cls, token_sequences, label_indices) -> "EncodedDataset":
        return cls(
            sequences=np.stack([ts.indices for ts in token_sequences]),
            lengths=np.array([ts.true_length for ts in token_sequences]),
            labels=np.asarray(label_indices),
        )


class ClassifierModel:
    """A parameterized network emitting per-label probabilities."""

    def __init__(self, config: ModelConfig, label_vocab: LabelVocabulary,
                 vocab: Vocabulary, embedding_matrix: np.ndarray | None = None):
        if label_vocab.size != config.num_labels:
            raise ValueError(f"label vocabulary size {label_vocab.size} != config num_labels {config.num_labels}")
        if vocab.size != config.vocab_size:
            raise ValueError(f"vocabulary size {vocab.size} != config vocab_size {config.vocab_size}")
        self.config = config
        self.label_vocab = label_vocab
        self.vocab = vocab
        self.history = TrainingHistory()
        rng = np.random.Generator(np.random.PCG64(derive_seed(config.seed, "init")))
        if embedding_matrix is None:
            embedding_matrix = rng.uniform(-0.05, 0.05, size=(config.vocab_size, config.embedding_dim))
        if embedding_matrix.shape != (config.vocab_size, config.embedding_dim):
            raise ValueError(
                f"embedding matrix shape {embedding_matrix.shape} != "
                f"({config.vocab_size}, {config.embedding_dim})"
            )
        self.embedding = nn.Embedding(embedding_matrix, trainable=config.embedding_trainable)
        arch = config.architecture
        if arch == "cnn":
            self.conv = nn.Conv1D(config.embedding_dim, config.filters, config.kernel_size,
                                  activation="relu", rng=rng)
            self.hidden_dense = nn.Dense(config.filters, config.dense_units, activation="relu", rng=rng)
            self.dropout = nn.Dropout(config.dropout_rate)
            self.output_dense = nn.Dense(config.dense_units, config.num_labels,
                                         activation="softmax", rng=rng)
        else:
            self.spatial_dropout = nn.SpatialDropout(config.spatial_dropout_rate)
            cell_cls = nn.LSTMCell if arch in ("lstm", "bilstm") else nn.GRUCell
            if arch in ("bilstm", "bigru"):
                self.recurrent = nn.Bidirectional(
                    cell_cls(config.embedding_dim, config.hidden_size, rng=rng),
                    cell_cls(config.embedding_dim, config.hidden_size, rng=rng),
                )
                out_width = 2 * config.hidden_size
            else:
                self.recurrent = nn.Recurrent(cell_cls(config.embedding_dim, config.hidden_size, rng=rng))
                out_width = config.hidden_size
            self.output_dense = nn.Dense(out_width, config.num_labels, activation="softmax", rng=rng)

    def named_parameters(self):
        params = self.embedding.params("embedding")
        if self.config.architecture == "cnn":
            params += self.conv.params("conv")
            params += self.hidden_dense.params("hidden_dense")
            params += self.output_dense.params("output_dense")
        else:
            params += self.recurrent.params("recurrent")
            params += self.output_dense.params("output_dense")
        return params

    def forward(self, sequences: np.ndarray, lengths: np.ndarray | None = None,
                mode: str = "eval", rng: np.random.Generator | None = None) -> Tensor:
        sequences = np.asarray(sequences)
        if sequences.ndim != 2 or sequences.shape[1] != self.config.sequence_length:
            raise ValueError(
                f"sequence length mismatch: input {sequences.shape} vs "
                f"configured length {self.config.sequence_length}"
            )
        embedded = self.embedding.forward(sequences)
        if self.config.architecture == "cnn":
            x = self.conv.forward(embedded)
            x = nn.max_pool_over_time(x)
            x = nn.flatten(x)
            x = self.hidden_dense.forward(x)
            x = self.dropout.forward(x, mode, rng)
            return self.output_dense.forward(x)
        x = self.spatial_dropout.forward(embedded, mode, rng)
        x = self.recurrent.forward(x, lengths)
        return self.output_dense.forward(x)

    def predict_proba(self, sequences, lengths: np.ndarray | None = None) -> np.ndarray:
        """Per-label probabilities in eval mode (dropout off), chunked by batch size."""
        sequences, lengths = _coerce_sequences(sequences, lengths)
        outputs = []
        step = self.config.batch_size
        for start in range(0, len(sequences), step):
            chunk = sequences[start : start + step]
            chunk_lengths = None if lengths is None else lengths[start : start + step]
            outputs.append(self.forward(chunk, chunk_lengths, mode="eval").data)
        return np.concatenate(outputs, axis=0) if outputs else np.zeros((0, self.config.num_labels))


def _coerce_sequences(sequences, lengths):
    if isinstance(sequences, np.ndarray):
        if lengths is None:
            lengths = (sequences != 0).sum(axis=1)
        return sequences, np.asarray(lengths)
    token_sequences = list(sequences)
    array = np.stack([ts.indices for ts in token_sequences])
    lengths = np.array([ts.true_length for ts in token_sequences])
    return array, lengths


def build_cnn(config: ModelConfig, label_vocab: LabelVocabulary, vocab: Vocabulary,
              embedding_matrix: np.ndarray | None = None) -> ClassifierModel:
    if config.architecture != "cnn":
        raise ValueError(f"build_cnn requires architecture 'cnn', got {config.architecture!r}")
    return ClassifierModel(config, label_vocab, vocab, embedding_matrix)


def build_rnn(config: ModelConfig, label_vocab: LabelVocabulary, vocab: Vocabulary,
              embedding_matrix: np.ndarray | None = None) -> ClassifierModel:
    if config.architecture not in ("lstm", "gru", "bilstm", "bigru"):
        raise ValueError(f"build_rnn requires a recurrent architecture, got {config.architecture!r}")
    return ClassifierModel(config, label_vocab, vocab, embedding_matrix)


def build_model(config: ModelConfig, label_vocab: LabelVocabulary, vocab: Vocabulary,
                embedding_matrix: np.ndarray | None = None) -> ClassifierModel:
    if config.architecture == "cnn":
        return build_cnn(config, label_vocab, vocab, embedding_matrix)
    return build_rnn(config, label_vocab, vocab, embedding_matrix)


def train(model: ClassifierModel, train_set: EncodedDataset,
          validation_set: EncodedDataset | None = None) -> TrainingHistory:
    """Train for the configured epoch count; batch order and dropout masks are
    seeded, so identical runs give identical parameters. The final incomplete
    minibatch is trained on."""
    if len(train_set) == 0:
        raise ValueError("empty training set")
    config = model.config
    rng_batches = np.random.Generator(np.random.PCG64(derive_seed(config.seed, "batches")))
    rng_dropout = np.random.Generator(np.random.PCG64(derive_seed(config.seed, "dropout")))
    optimizer = ag.Adam(
        [t for _, t in model.named_parameters()],
        lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps,
    )
    history = model.history = TrainingHistory()
    n = len(train_set)
    for _epoch in range(config.epochs):
        order = rng_batches.permutation(n)
        loss_total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            probs = model.forward(
                train_set.sequences[batch], train_set.lengths[batch], mode="train", rng=rng_dropout
            )
            loss = ag.cross_entropy(probs, model.label_vocab.one_hot(train_set.labels[batch]))
            if history.initial_loss is None:
                history.initial_loss = loss.item()
            optimizer.zero_grad()
            loss.backward()
            model.embedding.zero_pad_grad()
            optimizer.step()
            loss_total += loss.item() * len(batch)
        history.train_loss.append(loss_total / n)
        if validation_set is not None and len(validation_set):
            probs = model.predict_proba(validation_set.sequences, validation_set.lengths)
            correct = (probs.argmax(axis=1) == validation_set.labels).sum()
            history.val_accuracy.append(float(correct) / len(validation_set))
    return history


def rank_probabilities(probabilities: np.ndarray) -> np.ndarray:
    """Label indices sorted by probability descending, ties by ascending index."""
    return np.argsort(-probabilities, axis=-1, kind="stable")


# ---------------------------------------------------------------------------
# checkpoints: little-endian binary, magic "PENS", version, JSON block, tensors

def save_checkpoint(model: ClassifierModel, path, extras: dict | None = None) -> None:
    meta = {
        "config": model.config.to_dict(),
        "labels": model.label_vocab.codes,
        "vocab": model.vocab.index_to_token,
        "extras": extras or {},
    }
    blob = json.dumps(meta, ensure_ascii=False, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name, tensor in model.named_parameters():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", tensor.data.ndim))
            fh.write(struct.pack(f"<{tensor.data.ndim}I", *tensor.data.shape))
            fh.write(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path) -> ClassifierModel:
    """Rebuild a model from a checkpoint; parameters round-trip bit-exactly."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
        meta = json.loads(_read_exact(fh, meta_len, "metadata").decode("utf-8"))
        tensors: dict[str, np.ndarray] = {}
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) != 4:
                raise CheckpointError("truncated checkpoint while reading tensor record")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(fh, name_len, "tensor name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, "tensor rank"))
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "tensor dims"))
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            raw = _read_exact(fh, 4 * count, f"tensor data for {name}")
            tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims)

    config = ModelConfig.from_dict(meta["config"])
    label_vocab = LabelVocabulary(meta["labels"])
    vocab = Vocabulary.from_tokens(meta["vocab"])
    model = ClassifierModel(config, label_vocab, vocab)
    model.checkpoint_extras = meta.get("extras", {})
    expected = dict(model.named_parameters())
    if set(expected) != set(tensors):
        missing = set(expected) - set(tensors)
        unexpected = set(tensors) - set(expected)
        raise CheckpointError(f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
    for name, tensor in expected.items():
        stored = tensors[name]
        if stored.shape != tensor.data.shape:
            raise CheckpointError(f"shape mismatch for {name}: {stored.shape} vs {tensor.data.shape}")
        tensor.data = stored.astype(ag.default_dtype()).copy()
        tensor.zero_grad()
    return model
