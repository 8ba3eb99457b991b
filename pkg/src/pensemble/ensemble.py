"""Averaging ensemble of three section-specific classifiers.

Each member reads one patent section under its own feature spec; the three
per-label probability vectors are averaged (unweighted, in float64) and the
ranking is the descending sort of the mean, ties broken by ascending label
index. Member inference over a batch reuses the members' chunked batched
prediction, so an ensemble of identical members reproduces the standalone
model's rankings exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import SECTIONS
from .models import ClassifierModel, load_checkpoint, rank_probabilities
from .textprep import FIRST_X, FeatureSpec, encode, select_words, tokenize


class EnsembleError(Exception):
    pass


@dataclass
class PredictionRanking:
    """All label indices ordered by predicted probability (descending)."""

    doc_id: str
    ranking: np.ndarray  # permutation of [0, num_labels)
    probabilities: np.ndarray  # aligned to `ranking`, non-increasing

    def top(self) -> int:
        return int(self.ranking[0])


@dataclass
class EnsembleMember:
    section: str
    model: ClassifierModel
    feature: FeatureSpec
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.section not in SECTIONS:
            raise EnsembleError(f"unknown section {self.section!r}; expected one of {SECTIONS}")
        if self.feature.sequence_length != self.model.config.sequence_length:
            raise EnsembleError(
                f"member {self.section}: feature length {self.feature.sequence_length} "
                f"!= model sequence length {self.model.config.sequence_length}"
            )

    def encode_document(self, doc):
        text = getattr(doc, self.section, None)
        if not text:
            raise EnsembleError(f"document {getattr(doc, 'doc_id', '?')!r} is missing section {self.section!r}")
        if self.feature.mode == FIRST_X:
            tokens = select_words(tokenize(text), self.feature)
        else:
            tokens = select_words(doc, self.feature)
        return encode(tokens, self.model.vocab, self.model.config.sequence_length,
                      doc_id=getattr(doc, "doc_id", ""))


class EnsembleModel:
    """Three members keyed by section, sharing one label vocabulary."""

    def __init__(self, members: list[EnsembleMember]):
        if len(members) != 3 or {m.section for m in members} != set(SECTIONS):
            raise EnsembleError(f"need exactly one member per section {SECTIONS}")
        self.members = {m.section: m for m in members}
        first = members[0].model.label_vocab
        for m in members[1:]:
            if m.model.label_vocab != first:
                raise EnsembleError("ensemble members must share an identical label vocabulary")
        self.label_vocab = first

    def predict_batch(self, docs) -> list[PredictionRanking]:
        """Rankings for a document list; equals mapping predict over docs."""
        docs = list(docs)
        if not docs:
            return []
        member_probs = []
        for section in SECTIONS:
            member = self.members[section]
            encoded = []
            for doc in docs:
                try:
                    encoded.append(member.encode_document(doc))
                except EnsembleError as exc:
                    raise EnsembleError(f"doc {getattr(doc, 'doc_id', '?')!r}: {exc}") from None
            member_probs.append(member.model.predict_proba(encoded))
        averaged = combine(*member_probs)
        rankings = []
        for row, doc in zip(averaged, docs):
            order = rank_probabilities(row)
            rankings.append(
                PredictionRanking(
                    doc_id=getattr(doc, "doc_id", ""), ranking=order, probabilities=row[order]
                )
            )
        return rankings

    def predict(self, doc) -> PredictionRanking:
        return self.predict_batch([doc])[0]


def combine(p1, p2, p3) -> np.ndarray:
    """Per-label mean of three probability vectors (or row-aligned batches)."""
    arrays = [np.asarray(p, dtype=np.float64) for p in (p1, p2, p3)]
    if not (arrays[0].shape == arrays[1].shape == arrays[2].shape):
        raise EnsembleError(f"length mismatch: {[a.shape for a in arrays]}")
    return (arrays[0] + arrays[1] + arrays[2]) / 3.0


def predict(ensemble: EnsembleModel, doc) -> PredictionRanking:
    return ensemble.predict(doc)


def predict_batch(ensemble: EnsembleModel, docs) -> list[PredictionRanking]:
    return ensemble.predict_batch(docs)


# ---------------------------------------------------------------------------
# manifest

def save_manifest(members: list[EnsembleMember], path) -> None:
    payload = {
        "members": [
            {
                "section": m.section,
                "checkpoint": m.checkpoint_path,
                "feature": m.feature.to_dict(),
            }
            for m in members
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_ensemble(manifest_path) -> EnsembleModel:
    with open(manifest_path, encoding="utf-8") as fh:
        payload = json.load(fh)
    members = []
    for entry in payload["members"]:
        model = load_checkpoint(entry["checkpoint"])
        members.append(
            EnsembleMember(
                section=entry["section"],
                model=model,
                feature=FeatureSpec.from_dict(entry["feature"]),
                checkpoint_path=entry["checkpoint"],
            )
        )
    return EnsembleModel(members)
