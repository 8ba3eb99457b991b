"""Evaluation metrics: Accuracy, Recall@n, and the ensemble-improvement table.

Metrics are exact rationals internally and rendered to 2-decimal percent
strings, so reference tables reproduce bit-stably. Recall@1 equals Accuracy
by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .util import format_fixed, round_half_up

DEFAULT_RECALL_NS = (1, 3, 5, 10)


class EvaluationError(Exception):
    pass


@dataclass
class EvalReport:
    accuracy: Fraction
    recall_at: dict[int, Fraction]
    num_docs: int
    confusion: dict[tuple[int, int], int] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "num_docs": self.num_docs,
            "accuracy": float(self.accuracy),
            "accuracy_pct": format_fixed(self.accuracy * 100),
            "recall_at": {str(n): float(v) for n, v in sorted(self.recall_at.items())},
            "recall_at_pct": {str(n): format_fixed(v * 100) for n, v in sorted(self.recall_at.items())},
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_csv_rows(self) -> list[str]:
        rows = [f"accuracy,{float(self.accuracy)!r}"]
        for n, v in sorted(self.recall_at.items()):
            rows.append(f"r_at_{n},{float(v)!r}")
        return rows


def _gold_position(ranking, gold_index: int) -> int:
    """1-based position of the gold label in the ranking."""
    positions = np.nonzero(np.asarray(ranking.ranking) == gold_index)[0]
    if len(positions) == 0:
        raise EvaluationError(
            f"gold label index {gold_index} absent from ranking of doc {ranking.doc_id!r}"
        )
    return int(positions[0]) + 1


def _gold_for(ranking, gold_labels) -> int:
    try:
        return gold_labels[ranking.doc_id]
    except KeyError:
        raise EvaluationError(f"missing gold label for doc {ranking.doc_id!r}") from None


def accuracy(rankings, gold_labels: dict[str, int]) -> Fraction:
    """Fraction of docs whose top-1 prediction equals the gold label."""
    if not rankings:
        raise EvaluationError("no rankings to evaluate")
    correct = sum(1 for r in rankings if r.top() == _gold_for(r, gold_labels))
    return Fraction(correct, len(rankings))


def recall_at_n(rankings, gold_labels: dict[str, int], n: int) -> Fraction:
    """Fraction of docs whose gold label sits within the first n positions."""
    if n < 1:
        raise EvaluationError(f"recall position must be >= 1, got {n}")
    if not rankings:
        raise EvaluationError("no rankings to evaluate")
    hits = sum(1 for r in rankings if _gold_position(r, _gold_for(r, gold_labels)) <= n)
    return Fraction(hits, len(rankings))


def evaluate(rankings, gold_labels: dict[str, int], recall_ns=DEFAULT_RECALL_NS) -> EvalReport:
    report = EvalReport(
        accuracy=accuracy(rankings, gold_labels),
        recall_at={n: recall_at_n(rankings, gold_labels, n) for n in recall_ns},
        num_docs=len(rankings),
    )
    for r in rankings:
        key = (_gold_for(r, gold_labels), r.top())
        report.confusion[key] = report.confusion.get(key, 0) + 1
    return report


@dataclass
class ImprovementRow:
    """One architecture's member accuracies vs its ensemble, in percent.

    The mean is stored at 2-decimal precision (the precision accuracy tables
    are reported at); improvement_pct = 100 * (ensemble - mean) / mean against
    that stored mean.
    """

    architecture: str
    member_pcts: tuple[Fraction, Fraction, Fraction]
    mean_pct: Fraction
    ensemble_pct: Fraction
    improvement_pct: Fraction

    def to_csv_row(self) -> str:
        cells = [self.architecture]
        cells += [format_fixed(p) for p in self.member_pcts]
        cells += [format_fixed(self.mean_pct), format_fixed(self.ensemble_pct),
                  format_fixed(self.improvement_pct)]
        return ",".join(cells)


IMPROVEMENT_CSV_HEADER = "architecture,member_1,member_2,member_3,mean,ensemble,improvement_pct"


def improvement_table(entries) -> list[ImprovementRow]:
    """Build improvement rows from (architecture, member accuracies, ensemble accuracy).

    Accuracies are fractions in [0, 1] (exact rationals or floats); each entry
    is a tuple (architecture, (a1, a2, a3), ensemble_accuracy).
    """
    rows = []
    for architecture, member_accuracies, ensemble_accuracy in entries:
        if len(member_accuracies) != 3:
            raise EvaluationError(f"{architecture}: need exactly 3 member accuracies")
        member_pcts = tuple(Fraction(a) * 100 for a in member_accuracies)
        mean_pct = round_half_up(sum(member_pcts, Fraction(0)) / 3, 2)
        ensemble_pct = Fraction(ensemble_accuracy) * 100
        if mean_pct == 0:
            raise EvaluationError(f"{architecture}: zero mean accuracy, improvement undefined")
        improvement = 100 * (ensemble_pct - mean_pct) / mean_pct
        rows.append(
            ImprovementRow(
                architecture=architecture,
                member_pcts=member_pcts,
                mean_pct=mean_pct,
                ensemble_pct=ensemble_pct,
                improvement_pct=improvement,
            )
        )
    return rows
