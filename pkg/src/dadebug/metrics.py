"""Classification metrics with support weighting, and Cohen's kappa."""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .transcript import CLASS_ORDER, Appropriateness


class DegenerateAgreementWarning(UserWarning):
    """Both annotators used a single identical label, so chance agreement is 1."""


def _as_labels(values):
    return [v if isinstance(v, Appropriateness) else Appropriateness(v) for v in values]


def _check_pair(a, b):
    if len(a) != len(b):
        raise ValueError(f"label sequences differ in length ({len(a)} vs {len(b)})")
    if len(a) == 0:
        raise ValueError("label sequences are empty")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = gold and columns = predicted, in class order."""

    counts: np.ndarray
    classes: tuple = CLASS_ORDER

    @classmethod
    def from_labels(cls, gold, predicted, classes=CLASS_ORDER):
        gold, predicted = _as_labels(gold), _as_labels(predicted)
        _check_pair(gold, predicted)
        pos = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for g, p in zip(gold, predicted):
            counts[pos[g], pos[p]] += 1
        return cls(counts, tuple(classes))

    @property
    def total(self):
        return int(self.counts.sum())

    def to_list(self):
        return self.counts.tolist()

    def render(self):
        names = [c.value for c in self.classes]
        width = max(len(n) for n in names) + 2
        lines = ["gold \\ predicted".ljust(width) + "".join(n.rjust(width) for n in names)]
        for name, row in zip(names, self.counts):
            lines.append(name.ljust(width) + "".join(str(int(v)).rjust(width) for v in row))
        return "\n".join(lines)


def _ratio(num, den):
    return Fraction(num, den) if den else Fraction(0)


@dataclass(frozen=True)
class EvalReport:
    per_class: dict  # Appropriateness -> {precision, recall, f1, support}
    weighted: dict  # precision, recall, f1
    accuracy: float
    confusion: ConfusionMatrix
    zero_division: tuple = ()  # (class, metric) cells resolved from 0/0

    def to_dict(self):
        return {
            "per_class": {c.value: dict(m) for c, m in self.per_class.items()},
            "weighted": dict(self.weighted),
            "accuracy": self.accuracy,
            "confusion": {"classes": [c.value for c in self.confusion.classes], "counts": self.confusion.to_list()},
            "zero_division": [[c.value, m] for c, m in self.zero_division],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def render(self):
        header = f"{'class':<14}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>9}"
        lines = [header, "-" * len(header)]
        for c, m in self.per_class.items():
            lines.append(f"{c.value:<14}{m['precision']:>10.3f}{m['recall']:>10.3f}{m['f1']:>10.3f}{m['support']:>9d}")
        w = self.weighted
        total = sum(m["support"] for m in self.per_class.values())
        lines.append("-" * len(header))
        lines.append(f"{'weighted':<14}{w['precision']:>10.3f}{w['recall']:>10.3f}{w['f1']:>10.3f}{total:>9d}")
        lines.append(f"{'accuracy':<14}{self.accuracy:>10.3f}")
        if self.zero_division:
            cells = ", ".join(f"{m}({c.value})" for c, m in self.zero_division)
            lines.append(f"note: undefined 0/0 cells reported as 0: {cells}")
        lines.append("")
        lines.append(self.confusion.render())
        return "\n".join(lines)


def evaluate(gold, predicted, classes=CLASS_ORDER):
    """Per-class and support-weighted precision/recall/F1 plus accuracy.

    Ratios are kept as exact fractions until the end, so weighted recall and
    accuracy come out as the same float.
    """
    cm = ConfusionMatrix.from_labels(gold, predicted, classes)
    counts = cm.counts
    n = cm.total
    exact, zero_cells = {}, []
    for i, c in enumerate(classes):
        tp = int(counts[i, i])
        predicted_c = int(counts[:, i].sum())
        support = int(counts[i, :].sum())
        precision = _ratio(tp, predicted_c)
        recall = _ratio(tp, support)
        f1 = _ratio(2 * precision * recall, precision + recall) if precision + recall else Fraction(0)
        if predicted_c == 0:
            zero_cells.append((c, "precision"))
        if support == 0:
            zero_cells.append((c, "recall"))
        exact[c] = {"precision": precision, "recall": recall, "f1": f1, "support": support}
    weighted = {
        metric: float(sum(Fraction(m["support"], n) * m[metric] for m in exact.values()))
        for metric in ("precision", "recall", "f1")
    }
    per_class = {
        c: {k: (v if k == "support" else float(v)) for k, v in m.items()} for c, m in exact.items()
    }
    accuracy = float(Fraction(int(np.trace(counts)), n))
    return EvalReport(per_class, weighted, accuracy, cm, tuple(zero_cells))


def cohen_kappa(annotator_a, annotator_b):
    """Cohen's kappa; when chance agreement is 1 it is 1 for perfect agreement, else 0."""
    a, b = list(annotator_a), list(annotator_b)
    _check_pair(a, b)
    n = len(a)
    observed = Fraction(sum(x == y for x, y in zip(a, b)), n)
    ca, cb = Counter(a), Counter(b)
    expected = Fraction(sum(ca[k] * cb[k] for k in ca), n * n)
    if expected == 1:
        warnings.warn(
            "both annotators used one identical label throughout; kappa is undefined and reported by convention",
            DegenerateAgreementWarning,
            stacklevel=2,
        )
        return 1.0 if observed == 1 else 0.0
    return float((observed - expected) / (1 - expected))
