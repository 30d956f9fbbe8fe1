"""Classification metrics and a token-overlap text similarity."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyMatrix, InvalidInput, LengthMismatch, UnknownLabel


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # rows = truth, cols = prediction

    def __post_init__(self):
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise InvalidInput(f"counts must be {k}x{k}")
        if np.any(self.counts < 0):
            raise InvalidInput("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(truth: Sequence[str], pred: Sequence[str], classes: Sequence[str] | None = None) -> ConfusionMatrix:
    if len(truth) != len(pred):
        raise LengthMismatch(f"{len(truth)} truth labels vs {len(pred)} predictions")
    if classes is None:
        classes = sorted(set(truth) | set(pred))
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, pred):
        if t not in index or p not in index:
            raise UnknownLabel(f"label {t if t not in index else p!r} not in vocabulary")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(tuple(classes), counts)


def per_class_prf(m: ConfusionMatrix) -> dict[str, tuple[float, float, float]]:
    c = np.asarray(m.counts, dtype=float)
    tp = np.diag(c)
    predicted = c.sum(axis=0)
    actual = c.sum(axis=1)
    out = {}
    for i, name in enumerate(m.classes):
        p = tp[i] / predicted[i] if predicted[i] else 0.0
        r = tp[i] / actual[i] if actual[i] else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        out[name] = (float(p), float(r), float(f))
    return out


def macro_prf(m: ConfusionMatrix) -> tuple[float, float, float]:
    """Unweighted mean of per-class P/R/F over classes with at least one true instance."""
    if len(m.classes) == 0 or m.total == 0:
        raise EmptyMatrix("confusion matrix has no counts")
    support = m.counts.sum(axis=1)
    scores = [v for v, s in zip(per_class_prf(m).values(), support) if s > 0]
    return tuple(float(np.mean([s[j] for s in scores])) for j in range(3))


def accuracy(m: ConfusionMatrix) -> float:
    if m.total == 0:
        raise EmptyMatrix("confusion matrix has no counts")
    return float(np.trace(m.counts) / m.total)


def metric_report(m: ConfusionMatrix) -> dict:
    support = m.counts.sum(axis=1)
    per_class = {
        name: {"precision": p, "recall": r, "f1": f, "support": int(s)}
        for (name, (p, r, f)), s in zip(per_class_prf(m).items(), support)
    }
    p, r, f = macro_prf(m)
    return {"per_class": per_class, "macro": {"precision": p, "recall": r, "f1": f, "accuracy": accuracy(m)}}


def token_f1(candidate: str, reference: str) -> float:
    cand, ref = candidate.lower().split(), reference.lower().split()
    if not cand and not ref:
        return 1.0
    if not cand or not ref:
        return 0.0
    overlap = sum((Counter(cand) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    p, r = overlap / len(cand), overlap / len(ref)
    return 2 * p * r / (p + r)


# external scorers (embedding similarity, judge models) plug in with this signature
Scorer = Callable[[str, str], float]

SCORERS: dict[str, Scorer] = {"token_f1": token_f1}


def register_scorer(name: str, fn: Scorer) -> None:
    SCORERS[name] = fn
