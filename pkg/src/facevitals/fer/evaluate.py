"""Confusion-matrix evaluation over labelled 48x48 faces."""

from dataclasses import dataclass

import numpy as np

from ..errors import BadLabel, EmptyDataset
from .model import LABELS, Model, classify


@dataclass
class ConfusionMatrix:
    counts: np.ndarray
    labels: tuple = LABELS

    @property
    def matrix(self):
        """Row-normalized; rows without samples stay zero."""
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape),
                         where=rows > 0)

    @property
    def accuracy(self):
        return float(np.trace(self.counts) / self.counts.sum())

    def format(self, digits=2):
        """Text table, true class per row, predicted class per column."""
        width = max(len(l) for l in self.labels) + 1
        cell = max(digits + 3, 8)
        head = " " * width + "".join(l[:cell - 1].rjust(cell) for l in self.labels)
        lines = [head]
        for label, row in zip(self.labels, self.matrix):
            lines.append(label.ljust(width) + "".join(f"{v:{cell}.{digits}f}" for v in row))
        return "\n".join(lines)


def _predict(classifier, face):
    if isinstance(classifier, Model):
        return classify(classifier, face).argmax
    out = classifier(face)
    if isinstance(out, (int, np.integer)):
        return int(out)
    probs = getattr(out, "probabilities", out)
    return int(np.argmax(probs))


def evaluate(classifier, dataset, labels=LABELS):
    """Return ``(ConfusionMatrix, accuracy)``.

    ``classifier`` is a :class:`Model` or any callable mapping a face to a
    class index or a probability vector (argmax ties go to the lowest index).
    """
    k = len(labels)
    counts = np.zeros((k, k), dtype=np.int64)
    for face, label in dataset:
        if not (isinstance(label, (int, np.integer)) and 0 <= label < k):
            raise BadLabel(f"label {label!r} outside 0..{k - 1}")
        counts[label, _predict(classifier, face)] += 1
    if counts.sum() == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    cm = ConfusionMatrix(counts, tuple(labels))
    return cm, cm.accuracy


class OracleClassifier:
    """Test stub that returns the true label it was built with."""

    def __init__(self, dataset):
        self._lookup = {id(face): label for face, label in dataset}

    def __call__(self, face):
        return self._lookup[id(face)]


class ConstantClassifier:
    def __init__(self, label):
        self.label = label

    def __call__(self, face):
        return self.label
