"""Confusion matrices and the derived performance measures.

Rows are true classes, columns predicted.  Sensitivity is the
row-normalized diagonal, precision the column-normalized diagonal; a zero
denominator yields None ("n/a" in the text table), never a silent 0.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError

CLASSES = ("Left", "Right")


@dataclass
class ConfusionMatrix:
    counts: np.ndarray               # [true x predicted] integer counts
    classes: tuple = CLASSES

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.classes)
        if self.counts.shape != (n, n):
            raise DataError(f"counts shape {self.counts.shape} vs {n} classes")
        if (self.counts < 0).any():
            raise DataError("negative count in confusion matrix")

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass
class Metrics:
    sensitivity: tuple               # per class; None when the row is empty
    precision: tuple                 # per class; None when the column is empty
    accuracy: float


def confusion_from_predictions(true_idx, pred_idx, classes=CLASSES):
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true_idx, pred_idx):
        counts[t, p] += 1
    return ConfusionMatrix(counts=counts, classes=classes)


def metrics(cm):
    if cm.total == 0:
        raise DataError("metrics need a non-empty confusion matrix")
    diag = np.diag(cm.counts)
    rows = cm.counts.sum(axis=1)
    cols = cm.counts.sum(axis=0)
    sens = tuple(diag[i] / rows[i] if rows[i] else None for i in range(len(rows)))
    prec = tuple(diag[i] / cols[i] if cols[i] else None for i in range(len(cols)))
    return Metrics(sensitivity=sens, precision=prec,
                   accuracy=diag.sum() / cm.total)


def to_json_dict(cm, m=None):
    if m is None:
        m = metrics(cm)
    return {
        "classes": list(cm.classes),
        "counts": cm.counts.tolist(),
        "sensitivity": [None if s is None else float(s) for s in m.sensitivity],
        "precision": [None if p is None else float(p) for p in m.precision],
        "accuracy": float(m.accuracy),
    }


def _cell(value):
    if value is None:
        return "n/a"
    return f"{value:.4f}"


def format_table(cm, m=None):
    """Aligned text table: counts, sensitivity bottom row, precision right
    column, overall accuracy in the lower-right corner."""
    if m is None:
        m = metrics(cm)
    width = 12
    header = ["".ljust(width)] + [c.rjust(width) for c in cm.classes]
    header.append("Precision".rjust(width))
    lines = ["".join(header)]
    for i, name in enumerate(cm.classes):
        cells = [name.ljust(width)]
        cells += [str(int(v)).rjust(width) for v in cm.counts[i]]
        cells.append(_cell(m.precision[i]).rjust(width))
        lines.append("".join(cells))
    bottom = ["Sensitivity".ljust(width)]
    bottom += [_cell(s).rjust(width) for s in m.sensitivity]
    bottom.append(_cell(m.accuracy).rjust(width))
    lines.append("".join(bottom))
    return "\n".join(lines) + "\n"


def write_report(path_json, path_txt, cm, m=None):
    if m is None:
        m = metrics(cm)
    with open(path_json, "w") as fh:
        json.dump(to_json_dict(cm, m), fh, indent=2)
        fh.write("\n")
    with open(path_txt, "w") as fh:
        fh.write(format_table(cm, m))
