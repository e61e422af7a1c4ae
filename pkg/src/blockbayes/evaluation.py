"""Train/test splitting, PCC, per-class accuracy and report formatting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bayesnet import ConditionalProbabilityTable, NetworkStructure, classify_map
from .errors import ConfigurationError, StratificationError

__all__ = [
    "EvalReport",
    "stratified_split",
    "evaluate",
    "format_table",
    "reports_to_csv",
]


def stratified_split(classes, train_fraction: float, seed: int = 0):
    """Per-class seeded shuffle followed by a fractional cut.

    Each class sends ``floor(train_fraction * count)`` instances to training,
    clamped so both sides keep at least one.  Returns sorted index arrays
    ``(train, test)``.
    """
    if not 0.0 < train_fraction < 1.0:
        raise StratificationError("train_fraction must lie strictly between 0 and 1")
    classes = np.asarray(classes)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(classes):
        members = np.flatnonzero(classes == c)
        if members.size < 2:
            raise StratificationError(f"class {c!r} has {members.size} instance(s); need >= 2")
        members = rng.permutation(members)
        # the epsilon absorbs products like 0.29 * 100 = 28.999999999999996
        cut = math.floor(train_fraction * members.size + 1e-9)
        cut = min(max(cut, 1), members.size - 1)
        train.extend(members[:cut].tolist())
        test.extend(members[cut:].tolist())
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class EvalReport:
    per_class_accuracy: np.ndarray
    mean_classification: float
    pcc: float
    confusion: np.ndarray
    kind: str = ""
    threshold_multiplier: Optional[float] = None
    k_clusters: Optional[int] = None
    split_seed: Optional[int] = None
    set_name: str = "test set"

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def evaluate(
    cpt: ConditionalProbabilityTable,
    structure: NetworkStructure,
    values,
    classes,
    *,
    set_name: str = "test set",
    k_clusters: Optional[int] = None,
    split_seed: Optional[int] = None,
    threshold_multiplier: Optional[float] = None,
) -> EvalReport:
    """Classify every row of ``values`` by MAP and tabulate the outcome.

    ``values`` holds 0-based attribute codes, ``classes`` 0-based true
    classes.  Rows of the confusion matrix are true classes.
    """
    values = np.asarray(values, dtype=np.int64)
    classes = np.asarray(classes, dtype=np.int64)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ConfigurationError("evaluation needs a non-empty 2-D set of instances")
    if values.shape[1] != structure.n_attrs:
        raise ConfigurationError(
            f"instances have {values.shape[1]} attributes; model expects {structure.n_attrs}"
        )
    k = cpt.class_count
    confusion = np.zeros((k, k), dtype=np.int64)
    for x, c in zip(values, classes):
        confusion[c, classify_map(cpt, structure, x)] += 1
    support = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(support > 0, np.diag(confusion) / np.maximum(support, 1), np.nan)
    present = per_class[~np.isnan(per_class)]
    return EvalReport(
        per_class_accuracy=per_class,
        mean_classification=float(present.mean()),
        pcc=float(np.trace(confusion) / confusion.sum()),
        confusion=confusion,
        kind=structure.kind,
        threshold_multiplier=threshold_multiplier if structure.kind == "fan" else None,
        k_clusters=k_clusters,
        split_seed=split_seed,
        set_name=set_name,
    )


def classifier_label(report: EvalReport) -> str:
    label = report.kind.upper()
    if report.kind == "fan" and report.threshold_multiplier is not None:
        label += f" (x{report.threshold_multiplier:g})"
    return label


def _fmt(v: float) -> str:
    return "  -  " if np.isnan(v) else f"{v:.2f}"


def format_table(reports: Sequence[EvalReport], class_names: Optional[Sequence[str]] = None) -> str:
    """Aligned text table: one row per (classifier, set), per-class accuracy and mean."""
    if not reports:
        return ""
    k = reports[0].per_class_accuracy.shape[0]
    names = list(class_names) if class_names else [f"class {c + 1}" for c in range(k)]
    header = ["", ""] + names + ["mean classification", "PCC"]
    rows = []
    last = None
    for r in reports:
        label = classifier_label(r)
        rows.append(
            [label if label != last else "", r.set_name]
            + [_fmt(v) for v in r.per_class_accuracy]
            + [_fmt(r.mean_classification), _fmt(r.pcc)]
        )
        last = label
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    lines = []
    for row in [header] + rows:
        cells = [row[0].ljust(widths[0]), row[1].ljust(widths[1])]
        cells += [cell.rjust(w) for cell, w in zip(row[2:], widths[2:])]
        lines.append("  ".join(cells).rstrip())
    title = ""
    if reports[0].k_clusters is not None:
        title = f"Classification accuracy with number of clusters k={reports[0].k_clusters}\n"
    return title + "\n".join(lines) + "\n"


def format_confusion(report: EvalReport, class_names: Optional[Sequence[str]] = None) -> str:
    k = report.confusion.shape[0]
    names = list(class_names) if class_names else [f"class {c + 1}" for c in range(k)]
    width = max(max(len(n) for n in names), len(str(report.confusion.max())))
    lines = [f"{classifier_label(report)} {report.set_name}: rows = true class, columns = predicted"]
    lines.append(" " * width + "  " + "  ".join(n.rjust(width) for n in names))
    for name, row in zip(names, report.confusion):
        lines.append(name.rjust(width) + "  " + "  ".join(str(v).rjust(width) for v in row))
    return "\n".join(lines) + "\n"


def reports_to_csv(reports: Sequence[EvalReport], class_names: Optional[Sequence[str]] = None) -> str:
    if not reports:
        return ""
    k = reports[0].per_class_accuracy.shape[0]
    names = list(class_names) if class_names else [f"class {c + 1}" for c in range(k)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["classifier", "threshold_multiplier", "k_clusters", "split_seed", "set"]
        + names
        + ["mean_classification", "pcc", "n"]
    )
    for r in reports:
        writer.writerow(
            [
                r.kind,
                "" if r.threshold_multiplier is None else repr(float(r.threshold_multiplier)),
                "" if r.k_clusters is None else r.k_clusters,
                "" if r.split_seed is None else r.split_seed,
                r.set_name,
            ]
            + ["" if np.isnan(v) else repr(float(v)) for v in r.per_class_accuracy]
            + [repr(r.mean_classification), repr(r.pcc), r.total]
        )
    return buf.getvalue()
