"""Accuracy, confusion matrices, seed averaging, and results emission.

Confusion matrices are row-normalized percentages: entry (i, j) is the
share of true-class-i samples predicted as j. Classes with no samples
get NaN rows and are listed separately rather than divided by zero.
Reports from independently seeded trainings of the same (problem,
stream, kind) are averaged element-wise.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

_STREAM_KEY_SPECIAL = {"unquantized": (0, 0)}


@dataclass
class EvalReport:
    problem: str
    stream: str
    kind: str
    classes: tuple[str, ...]
    seeds: tuple[int, ...]
    test_accuracies: tuple[float, ...]
    zero_r: float
    confusion_pct: np.ndarray  # (d_c, d_c), NaN rows for empty classes
    confusion_counts: np.ndarray  # (d_c, d_c) ints summed over seeds
    dev_accuracies: tuple[float, ...] = ()
    extra: dict = field(default_factory=dict)

    @property
    def mean_test_accuracy(self) -> float:
        return float(np.mean(self.test_accuracies))

    @property
    def mean_dev_accuracy(self) -> float | None:
        return float(np.mean(self.dev_accuracies)) if self.dev_accuracies else None

    @property
    def improvement_pct(self) -> float:
        return (self.mean_test_accuracy - self.zero_r) / self.zero_r * 100.0

    def validate(self) -> None:
        for acc in self.test_accuracies + self.dev_accuracies:
            if not 0.0 <= acc <= 1.0:
                raise ValueError(f"accuracy {acc} outside [0, 1]")
        rows = self.confusion_pct
        populated = ~np.isnan(rows).any(axis=1)
        sums = rows[populated].sum(axis=1)
        if populated.any() and not np.allclose(sums, 100.0, atol=0.01):
            raise ValueError(f"confusion rows must sum to 100, got {sums}")


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError(
            f"need matching nonempty arrays, got {predictions.shape} vs {labels.shape}"
        )
    return float((predictions == labels).mean())


def confusion(predictions, labels, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """(percent matrix, count matrix). NaN rows mark classes with no samples."""
    predictions = np.asarray(predictions, dtype=np.intp)
    labels = np.asarray(labels, dtype=np.intp)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels out of range for {n_classes} classes")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (labels, predictions), 1)
    row_totals = counts.sum(axis=1)
    pct = np.full((n_classes, n_classes), np.nan)
    populated = row_totals > 0
    pct[populated] = counts[populated] / row_totals[populated, None] * 100.0
    return pct, counts


def single_seed_report(
    problem: str,
    stream: str,
    kind: str,
    classes: tuple[str, ...],
    seed: int,
    predictions,
    labels,
    zero_r_value: float,
    dev_accuracy: float | None = None,
) -> EvalReport:
    pct, counts = confusion(predictions, labels, len(classes))
    report = EvalReport(
        problem=problem,
        stream=stream,
        kind=kind,
        classes=classes,
        seeds=(seed,),
        test_accuracies=(accuracy(predictions, labels),),
        zero_r=zero_r_value,
        confusion_pct=pct,
        confusion_counts=counts,
        dev_accuracies=() if dev_accuracy is None else (dev_accuracy,),
    )
    report.validate()
    return report


def mean_report(reports: list[EvalReport]) -> EvalReport:
    """Element-wise average over same-keyed reports from different seeds."""
    if not reports:
        raise ValueError("no reports to average")
    first = reports[0]
    for r in reports[1:]:
        if (r.problem, r.stream, r.kind, r.classes) != (
            first.problem, first.stream, first.kind, first.classes,
        ):
            raise ValueError(
                f"cannot average reports for ({r.problem}, {r.stream}, {r.kind}) "
                f"with ({first.problem}, {first.stream}, {first.kind})"
            )
        if not np.isclose(r.zero_r, first.zero_r):
            raise ValueError("reports disagree on the ZeroR baseline")
    merged = EvalReport(
        problem=first.problem,
        stream=first.stream,
        kind=first.kind,
        classes=first.classes,
        seeds=tuple(s for r in reports for s in r.seeds),
        test_accuracies=tuple(a for r in reports for a in r.test_accuracies),
        zero_r=first.zero_r,
        confusion_pct=np.mean([r.confusion_pct for r in reports], axis=0),
        confusion_counts=np.sum([r.confusion_counts for r in reports], axis=0),
        dev_accuracies=tuple(a for r in reports for a in r.dev_accuracies),
    )
    merged.validate()
    return merged


def stream_sort_key(stream: str) -> tuple:
    if stream in _STREAM_KEY_SPECIAL:
        return _STREAM_KEY_SPECIAL[stream]
    if stream.startswith("codebook") and stream[len("codebook") :].isdigit():
        return (1, int(stream[len("codebook") :]))
    return (2, stream)


RESULTS_COLUMNS = (
    "problem", "stream", "kind", "seed_count",
    "mean_test_acc", "dev_acc", "zero_r", "improvement_pct",
)


def emit_results(reports: list[EvalReport], out_dir: str | os.PathLike) -> str:
    """Write results.csv plus per-problem bar-chart data and confusion CSVs.

    Returns the results.csv path. Output is deterministic: rows sorted by
    (problem, stream order, kind), values written with full float repr.
    """
    os.makedirs(out_dir, exist_ok=True)
    ordered = sorted(
        reports, key=lambda r: (r.problem, stream_sort_key(r.stream), r.kind)
    )
    results_path = os.path.join(out_dir, "results.csv")
    with open(results_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_COLUMNS)
        for r in ordered:
            dev = r.mean_dev_accuracy
            writer.writerow([
                r.problem, r.stream, r.kind, len(r.seeds),
                repr(r.mean_test_accuracy),
                "" if dev is None else repr(dev),
                repr(r.zero_r),
                repr(r.improvement_pct),
            ])

    bars_dir = os.path.join(out_dir, "bars")
    os.makedirs(bars_dir, exist_ok=True)
    by_problem: dict[str, list[EvalReport]] = {}
    for r in ordered:
        by_problem.setdefault(r.problem, []).append(r)
    for problem_name, rows in by_problem.items():
        with open(
            os.path.join(bars_dir, f"{problem_name}.csv"), "w",
            encoding="utf-8", newline="",
        ) as fh:
            writer = csv.writer(fh)
            writer.writerow(["stream", "kind", "mean_test_acc", "zero_r"])
            for r in rows:
                writer.writerow(
                    [r.stream, r.kind, repr(r.mean_test_accuracy), repr(r.zero_r)]
                )

    conf_dir = os.path.join(out_dir, "confusion")
    os.makedirs(conf_dir, exist_ok=True)
    for r in ordered:
        path = os.path.join(conf_dir, f"{r.problem}__{r.stream}__{r.kind}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\predicted", *r.classes])
            for i, row in enumerate(r.confusion_pct):
                cells = ["" if np.isnan(x) else repr(float(x)) for x in row]
                writer.writerow([r.classes[i], *cells])
    return results_path


def save_report(report: EvalReport, path: str | os.PathLike) -> None:
    obj = {
        "problem": report.problem,
        "stream": report.stream,
        "kind": report.kind,
        "classes": list(report.classes),
        "seeds": list(report.seeds),
        "test_accuracies": list(report.test_accuracies),
        "dev_accuracies": list(report.dev_accuracies),
        "zero_r": report.zero_r,
        "confusion_pct": [
            [None if np.isnan(x) else x for x in row] for row in report.confusion_pct
        ],
        "confusion_counts": report.confusion_counts.tolist(),
        "extra": report.extra,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def load_report(path: str | os.PathLike) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    pct = np.array(
        [[np.nan if x is None else x for x in row] for row in obj["confusion_pct"]],
        dtype=np.float64,
    )
    report = EvalReport(
        problem=obj["problem"],
        stream=obj["stream"],
        kind=obj["kind"],
        classes=tuple(obj["classes"]),
        seeds=tuple(obj["seeds"]),
        test_accuracies=tuple(obj["test_accuracies"]),
        zero_r=obj["zero_r"],
        confusion_pct=pct,
        confusion_counts=np.array(obj["confusion_counts"], dtype=np.int64),
        dev_accuracies=tuple(obj.get("dev_accuracies", ())),
        extra=obj.get("extra", {}),
    )
    report.validate()
    return report
