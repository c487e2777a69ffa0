"""Confusion-matrix metrics over labeled package corpora.

Malicious is the positive class: FP means a benign package flagged
malicious.  Precision/recall/F1 are reported as null when undefined.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .detector import scan_package
from .errors import SeqGuardError

UNSCANNABLE_AS_BENIGN = "benign"
UNSCANNABLE_AS_ERROR = "error"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise SeqGuardError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def compute_metrics(counts: ConfusionCounts) -> dict:
    """Accuracy, precision, recall, F1; undefined metrics come back None."""
    if counts.total == 0:
        raise SeqGuardError("cannot compute metrics over zero counts")
    accuracy = (counts.tp + counts.tn) / counts.total
    precision = (
        counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp > 0 else None
    )
    recall = (
        counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn > 0 else None
    )
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return {
        "accuracy": accuracy,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


@dataclass(frozen=True)
class PackageOutcome:
    package: str
    label: str
    predicted: str
    flagged_unscannable: bool = False
    evidence_summary: str = ""

    @property
    def correct(self) -> bool:
        return self.label == self.predicted


def evaluate_corpus(
    packages: Sequence[tuple],
    taxonomy,
    kb,
    providers,
    jobs: int = 1,
    unscannable_policy: str = UNSCANNABLE_AS_BENIGN,
) -> dict:
    """Scan labeled packages [(path, label), ...], tally confusion counts,
    and report metrics plus the misclassification list."""
    if not packages:
        raise SeqGuardError("evaluation corpus is empty")
    for _path, label in packages:
        if label not in ("benign", "malicious"):
            raise SeqGuardError(f"package label must be benign/malicious: {label!r}")

    def work(item) -> PackageOutcome:
        path, label = item
        try:
            report = scan_package(path, taxonomy, kb, providers, jobs=1)
        except (OSError, FileNotFoundError) as exc:
            if unscannable_policy == UNSCANNABLE_AS_ERROR:
                raise SeqGuardError(f"unscannable package {path}: {exc}") from exc
            return PackageOutcome(
                package=str(path),
                label=label,
                predicted="benign",
                flagged_unscannable=True,
                evidence_summary=f"unscannable: {exc}",
            )
        evidence = ""
        for outcome in report.files:
            verdict = outcome.verdict
            if verdict is not None and verdict.classification == "malicious":
                evidence = (
                    f"{outcome.path}: stage={verdict.stage} "
                    f"confidence={verdict.confidence:.3f}"
                )
                break
        return PackageOutcome(
            package=str(path),
            label=label,
            predicted=report.classification,
            evidence_summary=evidence,
        )

    if jobs > 1 and len(packages) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, packages))
    else:
        outcomes = [work(item) for item in packages]

    counts = ConfusionCounts()
    for outcome in outcomes:
        positive = outcome.predicted == "malicious"
        truth = outcome.label == "malicious"
        counts = counts + ConfusionCounts(
            tp=int(positive and truth),
            fp=int(positive and not truth),
            fn=int(not positive and truth),
            tn=int(not positive and not truth),
        )
    misclassified = [
        {
            "package": o.package,
            "label": o.label,
            "predicted": o.predicted,
            "evidence_summary": o.evidence_summary,
        }
        for o in outcomes
        if not o.correct
    ]
    return {
        "counts": counts.to_dict(),
        "metrics": compute_metrics(counts),
        "misclassified": misclassified,
        "unscannable": [o.package for o in outcomes if o.flagged_unscannable],
    }
