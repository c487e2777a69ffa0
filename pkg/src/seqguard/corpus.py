"""Labeled action-sequence corpora: ingestion, validation, persistence.

Corpora are JSONL files, one sequence per line, so they stream and diff
cleanly.  A loaded corpus is immutable and safe for concurrent reads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import CorpusError
from .taxonomy import Taxonomy

LABELS = ("benign", "malicious", "unknown")


@dataclass(frozen=True)
class SourceRef:
    package: str
    version: str
    file: str
    line_start: int
    line_end: int

    def __post_init__(self) -> None:
        if self.line_start > self.line_end:
            raise CorpusError(
                f"source ref {self.file!r}: line_start > line_end"
            )
        if self.file.startswith("/") or self.file.startswith("\\"):
            raise CorpusError(f"source ref {self.file!r}: path must be relative")

    def to_dict(self) -> dict:
        return {
            "package": self.package,
            "version": self.version,
            "file": self.file,
            "line_start": self.line_start,
            "line_end": self.line_end,
        }


@dataclass(frozen=True)
class ActionSequence:
    id: str
    label: str
    actions: tuple[str, ...]
    context: Optional[str] = None
    source: Optional[SourceRef] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("sequence id must be nonempty")
        if self.label not in LABELS:
            raise CorpusError(f"sequence {self.id!r}: unknown label {self.label!r}")
        if len(self.actions) < 1:
            raise CorpusError(f"sequence {self.id!r}: actions must be nonempty")

    def to_dict(self) -> dict:
        out: dict = {"id": self.id, "label": self.label, "actions": list(self.actions)}
        if self.context is not None:
            out["context"] = self.context
        if self.source is not None:
            out["source"] = self.source.to_dict()
        return out


class Corpus:
    """Ordered, validated collection of action sequences."""

    def __init__(self, sequences: Iterable[ActionSequence]):
        self._sequences = tuple(sequences)
        self._by_id: dict[str, ActionSequence] = {}
        for seq in self._sequences:
            if seq.id in self._by_id:
                raise CorpusError(f"duplicate sequence id {seq.id!r}")
            self._by_id[seq.id] = seq

    def __len__(self) -> int:
        return len(self._sequences)

    def __iter__(self):
        return iter(self._sequences)

    def __eq__(self, other) -> bool:
        return isinstance(other, Corpus) and self._sequences == other._sequences

    def get(self, seq_id: str) -> ActionSequence:
        try:
            return self._by_id[seq_id]
        except KeyError:
            raise CorpusError(f"unknown sequence id {seq_id!r}") from None

    def __contains__(self, seq_id: str) -> bool:
        return seq_id in self._by_id

    @property
    def benign(self) -> tuple[ActionSequence, ...]:
        return tuple(s for s in self._sequences if s.label == "benign")

    @property
    def malicious(self) -> tuple[ActionSequence, ...]:
        return tuple(s for s in self._sequences if s.label == "malicious")

    def label_of(self, seq_id: str) -> str:
        return self.get(seq_id).label

    def split_by_label(self):
        """Partition into (benign, malicious); error on any unknown label."""
        unknown = [s.id for s in self._sequences if s.label == "unknown"]
        if unknown:
            raise CorpusError(
                f"corpus contains {len(unknown)} 'unknown'-labeled sequences "
                f"(first: {unknown[0]!r}); training corpora must be fully labeled"
            )
        return self.benign, self.malicious

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(seq.to_dict(), ensure_ascii=False) + "\n"
            for seq in self._sequences
        )


def _parse_line(line: str, lineno: int, taxonomy: Taxonomy) -> ActionSequence:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {lineno}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise CorpusError(f"line {lineno}: expected an object")
    label = raw.get("label")
    if label not in LABELS:
        raise CorpusError(f"line {lineno}: unknown label {label!r}")
    actions = raw.get("actions")
    if not isinstance(actions, list) or not actions:
        raise CorpusError(f"line {lineno}: 'actions' must be a nonempty list")
    for action in actions:
        if action not in taxonomy:
            raise CorpusError(
                f"line {lineno}: action {action!r} not in taxonomy"
            )
    source = None
    if raw.get("source") is not None:
        s = raw["source"]
        try:
            source = SourceRef(
                package=s.get("package", ""),
                version=s.get("version", ""),
                file=s.get("file", ""),
                line_start=int(s.get("line_start", 1)),
                line_end=int(s.get("line_end", 1)),
            )
        except (CorpusError, TypeError, ValueError) as exc:
            raise CorpusError(f"line {lineno}: bad source ref: {exc}") from None
    try:
        return ActionSequence(
            id=str(raw.get("id", "")),
            label=label,
            actions=tuple(actions),
            context=raw.get("context"),
            source=source,
        )
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from None


def load_corpus(source: str, taxonomy: Taxonomy) -> Corpus:
    """Load a JSONL corpus, validating every sequence against the taxonomy.

    Errors name the offending line number.
    """
    sequences = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(source.splitlines(), start=1):
        if not line.strip():
            continue
        seq = _parse_line(line, lineno, taxonomy)
        if seq.id in seen_ids:
            raise CorpusError(f"line {lineno}: duplicate sequence id {seq.id!r}")
        seen_ids.add(seq.id)
        sequences.append(seq)
    return Corpus(sequences)


def load_corpus_path(path, taxonomy: Taxonomy) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return load_corpus(fh.read(), taxonomy)
