"""Detection pipeline: per-file staged classification, package aggregation.

Stage order per sequence: deterministic subsequence matching (confidence
1.0), then knowledge-driven reasoning over matched justifiable patterns
with retrieved similar cases, then an offline similarity-weighted vote
when no reasoning provider answers.  A package is malicious iff any of
its files is.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .corpus import ActionSequence
from .extractor import locate_sites, map_to_sequence, slice_context
from .knowledge import KnowledgeBase, KnowledgeEntry, RetrievalSet
from .miner import KIND_DET_BENIGN, KIND_DET_MALICIOUS, KIND_JUSTIFIABLE
from .providers import Providers
from .taxonomy import Taxonomy

STAGE_DETERMINISTIC = "deterministic"
STAGE_JUSTIFIABLE_KNOWLEDGE = "justifiable_knowledge"
STAGE_RETRIEVAL_VOTE = "retrieval_vote"
STAGE_NO_SIGNAL = "no_signal"

STATUS_SCANNED = "scanned"
STATUS_SKIPPED = "skipped"
STATUS_WARNING = "warning"


@dataclass(frozen=True)
class Evidence:
    matched_pattern_ids: tuple[str, ...] = ()
    retrieved: tuple[dict, ...] = ()  # {case_id, similarity, channel, label}
    reasoning: str = ""

    def to_dict(self) -> dict:
        return {
            "matched_pattern_ids": list(self.matched_pattern_ids),
            "retrieved": [dict(r) for r in self.retrieved],
            "reasoning": self.reasoning,
        }


@dataclass(frozen=True)
class Verdict:
    subject: str
    classification: str  # benign | malicious
    confidence: float
    stage: str
    evidence: Evidence = field(default_factory=Evidence)

    def __post_init__(self) -> None:
        if self.stage == STAGE_DETERMINISTIC:
            assert self.confidence == 1.0
        if self.stage == STAGE_NO_SIGNAL:
            assert self.classification == "benign" and self.confidence <= 0.5

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "classification": self.classification,
            "confidence": self.confidence,
            "stage": self.stage,
            "evidence": self.evidence.to_dict(),
        }


def _retrieval_evidence(retrieval: RetrievalSet) -> tuple[dict, ...]:
    return tuple(
        {
            "case_id": r.case_id,
            "similarity": r.similarity,
            "channel": r.channel,
            "label": r.label,
        }
        for r in retrieval
    )


def classify_sequence(
    s_new: ActionSequence,
    c_new: Optional[str],
    kb: KnowledgeBase,
    providers: Providers,
) -> Verdict:
    """Classify one action sequence against the knowledge base."""
    matched = kb.lookup_subsequence(s_new.actions)
    det_malicious = [m for m in matched if m.pattern.kind == KIND_DET_MALICIOUS]
    det_benign = [m for m in matched if m.pattern.kind == KIND_DET_BENIGN]
    justifiable = [m for m in matched if m.pattern.kind == KIND_JUSTIFIABLE]

    if det_malicious:
        # Any malicious deterministic match wins, even against benign matches.
        ids = tuple(m.pattern.id for m in det_malicious + det_benign)
        return Verdict(
            subject=s_new.id,
            classification="malicious",
            confidence=1.0,
            stage=STAGE_DETERMINISTIC,
            evidence=Evidence(
                matched_pattern_ids=ids,
                reasoning="matched deterministic malicious pattern(s)",
            ),
        )
    if det_benign:
        return Verdict(
            subject=s_new.id,
            classification="benign",
            confidence=1.0,
            stage=STAGE_DETERMINISTIC,
            evidence=Evidence(
                matched_pattern_ids=tuple(m.pattern.id for m in det_benign),
                reasoning="matched deterministic benign pattern(s) only",
            ),
        )

    seq_embedding = providers.embedder.embed_actions(list(s_new.actions))
    ctx_embedding = providers.embedder.embed_text(c_new) if c_new else None
    retrieval = kb.retrieve_similar(
        seq_embedding,
        ctx_embedding,
        scope=justifiable or None,
        k=kb.config.k,
    )
    if not justifiable and len(retrieval) == 0:
        return Verdict(
            subject=s_new.id,
            classification="benign",
            confidence=0.5,
            stage=STAGE_NO_SIGNAL,
            evidence=Evidence(reasoning="no pattern match and empty retrieval"),
        )

    matched_ids = tuple(m.pattern.id for m in justifiable)
    if providers.reasoner is not None:
        answer = providers.reasoner.classify(
            _reasoning_payload(s_new, c_new, justifiable, kb, retrieval)
        )
        if answer is not None:
            return Verdict(
                subject=s_new.id,
                classification=answer["classification"],
                confidence=answer["confidence"],
                stage=STAGE_JUSTIFIABLE_KNOWLEDGE,
                evidence=Evidence(
                    matched_pattern_ids=matched_ids,
                    retrieved=_retrieval_evidence(retrieval),
                    reasoning=answer["reasoning"],
                ),
            )

    return _vote(s_new, matched_ids, justifiable, retrieval)


def _reasoning_payload(
    s_new: ActionSequence,
    c_new: Optional[str],
    justifiable: Sequence[KnowledgeEntry],
    kb: KnowledgeBase,
    retrieval: RetrievalSet,
) -> dict:
    def case_payload(record) -> dict:
        case = kb.case(record.case_id)
        return {
            "id": case.id,
            "actions": list(case.actions),
            "context": case.context or "",
            "similarity": record.similarity,
            "channel": record.channel,
        }

    return {
        "target": {"actions": list(s_new.actions), "context": c_new or ""},
        "matched_patterns": [
            {
                "actions": list(m.pattern.actions),
                "kind": m.pattern.kind,
                "bias_class": m.pattern.bias_class,
                "bias_ratio": m.pattern.bias_ratio_residual,
                "distinction_rules": list(m.annotation.distinction_rules),
            }
            for m in justifiable
        ],
        "benign_cases": [
            case_payload(r) for r in retrieval if r.label == "benign"
        ],
        "malicious_cases": [
            case_payload(r) for r in retrieval if r.label == "malicious"
        ],
    }


def _vote(
    s_new: ActionSequence,
    matched_ids: tuple[str, ...],
    justifiable: Sequence[KnowledgeEntry],
    retrieval: RetrievalSet,
) -> Verdict:
    """Similarity-weighted vote over retrieved cases (each case counted
    once, at its best channel similarity)."""
    best = retrieval.best_per_case()
    score_malicious = sum(
        r.similarity for r in best.values() if r.label == "malicious"
    )
    score_benign = sum(r.similarity for r in best.values() if r.label == "benign")
    total = score_malicious + score_benign
    classification = "malicious" if score_malicious >= score_benign else "benign"
    margin = abs(score_malicious - score_benign) / total if total > 0 else 0.0
    confidence = margin
    if justifiable:
        floor = max(m.pattern.bias_ratio_residual for m in justifiable)
        confidence = max(confidence, floor)
    return Verdict(
        subject=s_new.id,
        classification=classification,
        confidence=confidence,
        stage=STAGE_RETRIEVAL_VOTE,
        evidence=Evidence(
            matched_pattern_ids=matched_ids,
            retrieved=_retrieval_evidence(retrieval),
            reasoning=(
                f"similarity vote: malicious={score_malicious:.6f} "
                f"benign={score_benign:.6f}"
            ),
        ),
    )


@dataclass(frozen=True)
class FileOutcome:
    path: str
    status: str  # scanned | skipped | warning
    verdict: Optional[Verdict] = None
    note: str = ""

    def to_dict(self) -> dict:
        out: dict = {"path": self.path, "status": self.status}
        if self.verdict is not None:
            out["verdict"] = self.verdict.to_dict()
        if self.note:
            out["note"] = self.note
        return out


@dataclass(frozen=True)
class DetectionReport:
    package: str
    classification: str
    files: tuple[FileOutcome, ...]
    files_skipped: int
    timings_ms: dict

    def to_dict(self) -> dict:
        scanned = [f for f in self.files if f.status == STATUS_SCANNED]
        malicious = [
            f
            for f in scanned
            if f.verdict is not None and f.verdict.classification == "malicious"
        ]
        return {
            "package": self.package,
            "classification": self.classification,
            "files": [f.to_dict() for f in self.files],
            "summary": {
                "files_total": len(self.files),
                "files_scanned": len(scanned),
                "files_skipped": self.files_skipped,
                "malicious_files": len(malicious),
            },
            "timings_ms": dict(self.timings_ms),
        }


def scan_source(
    source_text: str,
    rel_path: str,
    taxonomy: Taxonomy,
    kb: KnowledgeBase,
    providers: Providers,
) -> FileOutcome:
    """Scan one file's content: extract, map, classify."""
    sites = locate_sites(source_text, taxonomy, file=rel_path)
    if not sites:
        return FileOutcome(path=rel_path, status=STATUS_SKIPPED)
    slices = slice_context(source_text, sites)
    sequence = map_to_sequence(
        rel_path, sites, mapper=providers.mapper, slices=slices
    )
    verdict = classify_sequence(sequence, sequence.context, kb, providers)
    return FileOutcome(path=rel_path, status=STATUS_SCANNED, verdict=verdict)


def scan_file(
    path,
    taxonomy: Taxonomy,
    kb: KnowledgeBase,
    providers: Providers,
    rel_path: Optional[str] = None,
) -> FileOutcome:
    path = Path(path)
    rel = rel_path if rel_path is not None else path.name
    try:
        source_text = path.read_text(encoding="utf-8")
        if "\x00" in source_text:
            raise UnicodeDecodeError("utf-8", b"", 0, 1, "NUL byte in text")
    except (OSError, UnicodeDecodeError) as exc:
        return FileOutcome(
            path=rel, status=STATUS_WARNING, note=f"unreadable as text: {exc}"
        )
    return scan_source(source_text, rel, taxonomy, kb, providers)


def _rank_key(rel_path: str) -> tuple:
    """Install-time files first, then import-time, then the rest,
    lexicographic within each group."""
    name = rel_path.rsplit("/", 1)[-1]
    priority = 0 if name == "setup.py" else 1 if name == "__init__.py" else 2
    return (priority, rel_path)


def _scan_order(root: Path) -> list[Path]:
    return sorted(
        root.rglob("*.py"), key=lambda p: _rank_key(p.relative_to(root).as_posix())
    )


def _assemble_report(
    package: str, outcomes: Sequence[FileOutcome], started: float
) -> DetectionReport:
    malicious = any(
        o.verdict is not None and o.verdict.classification == "malicious"
        for o in outcomes
    )
    skipped = sum(1 for o in outcomes if o.status != STATUS_SCANNED)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    return DetectionReport(
        package=package,
        classification="malicious" if malicious else "benign",
        files=tuple(outcomes),
        files_skipped=skipped,
        timings_ms={"scan_total": elapsed_ms},
    )


def scan_contents(
    package: str,
    files: Sequence[tuple[str, str]],
    taxonomy: Taxonomy,
    kb: KnowledgeBase,
    providers: Providers,
) -> DetectionReport:
    """Scan in-memory (rel_path, source_text) pairs as one package."""
    started = time.perf_counter()
    ordered = sorted(files, key=lambda item: _rank_key(item[0]))
    outcomes = [
        scan_source(text, rel, taxonomy, kb, providers) for rel, text in ordered
    ]
    return _assemble_report(package, outcomes, started)


def scan_package(
    root,
    taxonomy: Taxonomy,
    kb: KnowledgeBase,
    providers: Providers,
    jobs: int = 1,
) -> DetectionReport:
    """Scan all .py files under root; package is malicious iff any file is."""
    root = Path(root)
    if not root.exists():
        raise FileNotFoundError(f"package path does not exist: {root}")
    started = time.perf_counter()
    files = _scan_order(root)
    rels = [f.relative_to(root).as_posix() for f in files]

    def work(i: int) -> FileOutcome:
        return scan_file(files[i], taxonomy, kb, providers, rel_path=rels[i])

    if jobs > 1 and len(files) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, range(len(files))))
    else:
        outcomes = [work(i) for i in range(len(files))]
    return _assemble_report(root.name, outcomes, started)
