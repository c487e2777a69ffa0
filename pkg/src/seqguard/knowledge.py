"""Dual-layer knowledge base: annotated patterns plus their example cases.

The pattern layer stores each mined pattern with a semantic annotation;
the case layer stores every corpus sequence with precomputed embeddings.
Three index types serve detection: a hash index for exact pattern
matches, an inverted index for subsequence matches, and a vector index
for cosine similarity retrieval.  A built KB is immutable and safe for
unrestricted concurrent queries.

On disk a KB is a directory: ``kb.json`` (entries + config),
``cases.jsonl`` (case store), ``embeddings.bin`` / ``ctx_embeddings.bin``
(float32 rows; context rows are zero where a case has no context).
Embeddings are quantized to float32 at build time so a reloaded KB
answers bit-identically to the in-memory one.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import Corpus
from .errors import KnowledgeBaseError
from .miner import MiningResult, Pattern, covers, load_mining_result
from .providers import Annotation, CaseSnippets
from .taxonomy import Taxonomy

EMBEDDINGS_MAGIC = b"SGKB"
EMBEDDINGS_VERSION = 1
DEFAULT_K = 5

CHANNEL_SEQUENCE = "sequence"
CHANNEL_CONTEXT = "context"


@dataclass(frozen=True)
class KnowledgeEntry:
    pattern: Pattern
    annotation: Annotation
    benign_case_ids: tuple[str, ...]
    malicious_case_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        linked = set(self.benign_case_ids) | set(self.malicious_case_ids)
        if linked != set(self.pattern.covered_ids):
            raise KnowledgeBaseError(
                f"entry {self.pattern.id}: case ids do not partition covered_ids"
            )
        if set(self.benign_case_ids) & set(self.malicious_case_ids):
            raise KnowledgeBaseError(
                f"entry {self.pattern.id}: benign/malicious case ids overlap"
            )

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern.to_dict(),
            "annotation": self.annotation.to_dict(),
            "benign_case_ids": list(self.benign_case_ids),
            "malicious_case_ids": list(self.malicious_case_ids),
        }


@dataclass(frozen=True)
class CaseRecord:
    id: str
    label: str
    actions: tuple[str, ...]
    context: Optional[str] = None

    def to_dict(self) -> dict:
        out: dict = {"id": self.id, "label": self.label, "actions": list(self.actions)}
        if self.context is not None:
            out["context"] = self.context
        return out


@dataclass(frozen=True)
class KBConfig:
    dim: int
    k: int = DEFAULT_K
    embedding_provider: str = "offline-hash-v1"
    reasoning_provider: str = "offline-template-v1"

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "k": self.k,
            "embedding_provider": self.embedding_provider,
            "reasoning_provider": self.reasoning_provider,
        }


@dataclass(frozen=True)
class RetrievedCase:
    case_id: str
    similarity: float
    channel: str  # "sequence" | "context"
    label: str  # "benign" | "malicious"


@dataclass(frozen=True)
class RetrievalSet:
    records: tuple[RetrievedCase, ...]

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def best_per_case(self) -> dict[str, RetrievedCase]:
        """Each retrieved case once, at its highest similarity across channels."""
        best: dict[str, RetrievedCase] = {}
        for record in self.records:
            prior = best.get(record.case_id)
            if prior is None or record.similarity > prior.similarity:
                best[record.case_id] = record
        return best


def _as_f32_representable(vector: np.ndarray) -> np.ndarray:
    return vector.astype(np.float32).astype(np.float64)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


class KnowledgeBase:
    """Immutable store of knowledge entries, cases, and embeddings."""

    def __init__(
        self,
        entries: Sequence[KnowledgeEntry],
        cases: Sequence[CaseRecord],
        seq_embeddings: np.ndarray,
        ctx_embeddings: np.ndarray,
        ctx_present: Sequence[bool],
        config: KBConfig,
    ):
        self.entries = tuple(sorted(entries, key=lambda e: e.pattern.id))
        self.cases = tuple(cases)
        self.config = config
        if seq_embeddings.shape != (len(self.cases), config.dim):
            raise KnowledgeBaseError(
                f"sequence embeddings shape {seq_embeddings.shape} does not "
                f"match {len(self.cases)} cases x dim {config.dim}"
            )
        if ctx_embeddings.shape != seq_embeddings.shape:
            raise KnowledgeBaseError("context embeddings shape mismatch")
        self._seq_emb = seq_embeddings
        self._ctx_emb = ctx_embeddings
        self._ctx_present = tuple(bool(x) for x in ctx_present)
        self._row_of = {case.id: i for i, case in enumerate(self.cases)}
        if len(self._row_of) != len(self.cases):
            raise KnowledgeBaseError("duplicate case ids in case store")
        for entry in self.entries:
            for cid in entry.pattern.covered_ids:
                if cid not in self._row_of:
                    raise KnowledgeBaseError(
                        f"entry {entry.pattern.id}: case id {cid!r} not in store"
                    )
        # Hash index: exact action-list match.
        self._exact: dict[tuple[str, ...], list[KnowledgeEntry]] = {}
        # Inverted index action -> entries, with per-entry action multisets,
        # for subsequence candidate prefiltering.
        self._inverted: dict[str, set[int]] = {}
        self._entry_counts: list[Counter] = []
        for idx, entry in enumerate(self.entries):
            self._exact.setdefault(entry.pattern.actions, []).append(entry)
            self._entry_counts.append(Counter(entry.pattern.actions))
            for action in set(entry.pattern.actions):
                self._inverted.setdefault(action, set()).add(idx)

    # -- case layer --------------------------------------------------------

    def case(self, case_id: str) -> CaseRecord:
        try:
            return self.cases[self._row_of[case_id]]
        except KeyError:
            raise KnowledgeBaseError(f"unknown case id {case_id!r}") from None

    def case_sequence_embedding(self, case_id: str) -> np.ndarray:
        return self._seq_emb[self._row_of[case_id]]

    def case_context_embedding(self, case_id: str) -> Optional[np.ndarray]:
        row = self._row_of[case_id]
        return self._ctx_emb[row] if self._ctx_present[row] else None

    # -- pattern layer lookups ----------------------------------------------

    def lookup_exact(self, actions: Sequence[str]) -> list[KnowledgeEntry]:
        return list(self._exact.get(tuple(actions), []))

    def lookup_subsequence(
        self, sequence_actions: Sequence[str]
    ) -> list[KnowledgeEntry]:
        """Entries whose pattern embeds in the query as an ordered subsequence."""
        query = tuple(sequence_actions)
        query_counts = Counter(query)
        candidates: set[int] = set()
        for action in query_counts:
            candidates.update(self._inverted.get(action, ()))
        matched = []
        for idx in sorted(candidates):
            entry = self.entries[idx]
            counts = self._entry_counts[idx]
            if any(query_counts[a] < n for a, n in counts.items()):
                continue
            if covers(entry.pattern.actions, query):
                matched.append(entry)
        return matched

    # -- vector retrieval ----------------------------------------------------

    def _pool_rows(self, scope: Optional[Sequence[KnowledgeEntry]]):
        if scope:
            benign_ids: dict[str, None] = {}
            malicious_ids: dict[str, None] = {}
            for entry in scope:
                for cid in entry.benign_case_ids:
                    benign_ids.setdefault(cid, None)
                for cid in entry.malicious_case_ids:
                    malicious_ids.setdefault(cid, None)
            benign = sorted(self._row_of[c] for c in benign_ids)
            malicious = sorted(self._row_of[c] for c in malicious_ids)
        else:
            benign = [
                i for i, case in enumerate(self.cases) if case.label == "benign"
            ]
            malicious = [
                i for i, case in enumerate(self.cases) if case.label == "malicious"
            ]
        return benign, malicious

    def _top_k(
        self, query: np.ndarray, rows: list[int], matrix: np.ndarray, k: int,
        channel: str, label: str,
    ) -> list[RetrievedCase]:
        scored = []
        for row in rows:
            sim = cosine(query, matrix[row])
            scored.append((-sim, self.cases[row].id, sim))
        scored.sort()
        return [
            RetrievedCase(case_id=cid, similarity=sim, channel=channel, label=label)
            for _negsim, cid, sim in scored[:k]
        ]

    def retrieve_similar(
        self,
        query_seq_embedding: Optional[np.ndarray],
        query_ctx_embedding: Optional[np.ndarray] = None,
        scope: Optional[Sequence[KnowledgeEntry]] = None,
        k: Optional[int] = None,
    ) -> RetrievalSet:
        """Top-k cases per (channel, class) pool; union of all four lists.

        Channels with no query embedding (or cases without context)
        contribute nothing.  Results sort by channel, then similarity
        descending, then case id.
        """
        k = self.config.k if k is None else k
        benign_rows, malicious_rows = self._pool_rows(scope)
        records: list[RetrievedCase] = []
        if query_seq_embedding is not None:
            query = np.asarray(query_seq_embedding, dtype=np.float64)
            if len(query) != self.config.dim:
                raise KnowledgeBaseError(
                    f"query dimension {len(query)} != KB dim {self.config.dim}"
                )
            records += self._top_k(
                query, benign_rows, self._seq_emb, k, CHANNEL_SEQUENCE, "benign"
            )
            records += self._top_k(
                query, malicious_rows, self._seq_emb, k, CHANNEL_SEQUENCE,
                "malicious",
            )
        if query_ctx_embedding is not None:
            query = np.asarray(query_ctx_embedding, dtype=np.float64)
            if len(query) != self.config.dim:
                raise KnowledgeBaseError(
                    f"query dimension {len(query)} != KB dim {self.config.dim}"
                )
            ctx_benign = [r for r in benign_rows if self._ctx_present[r]]
            ctx_malicious = [r for r in malicious_rows if self._ctx_present[r]]
            records += self._top_k(
                query, ctx_benign, self._ctx_emb, k, CHANNEL_CONTEXT, "benign"
            )
            records += self._top_k(
                query, ctx_malicious, self._ctx_emb, k, CHANNEL_CONTEXT,
                "malicious",
            )
        records.sort(key=lambda r: (r.channel, -r.similarity, r.case_id))
        return RetrievalSet(records=tuple(records))

    # -- persistence ----------------------------------------------------------

    def to_kb_json(self) -> str:
        payload = {
            "version": 1,
            "config": self.config.to_dict(),
            "entries": [e.to_dict() for e in self.entries],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "kb.json").write_text(self.to_kb_json(), encoding="utf-8")
        with open(directory / "cases.jsonl", "w", encoding="utf-8") as fh:
            for case in self.cases:
                fh.write(json.dumps(case.to_dict(), ensure_ascii=False) + "\n")
        _write_embeddings(directory / "embeddings.bin", self._seq_emb)
        ctx = self._ctx_emb.copy()
        for row, present in enumerate(self._ctx_present):
            if not present:
                ctx[row] = 0.0
        _write_embeddings(directory / "ctx_embeddings.bin", ctx)


def _write_embeddings(path: Path, matrix: np.ndarray) -> None:
    rows, dim = matrix.shape
    header = EMBEDDINGS_MAGIC + struct.pack("<IIQ", EMBEDDINGS_VERSION, dim, rows)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(matrix.astype("<f4").tobytes(order="C"))


def _read_embeddings(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if raw[:4] != EMBEDDINGS_MAGIC:
        raise KnowledgeBaseError(f"{path.name}: bad magic")
    version, dim, rows = struct.unpack("<IIQ", raw[4:20])
    if version != EMBEDDINGS_VERSION:
        raise KnowledgeBaseError(f"{path.name}: unsupported version {version}")
    expected = 20 + rows * dim * 4
    if len(raw) != expected:
        raise KnowledgeBaseError(
            f"{path.name}: size {len(raw)} != expected {expected}"
        )
    matrix = np.frombuffer(raw[20:], dtype="<f4").reshape(rows, dim)
    return matrix.astype(np.float64)


def build_kb(
    mining_result: MiningResult,
    corpus: Corpus,
    embed_provider,
    reasoning_provider,
    k: int = DEFAULT_K,
) -> KnowledgeBase:
    """Build an immutable KB: one entry per merged pattern, all corpus
    sequences as cases with precomputed embeddings."""
    cases = []
    seq_rows = []
    ctx_rows = []
    ctx_present = []
    dim = getattr(embed_provider, "dim")
    for seq in corpus:
        cases.append(
            CaseRecord(
                id=seq.id, label=seq.label, actions=seq.actions, context=seq.context
            )
        )
        seq_rows.append(
            _as_f32_representable(embed_provider.embed_actions(list(seq.actions)))
        )
        if seq.context:
            ctx_rows.append(
                _as_f32_representable(embed_provider.embed_text(seq.context))
            )
            ctx_present.append(True)
        else:
            ctx_rows.append(np.zeros(dim, dtype=np.float64))
            ctx_present.append(False)
    entries = []
    for pattern in mining_result.patterns:
        benign_ids = []
        malicious_ids = []
        for cid in pattern.covered_ids:
            label = corpus.get(cid).label
            if label == "benign":
                benign_ids.append(cid)
            elif label == "malicious":
                malicious_ids.append(cid)
            else:
                raise KnowledgeBaseError(
                    f"pattern {pattern.id}: case {cid!r} has unknown label"
                )
        snippets = CaseSnippets(
            benign=tuple(
                corpus.get(c).context or "" for c in benign_ids
            ),
            malicious=tuple(
                corpus.get(c).context or "" for c in malicious_ids
            ),
        )
        annotation = reasoning_provider.annotate(pattern, snippets)
        entries.append(
            KnowledgeEntry(
                pattern=pattern,
                annotation=annotation,
                benign_case_ids=tuple(benign_ids),
                malicious_case_ids=tuple(malicious_ids),
            )
        )
    seq_matrix = (
        np.vstack(seq_rows) if seq_rows else np.zeros((0, dim), dtype=np.float64)
    )
    ctx_matrix = (
        np.vstack(ctx_rows) if ctx_rows else np.zeros((0, dim), dtype=np.float64)
    )
    config = KBConfig(
        dim=dim,
        k=k,
        embedding_provider=getattr(embed_provider, "name", "unknown"),
        reasoning_provider=getattr(reasoning_provider, "name", "unknown"),
    )
    return KnowledgeBase(
        entries=entries,
        cases=cases,
        seq_embeddings=seq_matrix,
        ctx_embeddings=ctx_matrix,
        ctx_present=ctx_present,
        config=config,
    )


def load_kb(directory, taxonomy: Taxonomy) -> KnowledgeBase:
    """Load a persisted KB, validating all actions against the taxonomy."""
    directory = Path(directory)
    kb_path = directory / "kb.json"
    if not kb_path.exists():
        raise KnowledgeBaseError(f"no kb.json under {directory}")
    raw = json.loads(kb_path.read_text(encoding="utf-8"))
    config = KBConfig(
        dim=int(raw["config"]["dim"]),
        k=int(raw["config"].get("k", DEFAULT_K)),
        embedding_provider=raw["config"].get("embedding_provider", "unknown"),
        reasoning_provider=raw["config"].get("reasoning_provider", "unknown"),
    )
    # Reuse the pattern-file loader for validation of embedded patterns.
    patterns_payload = {
        "version": 1,
        "config": {},
        "patterns": [e["pattern"] for e in raw.get("entries", [])],
    }
    mining = load_mining_result(json.dumps(patterns_payload), taxonomy)
    by_id = {p.id: p for p in mining.patterns}
    entries = []
    for e in raw.get("entries", []):
        pattern = by_id[e["pattern"]["id"]]
        entries.append(
            KnowledgeEntry(
                pattern=pattern,
                annotation=Annotation.from_dict(e.get("annotation", {})),
                benign_case_ids=tuple(e.get("benign_case_ids", ())),
                malicious_case_ids=tuple(e.get("malicious_case_ids", ())),
            )
        )
    cases = []
    ctx_present = []
    cases_path = directory / "cases.jsonl"
    for line in cases_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        c = json.loads(line)
        taxonomy.validate_actions(c.get("actions", ()), where=f"case {c.get('id')}")
        record = CaseRecord(
            id=c["id"],
            label=c["label"],
            actions=tuple(c["actions"]),
            context=c.get("context"),
        )
        cases.append(record)
        ctx_present.append(record.context is not None and record.context != "")
    seq_matrix = _read_embeddings(directory / "embeddings.bin")
    ctx_matrix = _read_embeddings(directory / "ctx_embeddings.bin")
    return KnowledgeBase(
        entries=entries,
        cases=cases,
        seq_embeddings=seq_matrix,
        ctx_embeddings=ctx_matrix,
        ctx_present=ctx_present,
        config=config,
    )
