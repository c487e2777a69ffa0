"""Hierarchical discriminative sequence-pattern mining.

Three phases over labeled action-sequence corpora:

1. deterministic mining — frequent subsequences covering only one class,
   mined at progressively decreasing support thresholds, removing covered
   sequences between rounds;
2. justifiable mining — subsequences over the phase-1 residuals whose
   dominant-class coverage ratio meets the distinction threshold;
3. greedy merge — minimal pattern subset preserving total coverage over
   the original corpus.

Patterns are order-preserving subsequences with gaps allowed, and support
is sequence-level (each sequence counted once).  The whole pipeline is a
pure function of (corpus, config): identical inputs give byte-identical
serialized output.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .corpus import ActionSequence, Corpus
from .errors import MiningError
from .taxonomy import Taxonomy

KIND_DET_BENIGN = "deterministic_benign"
KIND_DET_MALICIOUS = "deterministic_malicious"
KIND_JUSTIFIABLE = "justifiable"
KINDS = (KIND_DET_BENIGN, KIND_DET_MALICIOUS, KIND_JUSTIFIABLE)

DEFAULT_SUPPORTS = (30, 25, 20, 15, 10, 7, 5, 3, 2)
DEFAULT_TAU = 0.9
DEFAULT_MIN_PATTERN_LEN = 2


def pattern_id(actions: Sequence[str]) -> str:
    digest = hashlib.sha256("\x1f".join(actions).encode("utf-8")).hexdigest()
    return digest[:16]


@dataclass(frozen=True)
class Pattern:
    id: str
    actions: tuple[str, ...]
    kind: str
    bias_class: str
    bias_ratio_residual: float
    bias_ratio_full: float
    support: int
    discovered_at_support: int
    covered_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise MiningError(f"unknown pattern kind {self.kind!r}")
        if not self.covered_ids:
            raise MiningError(f"pattern {self.id}: covered_ids must be nonempty")

    @property
    def is_deterministic(self) -> bool:
        return self.kind in (KIND_DET_BENIGN, KIND_DET_MALICIOUS)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "actions": list(self.actions),
            "kind": self.kind,
            "bias_class": self.bias_class,
            "bias_ratio_residual": self.bias_ratio_residual,
            "bias_ratio_full": self.bias_ratio_full,
            "support": self.support,
            "discovered_at_support": self.discovered_at_support,
            "covered_ids": list(self.covered_ids),
        }


@dataclass(frozen=True)
class MiningConfig:
    supports: tuple[int, ...] = DEFAULT_SUPPORTS
    tau: float = DEFAULT_TAU
    min_pattern_len: int = DEFAULT_MIN_PATTERN_LEN

    def __post_init__(self) -> None:
        if not self.supports:
            raise MiningError("supports must be nonempty")
        if any(s < 1 for s in self.supports):
            raise MiningError("supports must be positive integers")
        if any(a <= b for a, b in zip(self.supports, self.supports[1:])):
            raise MiningError(f"supports must be strictly decreasing: {self.supports}")
        if not 0.5 < self.tau <= 1.0:
            raise MiningError(f"tau must be in (0.5, 1], got {self.tau}")
        if self.min_pattern_len < 1:
            raise MiningError("min_pattern_len must be >= 1")

    def to_dict(self) -> dict:
        return {
            "supports": list(self.supports),
            "tau": self.tau,
            "min_pattern_len": self.min_pattern_len,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MiningConfig":
        return cls(
            supports=tuple(raw.get("supports", DEFAULT_SUPPORTS)),
            tau=raw.get("tau", DEFAULT_TAU),
            min_pattern_len=raw.get("min_pattern_len", DEFAULT_MIN_PATTERN_LEN),
        )


def covers(pattern: Sequence[str], sequence: Sequence[str]) -> bool:
    """True iff pattern is an order-preserving subsequence (gaps allowed)."""
    it = iter(sequence)
    return all(item in it for item in pattern)


def _actions_of(seq) -> tuple[str, ...]:
    return tuple(seq.actions) if isinstance(seq, ActionSequence) else tuple(seq)


def prefixspan(
    sequences: Iterable, min_support: int, min_len: int
) -> list[tuple[tuple[str, ...], int]]:
    """All subsequence patterns of length >= min_len with sequence-level
    support >= min_support, with exact supports.

    Accepts ActionSequence objects or plain action lists.  Output is sorted
    by (pattern, support) for determinism.
    """
    if min_support < 1:
        raise MiningError("min_support must be >= 1")
    if min_len < 1:
        raise MiningError("min_len must be >= 1")
    db = [_actions_of(s) for s in sequences]
    results: list[tuple[tuple[str, ...], int]] = []

    def mine(prefix: tuple[str, ...], projected: list[tuple[int, int]]) -> None:
        counts: dict[str, int] = {}
        for si, start in projected:
            seq = db[si]
            seen: set[str] = set()
            for pos in range(start, len(seq)):
                item = seq[pos]
                if item not in seen:
                    seen.add(item)
                    counts[item] = counts.get(item, 0) + 1
        for item in sorted(counts):
            support = counts[item]
            if support < min_support:
                continue
            new_prefix = prefix + (item,)
            if len(new_prefix) >= min_len:
                results.append((new_prefix, support))
            new_projected = []
            for si, start in projected:
                seq = db[si]
                for pos in range(start, len(seq)):
                    if seq[pos] == item:
                        new_projected.append((si, pos + 1))
                        break
            mine(new_prefix, new_projected)

    mine((), [(i, 0) for i in range(len(db))])
    results.sort()
    return results


def max_coverage_ratio(
    pattern_actions: Sequence[str],
    benign: Sequence[ActionSequence],
    malicious: Sequence[ActionSequence],
) -> tuple[float, str]:
    """Fraction of covered sequences in the dominant class, plus that class.

    Ties resolve to malicious.  Raises on zero coverage; callers pre-filter
    by support.
    """
    covered_benign = sum(1 for s in benign if covers(pattern_actions, s.actions))
    covered_malicious = sum(
        1 for s in malicious if covers(pattern_actions, s.actions)
    )
    total = covered_benign + covered_malicious
    if total == 0:
        raise MiningError(
            f"pattern {list(pattern_actions)} covers no sequence; "
            f"filter candidates by support first"
        )
    dominant = "malicious" if covered_malicious >= covered_benign else "benign"
    return max(covered_benign, covered_malicious) / total, dominant


def _covered_ids(pattern_actions, sequences) -> list[str]:
    return [s.id for s in sequences if covers(pattern_actions, s.actions)]


def _finalize(
    actions: tuple[str, ...],
    kind: str,
    bias_class: str,
    bias_ratio_residual: float,
    support: int,
    discovered_at: int,
    full_benign: Sequence[ActionSequence],
    full_malicious: Sequence[ActionSequence],
) -> Pattern:
    cov_b = _covered_ids(actions, full_benign)
    cov_m = _covered_ids(actions, full_malicious)
    full_total = len(cov_b) + len(cov_m)
    bias_ratio_full = max(len(cov_b), len(cov_m)) / full_total
    return Pattern(
        id=pattern_id(actions),
        actions=actions,
        kind=kind,
        bias_class=bias_class,
        bias_ratio_residual=bias_ratio_residual,
        bias_ratio_full=bias_ratio_full,
        support=support,
        discovered_at_support=discovered_at,
        covered_ids=tuple(cov_b + cov_m),
    )


@dataclass(frozen=True)
class Phase1Round:
    """Audit record: residual state entering one deterministic-mining round."""

    support: int
    residual_benign_ids: tuple[str, ...]
    residual_malicious_ids: tuple[str, ...]
    pattern_ids: tuple[str, ...]


def mine_deterministic(
    benign: Sequence[ActionSequence],
    malicious: Sequence[ActionSequence],
    config: MiningConfig,
):
    """Phase 1: single-class patterns at decreasing supports, shrinking
    residuals between rounds.

    Returns (patterns, residual_benign, residual_malicious, rounds).
    """
    residual_b = list(benign)
    residual_m = list(malicious)
    found: list[Pattern] = []
    seen: set[tuple[str, ...]] = set()
    rounds: list[Phase1Round] = []
    for support_level in config.supports:
        if not residual_b and not residual_m:
            break
        frequent = prefixspan(
            residual_b + residual_m, support_level, config.min_pattern_len
        )
        round_patterns: list[Pattern] = []
        round_covered: set[str] = set()
        for actions, support in frequent:
            if actions in seen:
                continue
            cov_b = _covered_ids(actions, residual_b)
            cov_m = _covered_ids(actions, residual_m)
            if cov_b and not cov_m:
                kind, bias_class = KIND_DET_BENIGN, "benign"
            elif cov_m and not cov_b:
                kind, bias_class = KIND_DET_MALICIOUS, "malicious"
            else:
                continue
            seen.add(actions)
            round_patterns.append(
                _finalize(
                    actions, kind, bias_class, 1.0, support, support_level,
                    benign, malicious,
                )
            )
            round_covered.update(cov_b)
            round_covered.update(cov_m)
        rounds.append(
            Phase1Round(
                support=support_level,
                residual_benign_ids=tuple(s.id for s in residual_b),
                residual_malicious_ids=tuple(s.id for s in residual_m),
                pattern_ids=tuple(p.id for p in round_patterns),
            )
        )
        if round_covered:
            residual_b = [s for s in residual_b if s.id not in round_covered]
            residual_m = [s for s in residual_m if s.id not in round_covered]
        found.extend(round_patterns)
    return found, residual_b, residual_m, rounds


def mine_justifiable(
    residual_b: Sequence[ActionSequence],
    residual_m: Sequence[ActionSequence],
    config: MiningConfig,
    full_benign: Optional[Sequence[ActionSequence]] = None,
    full_malicious: Optional[Sequence[ActionSequence]] = None,
) -> list[Pattern]:
    """Phase 2: patterns over the phase-1 residuals with dominant-class
    ratio >= tau.  Residuals are not shrunk between support levels; dedup
    keeps the highest-support-level discovery.
    """
    full_benign = residual_b if full_benign is None else full_benign
    full_malicious = residual_m if full_malicious is None else full_malicious
    found: list[Pattern] = []
    seen: set[tuple[str, ...]] = set()
    for support_level in config.supports:
        if not residual_b and not residual_m:
            break
        frequent = prefixspan(
            list(residual_b) + list(residual_m), support_level,
            config.min_pattern_len,
        )
        for actions, support in frequent:
            if actions in seen:
                continue
            ratio, dominant = max_coverage_ratio(actions, residual_b, residual_m)
            if ratio < config.tau:
                continue
            seen.add(actions)
            found.append(
                _finalize(
                    actions, KIND_JUSTIFIABLE, dominant, ratio, support,
                    support_level, full_benign, full_malicious,
                )
            )
    return found


_KIND_RANK = {KIND_DET_BENIGN: 0, KIND_DET_MALICIOUS: 0, KIND_JUSTIFIABLE: 1}


def merge_patterns(
    candidates: Sequence[Pattern],
    full_benign: Sequence[ActionSequence],
    full_malicious: Sequence[ActionSequence],
) -> list[Pattern]:
    """Phase 3: greedy set cover over the original corpus.

    Repeatedly selects the candidate with the largest number of newly
    covered sequences; stops when nothing gains.  Ties break deterministic
    before justifiable, then shorter, then lexicographic action list, then
    pattern id.
    """
    universe = {s.id for s in full_benign} | {s.id for s in full_malicious}
    covered: set[str] = set()
    remaining = list(candidates)
    selected: list[Pattern] = []
    while covered != universe and remaining:
        best = None
        best_key = None
        for p in remaining:
            gain = len(set(p.covered_ids) - covered)
            key = (-gain, _KIND_RANK[p.kind], len(p.actions), p.actions, p.id)
            if best_key is None or key < best_key:
                best, best_key = p, key
        if best is None or -best_key[0] == 0:
            break
        selected.append(best)
        covered.update(best.covered_ids)
        remaining.remove(best)
    return selected


@dataclass(frozen=True)
class MiningResult:
    config: MiningConfig
    patterns: tuple[Pattern, ...]  # merged set, sorted by id
    deterministic: tuple[Pattern, ...] = ()
    justifiable: tuple[Pattern, ...] = ()
    stats: dict = field(default_factory=dict)
    phase1_rounds: tuple[Phase1Round, ...] = ()

    def pattern_by_id(self, pid: str) -> Pattern:
        for p in self.patterns:
            if p.id == pid:
                return p
        raise MiningError(f"unknown pattern id {pid!r}")

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "config": self.config.to_dict(),
            "patterns": [p.to_dict() for p in self.patterns],
            "stats": self.stats,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _coverage_stats(
    patterns: Sequence[Pattern],
    benign: Sequence[ActionSequence],
    malicious: Sequence[ActionSequence],
) -> dict:
    covered = set()
    for p in patterns:
        covered.update(p.covered_ids)
    benign_ids = {s.id for s in benign}
    malicious_ids = {s.id for s in malicious}
    total = len(benign_ids) + len(malicious_ids)
    return {
        "coverage_benign": (
            len(covered & benign_ids) / len(benign_ids) if benign_ids else 0.0
        ),
        "coverage_malicious": (
            len(covered & malicious_ids) / len(malicious_ids)
            if malicious_ids
            else 0.0
        ),
        "coverage_total": len(covered) / total if total else 0.0,
        "n_det": sum(1 for p in patterns if p.is_deterministic),
        "n_just": sum(1 for p in patterns if p.kind == KIND_JUSTIFIABLE),
    }


def hierarchical_mine(corpus: Corpus, config: MiningConfig) -> MiningResult:
    """Run all three phases over a labeled corpus."""
    benign, malicious = corpus.split_by_label()
    p_det, residual_b, residual_m, rounds = mine_deterministic(
        benign, malicious, config
    )
    p_just = mine_justifiable(residual_b, residual_m, config, benign, malicious)
    p_opt = merge_patterns(p_det + p_just, benign, malicious)
    p_opt_sorted = tuple(sorted(p_opt, key=lambda p: p.id))
    return MiningResult(
        config=config,
        patterns=p_opt_sorted,
        deterministic=tuple(p_det),
        justifiable=tuple(p_just),
        stats=_coverage_stats(p_opt, benign, malicious),
        phase1_rounds=tuple(rounds),
    )


def load_mining_result(text: str, taxonomy: Taxonomy) -> MiningResult:
    """Load a serialized pattern file, validating actions against the taxonomy."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MiningError(f"pattern file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "patterns" not in raw:
        raise MiningError("pattern file must be an object with a 'patterns' list")
    config = MiningConfig.from_dict(raw.get("config", {}))
    patterns = []
    for i, p in enumerate(raw["patterns"]):
        actions = tuple(p.get("actions", ()))
        taxonomy.validate_actions(actions, where=f"pattern {i}")
        expected = pattern_id(actions)
        if p.get("id") != expected:
            raise MiningError(
                f"pattern {i}: id {p.get('id')!r} does not match actions hash"
            )
        patterns.append(
            Pattern(
                id=p["id"],
                actions=actions,
                kind=p.get("kind", ""),
                bias_class=p.get("bias_class", ""),
                bias_ratio_residual=float(p.get("bias_ratio_residual", 0.0)),
                bias_ratio_full=float(p.get("bias_ratio_full", 0.0)),
                support=int(p.get("support", 0)),
                discovered_at_support=int(p.get("discovered_at_support", 0)),
                covered_ids=tuple(p.get("covered_ids", ())),
            )
        )
    patterns.sort(key=lambda p: p.id)
    return MiningResult(
        config=config, patterns=tuple(patterns), stats=raw.get("stats", {})
    )


def load_mining_result_path(path, taxonomy: Taxonomy) -> MiningResult:
    with open(path, encoding="utf-8") as fh:
        return load_mining_result(fh.read(), taxonomy)
