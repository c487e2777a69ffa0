"""seqguard: behavioral sequence pattern mining and knowledge-driven
malicious package detection."""

from .corpus import ActionSequence, Corpus, SourceRef, load_corpus
from .knowledge import KnowledgeBase, KnowledgeEntry, build_kb, load_kb
from .miner import (
    MiningConfig,
    MiningResult,
    Pattern,
    covers,
    hierarchical_mine,
    max_coverage_ratio,
    merge_patterns,
    mine_deterministic,
    mine_justifiable,
    prefixspan,
)
from .taxonomy import Taxonomy, TaxonomyEntry, TriggerSignature, load_taxonomy

__version__ = "0.1.0"

__all__ = [
    "ActionSequence",
    "Corpus",
    "SourceRef",
    "KnowledgeBase",
    "KnowledgeEntry",
    "MiningConfig",
    "MiningResult",
    "Pattern",
    "Taxonomy",
    "TaxonomyEntry",
    "TriggerSignature",
    "build_kb",
    "covers",
    "hierarchical_mine",
    "load_corpus",
    "load_kb",
    "load_taxonomy",
    "max_coverage_ratio",
    "merge_patterns",
    "mine_deterministic",
    "mine_justifiable",
    "prefixspan",
    "__version__",
]
