"""Exception types shared across the package."""


class SeqGuardError(Exception):
    """Base class for all errors raised by this package."""


class TaxonomyError(SeqGuardError):
    """Invalid taxonomy file or entry."""


class CorpusError(SeqGuardError):
    """Invalid corpus file, sequence, or label."""


class MiningError(SeqGuardError):
    """Invalid mining configuration or mining precondition violation."""


class KnowledgeBaseError(SeqGuardError):
    """Invalid knowledge base content or persisted KB files."""


class ProviderError(SeqGuardError):
    """External provider failure that must not be retried."""


class RetryableProviderError(ProviderError):
    """External provider failure that may be retried (transport, 5xx)."""
