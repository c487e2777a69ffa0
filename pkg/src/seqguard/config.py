"""Runtime configuration: file + environment wiring for providers and mining.

The config file is a flat ``key = value`` format (``#`` comments, strings
unquoted or quoted, lists comma-separated), documented in the README.
Provider keys come only from the environment, never from flags or files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import SeqGuardError
from .miner import DEFAULT_MIN_PATTERN_LEN, DEFAULT_SUPPORTS, DEFAULT_TAU
from .providers import (
    KEY_ENV_DEFAULT,
    URL_ENV_DEFAULT,
    ExternalEmbedder,
    ExternalReasoner,
    OfflineEmbedder,
    OfflineReasoner,
    Providers,
)


@dataclass
class Config:
    taxonomy: str = ""
    embedding_endpoint: str = ""
    embedding_model: str = ""
    embedding_dim: int = 3072
    reasoning_endpoint: str = ""
    reasoning_model: str = ""
    key_env: str = KEY_ENV_DEFAULT
    timeout: float = 30.0
    max_inflight: int = 4
    supports: tuple[int, ...] = DEFAULT_SUPPORTS
    tau: float = DEFAULT_TAU
    min_pattern_len: int = DEFAULT_MIN_PATTERN_LEN
    k: int = 5
    output_format: str = "json"
    extra: dict = field(default_factory=dict)

    @property
    def offline(self) -> bool:
        return not (self.embedding_endpoint or self.reasoning_endpoint)

    def providers(self, taxonomy) -> Providers:
        """Offline providers unless an endpoint is configured."""
        if self.embedding_endpoint:
            embedder = ExternalEmbedder(
                endpoint=self.embedding_endpoint,
                model=self.embedding_model or "default-embedding",
                dim=self.embedding_dim,
                key_env=self.key_env,
                timeout=self.timeout,
            )
        else:
            embedder = OfflineEmbedder()
        offline_reasoner = OfflineReasoner(taxonomy)
        if self.reasoning_endpoint:
            reasoner = ExternalReasoner(
                endpoint=self.reasoning_endpoint,
                model=self.reasoning_model or "default-reasoning",
                fallback=offline_reasoner,
                key_env=self.key_env,
                timeout=self.timeout,
                max_inflight=self.max_inflight,
            )
        else:
            reasoner = offline_reasoner
        return Providers(embedder=embedder, reasoner=reasoner, mapper=None)


def _parse_value(text: str):
    text = text.strip()
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if "," in text:
        return tuple(_parse_value(part) for part in text.split(","))
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def load_config(path=None) -> Config:
    """Build a Config from an optional key=value file plus the environment.

    ``SEQGUARD_PROVIDER_URL`` configures both provider endpoints when no
    file sets them; the API key env-var name defaults to
    ``SEQGUARD_PROVIDER_KEY``.
    """
    config = Config()
    known = {f.name for f in fields(Config)}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise SeqGuardError(f"config file not found: {path}")
        for lineno, line in enumerate(
            path.read_text(encoding="utf-8").splitlines(), start=1
        ):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise SeqGuardError(
                    f"{path}:{lineno}: expected 'key = value', got {stripped!r}"
                )
            key, _, value = stripped.partition("=")
            key = key.strip().replace("-", "_")
            parsed = _parse_value(value)
            if key == "supports":
                parsed = tuple(
                    int(v) for v in (parsed if isinstance(parsed, tuple) else (parsed,))
                )
            if key in known and key != "extra":
                setattr(config, key, parsed)
            else:
                config.extra[key] = parsed
    env_url = os.environ.get(URL_ENV_DEFAULT, "")
    if env_url:
        config.embedding_endpoint = config.embedding_endpoint or env_url
        config.reasoning_endpoint = config.reasoning_endpoint or env_url
    return config
