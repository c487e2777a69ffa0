"""Embedding, reasoning, and semantic-mapping providers.

Offline providers are pure functions so the whole pipeline builds and
tests without network access.  External providers speak a small HTTP JSON
contract (``{"model": ..., "input": ...}`` in, ``{"vector": ...}`` or
``{"text": ...}`` out) and fall back to the offline behavior when their
output cannot be used.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ProviderError, RetryableProviderError
from .taxonomy import Taxonomy

OFFLINE_EMBED_DIM = 256
KEY_ENV_DEFAULT = "SEQGUARD_PROVIDER_KEY"
URL_ENV_DEFAULT = "SEQGUARD_PROVIDER_URL"


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def _normalize(values: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        # Reserved unit basis vector for degenerate inputs.
        out = np.zeros(len(values), dtype=np.float64)
        out[0] = 1.0
        return out
    return values / norm


class OfflineEmbedder:
    """Deterministic feature-hashing embedder (no model, no network).

    Action lists hash unigrams and bigrams; free text hashes character
    trigrams.  Output is always L2-normalized.
    """

    name = "offline-hash-v1"

    def __init__(self, dim: int = OFFLINE_EMBED_DIM):
        self.dim = dim

    def embed_actions(self, actions: Sequence[str]) -> np.ndarray:
        if not actions:
            raise ProviderError("cannot embed an empty action list")
        counts = np.zeros(self.dim, dtype=np.float64)
        for action in actions:
            counts[_bucket("u:" + action, self.dim)] += 1.0
        for first, second in zip(actions, actions[1:]):
            counts[_bucket("b:" + first + "\x1f" + second, self.dim)] += 1.0
        return _normalize(counts)

    def embed_text(self, text: str) -> np.ndarray:
        if not text:
            raise ProviderError("cannot embed empty text")
        counts = np.zeros(self.dim, dtype=np.float64)
        if len(text) < 3:
            counts[_bucket("t:" + text, self.dim)] += 1.0
        else:
            for i in range(len(text) - 2):
                counts[_bucket("t:" + text[i : i + 3], self.dim)] += 1.0
        return _normalize(counts)


def _post_provider(
    endpoint: str,
    payload: dict,
    key_env: str,
    timeout: float,
    max_attempts: int,
    client=None,
) -> dict:
    """POST the provider contract payload, retrying transport/5xx failures."""
    import httpx

    key = os.environ.get(key_env, "")
    headers = {"Authorization": f"Bearer {key}"} if key else {}
    last_error: Optional[Exception] = None
    for _ in range(max_attempts):
        try:
            if client is not None:
                response = client.post(endpoint, json=payload, headers=headers)
            else:
                response = httpx.post(
                    endpoint, json=payload, headers=headers, timeout=timeout
                )
            if response.status_code >= 500:
                last_error = RetryableProviderError(
                    f"provider returned {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise ProviderError(
                    f"provider returned {response.status_code}: "
                    f"{response.text[:200]}"
                )
            return response.json()
        except ProviderError:
            raise
        except Exception as exc:  # transport errors are retryable
            last_error = exc
    raise RetryableProviderError(
        f"provider unreachable after {max_attempts} attempts: {last_error}"
    )


class ExternalEmbedder:
    """HTTP embedding provider: POST {model, input} -> {vector}."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int,
        key_env: str = KEY_ENV_DEFAULT,
        timeout: float = 30.0,
        max_attempts: int = 3,
        client=None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.key_env = key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self._client = client
        self.name = f"external:{model}"

    def _embed(self, payload_input) -> np.ndarray:
        data = _post_provider(
            self.endpoint,
            {"model": self.model, "input": payload_input},
            self.key_env,
            self.timeout,
            self.max_attempts,
            self._client,
        )
        if "vector" not in data or not isinstance(data["vector"], list):
            raise ProviderError("provider response missing 'vector'")
        values = np.asarray(data["vector"], dtype=np.float64)
        if len(values) != self.dim:
            raise ProviderError(
                f"provider returned dimension {len(values)}, expected {self.dim}"
            )
        return _normalize(values)

    def embed_actions(self, actions: Sequence[str]) -> np.ndarray:
        if not actions:
            raise ProviderError("cannot embed an empty action list")
        return self._embed(list(actions))

    def embed_text(self, text: str) -> np.ndarray:
        if not text:
            raise ProviderError("cannot embed empty text")
        return self._embed(text)


def embed(text_or_actions, provider) -> np.ndarray:
    """Dispatch to the provider's text or action-list embedding."""
    if isinstance(text_or_actions, str):
        return provider.embed_text(text_or_actions)
    return provider.embed_actions(text_or_actions)


@dataclass(frozen=True)
class Annotation:
    """Semantic interpretation attached to a stored pattern."""

    summary: str
    attack_vectors: tuple[str, ...] = ()
    legitimate_uses: tuple[str, ...] = ()
    distinction_rules: tuple[str, ...] = ()
    fallback_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "summary": self.summary,
            "attack_vectors": list(self.attack_vectors),
            "legitimate_uses": list(self.legitimate_uses),
            "distinction_rules": list(self.distinction_rules),
            "fallback_warning": self.fallback_warning,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Annotation":
        return cls(
            summary=raw.get("summary", ""),
            attack_vectors=tuple(raw.get("attack_vectors", ())),
            legitimate_uses=tuple(raw.get("legitimate_uses", ())),
            distinction_rules=tuple(raw.get("distinction_rules", ())),
            fallback_warning=bool(raw.get("fallback_warning", False)),
        )


@dataclass(frozen=True)
class CaseSnippets:
    """Case material handed to annotation: per-class contexts (may be empty)."""

    benign: tuple[str, ...] = ()
    malicious: tuple[str, ...] = ()


class OfflineReasoner:
    """Deterministic template annotations; classification defers to the
    detector's similarity vote (classify returns None)."""

    name = "offline-template-v1"

    def __init__(self, taxonomy: Taxonomy):
        self.taxonomy = taxonomy

    def _categories(self, actions: Sequence[str]) -> list[str]:
        seen: dict[str, None] = {}
        for action in actions:
            seen.setdefault(self.taxonomy.category_of(action), None)
        return list(seen)

    def annotate(self, pattern, snippets: CaseSnippets) -> Annotation:
        chain = " -> ".join(pattern.actions)
        categories = ", ".join(self._categories(pattern.actions))
        summary = f"behavior chain [{chain}] spanning {categories}"
        if pattern.kind == "deterministic_malicious":
            return Annotation(
                summary=summary,
                attack_vectors=(
                    f"malicious-only chain across {categories}: {chain}",
                ),
            )
        if pattern.kind == "deterministic_benign":
            return Annotation(
                summary=summary,
                legitimate_uses=(
                    f"benign-only chain across {categories}: {chain}",
                ),
            )
        n_b = len(snippets.benign)
        n_m = len(snippets.malicious)
        return Annotation(
            summary=summary,
            distinction_rules=(
                f"chain {chain} occurs in both classes with "
                f"{pattern.bias_ratio_residual:.2f} bias toward "
                f"{pattern.bias_class}; weigh data destinations, network "
                f"endpoints, and execution triggers in the surrounding code",
                f"linked implementations: {n_b} benign vs {n_m} malicious; "
                f"compare the new context against both sets",
            ),
        )

    def classify(self, payload: dict) -> Optional[dict]:
        return None


class ExternalReasoner:
    """HTTP reasoning provider: POST {model, input} -> {text}.

    The text is expected to contain a JSON object; unusable responses fall
    back to the offline templates (annotation) or to the similarity vote
    (classification).
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        fallback: OfflineReasoner,
        key_env: str = KEY_ENV_DEFAULT,
        timeout: float = 60.0,
        max_attempts: int = 3,
        max_inflight: int = 4,
        client=None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.fallback = fallback
        self.key_env = key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self._client = client
        self._inflight = threading.Semaphore(max(1, max_inflight))
        self.name = f"external:{model}"

    def _post_text(self, prompt: str) -> str:
        with self._inflight:
            data = _post_provider(
                self.endpoint,
                {"model": self.model, "input": prompt},
                self.key_env,
                self.timeout,
                self.max_attempts,
                self._client,
            )
        if "text" not in data or not isinstance(data["text"], str):
            raise ProviderError("provider response missing 'text'")
        return data["text"]

    @staticmethod
    def _extract_json(text: str) -> Optional[dict]:
        start = text.find("{")
        end = text.rfind("}")
        if start == -1 or end <= start:
            return None
        try:
            parsed = json.loads(text[start : end + 1])
        except json.JSONDecodeError:
            return None
        return parsed if isinstance(parsed, dict) else None

    def annotate(self, pattern, snippets: CaseSnippets) -> Annotation:
        prompt = json.dumps(
            {
                "task": "annotate_pattern",
                "pattern": list(pattern.actions),
                "kind": pattern.kind,
                "benign_cases": list(snippets.benign),
                "malicious_cases": list(snippets.malicious),
                "respond_with": {
                    "summary": "str",
                    "attack_vectors": ["str"],
                    "legitimate_uses": ["str"],
                    "distinction_rules": ["str"],
                },
            },
            sort_keys=True,
        )
        try:
            parsed = self._extract_json(self._post_text(prompt))
        except ProviderError:
            parsed = None
        if parsed is None:
            return self._template_with_warning(pattern, snippets)
        annotation = Annotation(
            summary=str(parsed.get("summary", "")),
            attack_vectors=tuple(map(str, parsed.get("attack_vectors", ()))),
            legitimate_uses=tuple(map(str, parsed.get("legitimate_uses", ()))),
            distinction_rules=tuple(map(str, parsed.get("distinction_rules", ()))),
        )
        if not _annotation_valid(annotation, pattern.kind):
            return self._template_with_warning(pattern, snippets)
        return annotation

    def _template_with_warning(self, pattern, snippets: CaseSnippets) -> Annotation:
        template = self.fallback.annotate(pattern, snippets)
        return replace(template, fallback_warning=True)

    def classify(self, payload: dict) -> Optional[dict]:
        prompt = json.dumps(
            {
                "task": "classify_sequence",
                "respond_with": {
                    "classification": "benign|malicious",
                    "confidence": "0..1",
                    "reasoning": "str",
                },
                **payload,
            },
            sort_keys=True,
        )
        try:
            parsed = self._extract_json(self._post_text(prompt))
        except ProviderError:
            return None
        if parsed is None:
            return None
        classification = parsed.get("classification")
        if classification not in ("benign", "malicious"):
            return None
        try:
            confidence = float(parsed.get("confidence", 0.5))
        except (TypeError, ValueError):
            return None
        return {
            "classification": classification,
            "confidence": min(1.0, max(0.0, confidence)),
            "reasoning": str(parsed.get("reasoning", "")),
        }


def _annotation_valid(annotation: Annotation, kind: str) -> bool:
    if kind == "deterministic_malicious":
        return bool(annotation.attack_vectors)
    if kind == "deterministic_benign":
        return bool(annotation.legitimate_uses)
    return bool(annotation.distinction_rules)


class ExternalSemanticMapper:
    """HTTP mapper: POST {taxonomy_actions, slices} -> {actions, order_confidence}.

    Output actions are validated against the taxonomy; anything invalid
    makes the caller fall back to the rule-based sequence.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        taxonomy: Taxonomy,
        key_env: str = KEY_ENV_DEFAULT,
        timeout: float = 60.0,
        client=None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.taxonomy = taxonomy
        self.key_env = key_env
        self.timeout = timeout
        self._client = client

    def map_slices(self, slices: list[dict]) -> Optional[list[str]]:
        try:
            data = _post_provider(
                self.endpoint,
                {"taxonomy_actions": self.taxonomy.actions, "slices": slices},
                self.key_env,
                self.timeout,
                3,
                self._client,
            )
        except ProviderError:
            return None
        actions = data.get("actions")
        if not isinstance(actions, list) or not actions:
            return None
        for action in actions:
            if action not in self.taxonomy:
                return None
        return [str(a) for a in actions]


@dataclass
class Providers:
    """Bundle handed through the detection pipeline."""

    embedder: object
    reasoner: object
    mapper: Optional[object] = None


def offline_providers(taxonomy: Taxonomy) -> Providers:
    return Providers(
        embedder=OfflineEmbedder(), reasoner=OfflineReasoner(taxonomy), mapper=None
    )
