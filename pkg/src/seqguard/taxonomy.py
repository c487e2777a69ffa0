"""Behavioral action vocabulary and API trigger signatures.

A taxonomy binds abstract action names (e.g. ``create_socket``) to the
dotted API names that realize them in source code.  It is loaded from a
JSON file, validated once, and immutable afterwards, so lookups are safe
from any number of threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import TaxonomyError

ACTION_ID_RE = re.compile(r"^[a-z][a-z0-9_]*$")

# Category names as published; user extensions use the "other: <name>" escape.
STANDARD_CATEGORIES = frozenset(
    {
        "File Operations",
        "Basic Network Ops",
        "Network File Transfer",
        "Command & Control",
        "Third-party Platform Abuse",
        "Data Exfiltration",
        "Code Execution",
        "Info Gathering",
        "Encryption/Hashing",
        "System Operations",
        "Data Transformation",
        "Persistence/Stealth",
    }
)

MAX_DESCRIPTION_WORDS = 20


def validate_action_id(name: str) -> str:
    if not isinstance(name, str) or not ACTION_ID_RE.match(name):
        raise TaxonomyError(
            f"invalid action id {name!r}: must be lowercase snake_case"
        )
    return name


def validate_category(category: str) -> str:
    if category in STANDARD_CATEGORIES:
        return category
    if category.startswith("other: ") and len(category) > len("other: "):
        return category
    raise TaxonomyError(
        f"unknown category {category!r}: use one of the standard categories "
        f"or 'other: <name>'"
    )


@dataclass(frozen=True)
class TriggerSignature:
    """Dotted API name pattern binding a call site to an action.

    ``module_path`` is an exact dotted name, optionally ending in a ``*``
    segment which matches any non-empty trailing suffix.  ``call_only``
    restricts matching to call sites (name followed by ``(``).
    """

    module_path: str
    call_only: bool = True

    def __post_init__(self) -> None:
        segments = self.module_path.split(".")
        for i, seg in enumerate(segments):
            if not seg:
                raise TaxonomyError(
                    f"malformed trigger {self.module_path!r}: empty dotted segment"
                )
            if seg == "*" and i != len(segments) - 1:
                raise TaxonomyError(
                    f"malformed trigger {self.module_path!r}: wildcard only "
                    f"allowed in the last segment"
                )
            if seg != "*" and not re.match(r"^[A-Za-z_][A-Za-z0-9_]*$", seg):
                raise TaxonomyError(
                    f"malformed trigger {self.module_path!r}: bad segment {seg!r}"
                )

    @property
    def is_wildcard(self) -> bool:
        return self.module_path.endswith(".*")

    @property
    def prefix(self) -> str:
        """Dotted prefix before the wildcard segment (wildcard triggers only)."""
        return self.module_path[:-2]

    def matches(self, resolved_api: str) -> bool:
        if self.is_wildcard:
            return resolved_api.startswith(self.prefix + ".") and len(
                resolved_api
            ) > len(self.prefix) + 1
        return resolved_api == self.module_path

    def to_dict(self) -> dict:
        return {"module_path": self.module_path, "call_only": self.call_only}


@dataclass(frozen=True)
class TaxonomyEntry:
    action: str
    category: str
    description: str
    triggers: tuple[TriggerSignature, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        validate_action_id(self.action)
        validate_category(self.category)
        if len(self.description.split()) > MAX_DESCRIPTION_WORDS:
            raise TaxonomyError(
                f"entry {self.action!r}: description exceeds "
                f"{MAX_DESCRIPTION_WORDS} words"
            )

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "category": self.category,
            "description": self.description,
            "triggers": [t.to_dict() for t in self.triggers],
        }


class Taxonomy:
    """Validated, immutable action vocabulary with O(1) amortized lookups."""

    def __init__(self, entries: list[TaxonomyEntry]):
        self._by_action: dict[str, TaxonomyEntry] = {}
        for entry in entries:
            if entry.action in self._by_action:
                raise TaxonomyError(f"duplicate action name {entry.action!r}")
            self._by_action[entry.action] = entry
        # Exact dotted name -> actions; wildcard prefix -> actions.
        self._exact: dict[str, list[tuple[str, TriggerSignature]]] = {}
        self._wildcard: dict[str, list[tuple[str, TriggerSignature]]] = {}
        for entry in entries:
            for trig in entry.triggers:
                table = self._wildcard if trig.is_wildcard else self._exact
                key = trig.prefix if trig.is_wildcard else trig.module_path
                table.setdefault(key, []).append((entry.action, trig))

    def __len__(self) -> int:
        return len(self._by_action)

    def __contains__(self, action: str) -> bool:
        return action in self._by_action

    @property
    def actions(self) -> list[str]:
        return sorted(self._by_action)

    @property
    def entries(self) -> list[TaxonomyEntry]:
        return [self._by_action[a] for a in sorted(self._by_action)]

    def get(self, action: str) -> TaxonomyEntry:
        try:
            return self._by_action[action]
        except KeyError:
            raise TaxonomyError(f"unknown action {action!r}") from None

    def category_of(self, action: str) -> str:
        return self.get(action).category

    def validate_actions(self, actions, where: str = "") -> None:
        """Raise if any action id does not resolve in this taxonomy."""
        for action in actions:
            if action not in self._by_action:
                suffix = f" ({where})" if where else ""
                raise TaxonomyError(f"unknown action {action!r}{suffix}")

    def matching_triggers(
        self, resolved_api: str
    ) -> list[tuple[str, TriggerSignature]]:
        """All (action, trigger) pairs whose signature matches the dotted name."""
        matches = list(self._exact.get(resolved_api, []))
        parts = resolved_api.split(".")
        for i in range(1, len(parts)):
            prefix = ".".join(parts[:i])
            matches.extend(self._wildcard.get(prefix, []))
        return sorted(matches, key=lambda pair: (pair[0], pair[1].module_path))

    def lookup_trigger(self, resolved_api: str) -> list[str]:
        """Actions triggered by a fully alias-resolved dotted API name."""
        seen: dict[str, None] = {}
        for action, _trig in self.matching_triggers(resolved_api):
            seen.setdefault(action, None)
        return list(seen)

    def to_dict(self) -> dict:
        return {"version": 1, "entries": [e.to_dict() for e in self.entries]}

    def to_json(self) -> str:
        """Canonical serialization: entries sorted by action, stable key order."""
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def _parse_trigger(raw: dict, index: int) -> TriggerSignature:
    if not isinstance(raw, dict) or "module_path" not in raw:
        raise TaxonomyError(f"entry {index}: malformed trigger {raw!r}")
    return TriggerSignature(
        module_path=raw["module_path"], call_only=bool(raw.get("call_only", True))
    )


def load_taxonomy(source: str | dict) -> Taxonomy:
    """Load and validate a taxonomy from JSON text or a parsed object.

    Errors carry the index of the offending entry.
    """
    if isinstance(source, str):
        try:
            data = json.loads(source)
        except json.JSONDecodeError as exc:
            raise TaxonomyError(f"taxonomy is not valid JSON: {exc}") from exc
    else:
        data = source
    if not isinstance(data, dict) or "entries" not in data:
        raise TaxonomyError("taxonomy must be an object with an 'entries' list")
    entries = []
    for index, raw in enumerate(data["entries"]):
        try:
            entry = TaxonomyEntry(
                action=raw.get("action", ""),
                category=raw.get("category", ""),
                description=raw.get("description", ""),
                triggers=tuple(
                    _parse_trigger(t, index) for t in raw.get("triggers", [])
                ),
            )
        except TaxonomyError as exc:
            raise TaxonomyError(f"entry {index}: {exc}") from None
        entries.append(entry)
    try:
        return Taxonomy(entries)
    except TaxonomyError as exc:
        raise TaxonomyError(str(exc)) from None


def load_taxonomy_path(path) -> Taxonomy:
    with open(path, encoding="utf-8") as fh:
        return load_taxonomy(fh.read())


def load_seed_taxonomy() -> Taxonomy:
    """The taxonomy shipped with the package (common Python attack primitives)."""
    text = (
        resources.files("seqguard").joinpath("data/seed_taxonomy.json").read_text(
            encoding="utf-8"
        )
    )
    return load_taxonomy(text)


def seed_taxonomy_json() -> str:
    return (
        resources.files("seqguard").joinpath("data/seed_taxonomy.json").read_text(
            encoding="utf-8"
        )
    )
