import json

import pytest

from seqguard.errors import TaxonomyError
from seqguard.taxonomy import (
    STANDARD_CATEGORIES,
    Taxonomy,
    TaxonomyEntry,
    TriggerSignature,
    load_taxonomy,
    seed_taxonomy_json,
)


def make_file(entries):
    return json.dumps({"version": 1, "entries": entries})


BASIC_ENTRIES = [
    {
        "action": "create_socket",
        "category": "Basic Network Ops",
        "description": "Create a raw network socket",
        "triggers": [{"module_path": "socket.socket", "call_only": True}],
    },
    {
        "action": "establish_tcp_connection",
        "category": "Basic Network Ops",
        "description": "Connect a socket to a remote endpoint",
        "triggers": [{"module_path": "socket.socket.connect", "call_only": True}],
    },
    {
        "action": "get_env_var",
        "category": "Info Gathering",
        "description": "Read process environment variables",
        "triggers": [{"module_path": "os.getenv", "call_only": True}],
    },
]


class TestLoad:
    def test_basic_load(self):
        taxonomy = load_taxonomy(make_file(BASIC_ENTRIES))
        assert len(taxonomy) == 3
        assert "create_socket" in taxonomy

    def test_duplicate_action_rejected(self):
        entries = BASIC_ENTRIES + [dict(BASIC_ENTRIES[2])]
        with pytest.raises(TaxonomyError, match="duplicate action"):
            load_taxonomy(make_file(entries))

    def test_description_over_20_words_rejected(self):
        bad = dict(BASIC_ENTRIES[0], description=" ".join(["word"] * 21))
        with pytest.raises(TaxonomyError, match="entry 0.*20 words"):
            load_taxonomy(make_file([bad]))

    def test_malformed_trigger_reports_entry_index(self):
        bad = dict(BASIC_ENTRIES[1], triggers=[{"module_path": "a..b"}])
        with pytest.raises(TaxonomyError, match="entry 1"):
            load_taxonomy(make_file([BASIC_ENTRIES[0], bad]))

    def test_unknown_category_rejected(self):
        bad = dict(BASIC_ENTRIES[0], category="Networking")
        with pytest.raises(TaxonomyError, match="category"):
            load_taxonomy(make_file([bad]))

    def test_other_category_escape_accepted(self):
        entry = dict(BASIC_ENTRIES[0], category="other: npm hooks")
        assert len(load_taxonomy(make_file([entry]))) == 1

    def test_not_json(self):
        with pytest.raises(TaxonomyError, match="JSON"):
            load_taxonomy("{nope")


class TestTriggers:
    def test_wildcard_only_in_last_segment(self):
        with pytest.raises(TaxonomyError, match="wildcard"):
            TriggerSignature(module_path="os.*.path")

    def test_empty_segment_rejected(self):
        with pytest.raises(TaxonomyError, match="empty"):
            TriggerSignature(module_path="os..path")

    def test_wildcard_matches_any_suffix(self):
        trig = TriggerSignature(module_path="os.path.*")
        assert trig.matches("os.path.join")
        assert trig.matches("os.path.sep.thing")
        assert not trig.matches("os.path")
        assert not trig.matches("ospath.join")

    def test_exact_match(self):
        trig = TriggerSignature(module_path="os.system")
        assert trig.matches("os.system")
        assert not trig.matches("os.system2")


class TestLookup:
    def test_exact_trigger(self):
        taxonomy = load_taxonomy(make_file(BASIC_ENTRIES))
        assert taxonomy.lookup_trigger("socket.socket") == ["create_socket"]

    def test_non_sensitive_api_empty(self):
        taxonomy = load_taxonomy(make_file(BASIC_ENTRIES))
        assert taxonomy.lookup_trigger("math.sqrt") == []

    def test_lookup_is_pure(self):
        taxonomy = load_taxonomy(make_file(BASIC_ENTRIES))
        first = taxonomy.lookup_trigger("os.getenv")
        second = taxonomy.lookup_trigger("os.getenv")
        assert first == second == ["get_env_var"]


class TestSeedTaxonomy:
    def test_seed_loads_with_all_categories(self, taxonomy):
        assert len(taxonomy) >= 60
        categories = {entry.category for entry in taxonomy.entries}
        assert categories == STANDARD_CATEGORIES

    def test_seed_trigger_bindings(self, taxonomy):
        assert taxonomy.lookup_trigger("socket.socket") == ["create_socket"]
        assert taxonomy.lookup_trigger("os.system") == ["execute_shell_command"]
        assert taxonomy.lookup_trigger("math.sqrt") == []

    def test_seed_round_trip_is_byte_identical(self):
        text = seed_taxonomy_json()
        assert load_taxonomy(text).to_json() == text

    def test_entries_sorted_canonically(self, taxonomy):
        names = [e.action for e in taxonomy.entries]
        assert names == sorted(names)

    def test_zero_trigger_entries_allowed(self, taxonomy):
        untriggered = [e for e in taxonomy.entries if not e.triggers]
        assert untriggered, "seed should keep semantic-mapper-only actions"


def test_round_trip_preserves_content():
    taxonomy = load_taxonomy(make_file(BASIC_ENTRIES))
    reloaded = load_taxonomy(taxonomy.to_json())
    assert reloaded.to_json() == taxonomy.to_json()
    assert [e.action for e in reloaded.entries] == [
        "create_socket",
        "establish_tcp_connection",
        "get_env_var",
    ]


def test_validate_actions_hard_error(taxonomy):
    with pytest.raises(TaxonomyError, match="not_a_real_action"):
        taxonomy.validate_actions(["create_socket", "not_a_real_action"])


def test_entry_direct_construction_checks_invariants():
    with pytest.raises(TaxonomyError):
        TaxonomyEntry(action="BadName", category="File Operations", description="x")
    entry = TaxonomyEntry(
        action="read_thing",
        category="File Operations",
        description="Read a thing",
        triggers=(TriggerSignature(module_path="thing.read"),),
    )
    assert Taxonomy([entry]).lookup_trigger("thing.read") == ["read_thing"]
