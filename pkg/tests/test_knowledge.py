import random

import numpy as np
import pytest

from oracles import (
    action_tokens,
    cosine_oracle,
    hashed_embedding_oracle,
    text_tokens,
)
from seqguard.corpus import ActionSequence, Corpus
from seqguard.errors import KnowledgeBaseError
from seqguard.knowledge import (
    KnowledgeEntry,
    build_kb,
    cosine,
    load_kb,
)
from seqguard.miner import (
    KIND_DET_MALICIOUS,
    KIND_JUSTIFIABLE,
    MiningResult,
    MiningConfig,
    Pattern,
    covers,
    pattern_id,
)
from seqguard.providers import Annotation, OfflineEmbedder, OfflineReasoner


class TestOfflineEmbedder:
    def test_deterministic(self):
        emb = OfflineEmbedder()
        a = emb.embed_actions(["create_socket", "exit_program"])
        b = emb.embed_actions(["create_socket", "exit_program"])
        assert np.array_equal(a, b)
        assert cosine(a, b) == pytest.approx(1.0, abs=1e-9)

    def test_unit_norm(self):
        emb = OfflineEmbedder()
        for actions in (["get_env_var"], ["a_x"] * 40, ["one", "two", "three"]):
            vec = emb.embed_actions(actions)
            assert abs(np.linalg.norm(vec) - 1.0) < 1e-6
        for text in ("x", "ab", "hello world", "a" * 500):
            vec = emb.embed_text(text)
            assert abs(np.linalg.norm(vec) - 1.0) < 1e-6

    def test_matches_independent_hash_oracle_actions(self):
        emb = OfflineEmbedder()
        a = ["create_socket", "establish_tcp_connection", "exit_program"]
        b = ["get_env_var", "create_socket"]
        va, vb = emb.embed_actions(a), emb.embed_actions(b)
        oa = hashed_embedding_oracle(action_tokens(a), emb.dim)
        ob = hashed_embedding_oracle(action_tokens(b), emb.dim)
        assert cosine(va, vb) == pytest.approx(cosine_oracle(oa, ob), abs=1e-9)

    def test_matches_independent_hash_oracle_text(self):
        emb = OfflineEmbedder()
        va = emb.embed_text("import socket as s")
        oa = hashed_embedding_oracle(text_tokens("import socket as s"), emb.dim)
        assert cosine(va, np.asarray(oa)) == pytest.approx(1.0, abs=1e-9)

    def test_bigrams_make_order_matter(self):
        emb = OfflineEmbedder()
        ab = emb.embed_actions(["get_env_var", "exit_program"])
        ba = emb.embed_actions(["exit_program", "get_env_var"])
        assert cosine(ab, ba) < 1.0 - 1e-6

    def test_empty_input_rejected(self):
        emb = OfflineEmbedder()
        with pytest.raises(Exception):
            emb.embed_actions([])
        with pytest.raises(Exception):
            emb.embed_text("")


def small_corpus():
    rows = [
        ActionSequence(
            id="m0", label="malicious",
            actions=("decode_base64_to_bytes", "exec_python_code"),
            context="payload stage decodes and runs blob",
        ),
        ActionSequence(
            id="m1", label="malicious",
            actions=("decode_base64_to_bytes", "get_os_info", "exec_python_code"),
        ),
        ActionSequence(
            id="b0", label="benign",
            actions=("decode_base64_to_bytes", "serialize_to_json",
                     "exec_python_code"),
            context="template engine renders embedded resource",
        ),
        ActionSequence(
            id="b1", label="benign",
            actions=("basic_file_reading", "serialize_to_json"),
        ),
    ]
    return Corpus(rows)


def make_pattern(actions, kind, bias_class, covered, ratio=1.0):
    return Pattern(
        id=pattern_id(actions),
        actions=tuple(actions),
        kind=kind,
        bias_class=bias_class,
        bias_ratio_residual=ratio,
        bias_ratio_full=ratio,
        support=len(covered),
        discovered_at_support=2,
        covered_ids=tuple(covered),
    )


def small_result():
    patterns = [
        make_pattern(
            ("decode_base64_to_bytes", "exec_python_code"),
            KIND_JUSTIFIABLE, "malicious", ("m0", "m1", "b0"), ratio=2 / 3,
        ),
        make_pattern(
            ("basic_file_reading", "serialize_to_json"),
            "deterministic_benign", "benign", ("b1",),
        ),
    ]
    return MiningResult(
        config=MiningConfig(supports=(2,)),
        patterns=tuple(sorted(patterns, key=lambda p: p.id)),
    )


@pytest.fixture()
def small_kb(taxonomy):
    emb = OfflineEmbedder()
    return build_kb(small_result(), small_corpus(), emb, OfflineReasoner(taxonomy))


class TestBuildKB:
    def test_fixture_counts(self, fixture_kb, fixture_mining):
        assert len(fixture_kb.entries) == len(fixture_mining.patterns)
        assert len(fixture_kb.cases) == 120

    def test_partition_invariant(self, fixture_kb, fixture_corpus):
        for entry in fixture_kb.entries:
            linked = set(entry.benign_case_ids) | set(entry.malicious_case_ids)
            assert linked == set(entry.pattern.covered_ids)
            for cid in entry.benign_case_ids:
                assert fixture_corpus.get(cid).label == "benign"
            for cid in entry.malicious_case_ids:
                assert fixture_corpus.get(cid).label == "malicious"

    def test_deterministic_entries_have_one_empty_partition(self, fixture_kb):
        for entry in fixture_kb.entries:
            if entry.pattern.kind == "deterministic_benign":
                assert not entry.malicious_case_ids
            elif entry.pattern.kind == "deterministic_malicious":
                assert not entry.benign_case_ids

    def test_annotation_kind_invariants(self, fixture_kb):
        for entry in fixture_kb.entries:
            a = entry.annotation
            if entry.pattern.kind == "deterministic_malicious":
                assert a.attack_vectors
            elif entry.pattern.kind == "deterministic_benign":
                assert a.legitimate_uses
            else:
                assert a.distinction_rules

    def test_empty_pattern_set_gives_empty_kb(self, taxonomy):
        result = MiningResult(config=MiningConfig(supports=(2,)), patterns=())
        kb = build_kb(result, Corpus([]), OfflineEmbedder(), OfflineReasoner(taxonomy))
        assert kb.entries == ()
        assert len(kb.cases) == 0

    def test_unresolvable_case_id_rejected(self, taxonomy):
        pattern = make_pattern(
            ("basic_file_reading", "serialize_to_json"),
            "deterministic_benign", "benign", ("ghost",),
        )
        result = MiningResult(
            config=MiningConfig(supports=(2,)), patterns=(pattern,)
        )
        with pytest.raises(Exception, match="ghost"):
            build_kb(result, small_corpus(), OfflineEmbedder(), OfflineReasoner(taxonomy))


class TestAnnotateTemplates:
    def test_deterministic_malicious_golden(self, taxonomy, fixture_kb):
        entries = [
            e for e in fixture_kb.entries
            if e.pattern.kind == "deterministic_malicious"
        ]
        by_actions = {e.pattern.actions: e for e in entries}
        key = ("get_clipboard_text", "copy_to_clipboard")
        assert key in by_actions
        annotation = by_actions[key].annotation
        assert annotation.attack_vectors == (
            "malicious-only chain across Info Gathering: "
            "get_clipboard_text -> copy_to_clipboard",
        )
        assert not annotation.legitimate_uses

    def test_justifiable_mentions_both_case_sets(self, fixture_kb):
        entry = next(
            e for e in fixture_kb.entries if e.pattern.kind == KIND_JUSTIFIABLE
        )
        rules = " ".join(entry.annotation.distinction_rules)
        assert "27 malicious" in rules and "3 benign" in rules


class TestLookups:
    def test_exact_hit_and_miss(self, small_kb):
        hit = small_kb.lookup_exact(
            ["decode_base64_to_bytes", "exec_python_code"]
        )
        assert len(hit) == 1
        assert small_kb.lookup_exact(["get_env_var"]) == []

    def test_exact_equals_linear_scan(self, fixture_kb):
        rng = random.Random(5)
        stored = [e.pattern.actions for e in fixture_kb.entries]
        queries = stored + [("get_env_var",), ("create_socket", "exit_program")]
        for query in queries:
            got = {e.pattern.id for e in fixture_kb.lookup_exact(query)}
            want = {
                e.pattern.id
                for e in fixture_kb.entries
                if e.pattern.actions == tuple(query)
            }
            assert got == want

    def test_subsequence_gap_match(self, fixture_kb):
        query = [
            "get_env_var",
            "create_socket",
            "establish_tcp_connection",
            "dup_socket_stdin",
            "dup_socket_stdout",
            "dup_socket_stderr",
        ]
        matched = fixture_kb.lookup_subsequence(query)
        assert any(
            e.pattern.kind == "deterministic_malicious" for e in matched
        ), "reverse-shell pattern must match over the get_env_var gap"

    def test_query_shorter_than_every_pattern(self, fixture_kb):
        assert fixture_kb.lookup_subsequence(["get_env_var"]) == []

    def test_subsequence_equals_covers_scan(self, fixture_kb, fixture_corpus):
        rng = random.Random(6)
        pool = [s.actions for s in fixture_corpus]
        for _ in range(40):
            query = list(rng.choice(pool))
            if rng.random() < 0.5:
                query.insert(rng.randrange(len(query) + 1), "sleep_delay")
            got = {e.pattern.id for e in fixture_kb.lookup_subsequence(query)}
            want = {
                e.pattern.id
                for e in fixture_kb.entries
                if covers(e.pattern.actions, query)
            }
            assert got == want


class TestRetrieval:
    def test_small_pool_caps_not_pads(self, small_kb):
        emb = OfflineEmbedder()
        query = emb.embed_actions(["basic_file_reading", "serialize_to_json"])
        result = small_kb.retrieve_similar(query, k=5)
        benign_seq = [
            r for r in result if r.label == "benign" and r.channel == "sequence"
        ]
        assert len(benign_seq) == 2  # only two benign cases exist

    def test_identical_query_ranks_first_with_unit_similarity(self, small_kb):
        emb = OfflineEmbedder()
        query = emb.embed_actions(
            ["decode_base64_to_bytes", "get_os_info", "exec_python_code"]
        )
        result = small_kb.retrieve_similar(query, k=3)
        top_malicious = [
            r for r in result if r.label == "malicious" and r.channel == "sequence"
        ][0]
        assert top_malicious.case_id == "m1"
        assert top_malicious.similarity == pytest.approx(1.0, abs=1e-6)

    def test_scope_restricts_pools(self, small_kb):
        emb = OfflineEmbedder()
        entry = next(
            e for e in small_kb.entries if e.pattern.kind == KIND_JUSTIFIABLE
        )
        query = emb.embed_actions(["basic_file_reading", "serialize_to_json"])
        result = small_kb.retrieve_similar(query, scope=[entry], k=5)
        assert {r.case_id for r in result} <= {"m0", "m1", "b0"}

    def test_context_channel_needs_query_context(self, small_kb):
        emb = OfflineEmbedder()
        seq_q = emb.embed_actions(["decode_base64_to_bytes", "exec_python_code"])
        no_ctx = small_kb.retrieve_similar(seq_q, None, k=5)
        assert all(r.channel == "sequence" for r in no_ctx)
        ctx_q = emb.embed_text("payload stage decodes")
        with_ctx = small_kb.retrieve_similar(seq_q, ctx_q, k=5)
        ctx_records = [r for r in with_ctx if r.channel == "context"]
        # only cases that have contexts participate in the context channel
        assert {r.case_id for r in ctx_records} <= {"m0", "b0"}
        assert ctx_records

    def test_dimension_mismatch_is_hard_error(self, small_kb):
        with pytest.raises(KnowledgeBaseError, match="dimension"):
            small_kb.retrieve_similar(np.ones(7))

    def test_full_scan_oracle_top_k(self, fixture_kb):
        emb = OfflineEmbedder()
        rng = random.Random(9)
        actions_pool = [c.actions for c in fixture_kb.cases]
        for _ in range(20):
            query = emb.embed_actions(list(rng.choice(actions_pool)))
            k = rng.choice([1, 3, 5])
            result = fixture_kb.retrieve_similar(query, k=k)
            for label in ("benign", "malicious"):
                got = [
                    (r.case_id, r.similarity)
                    for r in result
                    if r.label == label and r.channel == "sequence"
                ]
                scored = sorted(
                    (
                        (-cosine(query, fixture_kb.case_sequence_embedding(c.id)),
                         c.id)
                        for c in fixture_kb.cases
                        if c.label == label
                    ),
                )[:k]
                want = [(cid, -negsim) for negsim, cid in scored]
                assert [g[0] for g in got] == [w[0] for w in want]
                for (gid, gsim), (wid, wsim) in zip(got, want):
                    assert gsim == pytest.approx(wsim, abs=1e-9)


class TestPersistence:
    def test_round_trip_answers_identically(self, small_kb, taxonomy, tmp_path):
        small_kb.save(tmp_path / "kb")
        (tmp_path / "kb" / "taxonomy.json").write_text(taxonomy.to_json())
        reloaded = load_kb(tmp_path / "kb", taxonomy)
        assert len(reloaded.entries) == len(small_kb.entries)
        emb = OfflineEmbedder()
        rng = random.Random(2)
        pool = [list(c.actions) for c in small_kb.cases]
        for _ in range(25):
            actions = rng.choice(pool)
            assert [e.pattern.id for e in reloaded.lookup_subsequence(actions)] == [
                e.pattern.id for e in small_kb.lookup_subsequence(actions)
            ]
            query = emb.embed_actions(actions)
            got = reloaded.retrieve_similar(query, k=3)
            want = small_kb.retrieve_similar(query, k=3)
            assert got == want

    def test_embeddings_file_header(self, small_kb, tmp_path):
        small_kb.save(tmp_path / "kb")
        raw = (tmp_path / "kb" / "embeddings.bin").read_bytes()
        assert raw[:4] == b"SGKB"
        import struct

        version, dim, rows = struct.unpack("<IIQ", raw[4:20])
        assert (version, dim, rows) == (1, 256, 4)
        assert len(raw) == 20 + rows * dim * 4

    def test_corrupt_magic_rejected(self, small_kb, taxonomy, tmp_path):
        small_kb.save(tmp_path / "kb")
        (tmp_path / "kb" / "taxonomy.json").write_text(taxonomy.to_json())
        path = tmp_path / "kb" / "embeddings.bin"
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(KnowledgeBaseError, match="magic"):
            load_kb(tmp_path / "kb", taxonomy)

    def test_kb_json_is_canonical_and_stable(self, small_kb):
        assert small_kb.to_kb_json() == small_kb.to_kb_json()


def test_entry_partition_must_match_covered_ids():
    pattern = make_pattern(
        ("basic_file_reading", "serialize_to_json"),
        KIND_DET_MALICIOUS, "malicious", ("a", "b"),
    )
    with pytest.raises(KnowledgeBaseError, match="partition"):
        KnowledgeEntry(
            pattern=pattern,
            annotation=Annotation(summary="x", attack_vectors=("y",)),
            benign_case_ids=("a",),
            malicious_case_ids=(),
        )
