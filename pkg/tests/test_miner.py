import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_frequent, covers_by_enumeration
from seqguard.corpus import ActionSequence
from seqguard.errors import MiningError
from seqguard.miner import (
    KIND_DET_BENIGN,
    KIND_DET_MALICIOUS,
    KIND_JUSTIFIABLE,
    MiningConfig,
    Pattern,
    covers,
    hierarchical_mine,
    load_mining_result,
    max_coverage_ratio,
    merge_patterns,
    mine_deterministic,
    mine_justifiable,
    pattern_id,
    prefixspan,
)

ALPHABET = ["a", "b", "c", "d", "e", "f"]


def seqs(*action_lists, label="benign", prefix="s"):
    return [
        ActionSequence(id=f"{prefix}{i}", label=label, actions=tuple(actions))
        for i, actions in enumerate(action_lists)
    ]


def random_corpus(rng, n_max=20, len_max=8):
    n = rng.randint(1, n_max)
    return [
        [rng.choice(ALPHABET) for _ in range(rng.randint(1, len_max))]
        for _ in range(n)
    ]


class TestCovers:
    def test_gap_allowed(self):
        assert covers(["a", "c"], ["a", "b", "c"])

    def test_order_violation(self):
        assert not covers(["c", "a"], ["a", "b", "c"])

    def test_identity_embedding(self):
        pattern = ["x", "y", "z"]
        assert covers(pattern, pattern)

    def test_longer_pattern_never_covers(self):
        assert not covers(["a", "b", "c"], ["a", "b"])

    @given(
        st.lists(st.sampled_from(ALPHABET), min_size=1, max_size=8),
        st.randoms(use_true_random=False),
    )
    def test_matches_exhaustive_enumeration(self, sequence, rng):
        pattern = [x for x in sequence if rng.random() < 0.5] or [sequence[0]]
        if rng.random() < 0.5:
            rng.shuffle(pattern)
        assert covers(pattern, sequence) == covers_by_enumeration(pattern, sequence)

    @given(st.lists(st.sampled_from(ALPHABET), min_size=1, max_size=8))
    def test_any_mask_subsequence_is_covered(self, sequence):
        for mask in range(1, 2 ** len(sequence)):
            pattern = [x for i, x in enumerate(sequence) if mask >> i & 1]
            assert covers(pattern, sequence)
            break  # one mask per example is plenty


class TestPrefixSpan:
    def test_spec_example(self):
        got = prefixspan([["a", "b", "c"], ["a", "c"], ["b", "c"]], 2, 2)
        assert got == [(("a", "c"), 2), (("b", "c"), 2)]

    def test_empty_input(self):
        assert prefixspan([], 1, 2) == []

    def test_support_counts_each_sequence_once(self):
        # Repeated embeddings inside one sequence must not inflate support.
        got = dict(prefixspan([["a", "b", "a", "b"]], 1, 2))
        assert got[("a", "b")] == 1

    def test_reverse_shell_planted_support(self):
        chain = [
            "create_socket",
            "establish_tcp_connection",
            "dup_socket_stdin",
            "dup_socket_stdout",
            "dup_socket_stderr",
        ]
        rng = random.Random(3)
        rows = []
        for _ in range(29):
            actions = list(chain)
            for d in rng.sample(["x", "y", "z"], rng.randint(0, 2)):
                actions.insert(rng.randrange(len(actions) + 1), d)
            rows.append(actions)
        found = dict(prefixspan(rows, 29, 2))
        assert found[tuple(chain)] == 29

    def test_oracle_equivalence_random(self):
        rng = random.Random(11)
        for _ in range(25):
            corpus = random_corpus(rng)
            min_support = rng.choice([2, 3])
            got = dict(prefixspan(corpus, min_support, 2))
            want = brute_force_frequent(corpus, min_support, 2)
            assert got == want

    def test_min_len_filters_short_patterns(self):
        got = prefixspan([["a", "b"], ["a", "b"]], 2, 3)
        assert got == []

    def test_accepts_action_sequences(self):
        got = prefixspan(seqs(["a", "b"], ["a", "b"]), 2, 2)
        assert got == [(("a", "b"), 2)]

    def test_invalid_support(self):
        with pytest.raises(MiningError):
            prefixspan([["a"]], 0, 1)

    @given(st.randoms(use_true_random=False))
    @settings(max_examples=30, deadline=None)
    def test_anti_monotonicity(self, rng):
        corpus = random_corpus(rng, n_max=10, len_max=6)
        frequent = dict(prefixspan(corpus, 2, 2))
        for pattern, support in frequent.items():
            if len(pattern) < 3:
                continue
            for drop in range(len(pattern)):
                sub = pattern[:drop] + pattern[drop + 1 :]
                sub_support = sum(1 for s in corpus if covers(sub, s))
                assert sub_support >= support


class TestMaxCoverageRatio:
    def test_nine_to_one_split_is_point_nine(self):
        benign = seqs(["p", "q", "x"], label="benign")
        malicious = seqs(*[["p", "z", "q"]] * 9, label="malicious", prefix="m")
        ratio, dominant = max_coverage_ratio(["p", "q"], benign, malicious)
        assert ratio == 0.9
        assert dominant == "malicious"

    def test_pure_coverage(self):
        malicious = seqs(*[["p", "q"]] * 5, label="malicious", prefix="m")
        ratio, dominant = max_coverage_ratio(["p", "q"], [], malicious)
        assert ratio == 1.0
        assert dominant == "malicious"

    def test_tie_resolves_malicious(self):
        benign = seqs(["p", "q"], label="benign")
        malicious = seqs(["p", "q"], label="malicious", prefix="m")
        ratio, dominant = max_coverage_ratio(["p", "q"], benign, malicious)
        assert ratio == 0.5
        assert dominant == "malicious"

    def test_zero_coverage_is_an_error(self):
        with pytest.raises(MiningError):
            max_coverage_ratio(["nope"], seqs(["p"]), [])


def config(supports=(2,), tau=0.9, min_len=2):
    return MiningConfig(supports=tuple(supports), tau=tau, min_pattern_len=min_len)


class TestMiningConfig:
    def test_defaults_match_published_parameters(self):
        cfg = MiningConfig()
        assert cfg.supports == (30, 25, 20, 15, 10, 7, 5, 3, 2)
        assert cfg.tau == 0.9
        assert cfg.min_pattern_len == 2

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"supports": (5, 5)},
            {"supports": (2, 5)},
            {"supports": ()},
            {"supports": (0,)},
            {"tau": 0.5},
            {"tau": 1.5},
            {"min_pattern_len": 0},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(MiningError):
            MiningConfig(**kwargs)


class TestPhase1:
    def test_spec_example(self):
        benign = seqs(["a", "b"], ["a", "d"], label="benign", prefix="b")
        malicious = seqs(["x", "y"], ["x", "y", "z"], label="malicious", prefix="m")
        patterns, residual_b, residual_m, _rounds = mine_deterministic(
            benign, malicious, config(supports=[2])
        )
        assert [p.actions for p in patterns] == [("x", "y")]
        assert patterns[0].kind == KIND_DET_MALICIOUS
        assert patterns[0].support == 2
        assert patterns[0].bias_ratio_residual == 1.0
        assert [s.id for s in residual_b] == ["b0", "b1"]
        assert residual_m == []

    def test_one_class_corpus(self):
        benign = seqs(["a", "b"], ["a", "b"], label="benign", prefix="b")
        patterns, residual_b, _m, _r = mine_deterministic(
            benign, [], config(supports=[2])
        )
        assert patterns
        assert all(p.kind == KIND_DET_BENIGN for p in patterns)
        assert residual_b == []

    def test_purity_on_discovery_round_residuals(self, fixture_corpus):
        benign, malicious = fixture_corpus.split_by_label()
        patterns, _b, _m, rounds = mine_deterministic(
            benign, malicious, config(supports=(10, 5, 3, 2))
        )
        by_id = {p.id: p for p in patterns}
        for rnd in rounds:
            residual_b = [fixture_corpus.get(i) for i in rnd.residual_benign_ids]
            residual_m = [fixture_corpus.get(i) for i in rnd.residual_malicious_ids]
            for pid in rnd.pattern_ids:
                pattern = by_id[pid]
                cov_b = sum(
                    1 for s in residual_b if covers(pattern.actions, s.actions)
                )
                cov_m = sum(
                    1 for s in residual_m if covers(pattern.actions, s.actions)
                )
                assert (cov_b == 0) != (cov_m == 0), pattern.actions

    def test_support_at_least_discovery_level(self, fixture_corpus):
        benign, malicious = fixture_corpus.split_by_label()
        patterns, _b, _m, _r = mine_deterministic(
            benign, malicious, config(supports=(10, 5, 3, 2))
        )
        for p in patterns:
            assert p.support >= p.discovered_at_support


class TestPhase2:
    def make_cluster(self):
        malicious = seqs(
            *[["p", f"u{i}", "q"] for i in range(9)], label="malicious", prefix="m"
        )
        benign = seqs(["p", "v0", "q"], label="benign", prefix="b")
        return benign, malicious

    def test_ratio_point_nine_pattern_included(self):
        benign, malicious = self.make_cluster()
        found = mine_justifiable(benign, malicious, config(supports=[2]))
        by_actions = {p.actions: p for p in found}
        assert ("p", "q") in by_actions
        pattern = by_actions[("p", "q")]
        assert pattern.kind == KIND_JUSTIFIABLE
        assert pattern.bias_ratio_residual == 0.9
        assert pattern.bias_class == "malicious"

    def test_ratio_below_tau_excluded(self):
        malicious = seqs(
            *[["p", f"u{i}", "q"] for i in range(8)], label="malicious", prefix="m"
        )
        benign = seqs(["p", "v0", "q"], ["p", "v1", "q"], label="benign", prefix="b")
        found = mine_justifiable(benign, malicious, config(supports=[2]))
        assert ("p", "q") not in {p.actions for p in found}  # ratio 0.8 < 0.9

    def test_empty_residuals(self):
        assert mine_justifiable([], [], config(supports=[2])) == []

    def test_dedup_keeps_highest_support_level(self):
        benign, malicious = self.make_cluster()
        found = mine_justifiable(benign, malicious, config(supports=[5, 2]))
        pq = [p for p in found if p.actions == ("p", "q")]
        assert len(pq) == 1
        assert pq[0].discovered_at_support == 5


class TestPhase3:
    def mk(self, actions, covered, kind=KIND_DET_MALICIOUS):
        return Pattern(
            id=pattern_id(actions),
            actions=tuple(actions),
            kind=kind,
            bias_class="malicious" if kind != KIND_DET_BENIGN else "benign",
            bias_ratio_residual=1.0 if kind != KIND_JUSTIFIABLE else 0.9,
            bias_ratio_full=1.0,
            support=len(covered),
            discovered_at_support=1,
            covered_ids=tuple(covered),
        )

    def universe(self, ids):
        return [ActionSequence(id=i, label="malicious", actions=("z",)) for i in ids]

    def test_spec_example_zero_gain_excluded(self):
        candidates = [
            self.mk(["a", "b"], ["1", "2", "3"]),
            self.mk(["c", "d"], ["3", "4"]),
            self.mk(["e", "f"], ["4"]),
        ]
        chosen = merge_patterns(candidates, [], self.universe(["1", "2", "3", "4"]))
        assert [p.actions for p in chosen] == [("a", "b"), ("c", "d")]

    def test_single_candidate_covering_everything(self):
        candidate = self.mk(["a", "b"], ["1", "2"])
        chosen = merge_patterns([candidate], [], self.universe(["1", "2"]))
        assert chosen == [candidate]

    def test_deterministic_beats_justifiable_on_ties(self):
        det = self.mk(["a", "b"], ["1", "2"])
        just = self.mk(["a", "c"], ["1", "2"], kind=KIND_JUSTIFIABLE)
        chosen = merge_patterns([just, det], [], self.universe(["1", "2"]))
        assert chosen[0] is det

    def test_shorter_pattern_wins_remaining_ties(self):
        short = self.mk(["a", "b"], ["1", "2"])
        long = self.mk(["a", "b", "c"], ["1", "2"])
        chosen = merge_patterns([long, short], [], self.universe(["1", "2"]))
        assert chosen[0] is short

    def test_coverage_preserved(self, fixture_mining, fixture_corpus):
        benign, malicious = fixture_corpus.split_by_label()
        candidates = list(fixture_mining.deterministic) + list(
            fixture_mining.justifiable
        )
        covered_candidates = set()
        for p in candidates:
            covered_candidates.update(p.covered_ids)
        covered_opt = set()
        for p in fixture_mining.patterns:
            covered_opt.update(p.covered_ids)
        assert covered_opt == covered_candidates

    def test_every_selection_has_positive_gain(self, fixture_mining, fixture_corpus):
        benign, malicious = fixture_corpus.split_by_label()
        candidates = list(fixture_mining.deterministic) + list(
            fixture_mining.justifiable
        )
        replay = merge_patterns(candidates, benign, malicious)
        covered = set()
        for pattern in replay:
            gain = set(pattern.covered_ids) - covered
            assert gain, pattern.actions
            covered.update(pattern.covered_ids)
        assert {p.id for p in replay} == {p.id for p in fixture_mining.patterns}


class TestHierarchicalMine:
    def test_fixture_corpus_full_coverage(self, fixture_mining):
        stats = fixture_mining.stats
        assert stats["coverage_total"] == 1.0
        assert stats["coverage_benign"] == 1.0
        assert stats["coverage_malicious"] == 1.0
        assert stats["n_det"] + stats["n_just"] == len(fixture_mining.patterns)
        assert stats["n_just"] == 1

    def test_justifiable_pattern_is_the_planted_one(self, fixture_mining):
        assert [p.actions for p in fixture_mining.justifiable] == [
            ("decode_base64_to_bytes", "exec_python_code")
        ]
        assert fixture_mining.justifiable[0].bias_ratio_residual == 0.9

    def test_indistinguishable_classes_yield_no_deterministic(self, taxonomy):
        rows = [["get_env_var", "serialize_to_json", "exit_program"]] * 4
        benign = seqs(*rows, label="benign", prefix="b")
        malicious = seqs(*rows, label="malicious", prefix="m")
        corpus_seqs = benign + malicious
        from seqguard.corpus import Corpus

        result = hierarchical_mine(
            Corpus(corpus_seqs), config(supports=[4, 2])
        )
        assert result.deterministic == ()

    def test_determinism_byte_identical(self, fixture_corpus):
        cfg = config(supports=(10, 5, 3, 2))
        first = hierarchical_mine(fixture_corpus, cfg)
        second = hierarchical_mine(fixture_corpus, cfg)
        assert first.to_json() == second.to_json()

    def test_pattern_file_round_trip(self, fixture_mining, taxonomy):
        reloaded = load_mining_result(fixture_mining.to_json(), taxonomy)
        assert [p.id for p in reloaded.patterns] == [
            p.id for p in fixture_mining.patterns
        ]
        assert reloaded.to_json() == fixture_mining.to_json()

    def test_pattern_file_rejects_unknown_action(self, fixture_mining, taxonomy):
        import json as jsonlib

        payload = jsonlib.loads(fixture_mining.to_json())
        payload["patterns"][0]["actions"] = ["bogus_action", "exec_python_code"]
        with pytest.raises(Exception, match="bogus_action|hash"):
            load_mining_result(jsonlib.dumps(payload), taxonomy)


def test_pattern_invariants_enforced():
    with pytest.raises(MiningError, match="covered_ids"):
        Pattern(
            id="x",
            actions=("a", "b"),
            kind=KIND_DET_BENIGN,
            bias_class="benign",
            bias_ratio_residual=1.0,
            bias_ratio_full=1.0,
            support=2,
            discovered_at_support=2,
            covered_ids=(),
        )
    with pytest.raises(MiningError, match="kind"):
        Pattern(
            id="x",
            actions=("a", "b"),
            kind="nope",
            bias_class="benign",
            bias_ratio_residual=1.0,
            bias_ratio_full=1.0,
            support=2,
            discovered_at_support=2,
            covered_ids=("s1",),
        )
