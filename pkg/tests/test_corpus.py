import json

import pytest

from seqguard.corpus import ActionSequence, Corpus, SourceRef, load_corpus
from seqguard.errors import CorpusError


def line(seq_id, label, actions, **extra):
    return json.dumps({"id": seq_id, "label": label, "actions": actions, **extra})


def test_two_line_corpus(taxonomy):
    text = (
        line("a", "benign", ["get_env_var", "serialize_to_json"])
        + "\n"
        + line("b", "malicious", ["create_socket", "establish_tcp_connection"])
        + "\n"
    )
    corpus = load_corpus(text, taxonomy)
    assert len(corpus.benign) == 1
    assert len(corpus.malicious) == 1


def test_unknown_action_names_action_and_line(taxonomy):
    text = (
        line("a", "benign", ["get_env_var"])
        + "\n"
        + line("b", "benign", ["not_in_taxonomy"])
        + "\n"
    )
    with pytest.raises(CorpusError, match="line 2.*not_in_taxonomy"):
        load_corpus(text, taxonomy)


def test_duplicate_id_reports_line(taxonomy):
    text = line("a", "benign", ["get_env_var"]) + "\n" + line(
        "a", "malicious", ["create_socket"]
    )
    with pytest.raises(CorpusError, match="line 2.*duplicate"):
        load_corpus(text, taxonomy)


def test_unknown_label_reports_line(taxonomy):
    with pytest.raises(CorpusError, match="line 1.*label"):
        load_corpus(line("a", "suspicious", ["get_env_var"]), taxonomy)


def test_empty_actions_rejected(taxonomy):
    with pytest.raises(CorpusError, match="nonempty"):
        load_corpus(line("a", "benign", []), taxonomy)


def test_fixture_corpus_shape(fixture_corpus):
    benign, malicious = fixture_corpus.split_by_label()
    assert len(benign) == 60
    assert len(malicious) == 60


def test_split_rejects_unknown_labels(taxonomy):
    corpus = load_corpus(line("a", "unknown", ["get_env_var"]), taxonomy)
    with pytest.raises(CorpusError, match="unknown"):
        corpus.split_by_label()


def test_split_partitions_disjointly(fixture_corpus):
    benign, malicious = fixture_corpus.split_by_label()
    assert len(benign) + len(malicious) == len(fixture_corpus)
    assert {s.id for s in benign}.isdisjoint({s.id for s in malicious})


def test_empty_corpus_split(taxonomy):
    corpus = load_corpus("", taxonomy)
    assert corpus.split_by_label() == ((), ())


def test_round_trip(taxonomy, fixture_corpus):
    reloaded = load_corpus(fixture_corpus.to_jsonl(), taxonomy)
    assert reloaded == fixture_corpus
    assert reloaded.to_jsonl() == fixture_corpus.to_jsonl()


def test_order_preserved(taxonomy):
    text = "\n".join(
        line(f"s{i}", "benign", ["get_env_var"]) for i in range(5)
    )
    corpus = load_corpus(text, taxonomy)
    assert [s.id for s in corpus] == [f"s{i}" for i in range(5)]


def test_source_ref_validation():
    with pytest.raises(CorpusError, match="line_start"):
        SourceRef(package="p", version="1", file="a.py", line_start=9, line_end=3)
    with pytest.raises(CorpusError, match="relative"):
        SourceRef(package="p", version="1", file="/abs.py", line_start=1, line_end=2)


def test_source_ref_round_trips(taxonomy):
    text = line(
        "a",
        "malicious",
        ["create_socket"],
        context="s = socket.socket()",
        source={
            "package": "evil",
            "version": "0.1",
            "file": "setup.py",
            "line_start": 3,
            "line_end": 9,
        },
    )
    corpus = load_corpus(text, taxonomy)
    seq = corpus.get("a")
    assert seq.source.file == "setup.py"
    assert load_corpus(corpus.to_jsonl(), taxonomy) == corpus


def test_direct_corpus_duplicate_guard():
    a = ActionSequence(id="x", label="benign", actions=("get_env_var",))
    with pytest.raises(CorpusError, match="duplicate"):
        Corpus([a, a])
