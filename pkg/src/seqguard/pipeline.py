"""End-to-end operations shared by the CLI and the HTTP service.

Each function here is one complete user-facing action (mine patterns,
build a KB directory, scan a package, evaluate a labeled corpus) working
in terms of filesystem paths and plain dicts.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence

from .config import Config
from .corpus import load_corpus_path
from .detector import DetectionReport, scan_package
from .errors import SeqGuardError
from .evaluation import evaluate_corpus
from .knowledge import KnowledgeBase, build_kb, load_kb
from .miner import MiningConfig, MiningResult, hierarchical_mine, load_mining_result_path
from .providers import Providers
from .taxonomy import Taxonomy, load_taxonomy_path


def run_mine(
    corpus_path,
    taxonomy_path,
    out_path,
    supports: Optional[Sequence[int]] = None,
    tau: Optional[float] = None,
    min_pattern_len: Optional[int] = None,
    config: Optional[Config] = None,
) -> MiningResult:
    """Mine a labeled corpus and write the pattern file."""
    config = config or Config()
    taxonomy = load_taxonomy_path(taxonomy_path)
    corpus = load_corpus_path(corpus_path, taxonomy)
    mining_config = MiningConfig(
        supports=tuple(supports) if supports is not None else tuple(config.supports),
        tau=tau if tau is not None else config.tau,
        min_pattern_len=(
            min_pattern_len
            if min_pattern_len is not None
            else config.min_pattern_len
        ),
    )
    result = hierarchical_mine(corpus, mining_config)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(result.to_json(), encoding="utf-8")
    return result


def run_build_kb(
    patterns_path,
    corpus_path,
    taxonomy_path,
    out_dir,
    k: int = 5,
    force: bool = False,
    config: Optional[Config] = None,
) -> KnowledgeBase:
    """Build and persist a KB directory from a pattern file and its corpus.

    The taxonomy is bundled into the directory so scans need only the KB
    path.
    """
    config = config or Config()
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise SeqGuardError(
            f"output directory {out_dir} exists and is not empty; use --force"
        )
    taxonomy = load_taxonomy_path(taxonomy_path)
    corpus = load_corpus_path(corpus_path, taxonomy)
    mining_result = load_mining_result_path(patterns_path, taxonomy)
    providers = config.providers(taxonomy)
    kb = build_kb(
        mining_result,
        corpus,
        providers.embedder,
        providers.reasoner,
        k=k,
    )
    kb.save(out_dir)
    (out_dir / "taxonomy.json").write_text(taxonomy.to_json(), encoding="utf-8")
    return kb


class Scanner:
    """A loaded taxonomy + KB + providers, ready to scan many packages."""

    def __init__(self, taxonomy: Taxonomy, kb: KnowledgeBase, providers: Providers):
        self.taxonomy = taxonomy
        self.kb = kb
        self.providers = providers

    @classmethod
    def load(
        cls,
        kb_dir,
        taxonomy_path=None,
        config: Optional[Config] = None,
    ) -> "Scanner":
        config = config or Config()
        kb_dir = Path(kb_dir)
        if taxonomy_path is None:
            taxonomy_path = kb_dir / "taxonomy.json"
            if not taxonomy_path.exists():
                raise SeqGuardError(
                    f"no taxonomy.json bundled in {kb_dir}; pass --taxonomy"
                )
        taxonomy = load_taxonomy_path(taxonomy_path)
        kb = load_kb(kb_dir, taxonomy)
        return cls(taxonomy, kb, config.providers(taxonomy))

    def scan_package(self, package_path, jobs: int = 1) -> DetectionReport:
        return scan_package(
            package_path, self.taxonomy, self.kb, self.providers, jobs=jobs
        )

    def evaluate(
        self,
        packages: Sequence[tuple],
        jobs: int = 1,
        unscannable_policy: str = "benign",
    ) -> dict:
        return evaluate_corpus(
            packages,
            self.taxonomy,
            self.kb,
            self.providers,
            jobs=jobs,
            unscannable_policy=unscannable_policy,
        )


def run_scan_report(
    kb_dir,
    package_path,
    taxonomy_path=None,
    jobs: int = 1,
    config: Optional[Config] = None,
) -> dict:
    """Load the KB and scan one package, returning the report dict."""
    scanner = Scanner.load(kb_dir, taxonomy_path=taxonomy_path, config=config)
    return scanner.scan_package(package_path, jobs=jobs).to_dict()


def load_eval_manifest(path) -> list[tuple[str, str]]:
    """JSONL manifest of {"path": ..., "label": benign|malicious} entries.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    packages = []
    for lineno, line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SeqGuardError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        if "path" not in entry or "label" not in entry:
            raise SeqGuardError(f"{path}:{lineno}: need 'path' and 'label'")
        pkg_path = Path(entry["path"])
        if not pkg_path.is_absolute():
            pkg_path = base / pkg_path
        packages.append((str(pkg_path), entry["label"]))
    return packages


def strip_timings(report: dict) -> dict:
    """Copy of a report dict with timing fields removed (for byte comparisons)."""
    out = dict(report)
    out.pop("timings_ms", None)
    return out


def report_to_text(report: dict) -> str:
    """Human-readable one-screen summary of a detection report."""
    lines = [
        f"package: {report['package']}",
        f"classification: {report['classification'].upper()}",
        f"files: {report['summary']['files_total']} total, "
        f"{report['summary']['files_scanned']} scanned, "
        f"{report['summary']['files_skipped']} skipped",
    ]
    for entry in report["files"]:
        verdict = entry.get("verdict")
        if verdict is None:
            continue
        marker = "!" if verdict["classification"] == "malicious" else " "
        lines.append(
            f" {marker} {entry['path']}: {verdict['classification']} "
            f"(stage={verdict['stage']}, confidence={verdict['confidence']:.3f})"
        )
    return "\n".join(lines) + "\n"
