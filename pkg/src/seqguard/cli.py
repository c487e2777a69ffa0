"""Command-line surface: mine, build-kb, scan, eval, serve.

Exit codes: 0 success (scan: benign), 1 scan found the package malicious,
2 any validation or runtime error.  All commands are deterministic with
offline providers.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import Config, load_config
from .errors import SeqGuardError
from .pipeline import (
    Scanner,
    load_eval_manifest,
    report_to_text,
    run_build_kb,
    run_mine,
    run_scan_report,
)

EXIT_OK = 0
EXIT_MALICIOUS = 1
EXIT_ERROR = 2


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_ERROR)


def _load_cli_config(config_path) -> Config:
    try:
        return load_config(config_path)
    except SeqGuardError as exc:
        _fail(str(exc))


def _parse_supports(text):
    if text is None:
        return None
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        _fail(f"--supports must be comma-separated integers, got {text!r}")


@click.group()
@click.version_option(package_name="seqguard")
def main():
    """Behavioral pattern mining and knowledge-driven package scanning."""


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--taxonomy", "taxonomy_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--supports", default=None, help="Comma-separated, decreasing.")
@click.option("--tau", default=None, type=float, help="Distinction threshold.")
@click.option("--min-len", default=None, type=int, help="Minimum pattern length.")
@click.option("--config", "config_path", default=None, type=click.Path())
def mine(corpus_path, taxonomy_path, out_path, supports, tau, min_len, config_path):
    """Mine discriminative patterns from a labeled corpus."""
    config = _load_cli_config(config_path)
    for path in (corpus_path, taxonomy_path):
        if not Path(path).exists():
            _fail(f"no such file: {path}")
    try:
        result = run_mine(
            corpus_path,
            taxonomy_path,
            out_path,
            supports=_parse_supports(supports),
            tau=tau,
            min_pattern_len=min_len,
            config=config,
        )
    except SeqGuardError as exc:
        _fail(str(exc))
    stats = result.stats
    click.echo(
        f"patterns: {len(result.patterns)} merged "
        f"({stats['n_det']} deterministic, {stats['n_just']} justifiable) "
        f"from {len(result.deterministic) + len(result.justifiable)} candidates"
    )
    click.echo(
        "coverage: benign {:.2%}, malicious {:.2%}, total {:.2%}".format(
            stats["coverage_benign"],
            stats["coverage_malicious"],
            stats["coverage_total"],
        )
    )
    click.echo(f"wrote {out_path}")


@main.command("build-kb")
@click.option("--patterns", "patterns_path", required=True, type=click.Path())
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--taxonomy", "taxonomy_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--k", default=5, type=int, show_default=True)
@click.option("--force", is_flag=True, help="Overwrite an existing directory.")
@click.option(
    "--embedder",
    type=click.Choice(["offline", "external"]),
    default="offline",
    show_default=True,
)
@click.option("--config", "config_path", default=None, type=click.Path())
def build_kb_cmd(
    patterns_path, corpus_path, taxonomy_path, out_dir, k, force, embedder,
    config_path,
):
    """Build the knowledge base directory from mined patterns + corpus."""
    config = _load_cli_config(config_path)
    for path in (patterns_path, corpus_path, taxonomy_path):
        if not Path(path).exists():
            _fail(f"no such file: {path}")
    if embedder == "external" and not config.embedding_endpoint:
        _fail(
            "--embedder external requires an endpoint "
            "(config embedding_endpoint or SEQGUARD_PROVIDER_URL)"
        )
    if embedder == "offline":
        config.embedding_endpoint = ""
        config.reasoning_endpoint = ""
    try:
        kb = run_build_kb(
            patterns_path, corpus_path, taxonomy_path, out_dir, k=k, force=force,
            config=config,
        )
    except SeqGuardError as exc:
        _fail(str(exc))
    click.echo(
        f"wrote {out_dir}: {len(kb.entries)} entries, {len(kb.cases)} cases, "
        f"dim {kb.config.dim}"
    )


def _make_client(server: str):
    import httpx

    return httpx.Client(base_url=server, timeout=120.0)


def _remote_scan(server: str, package_path: Path, client=None) -> dict:
    files = [
        (p.relative_to(package_path).as_posix(), p.read_text(encoding="utf-8"))
        for p in sorted(package_path.rglob("*.py"))
    ]
    payload = {
        "package": package_path.name,
        "files": [{"path": rel, "content": text} for rel, text in files],
    }
    owns_client = client is None
    if client is None:
        client = _make_client(server)
    try:
        response = client.post("/scan", json=payload)
    finally:
        if owns_client:
            client.close()
    if response.status_code != 200:
        raise SeqGuardError(
            f"server returned {response.status_code}: {response.text[:200]}"
        )
    return response.json()


@main.command()
@click.argument("package_path", type=click.Path())
@click.option("--kb", "kb_dir", required=True, type=click.Path())
@click.option(
    "--taxonomy", "taxonomy_path", default=None, type=click.Path(),
    help="Override the taxonomy bundled in the KB directory.",
)
@click.option("--format", "output_format", type=click.Choice(["json", "text"]),
              default="json", show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--jobs", default=1, type=int, show_default=True)
@click.option("--server", default=None, help="Scan via a running seqguard service.")
@click.option("--config", "config_path", default=None, type=click.Path())
def scan(package_path, kb_dir, taxonomy_path, output_format, out_path, jobs,
         server, config_path):
    """Scan a package directory; exit 1 if malicious, 0 if benign."""
    config = _load_cli_config(config_path)
    package = Path(package_path)
    if not package.exists():
        _fail(f"no such path: {package_path}")
    try:
        if server:
            report = _remote_scan(server, package)
        else:
            report = run_scan_report(
                kb_dir, package, taxonomy_path=taxonomy_path, jobs=jobs,
                config=config,
            )
    except SeqGuardError as exc:
        _fail(str(exc))
    rendered = (
        report_to_text(report)
        if output_format == "text"
        else json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    if out_path:
        Path(out_path).write_text(rendered, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(rendered, nl=False)
    sys.exit(
        EXIT_MALICIOUS if report["classification"] == "malicious" else EXIT_OK
    )


@main.command("eval")
@click.option("--kb", "kb_dir", required=True, type=click.Path())
@click.option("--packages", "manifest_path", required=True, type=click.Path())
@click.option(
    "--taxonomy", "taxonomy_path", default=None, type=click.Path(),
    help="Override the taxonomy bundled in the KB directory.",
)
@click.option("--jobs", default=1, type=int, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option(
    "--unscannable",
    type=click.Choice(["benign", "error"]),
    default="benign",
    show_default=True,
    help="Policy for packages that cannot be scanned.",
)
@click.option("--config", "config_path", default=None, type=click.Path())
def eval_cmd(kb_dir, manifest_path, taxonomy_path, jobs, out_path, unscannable,
             config_path):
    """Evaluate detection over a labeled package manifest (JSONL)."""
    config = _load_cli_config(config_path)
    if not Path(manifest_path).exists():
        _fail(f"no such file: {manifest_path}")
    try:
        scanner = Scanner.load(kb_dir, taxonomy_path=taxonomy_path, config=config)
        packages = load_eval_manifest(manifest_path)
        results = scanner.evaluate(
            packages, jobs=jobs, unscannable_policy=unscannable
        )
    except SeqGuardError as exc:
        _fail(str(exc))
    rendered = json.dumps(results, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(rendered, encoding="utf-8")
    metrics = results["metrics"]
    counts = results["counts"]

    def fmt(value):
        return "null" if value is None else f"{value:.4f}"

    click.echo(
        f"accuracy={fmt(metrics['accuracy'])} precision={fmt(metrics['precision'])} "
        f"recall={fmt(metrics['recall'])} f1={fmt(metrics['f1'])} "
        f"FP={counts['fp']} FN={counts['fn']}"
    )
    if out_path:
        click.echo(f"wrote {out_path}")
    else:
        click.echo(rendered, nl=False)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--kb", "kb_dir", required=True, type=click.Path())
@click.option("--taxonomy", "taxonomy_path", default=None, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8750, type=int, show_default=True)
def serve(kb_dir, taxonomy_path, host, port):
    """Run the HTTP scanning service around a built KB."""
    import uvicorn

    from .service import create_app

    try:
        app = create_app(kb_dir=kb_dir, taxonomy_path=taxonomy_path)
    except SeqGuardError as exc:
        _fail(str(exc))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
