"""FastAPI service wrapping a loaded knowledge base.

The service loads taxonomy + KB + providers once at startup and serves
scan/classify/extract requests from any number of clients.  Batch jobs
(mining, KB builds, evaluation) stay in the CLI.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException

from ..config import Config
from ..detector import classify_sequence, scan_contents
from ..corpus import ActionSequence
from ..errors import SeqGuardError
from ..extractor import locate_sites, map_to_sequence, slice_context
from ..miner import KINDS
from ..pipeline import Scanner
from . import schemas

KB_DIR_ENV = "SEQGUARD_KB_DIR"
TAXONOMY_ENV = "SEQGUARD_TAXONOMY"


def create_app(
    kb_dir=None,
    taxonomy_path=None,
    config: Optional[Config] = None,
) -> FastAPI:
    kb_dir = kb_dir or os.environ.get(KB_DIR_ENV)
    if not kb_dir:
        raise SeqGuardError(
            f"no KB directory: pass kb_dir or set {KB_DIR_ENV}"
        )
    taxonomy_path = taxonomy_path or os.environ.get(TAXONOMY_ENV) or None
    scanner = Scanner.load(kb_dir, taxonomy_path=taxonomy_path, config=config)
    app = FastAPI(title="seqguard", version="0.1.0")
    app.state.scanner = scanner

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return {
            "status": "ok",
            "taxonomy_actions": len(scanner.taxonomy),
            "kb_patterns": len(scanner.kb.entries),
            "kb_cases": len(scanner.kb.cases),
        }

    @app.get("/kb/info", response_model=schemas.KBInfoResponse)
    def kb_info():
        by_kind = {kind: 0 for kind in KINDS}
        for entry in scanner.kb.entries:
            by_kind[entry.pattern.kind] += 1
        cfg = scanner.kb.config
        return {
            "dim": cfg.dim,
            "k": cfg.k,
            "embedding_provider": cfg.embedding_provider,
            "reasoning_provider": cfg.reasoning_provider,
            "entries": len(scanner.kb.entries),
            "cases": len(scanner.kb.cases),
            "patterns_by_kind": by_kind,
        }

    @app.post("/classify", response_model=schemas.VerdictModel)
    def classify(request: schemas.ClassifyRequest):
        unknown = [a for a in request.actions if a not in scanner.taxonomy]
        if unknown:
            raise HTTPException(
                status_code=400, detail=f"unknown actions: {unknown}"
            )
        sequence = ActionSequence(
            id="request", label="unknown", actions=tuple(request.actions)
        )
        verdict = classify_sequence(
            sequence, request.context, scanner.kb, scanner.providers
        )
        return verdict.to_dict()

    @app.post("/extract", response_model=schemas.ExtractResponse)
    def extract(request: schemas.ExtractRequest):
        sites = locate_sites(request.content, scanner.taxonomy, file=request.path)
        slices = slice_context(request.content, sites)
        actions: list[str] = []
        if sites:
            actions = list(
                map_to_sequence(request.path, sites, slices=slices).actions
            )
        return {
            "path": request.path,
            "actions": actions,
            "sites": [
                {
                    "line": s.line,
                    "col": s.col,
                    "resolved_api": s.resolved_api,
                    "actions": list(s.actions),
                    "is_call": s.is_call,
                }
                for s in sites
            ],
            "slices": [
                {"line_start": s.line_start, "line_end": s.line_end, "text": s.text}
                for s in slices
            ],
        }

    @app.post("/scan", response_model=schemas.ScanResponse)
    def scan(request: schemas.ScanRequest):
        if request.files is not None:
            package = request.package or "inline"
            report = scan_contents(
                package,
                [(item.path, item.content) for item in request.files],
                scanner.taxonomy,
                scanner.kb,
                scanner.providers,
            )
            return report.to_dict()
        if request.root:
            root = Path(request.root)
            if not root.exists():
                raise HTTPException(
                    status_code=400, detail=f"no such path: {request.root}"
                )
            return scanner.scan_package(root).to_dict()
        raise HTTPException(status_code=400, detail="provide 'root' or 'files'")

    return app
