"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    taxonomy_actions: int
    kb_patterns: int
    kb_cases: int


class KBInfoResponse(BaseModel):
    dim: int
    k: int
    embedding_provider: str
    reasoning_provider: str
    entries: int
    cases: int
    patterns_by_kind: dict[str, int]


class ClassifyRequest(BaseModel):
    actions: list[str] = Field(min_length=1)
    context: Optional[str] = None


class RetrievedCaseModel(BaseModel):
    case_id: str
    similarity: float
    channel: str
    label: str


class EvidenceModel(BaseModel):
    matched_pattern_ids: list[str]
    retrieved: list[RetrievedCaseModel]
    reasoning: str


class VerdictModel(BaseModel):
    subject: str
    classification: str
    confidence: float
    stage: str
    evidence: EvidenceModel


class ExtractRequest(BaseModel):
    content: str
    path: str = "<memory>"


class SiteModel(BaseModel):
    line: int
    col: int
    resolved_api: str
    actions: list[str]
    is_call: bool


class SliceModel(BaseModel):
    line_start: int
    line_end: int
    text: str


class ExtractResponse(BaseModel):
    path: str
    actions: list[str]
    sites: list[SiteModel]
    slices: list[SliceModel]


class ScanFileItem(BaseModel):
    path: str
    content: str


class ScanRequest(BaseModel):
    """Scan either a server-local directory (root) or inline file contents."""

    root: Optional[str] = None
    files: Optional[list[ScanFileItem]] = None
    package: Optional[str] = None


class FileOutcomeModel(BaseModel):
    path: str
    status: str
    verdict: Optional[VerdictModel] = None
    note: Optional[str] = None


class ScanSummaryModel(BaseModel):
    files_total: int
    files_scanned: int
    files_skipped: int
    malicious_files: int


class ScanResponse(BaseModel):
    package: str
    classification: str
    files: list[FileOutcomeModel]
    summary: ScanSummaryModel
    timings_ms: dict[str, float]
