"""Prompt construction, LLM report generation and grounding checks.

Talks to any OpenAI-compatible chat-completions endpoint (POST
``{base_url}/chat/completions`` with one system and one user message).
An offline deterministic stub is built in for testing and reproducible
pipeline runs.  Every generated report carries SHA-256 audit hashes of
the prompt and the findings document it was conditioned on, so each
narrative is traceable to its evidence.
"""

from __future__ import annotations

import csv
import hashlib
import importlib.resources
import os
import re
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import List, Optional

import requests

from .findings import NO_OVERLAP_NOTE, FindingsDocument

__all__ = [
    "LlmEndpointConfig",
    "GeneratedReport",
    "GroundingViolation",
    "LlmAuthError",
    "LlmRetriesExhausted",
    "LlmEmptyCompletion",
    "build_prompt",
    "generate_report",
    "stub_report_text",
    "ground_check",
    "load_region_lexicon",
    "REPORT_SECTIONS",
    "SYSTEM_MESSAGE",
    "STUB_MODEL_ID",
]

REPORT_SECTIONS = (
    "Model Performance Summary",
    "Detailed Regional Impact",
    "Recommendation",
    "References",
)

SYSTEM_MESSAGE = (
    "You are a radiology reporting assistant. You write clear, factual, "
    "clinically useful narrative reports about brain tumor classification "
    "results, and you never state anything that is not supported by the "
    "structured findings supplied to you."
)

STUB_MODEL_ID = "offline-stub"

_CLASS_SURFACE_FORMS = {
    "Glioma": ("glioma",),
    "Meningioma": ("meningioma",),
    "PituitaryTumor": ("pituitary",),
}

_CLASS_DISPLAY = {
    "Glioma": "Glioma",
    "Meningioma": "Meningioma",
    "PituitaryTumor": "Pituitary tumor",
}


class LlmAuthError(RuntimeError):
    """Endpoint rejected the credentials; never retried."""


class LlmRetriesExhausted(RuntimeError):
    """Transient failures persisted past the configured retry budget."""


class LlmEmptyCompletion(RuntimeError):
    """Endpoint answered but the completion carried no text."""


@dataclass(frozen=True)
class LlmEndpointConfig:
    """Connection settings for an OpenAI-compatible chat endpoint.

    ``base_url`` includes the version prefix (e.g. ``https://host/v1``).
    The API key is normally taken from the LLM_API_KEY environment
    variable; see :meth:`from_env`.
    """

    base_url: str
    model_id: str
    api_key: str = ""
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 0.2
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_env(cls, base_url: str, model_id: str, **kwargs) -> "LlmEndpointConfig":
        return cls(base_url=base_url, model_id=model_id, api_key=os.environ.get("LLM_API_KEY", ""), **kwargs)


@dataclass(frozen=True)
class GeneratedReport:
    text: str
    model_id: str
    prompt_hash: str
    findings_hash: str
    created_at: str
    retries: int = 0


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def build_prompt(findings: FindingsDocument) -> str:
    """Deterministic user prompt embedding the findings JSON verbatim."""
    lines = [
        "Write a structured radiological-style report for the brain MRI "
        "analysis described by the findings JSON below.",
        "",
        "Rules:",
        "- Use ONLY the facts present in the findings JSON. Do not invent "
        "anatomical regions, percentages, metrics, or diagnoses.",
        "- Refer to anatomical regions exactly by the names given in the "
        "JSON, and quote coverage percentages exactly as given.",
        "- Do not mention any tumor class other than the predicted one.",
        "",
        "Findings JSON:",
        findings.to_json().rstrip("\n"),
        "",
        "Structure the report with exactly these sections:",
    ]
    lines += [f"{i}. {name}" for i, name in enumerate(REPORT_SECTIONS, start=1)]
    if not findings.regions:
        note = findings.note or NO_OVERLAP_NOTE
        lines += [
            "",
            f"Note: the segmentation produced {note}; say so explicitly "
            "instead of describing regional involvement.",
        ]
    return "\n".join(lines)


def stub_report_text(findings: FindingsDocument) -> str:
    """Offline deterministic report built purely from document facts.

    Interpolates every region name and metric, keeps all numerals equal
    to document values, and never names a non-predicted tumor class, so
    :func:`ground_check` passes with zero violations.
    """
    m = findings.segmentation_metrics
    cls = _CLASS_DISPLAY[findings.predicted_class]
    out: List[str] = []
    out.append("Model Performance Summary")
    out.append("")
    conf = ""
    if findings.prediction_confidence is not None:
        conf = f" with a probabilistic confidence of {findings.prediction_confidence:.2f}"
    out.append(
        f"The classification was produced by {findings.model_name}, which "
        f"predicted the tumor class {cls}{conf}. The spatial evidence was "
        f"derived from {findings.saliency_method} saliency attribution. "
        f"The saliency-derived segmentation reached a Dice similarity "
        f"coefficient of {m.dsc:.4f} and an intersection over union of "
        f"{m.iou:.4f} against the reference mask, using the adaptive "
        f"threshold at the {m.alpha_star:.0f}th intensity percentile."
    )
    out.append("")
    out.append("Detailed Regional Impact")
    out.append("")
    if findings.regions:
        out.append(
            "The segmented region overlaps the following atlas structures, "
            "listed by tumor occupation:"
        )
        for r in findings.regions:
            out.append(
                f"- {r.name}: {r.percentage:.2f}% overlap "
                f"({r.voxel_count} voxels, atlas label {r.label})."
            )
    else:
        out.append(
            f"There is {findings.note or NO_OVERLAP_NOTE} for this sample; "
            "no named structure can be reported."
        )
    out.append("")
    out.append("Recommendation")
    out.append("")
    out.append(
        f"These results localize the evidence supporting the {cls} "
        "prediction and should be correlated with the clinical history. "
        "Review of the highlighted anatomy by a radiologist is advised "
        "before any treatment decision."
    )
    out.append("")
    out.append("References")
    out.append("")
    out.append(
        "This report was generated automatically from the structured "
        "findings document and contains no information beyond it."
    )
    return "\n".join(out) + "\n"


def generate_report(
    findings: FindingsDocument,
    cfg: Optional[LlmEndpointConfig] = None,
    created_at: Optional[str] = None,
) -> GeneratedReport:
    """Obtain a narrative report for a findings document.

    With ``cfg=None`` the deterministic offline stub is used.  Otherwise
    the configured endpoint is called; transient failures (HTTP 5xx,
    timeouts, connection errors) are retried with exponential backoff up
    to ``cfg.max_retries`` times, while authentication failures (401/403)
    abort immediately.
    """
    prompt = build_prompt(findings)
    base = dict(
        prompt_hash=_sha256(prompt),
        findings_hash=_sha256(findings.to_json()),
        created_at=created_at if created_at is not None else _utc_now(),
    )
    if cfg is None:
        return GeneratedReport(text=stub_report_text(findings), model_id=STUB_MODEL_ID, **base)

    url = cfg.base_url.rstrip("/") + "/chat/completions"
    payload = {
        "model": cfg.model_id,
        "messages": [
            {"role": "system", "content": SYSTEM_MESSAGE},
            {"role": "user", "content": prompt},
        ],
        "temperature": cfg.temperature,
    }
    headers = {"Authorization": f"Bearer {cfg.api_key}", "Content-Type": "application/json"}

    last_error: Optional[str] = None
    for attempt in range(cfg.max_retries + 1):
        if attempt:
            time.sleep(cfg.backoff_base * 2 ** (attempt - 1))
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=cfg.timeout)
        except (requests.Timeout, requests.ConnectionError) as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            continue
        if resp.status_code in (401, 403):
            raise LlmAuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
        if resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            continue
        if resp.status_code != 200:
            raise RuntimeError(f"endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmEmptyCompletion(f"malformed completion payload: {exc}") from exc
        if not text or not text.strip():
            raise LlmEmptyCompletion("endpoint returned an empty completion")
        return GeneratedReport(text=text, model_id=cfg.model_id, retries=attempt, **base)

    raise LlmRetriesExhausted(
        f"gave up after {cfg.max_retries} retries; last failure: {last_error}"
    )


def load_region_lexicon() -> List[str]:
    """Region names of the shipped Harvard-Oxford cortical label table."""
    text = (
        importlib.resources.files("mriexplain")
        .joinpath("data/harvard_oxford_cortical.csv")
        .read_text(encoding="utf-8")
    )
    reader = csv.reader(text.splitlines())
    rows = list(reader)
    return [name for _, name in rows[1:]]


_NORM_RE = re.compile(r"[^a-z0-9']+")


def _normalize(text: str) -> str:
    return " " + _NORM_RE.sub(" ", text.lower().replace("’", "'")).strip() + " "


_PERCENT_RE = re.compile(r"(\d+(?:\.\d+)?)\s*%")


@dataclass(frozen=True)
class GroundingViolation:
    kind: str  # "region" | "numeral" | "class"
    detail: str


def ground_check(report: GeneratedReport, findings: FindingsDocument) -> List[GroundingViolation]:
    """Heuristic advisory scan for statements unsupported by the findings.

    Flags (a) atlas region names (from the shipped lexicon) that appear
    in the report but not in the document, (b) percent-style numerals
    not within 0.05 of any document value, and (c) mentions of tumor
    classes other than the predicted one.  Advisory only: an empty
    result does not certify factual accuracy.
    """
    text = _normalize(report.text)
    violations: List[GroundingViolation] = []

    documented = {_normalize(r.name) for r in findings.regions}
    for name in load_region_lexicon():
        norm = _normalize(name)
        if norm.strip() and (norm in text) and norm not in documented:
            violations.append(
                GroundingViolation("region", f"region {name!r} is not in the findings document")
            )

    allowed = [r.percentage for r in findings.regions]
    m = findings.segmentation_metrics
    allowed += [100.0 * m.dsc, 100.0 * m.iou, m.alpha_star]
    if findings.prediction_confidence is not None:
        allowed.append(100.0 * findings.prediction_confidence)
    for match in _PERCENT_RE.finditer(report.text):
        value = float(match.group(1))
        if not any(abs(value - a) <= 0.05 for a in allowed):
            violations.append(
                GroundingViolation(
                    "numeral", f"percentage {match.group(0)!r} matches no documented value"
                )
            )

    for cls, forms in _CLASS_SURFACE_FORMS.items():
        if cls == findings.predicted_class:
            continue
        for form in forms:
            if f" {form}" in text:
                violations.append(
                    GroundingViolation(
                        "class", f"report mentions {cls} but the predicted class is {findings.predicted_class}"
                    )
                )
                break

    return violations
