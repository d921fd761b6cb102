"""Verification findings and reports.

Finding categories:
  NTI  interface mismatch: storage layout or public signature set differs
  SPV  spec violation on a wrap-free trace
  IOU  spec violation whose trace contains at least one arithmetic wrap
  VRE  verification resource/tool error; the check is inconclusive

A report PASSes only when there are no findings at all; an inconclusive
check therefore blocks deployment the same way a violation does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

NTI = "NTI"
SPV = "SPV"
IOU = "IOU"
VRE = "VRE"

CATEGORIES = (NTI, SPV, IOU, VRE)


@dataclass
class Finding:
    category: str
    site: str
    message: str
    trace: list = field(default_factory=list)
    suspected_cause: str = ""

    def to_json(self) -> dict:
        out = {
            "category": self.category,
            "site": self.site,
            "message": self.message,
            "suspected_cause": self.suspected_cause,
        }
        if self.trace:
            out["trace"] = self.trace
        return out


@dataclass
class VerificationReport:
    verdict: str            # "PASS" | "FAIL"
    mode: str               # "create" | "upgrade"
    spec_id: str
    backend: str
    findings: list[Finding] = field(default_factory=list)
    duration_ms: int = 0

    @property
    def ok(self) -> bool:
        return self.verdict == "PASS"

    def categories(self) -> list[str]:
        return sorted({f.category for f in self.findings})

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "verdict": self.verdict,
            "mode": self.mode,
            "spec_id": self.spec_id,
            "backend": self.backend,
            "duration_ms": self.duration_ms,
            "findings": [f.to_json() for f in self.findings],
        }


def make_report(mode: str, spec_id: str, backend: str, findings: list[Finding],
                duration_ms: int = 0) -> VerificationReport:
    for finding in findings:
        if finding.category not in CATEGORIES:
            raise ValueError(f"unknown finding category {finding.category!r}")
    verdict = "PASS" if not findings else "FAIL"
    return VerificationReport(
        verdict=verdict, mode=mode, spec_id=spec_id, backend=backend,
        findings=list(findings), duration_ms=duration_ms,
    )
