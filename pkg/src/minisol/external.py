"""Adapter seam for an external deductive verifier.

The merged contract already carries its obligations as ``/// @notice``
annotations in source form, which is exactly the artifact a deductive
verifier for annotated contracts consumes.  This module writes that text
to a file, invokes a configured executable on it, and classifies the
result:

* exit status 0 with output matching ``pass_regex`` → clean (no findings);
* exit status 0 without the pass pattern → one SPV finding per diagnostic
  line of output, carrying the tool's message verbatim;
* nonzero exit status, a timeout, or a missing/unrunnable executable →
  a single VRE finding (the check could not be carried out).

The pass pattern is a configurable regular expression rather than a
hard-coded phrase so the adapter survives tool-version changes; the
default matches the conventional "No errors" summary line.
"""

from __future__ import annotations

import re
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .report import SPV, VRE, Finding

SITE = "external"


@dataclass(frozen=True)
class ToolConfig:
    """How to run the external verifier.

    ``args`` is a template: each element is formatted with ``{file}`` bound
    to the path of the annotated contract text.
    """

    path: str
    args: tuple = ("{file}",)
    timeout_s: float = 60.0
    pass_regex: str = "No errors"

    def __post_init__(self):
        if not self.path:
            raise ValueError("external tool path must be non-empty")
        if self.timeout_s <= 0:
            raise ValueError("external tool timeout must be positive")
        re.compile(self.pass_regex)  # reject broken patterns at config time

    def command(self, file: Path) -> list[str]:
        return [self.path] + [arg.format(file=str(file)) for arg in self.args]


def external_verify(merged, tool: ToolConfig) -> list[Finding]:
    """Invoke the configured verifier on the merged contract's annotated
    source and translate its result into findings (empty means PASS)."""
    with tempfile.NamedTemporaryFile(
            mode="w", suffix=".sol", prefix=f"{merged.unit.name}_",
            delete=False) as handle:
        handle.write(merged.source)
        file = Path(handle.name)
    try:
        try:
            proc = subprocess.run(
                tool.command(file), capture_output=True, text=True,
                timeout=tool.timeout_s)
        except (FileNotFoundError, NotADirectoryError, PermissionError) as exc:
            return [Finding(
                VRE, site=SITE, message=f"backend unavailable: {exc}",
                suspected_cause="install the verifier or fix the configured path")]
        except subprocess.TimeoutExpired:
            return [Finding(
                VRE, site=SITE,
                message=f"verifier timed out after {tool.timeout_s}s",
                suspected_cause="raise the timeout or simplify the contract")]
    finally:
        file.unlink(missing_ok=True)

    output = proc.stdout + ("\n" + proc.stderr if proc.stderr else "")
    if proc.returncode != 0:
        tail = output.strip().splitlines()[-1] if output.strip() else "no output"
        return [Finding(
            VRE, site=SITE,
            message=f"verifier exited with status {proc.returncode}: {tail}",
            suspected_cause="the tool failed before producing a verdict")]
    if re.search(tool.pass_regex, output):
        return []
    diagnostics = [line.strip() for line in output.splitlines() if line.strip()]
    if not diagnostics:
        return [Finding(
            VRE, site=SITE,
            message="verifier produced no recognizable verdict "
                    f"(no output and no match for {tool.pass_regex!r})",
            suspected_cause="adjust pass_regex to this tool's summary line")]
    return [Finding(SPV, site=SITE, message=line) for line in diagnostics]


class ExternalBackend:
    """Conformance backend delegating the semantic check to an external
    verifier over the annotated source text.  The annotated text is the
    same in both modes, so upgrade-mode checks are conservatively strong:
    constructor obligations stay in the artifact the tool sees."""

    name = "external"

    def __init__(self, tool: ToolConfig):
        self.tool = tool

    def check(self, merged, mode: str) -> list[Finding]:
        return external_verify(merged, self.tool)
