"""Verification results shared by the symbolic checks."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field


@dataclass
class CheckResult:
    check: str
    passed: bool
    scenario: str = ""
    counterexample: str | None = None
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, result: CheckResult) -> None:
        self.checks.append(result)

    def extend(self, other: "VerificationReport") -> None:
        self.checks.extend(other.checks)
        self.warnings.extend(other.warnings)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_text(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            head = f"[{status}] {c.scenario + ': ' if c.scenario else ''}{c.check}"
            if c.detail:
                head += f" ({c.detail})"
            lines.append(head)
            if c.counterexample:
                lines.append(f"    counterexample: {c.counterexample}")
        for w in self.warnings:
            lines.append(f"[WARN] {w}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["scenario", "check", "pass", "counterexample"])
        for c in self.checks:
            writer.writerow([c.scenario, c.check, "pass" if c.passed else "fail", c.counterexample or ""])
        return buf.getvalue()


ROW_HEADER = ["scenario", "check", "parameters", "measured", "bound", "pass", "runtime_ms"]


@dataclass
class ReportRow:
    """One numeric check.  Inequality rows pass iff measured ≤ bound(1+rtol) + atol."""

    scenario: str
    check: str
    parameters: str
    measured: float
    bound: float
    passed: bool
    runtime_ms: float = 0.0

    @classmethod
    def inequality(cls, check: str, measured: float, bound: float, rtol: float = 0.0,
                   atol: float = 0.0, parameters: str = "", scenario: str = "") -> "ReportRow":
        ok = measured <= bound + rtol * abs(bound) + atol
        return cls(scenario, check, parameters, float(measured), float(bound), bool(ok))

    def cells(self, runtime: bool = True) -> list[str]:
        return [self.scenario, self.check, self.parameters, f"{self.measured:.17g}",
                f"{self.bound:.17g}", "pass" if self.passed else "fail",
                f"{self.runtime_ms:.3f}" if runtime else ""]


def rows_to_csv(rows, runtime: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_HEADER)
    for r in rows:
        writer.writerow(r.cells(runtime))
    return buf.getvalue()
