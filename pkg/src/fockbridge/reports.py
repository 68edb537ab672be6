"""Equivalence reports and their JSON / CSV forms."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

CSV_COLUMNS = [
    "experiment", "check", "expectation", "lhs_re", "lhs_im", "rhs_re", "rhs_im",
    "abs_gap", "rel_gap", "tol_numerical", "tol_truncation", "tol_monte_carlo",
    "tolerance", "passed", "seed",
]


@dataclass
class EquivalenceReport:
    """Operator-side value ``lhs`` against classical-side value ``rhs``.

    The tolerance is layered: numerical (float / integrator / stated floor),
    truncation tail, Monte Carlo.  ``expectation`` decides what passing means:

    * ``"equal"``: ``abs_gap <= tolerance``
    * ``"differ"``: ``abs_gap > 10 * tolerance`` (a gap must be resolved)
    * ``"report"``: always passes; the numbers are the deliverable
    """

    check: str
    lhs: complex
    rhs: complex
    tol_numerical: float = 0.0
    tol_truncation: float = 0.0
    tol_monte_carlo: float = 0.0
    expectation: str = "equal"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.expectation not in ("equal", "differ", "report"):
            raise ValueError(f"unknown expectation {self.expectation!r}")
        self.lhs = complex(self.lhs)
        self.rhs = complex(self.rhs)

    @property
    def abs_gap(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel_gap(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return self.abs_gap / scale if scale > 0 else 0.0

    @property
    def truncation_estimate(self) -> float:
        return self.tol_truncation

    @property
    def tolerance(self) -> float:
        return self.tol_numerical + self.tol_truncation + self.tol_monte_carlo

    @property
    def passed(self) -> bool:
        if self.expectation == "equal":
            return self.abs_gap <= self.tolerance
        if self.expectation == "differ":
            return self.abs_gap > 10.0 * self.tolerance
        return True

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "expectation": self.expectation,
            "lhs": {"re": _num(self.lhs.real), "im": _num(self.lhs.imag)},
            "rhs": {"re": _num(self.rhs.real), "im": _num(self.rhs.imag)},
            "abs_gap": _num(self.abs_gap),
            "rel_gap": _num(self.rel_gap),
            "tolerances": {
                "numerical": _num(self.tol_numerical),
                "truncation": _num(self.tol_truncation),
                "monte_carlo": _num(self.tol_monte_carlo),
                "total": _num(self.tolerance),
            },
            "passed": self.passed,
            "metadata": self.metadata,
        }

    def summary_line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.check}: gap={self.abs_gap:.3e} "
                f"tol={self.tolerance:.3e} ({self.expectation})")


def _num(x: float):
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return x


def experiment_record(name: str, kind: str, reports: list[EquivalenceReport], *,
                      basis: dict | None, seed, timestamp: str, extra: dict | None = None) -> dict:
    """JSON body for one experiment; ``timestamp`` is the only run-dependent field."""
    return {
        "experiment": name,
        "kind": kind,
        "seed": seed,
        "basis": basis,
        "passed": all(r.passed for r in reports),
        "checks": [r.to_dict() for r in reports],
        "extra": extra or {},
        "timestamp": timestamp,
    }


def dumps_record(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def csv_rows(name: str, seed, reports: list[EquivalenceReport]) -> list[list]:
    rows = []
    for r in reports:
        rows.append([
            name, r.check, r.expectation, repr(r.lhs.real), repr(r.lhs.imag),
            repr(r.rhs.real), repr(r.rhs.imag), repr(r.abs_gap), repr(r.rel_gap),
            repr(r.tol_numerical), repr(r.tol_truncation), repr(r.tol_monte_carlo),
            repr(r.tolerance), "1" if r.passed else "0", "" if seed is None else str(seed),
        ])
    return rows


def append_csv(path: str, rows: list[list]) -> None:
    """Append rows, writing the header first if the file is new or empty."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(CSV_COLUMNS)
        w.writerows(rows)


def rows_to_csv(rows: list[list], columns: list[str] = CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()
