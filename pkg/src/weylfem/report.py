"""Verification report container with CSV and JSON emitters."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any, TextIO

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"


def _fmt(value: Any) -> str:
    if hasattr(value, "item") and not isinstance(value, (bool, int, str)):  # numpy scalar
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _jsonable(value: Any) -> Any:
    if hasattr(value, "item") and not isinstance(value, (list, dict, str)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


@dataclass
class VerificationReport:
    """Rows of one check with a per-row status and measured constants.

    Every row has a ``status`` entry that is ``"pass"``, ``"fail"`` or starts
    with ``"skipped"``.  The overall status passes iff no row fails.
    """

    check: str
    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)
    constants: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)

    def add(self, status: str | bool, **values) -> dict[str, Any]:
        if not isinstance(status, str):
            status = PASS if bool(status) else FAIL
        row = dict(values, status=status)
        self.rows.append(row)
        return row

    @property
    def passed(self) -> bool:
        return all(r["status"] != FAIL for r in self.rows)

    @property
    def overall(self) -> str:
        return PASS if self.passed else FAIL

    @property
    def failures(self) -> list[dict[str, Any]]:
        return [r for r in self.rows if r["status"] == FAIL]

    def write_csv(self, fh: TextIO) -> None:
        """Provenance and constants as leading ``# key = value`` lines, then the rows."""
        fh.write(f"# check = {self.check}\n")
        for key, value in self.provenance.items():
            fh.write(f"# {key} = {_fmt(value)}\n")
        for key, value in self.constants.items():
            fh.write(f"# {key} = {_fmt(value)}\n")
        fh.write(f"# overall = {self.overall}\n")
        writer = csv.writer(fh, lineterminator="\n")
        header = list(self.columns) + ["status"]
        writer.writerow(header)
        for row in self.rows:
            writer.writerow([_fmt(row.get(c, "")) for c in header])

    def to_dict(self) -> dict[str, Any]:
        header = list(self.columns) + ["status"]
        return {
            "metadata": _jsonable(
                {
                    "check": self.check,
                    "overall": self.overall,
                    "constants": self.constants,
                    "provenance": self.provenance,
                }
            ),
            "rows": [_jsonable({c: row.get(c, "") for c in header}) for row in self.rows],
        }

    def write_json(self, fh: TextIO) -> None:
        json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
        fh.write("\n")

    def summary(self) -> str:
        n_fail = len(self.failures)
        n_skip = sum(1 for r in self.rows if str(r["status"]).startswith(SKIPPED))
        return (
            f"{self.check}: {self.overall} ({len(self.rows)} rows, {n_fail} failed, "
            f"{n_skip} skipped)"
        )
