"""MetricReport: one named metric value with its context, serializable to JSON/CSV."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class MetricReport:
    metric: str
    value: float
    feature: str | None = None
    group: str | None = None
    condition: str | None = None
    sd: float | None = None
    provenance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"metric": self.metric, "value": self.value}
        for key in ("feature", "group", "condition", "sd"):
            v = getattr(self, key)
            if v is not None:
                out[key] = v
        if self.provenance:
            out["provenance"] = self.provenance
        if self.details:
            out["details"] = self.details
        return out


def reports_to_json(reports, path=None) -> str:
    text = json.dumps([r.to_json() for r in reports], sort_keys=True, indent=1)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def reports_to_csv(reports, path) -> None:
    cols = ["metric", "value", "feature", "group", "condition", "sd"]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for r in reports:
            writer.writerow([getattr(r, c) if getattr(r, c) is not None else "" for c in cols])
