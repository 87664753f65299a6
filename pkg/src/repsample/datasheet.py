"""Datasheet emitter: documents a sampling run in three sections (purpose,
sampling methodology, evaluation), auto-filled from run artifacts.

The methodology section names the representativity concept each sampler
serves: proportional stratified and simple random draws aim at reflection
(mimicking the population distribution), density-weighted and k-DPP draws at
coverage (spanning the population's heterogeneity).
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError

SAMPLER_CONCEPT = {
    "srs": "reflection",
    "stratified": "reflection",
    "density": "coverage",
    "kdpp": "coverage",
}

_DEFAULT_PURPOSE = "(no purpose statement supplied; add one with --purpose or a 'purpose' field)"


def _sample_entries(run: dict) -> list[dict]:
    if "samples" in run:
        entries = []
        for item in run["samples"]:
            if "provenance" in item:
                entries.append({"condition": item.get("condition"), **item["provenance"]})
        return entries
    if "provenance" in run:  # a bare sample.json
        return [dict(run["provenance"])]
    return []


def _metric_lines(run: dict) -> list[str]:
    lines = []
    for rep in run.get("summary", []):
        ctx = []
        if rep.get("condition"):
            ctx.append(f"condition={rep['condition']}")
        if rep.get("feature"):
            ctx.append(f"feature={rep['feature']}")
        sd = f" (sd {rep['sd']:.6g})" if rep.get("sd") is not None else ""
        ctx_text = f" [{', '.join(ctx)}]" if ctx else ""
        lines.append(f"- {rep['metric']}{ctx_text}: {rep['value']:.6g}{sd}")
    for row in run.get("per_state", []):
        lines.append(
            f"- {row['state']}: improvement {row['mean_improvement_pct']:.3g}% "
            f"(sd {row['sd']:.3g}, adjusted p {row['p_adj']:.3g}"
            f"{', significant' if row['significant'] else ', not significant'})"
        )
    if "metrics" in run:
        for rep in run["metrics"]:
            lines.append(f"- {rep['metric']}: {rep['value']:.6g}")
    return lines


def emit_datasheet(run_artifacts: dict, purpose: str | None = None) -> str:
    """Render a markdown datasheet from a run record (cv/ood summary JSON, a
    sample JSON, or an assembled dict with samples + metrics)."""
    entries = _sample_entries(run_artifacts)
    if not entries:
        raise ConfigError("run artifacts contain no sampling provenance")
    purpose_text = purpose or run_artifacts.get("purpose") or _DEFAULT_PURPOSE

    lines = ["# Datasheet", "", "## Purpose", "", purpose_text, ""]
    lines += ["## Sampling methodology", ""]
    for entry in entries:
        name = entry.get("sampler_name", "unknown")
        concept = SAMPLER_CONCEPT.get(name, "unspecified")
        lines.append(f"### Sampler: {name}")
        lines.append("")
        lines.append(f"- Representativity concept: **{concept}**")
        if entry.get("condition") and entry["condition"] != name:
            lines.append(f"- Condition label: {entry['condition']}")
        if "seed" in entry:
            lines.append(f"- Seed: {entry['seed']}")
        for key, value in sorted(entry.get("parameters", {}).items()):
            lines.append(f"- {key}: {value}")
        lines.append("")
    cfg = run_artifacts.get("config")
    if cfg:
        lines.append("Run configuration:")
        lines.append("")
        lines.append("```json")
        lines.append(json.dumps(cfg, sort_keys=True, indent=1))
        lines.append("```")
        lines.append("")
    lines += ["## Evaluation", ""]
    metric_lines = _metric_lines(run_artifacts)
    if metric_lines:
        lines += metric_lines
    else:
        lines.append("No representativity metrics were computed for this run.")
    lines.append("")
    return "\n".join(lines)


def write_datasheet(run_path, out_path, purpose: str | None = None) -> None:
    run = json.loads(Path(run_path).read_text())
    Path(out_path).write_text(emit_datasheet(run, purpose=purpose))
