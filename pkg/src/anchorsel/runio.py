"""Run directory artifacts: result logs, summaries, and run manifests.

The per-sample result log is line-delimited JSON with sorted keys and no
timestamps, so identical runs produce byte-identical logs. The summary
and manifest are allowed to carry wall-clock data; determinism claims
apply to the result log only.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from .bundle import bundle_checksum
from .config import AdaptationConfig
from .engine import RunSummary, SampleResult

RESULT_LOG = "results.jsonl"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "run_manifest.json"


def result_record(result: SampleResult) -> dict:
    rec = asdict(result)
    rec["selected_text"] = list(result.selected_text)
    rec["selected_image"] = list(result.selected_image)
    rec["selected_union"] = list(result.selected_union)
    rec["source_weight_means"] = list(result.source_weight_means)
    return rec


def write_result_log(directory: str | Path, results: list[SampleResult]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RESULT_LOG
    with path.open("w") as fh:
        for r in results:
            fh.write(json.dumps(result_record(r), sort_keys=True))
            fh.write("\n")
    return path


def read_result_log(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_summary(directory: str | Path, summary: RunSummary) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / SUMMARY_FILE
    path.write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def write_run_manifest(
    directory: str | Path,
    config: AdaptationConfig,
    bundle_path: str | Path,
    extra: dict | None = None,
) -> Path:
    """Everything needed to replay the run: resolved config, the bundle's
    identifying checksum, code version, and seeds."""
    from . import __version__

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {
        "config": config.to_dict(),
        "bundle": str(bundle_path),
        "bundle_checksum": bundle_checksum(bundle_path),
        "code_version": __version__,
        "seeds": {"config": config.seed, "encoder": config.seed},
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        doc.update(extra)
    path = directory / MANIFEST_FILE
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def format_summary_table(summaries: list[RunSummary]) -> str:
    """Aligned text table over one or more method summaries."""
    headers = ("method", "samples", "accuracy", "zero-shot", "precision", "recall", "mean loss")
    rows = []
    for s in summaries:
        rows.append(
            (
                s.method,
                str(s.num_samples),
                _fmt(s.accuracy),
                _fmt(s.zero_shot_accuracy),
                _fmt(s.selection_precision),
                _fmt(s.selection_recall),
                f"{s.mean_loss:.4f}",
            )
        )
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"
