"""JSONL loaders for ground truth and runs, and deterministic report writers.

Ground truth, one record per line::

    {"query_id": "q1", "start": 0.0, "end": 2.5, "duration": 30.0}

Runs, one record per line (``score`` optional)::

    {"query_id": "q1", "moments": [{"start": 0.0, "end": 2.4, "score": 0.9}]}
"""

from __future__ import annotations

import csv
import io as _stdio
import json
import math
import os
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import asdict, dataclass, field, is_dataclass
from enum import Enum
from pathlib import Path

from .errors import DuplicateKey, InvalidInput, InvalidInterval, MissingAnnotation, ParseError
from .measures import GroundTruth, Interval, RankedList, Run

REPORT_FORMATS = ("json", "csv")


@dataclass(frozen=True)
class DatasetBundle:
    """Ground truth plus runs.  ``query_ids`` restricts evaluation when set."""

    gt: GroundTruth
    runs: tuple[Run, ...]
    metadata: dict[str, str] = field(default_factory=dict)
    query_ids: tuple[str, ...] | None = None

    def run(self, system_id: str) -> Run:
        for r in self.runs:
            if r.system_id == system_id:
                return r
        raise KeyError(system_id)

    @property
    def system_ids(self) -> tuple[str, ...]:
        return tuple(r.system_id for r in self.runs)


# ---------------------------------------------------------------------------
# reading
# ---------------------------------------------------------------------------


def _records(path) -> Iterator[tuple[int, dict]]:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ParseError(path, lineno, "record must be a JSON object")
            yield lineno, obj


def _number(obj: dict, key: str, path, lineno: int, required: bool = True) -> float | None:
    if key not in obj:
        if required:
            raise ParseError(path, lineno, f"missing field {key!r}")
        return None
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(path, lineno, f"field {key!r} must be a number")
    if not math.isfinite(value):
        raise ParseError(path, lineno, f"field {key!r} must be finite")
    return float(value)


def _query_id(obj: dict, path, lineno: int) -> str:
    qid = obj.get("query_id")
    if not isinstance(qid, str) or not qid:
        raise ParseError(path, lineno, "missing or non-string 'query_id'")
    return qid


def load_ground_truth(path) -> GroundTruth:
    entries: dict[str, Interval] = {}
    durations: dict[str, float] = {}
    for lineno, obj in _records(path):
        qid = _query_id(obj, path, lineno)
        start = _number(obj, "start", path, lineno)
        end = _number(obj, "end", path, lineno)
        duration = _number(obj, "duration", path, lineno, required=False)
        if qid in entries:
            raise DuplicateKey(qid, f"{path}:{lineno}")
        if end < start:
            raise InvalidInterval(f"{path}:{lineno}: end {end} < start {start}", qid)
        entries[qid] = Interval(start, end)
        if duration is not None:
            if not duration > 0:
                raise ParseError(path, lineno, "duration must be > 0")
            durations[qid] = duration
    return GroundTruth(entries, durations)


def load_run(path, system_id: str | None = None) -> Run:
    """Load a run; the system id defaults to the file stem.

    Moments keep file order unless the line carries scores, in which case
    they are sorted by descending score with file order breaking ties.
    """
    lists: dict[str, RankedList] = {}
    for lineno, obj in _records(path):
        qid = _query_id(obj, path, lineno)
        if qid in lists:
            raise DuplicateKey(qid, f"{path}:{lineno}")
        raw = obj.get("moments")
        if not isinstance(raw, list):
            raise ParseError(path, lineno, "'moments' must be a list")
        moments, scores = [], []
        for m in raw:
            if not isinstance(m, dict):
                raise ParseError(path, lineno, "each moment must be an object")
            start = _number(m, "start", path, lineno)
            end = _number(m, "end", path, lineno)
            if end < start:
                raise InvalidInterval(f"{path}:{lineno}: moment end {end} < start {start}", qid)
            moments.append(Interval(start, end))
            scores.append(_number(m, "score", path, lineno, required=False))
        scored = [s is not None for s in scores]
        if any(scored) and not all(scored):
            raise ParseError(path, lineno, "either every moment has a score or none does")
        if any(scored):
            order = sorted(range(len(moments)), key=lambda i: -scores[i])  # stable
            moments = [moments[i] for i in order]
        lists[qid] = RankedList(qid, tuple(moments))
    return Run(system_id if system_id is not None else Path(path).stem, lists)


def load_bundle(gt_path, run_paths: Sequence, strict: bool = True) -> DatasetBundle:
    """Load ground truth and runs and check query coverage.

    Every run query must be annotated.  Strict mode also requires every
    annotated query to appear in every run; lenient mode evaluates the
    queries common to all runs and records the coverage in ``metadata``.
    """
    gt = load_ground_truth(gt_path)
    runs = [load_run(p) for p in run_paths]
    if not runs:
        raise InvalidInput("at least one run is required")
    seen: set[str] = set()
    for r in runs:
        if r.system_id in seen:
            raise DuplicateKey(r.system_id, "system id")
        seen.add(r.system_id)
        for qid in r.query_ids:
            if qid not in gt:
                raise MissingAnnotation(qid)
    common = [q for q in gt.query_ids if all(q in r.lists for r in runs)]
    if strict and len(common) != len(gt):
        missing = next(q for q in gt.query_ids if q not in common)
        raise InvalidInput(
            f"strict mode: {len(gt) - len(common)} annotated queries lack a ranked list "
            f"in some run (first: {missing!r})"
        )
    metadata = {
        "ground_truth": str(gt_path),
        "coverage": repr(len(common) / len(gt)) if len(gt) else "0.0",
        "strict": "true" if strict else "false",
    }
    return DatasetBundle(gt, tuple(runs), metadata, None if strict else tuple(common))


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------


def _write_text(path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=False, ensure_ascii=False, allow_nan=True)


def write_ground_truth(gt: GroundTruth, path) -> None:
    lines = []
    for qid in gt.query_ids:
        iv = gt[qid]
        rec = {"query_id": qid, "start": iv.start, "end": iv.end}
        if qid in gt.durations:
            rec["duration"] = float(gt.durations[qid])
        lines.append(_dumps(rec))
    _write_text(path, "".join(line + "\n" for line in lines))


def write_run(run: Run, path) -> None:
    """Moments are written in rank order without scores."""
    lines = []
    for qid in run.query_ids:
        moments = [{"start": m.start, "end": m.end} for m in run.lists[qid].moments]
        lines.append(_dumps({"query_id": qid, "moments": moments}))
    _write_text(path, "".join(line + "\n" for line in lines))


def _plain(obj):
    """Reduce reports to JSON-ready builtins."""
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalar
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def report_rows(report) -> list[dict]:
    """Flat rows for CSV output.  Sequences of reports are concatenated."""
    if hasattr(report, "to_rows"):
        return list(report.to_rows())
    if hasattr(report, "to_row"):
        return [report.to_row()]
    if isinstance(report, (list, tuple)):
        return [row for item in report for row in report_rows(item)]
    plain = _plain(report)
    if isinstance(plain, dict):
        return [plain]
    raise InvalidInput(f"cannot tabulate {type(report).__name__}")


def _cell(value) -> str:
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (dict, list)):
        return _dumps(value)
    return str(value)


def render_report(report, format: str = "json") -> str:
    if format == "json":
        return json.dumps(_plain(report), indent=2, ensure_ascii=False) + "\n"
    if format == "csv":
        rows = report_rows(report)
        columns: list[str] = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
        buf = _stdio.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
        return buf.getvalue()
    raise InvalidInput(f"unknown report format {format!r}; expected one of {REPORT_FORMATS}")


def write_report(report, path, format: str | None = None) -> None:
    """Write a report as JSON or CSV; the format defaults to the file suffix."""
    if format is None:
        format = "csv" if os.fspath(path).endswith(".csv") else "json"
    _write_text(path, render_report(report, format))
