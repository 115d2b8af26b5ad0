"""Report aggregation in the layout of the tool IoU and articulated success tables.

Both report types are grids of cells keyed by a row label and a
``(split, group)`` column. A cell keeps its raw accumulators (count, sum,
missing) so that the rendered mean is always ``total / n`` and can be
recomputed from the inputs without trusting the aggregation code.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import ManipulationType, RotatedBox2D, SceneSample
from .datagen.catalog import ARTICULATED_CATEGORIES, TOOL_CATEGORIES
from .errors import AffordkitError
from .geometry import rotated_iou, to_axis_aligned
from .manip import EpisodeLog
from .vqa import AnswerError, Prediction, VqaTaskKind, format_answer, ground_truth, parse_answer, task_targets

DECIMALS = 3
NA = "n/a"
EVAL_SPLITS = ("unseen_instance", "unseen_category")
SPLIT_LABELS = {"train": "Train", "unseen_instance": "Unseen Instances", "unseen_category": "Unseen Categories"}

TOOL_ABBREVIATIONS = {
    "spatula": "Sl", "spoon": "Sp", "knife": "Kf", "razor": "Ra", "power drill": "Pd", "hair dryer": "Hd",
    "hammer": "Ha", "brush": "Br", "screwdriver": "Sd", "flower shovel": "Fs", "ladle": "Ld", "fork": "Fr",
}
TABLE_II_COLUMNS: tuple[tuple[str, str], ...] = tuple(
    [("unseen_instance", c) for c in ("spatula", "spoon", "knife", "razor", "power drill", "hair dryer",
                                      "hammer", "brush", "screwdriver")]
    + [("unseen_category", c) for c in ("flower shovel", "ladle", "fork")]
)
TABLE_III_COLUMNS: tuple[tuple[str, ManipulationType], ...] = (
    ("unseen_instance", ManipulationType.BOTTLE_CAP),
    ("unseen_instance", ManipulationType.SLIDING_LID),
    ("unseen_instance", ManipulationType.REVOLUTE_PART),
    ("unseen_instance", ManipulationType.PRISMATIC_PART),
    ("unseen_category", ManipulationType.SLIDING_LID),
    ("unseen_category", ManipulationType.REVOLUTE_PART),
    ("unseen_category", ManipulationType.PRISMATIC_PART),
)
TOOL_SUCCESS_COLUMNS: tuple[tuple[str, ManipulationType], ...] = (
    ("unseen_instance", ManipulationType.FREEDOM_OBJECT),
    ("unseen_category", ManipulationType.FREEDOM_OBJECT),
)


class UnmatchedPrediction(AffordkitError):
    """A prediction whose (scene_id, task, part_id) has no ground truth."""


class IouTask(str, Enum):
    GRASP = "Grasp"
    FUNCTION = "Function"
    PART_BOX = "PartBox"


_TASK_OF = {VqaTaskKind.GRASP_AFFORDANCE_2D: IouTask.GRASP, VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D: IouTask.FUNCTION}

Key = tuple[str, VqaTaskKind, "str | None"]


def fmt(value: float | None) -> str:
    """Fixed three-decimal rendering shared by the text and CSV outputs."""
    if value is None:
        return NA
    s = f"{value:.{DECIMALS}f}"
    return "0.000" if s == "-0.000" else s


def column_label(col: tuple[str, object]) -> str:
    split, group = col
    if isinstance(group, ManipulationType):
        name = group.label.title()
    else:
        name = TOOL_ABBREVIATIONS.get(group, group)
    return name


# --------------------------------------------------------------------------
# IoU


@dataclass
class IouCell:
    n: int = 0
    total: float = 0.0
    missing: int = 0

    def add(self, score: float, missing: bool = False) -> None:
        self.n += 1
        self.total += score
        self.missing += int(missing)

    @property
    def mean(self) -> float | None:
        return self.total / self.n if self.n else None


@dataclass
class IouReport:
    """Mean IoU per (row, column) plus an AVG per row.

    ``weighting="category"`` makes AVG the plain mean of the non-empty column
    means. ``weighting="sample"`` pools every scored instance of the row.
    """

    rows: tuple[IouTask, ...]
    columns: tuple[tuple[str, str], ...]
    cells: dict[tuple[IouTask, tuple[str, str]], IouCell]
    weighting: str = "category"
    missing_mode: str = "zero"
    box_mode: str = "rotated"
    unmatched: list[Key] = field(default_factory=list)
    unparseable: int = 0
    extra_boxes: int = 0

    def cell(self, row: IouTask, col) -> IouCell:
        return self.cells.get((row, col), IouCell())

    def mean(self, row: IouTask, col) -> float | None:
        return self.cell(row, col).mean

    def avg(self, row: IouTask) -> float | None:
        cells = [self.cell(row, c) for c in self.columns]
        if self.weighting == "sample":
            n = sum(c.n for c in cells)
            return sum(c.total for c in cells) / n if n else None
        means = [c.mean for c in cells if c.mean is not None]
        return sum(means) / len(means) if means else None

    @property
    def missing(self) -> int:
        return sum(c.missing for c in self.cells.values())

    def grid(self) -> tuple[list[str], list[list[str]]]:
        header = ["Task"] + [column_label(c) for c in self.columns] + ["AVG"]
        body = []
        for r in self.rows:
            body.append([r.value] + [fmt(self.mean(r, c)) for c in self.columns] + [fmt(self.avg(r))])
        for r in self.rows:
            body.append([f"{r.value} n"] + [str(self.cell(r, c).n) for c in self.columns]
                        + [str(sum(self.cell(r, c).n for c in self.columns))])
        return header, body

    def to_dict(self) -> dict:
        return {
            "weighting": self.weighting,
            "missing_mode": self.missing_mode,
            "box_mode": self.box_mode,
            "columns": [[s, g] for s, g in self.columns],
            "rows": {
                r.value: {
                    "cells": [{"split": s, "category": g, "n": self.cell(r, (s, g)).n,
                               "missing": self.cell(r, (s, g)).missing, "total": self.cell(r, (s, g)).total,
                               "mean": _round(self.mean(r, (s, g)))} for s, g in self.columns],
                    "avg": _round(self.avg(r)),
                }
                for r in self.rows
            },
            "missing": self.missing,
            "unparseable": self.unparseable,
            "extra_boxes": self.extra_boxes,
            "unmatched": [[k[0], VqaTaskKind(k[1]).value, k[2]] for k in self.unmatched],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IouReport":
        cols = tuple((s, g) for s, g in d["columns"])
        rows = tuple(IouTask(r) for r in d["rows"])
        cells = {}
        for r in rows:
            for c in d["rows"][r.value]["cells"]:
                if c["n"]:
                    cells[(r, (c["split"], c["category"]))] = IouCell(c["n"], c["total"], c["missing"])
        return cls(rows, cols, cells, d["weighting"], d["missing_mode"], d["box_mode"],
                   [(k[0], VqaTaskKind(k[1]), k[2]) for k in d["unmatched"]], d["unparseable"], d["extra_boxes"])


def _round(x: float | None) -> float | None:
    return None if x is None else round(x, DECIMALS)


def axis_aligned_iou(a: RotatedBox2D, b: RotatedBox2D) -> float:
    """IoU of the axis-aligned hulls of two rotated boxes."""
    p, q = to_axis_aligned(a), to_axis_aligned(b)
    w = min(p.x_max, q.x_max) - max(p.x_min, q.x_min)
    h = min(p.y_max, q.y_max) - max(p.y_min, q.y_min)
    inter = max(0.0, w) * max(0.0, h)
    union = p.area + q.area - inter
    return inter / union if union > 0 else 0.0


def _quantized_truth(sample: SceneSample, task: VqaTaskKind, part) -> Prediction:
    """Ground truth at the precision a model can express: through the answer text."""
    return parse_answer(format_answer(ground_truth(sample, task, part)), task)


def greedy_match(pred: Sequence[RotatedBox2D], truth: Sequence[RotatedBox2D], iou=rotated_iou) -> list[float]:
    """Best IoU per ground-truth box under one-to-one greedy matching.

    Pairs are taken in decreasing IoU order (ties by truth then prediction
    index); truth boxes left without a positive-overlap partner score 0.
    """
    scores = [0.0] * len(truth)
    if not pred or not truth:
        return scores
    m = np.array([[iou(p, t) for p in pred] for t in truth])
    pairs = sorted(((-m[i, j], i, j) for i in range(len(truth)) for j in range(len(pred)) if m[i, j] > 0))
    used_t, used_p = set(), set()
    for neg, i, j in pairs:
        if i in used_t or j in used_p:
            continue
        used_t.add(i)
        used_p.add(j)
        scores[i] = -neg
    return scores


def _default_columns(samples: Sequence[SceneSample], kind: str, splits) -> tuple[tuple[str, str], ...]:
    present = {(s.split, o.category) for s in samples for o in s.objects if s.split in splits}
    if kind == "tools":
        order = [c for c in TABLE_II_COLUMNS if c in present]
        rest = sorted(present - set(order), key=lambda c: (splits.index(c[0]), TOOL_CATEGORIES.index(c[1])
                                                           if c[1] in TOOL_CATEGORIES else 99, c[1]))
        return tuple(order + rest)
    return tuple(sorted(present, key=lambda c: (splits.index(c[0]), ARTICULATED_CATEGORIES.index(c[1])
                                                if c[1] in ARTICULATED_CATEGORIES else 99, c[1])))


def _is_kind(sample: SceneSample, kind: str) -> bool:
    tools = any(p.manipulation_type is ManipulationType.FREEDOM_OBJECT for _, p in sample.iter_parts())
    return tools if kind == "tools" else not tools


def iou_table(predictions: Mapping[Key, Prediction | AnswerError], samples: Sequence[SceneSample],
              kind: str = "tools", *, weighting: str = "category", missing: str = "zero",
              box_mode: str = "rotated", splits: Sequence[str] = EVAL_SPLITS,
              columns: Sequence[tuple[str, str]] | None = None, strict: bool = False) -> IouReport:
    """Per-category mean IoU of grasp, functional and part boxes.

    ``predictions`` is the decoded answer map from :func:`affordkit.pipeline.decode`.
    A target with no prediction, or whose answer failed to parse, scores 0
    (``missing="zero"``) or is left out (``missing="exclude"``). Predictions
    for keys that have no ground truth are listed in ``unmatched`` and kept
    out of every mean; ``strict=True`` raises :class:`UnmatchedPrediction`
    instead.
    """
    if weighting not in ("category", "sample"):
        raise ValueError(f"weighting must be 'category' or 'sample', got {weighting!r}")
    if missing not in ("zero", "exclude"):
        raise ValueError(f"missing must be 'zero' or 'exclude', got {missing!r}")
    if box_mode not in ("rotated", "axis_aligned"):
        raise ValueError(f"box_mode must be 'rotated' or 'axis_aligned', got {box_mode!r}")
    if kind not in ("tools", "articulated"):
        raise ValueError(f"kind must be 'tools' or 'articulated', got {kind!r}")
    iou = rotated_iou if box_mode == "rotated" else axis_aligned_iou
    splits = tuple(splits)
    chosen = [s for s in samples if s.split in splits and _is_kind(s, kind)]
    cols = tuple(columns) if columns is not None else _default_columns(chosen, kind, splits)
    rows = (IouTask.GRASP, IouTask.FUNCTION, IouTask.PART_BOX) if kind == "tools" else (IouTask.GRASP, IouTask.PART_BOX)
    report = IouReport(rows, cols, {}, weighting, missing, box_mode)

    def score(row: IouTask, col, value: float | None) -> None:
        if col not in cols:
            return
        if value is None:
            if missing == "zero":
                report.cells.setdefault((row, col), IouCell()).add(0.0, missing=True)
            return
        report.cells.setdefault((row, col), IouCell()).add(value)

    for s in chosen:
        key = (s.scene_id, VqaTaskKind.PART_DETECTION_2D, None)
        truth = _quantized_truth(s, VqaTaskKind.PART_DETECTION_2D, None).boxes
        owners = [(s.split, o.category) for o, _ in s.iter_parts()]
        pred = predictions.get(key)
        if isinstance(pred, Prediction):
            matched = greedy_match(pred.boxes, truth, iou)
            report.extra_boxes += max(0, len(pred.boxes) - len(truth))
            for col, v in zip(owners, matched):
                score(IouTask.PART_BOX, col, v)
        else:
            report.unparseable += isinstance(pred, AnswerError)
            for col in owners:
                score(IouTask.PART_BOX, col, None)
        for obj, part in s.iter_parts():
            col = (s.split, obj.category)
            for task in (VqaTaskKind.GRASP_AFFORDANCE_2D, VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D):
                if _TASK_OF[task] not in rows:
                    continue
                if task is VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D and part.functional_box is None:
                    continue
                key = (s.scene_id, task, part.part_id)
                pred = predictions.get(key)
                if isinstance(pred, Prediction) and pred.box is not None:
                    score(_TASK_OF[task], col, iou(pred.box, _quantized_truth(s, task, part).box))
                else:
                    report.unparseable += isinstance(pred, AnswerError)
                    score(_TASK_OF[task], col, None)
    truth_keys = {(s.scene_id, t, pid) for s in samples for t, pid in task_targets(s)}
    report.unmatched = sorted((k for k in predictions if k not in truth_keys),
                              key=lambda k: (k[0], VqaTaskKind(k[1]).value, k[2] or ""))
    if strict and report.unmatched:
        raise UnmatchedPrediction(f"{len(report.unmatched)} predictions have no ground truth, "
                                  f"first {report.unmatched[0]}")
    return report


# --------------------------------------------------------------------------
# success


@dataclass
class SuccessCell:
    episodes: int = 0
    successes: int = 0

    @property
    def rate(self) -> float | None:
        """``successes / episodes``; ``None`` for an empty cell (rendered n/a)."""
        return self.successes / self.episodes if self.episodes else None


@dataclass
class SuccessReport:
    rows: tuple[str, ...]
    columns: tuple[tuple[str, ManipulationType], ...]
    cells: dict[tuple[str, tuple[str, ManipulationType]], SuccessCell]
    excluded: int = 0

    def cell(self, row: str, col) -> SuccessCell:
        return self.cells.get((row, col), SuccessCell())

    def rate(self, row: str, col) -> float | None:
        return self.cell(row, col).rate

    def grid(self) -> tuple[list[str], list[list[str]]]:
        header = ["Method"] + [column_label(c) for c in self.columns]
        body = [[r] + [fmt(self.rate(r, c)) for c in self.columns] for r in self.rows]
        body += [[f"{r} n"] + [str(self.cell(r, c).episodes) for c in self.columns] for r in self.rows]
        return header, body

    def to_dict(self) -> dict:
        return {
            "columns": [[s, t.value] for s, t in self.columns],
            "rows": {
                r: [{"split": s, "type": t.value, "episodes": self.cell(r, (s, t)).episodes,
                     "successes": self.cell(r, (s, t)).successes, "rate": _round(self.rate(r, (s, t)))}
                    for s, t in self.columns]
                for r in self.rows
            },
            "excluded": self.excluded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SuccessReport":
        cols = tuple((s, ManipulationType(t)) for s, t in d["columns"])
        cells = {}
        for r, entries in d["rows"].items():
            for c in entries:
                if c["episodes"]:
                    cells[(r, (c["split"], ManipulationType(c["type"])))] = SuccessCell(c["episodes"], c["successes"])
        return cls(tuple(d["rows"]), cols, cells, d["excluded"])


def success_table(logs: Iterable[EpisodeLog] | Mapping[str, Iterable[EpisodeLog]],
                  columns: Sequence[tuple[str, ManipulationType]] = TABLE_III_COLUMNS,
                  label: str = "oracle") -> SuccessReport:
    """Success rates per (split, manipulation type), one row per method.

    ``logs`` is either one run (rendered under ``label``) or a mapping from
    row label to run. Episodes that fall outside ``columns`` are counted in
    ``excluded``; a column with no episodes renders as n/a.
    """
    runs = dict(logs) if isinstance(logs, Mapping) else {label: logs}
    cols = tuple(columns)
    colset = set(cols)
    report = SuccessReport(tuple(runs), cols, {})
    for row, run in runs.items():
        for log in run:
            col = (log.split, ManipulationType(log.task_type))
            if col not in colset:
                report.excluded += 1
                continue
            c = report.cells.setdefault((row, col), SuccessCell())
            c.episodes += 1
            c.successes += int(bool(log.success))
    return report


# --------------------------------------------------------------------------
# rendering


def _split_groups(columns) -> list[tuple[str, int, int]]:
    """Runs of consecutive columns sharing a split: (split, start, stop)."""
    out = []
    for i, (split, _) in enumerate(columns):
        if out and out[-1][0] == split:
            out[-1] = (split, out[-1][1], i + 1)
        else:
            out.append((split, i, i + 1))
    return out


def render_text(report: IouReport | SuccessReport, title: str = "") -> str:
    """Aligned plain-text table with a split banner over the columns."""
    header, body = report.grid()
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    groups = _split_groups(report.columns)
    for split, i, j in groups:
        label = SPLIT_LABELS.get(split, split)
        span = sum(widths[1 + i:1 + j]) + 2 * (j - i - 1)
        if span < len(label):
            widths[j] += len(label) - span
    banner = [" " * widths[0]]
    for split, i, j in groups:
        span = sum(widths[1 + i:1 + j]) + 2 * (j - i - 1)
        banner.append(SPLIT_LABELS.get(split, split).center(span))
    lines = [title] if title else []
    lines.append("  ".join(banner).rstrip())
    for row in [header] + body:
        cells = [row[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    if isinstance(report, IouReport):
        lines.append(f"missing={report.missing} unparseable={report.unparseable} "
                     f"unmatched={len(report.unmatched)} extra_boxes={report.extra_boxes} "
                     f"weighting={report.weighting} missing_mode={report.missing_mode} box_mode={report.box_mode}")
        for k in report.unmatched:
            lines.append(f"unmatched: {k[0]} {VqaTaskKind(k[1]).value} {k[2] or '-'}")
    else:
        lines.append(f"excluded={report.excluded}")
    return "\n".join(lines) + "\n"


def render_csv(report: IouReport | SuccessReport) -> str:
    """CSV with the same header and cell strings as :func:`render_text`."""
    header, body = report.grid()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    tail = [""] * (len(header) - 1 - len(report.columns))
    w.writerow(["split"] + [c[0] for c in report.columns] + tail)
    w.writerow(header)
    w.writerows(body)
    return buf.getvalue()


def report_json(reports: Mapping[str, IouReport | SuccessReport]) -> str:
    """Machine-readable evaluation output with the report type recorded per entry."""
    body = {k: {"type": "iou" if isinstance(r, IouReport) else "success", **r.to_dict()} for k, r in reports.items()}
    return json.dumps(body, indent=2) + "\n"


def reports_from_json(text: str) -> dict[str, IouReport | SuccessReport]:
    out: dict[str, IouReport | SuccessReport] = {}
    for k, d in json.loads(text).items():
        out[k] = (IouReport if d["type"] == "iou" else SuccessReport).from_dict(d)
    return out
