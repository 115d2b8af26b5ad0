"""Structured VQA text for the four manipulation-understanding tasks.

Each task maps a slice of a part's ψ labels to a canonical answer string and
back. The emitter writes one fixed micro-format (see ``docs/vqa_grammar.md``);
the parser accepts that format plus benign drift such as extra whitespace,
a missing final period, ``()`` versus ``[]`` brackets or a missing ``BBox``
keyword, because real model output wanders.

Numbers are written with 2 decimals for pixels and 4 decimals for meters and
rotation entries. The predictor boundary is text in, text out, so the noisy
oracle and an external model plug into the same pipeline slot.
"""

from __future__ import annotations

import json
import math
import re
import subprocess
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Protocol, Sequence

import numpy as np

from .articulation import axis_angle_matrix
from .core import (
    ARTICULATED_TYPES,
    JointAxis,
    ManipulationType,
    PartAnnotation,
    Pose6D,
    PoseOrAxis,
    RotatedBox2D,
    SceneSample,
    box_from_json,
    box_to_json,
    dumps,
    pose_from_json,
    pose_to_json,
)
from .errors import AffordkitError
from .geometry import transform_box

PX_DECIMALS = 2
POSE_DECIMALS = 4
MAX_ABS_PX = 1e5
MAX_ABS_POSE = 1e3
DEFAULT_MIX = (13, 13, 13, 1)


class VqaTaskKind(str, Enum):
    PART_DETECTION_2D = "PartDetection2D"
    POSE_DETECTION_6D = "PoseDetection6D"
    GRASP_AFFORDANCE_2D = "GraspAffordance2D"
    FUNCTIONAL_AFFORDANCE_2D = "FunctionalAffordance2D"

    @property
    def per_part(self) -> bool:
        return self is not VqaTaskKind.PART_DETECTION_2D


TASKS = tuple(VqaTaskKind)

PROMPTS = {
    VqaTaskKind.PART_DETECTION_2D: "Please detect all manipulable parts and provide their 2D rotated bounding boxes.",
    VqaTaskKind.POSE_DETECTION_6D: "Please detect the manipulation type of the object and provide the 6D pose.",
    VqaTaskKind.GRASP_AFFORDANCE_2D: "Please detect the grasp region of part with BBox {box} and provide the 2D bounding box.",
    VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D: "Please detect the functional region of part with BBox {box} and provide the 2D bounding box.",
}

_REGION_WORD = {VqaTaskKind.GRASP_AFFORDANCE_2D: "grasp", VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D: "functional"}


# --------------------------------------------------------------------------
# errors


class AnswerError(AffordkitError):
    """Base class for every structured parse failure."""


class MalformedAnswer(AnswerError):
    def __init__(self, position: int, expected: str):
        super().__init__(f"at offset {position}: expected {expected}")
        self.position = position
        self.expected = expected


class CountMismatch(AnswerError):
    def __init__(self, stated: int, parsed: int):
        super().__init__(f"answer states {stated} parts but lists {parsed} boxes")
        self.stated = stated
        self.parsed = parsed


class ValueOutOfRange(AnswerError):
    def __init__(self, position: int, value: float, limit: float):
        super().__init__(f"at offset {position}: |{value}| exceeds {limit}")
        self.position = position
        self.value = value


class MissingFunctionalBox(AffordkitError):
    pass


class PredictorFailure(AffordkitError):
    """An external predictor that crashed, timed out or broke the line protocol."""


class MissingTargetPart(AffordkitError):
    pass


# --------------------------------------------------------------------------
# payloads


@dataclass(frozen=True)
class Prediction:
    """Decoded answer of one task: boxes, or a manipulation type with its pose."""

    task: VqaTaskKind
    boxes: tuple[RotatedBox2D, ...] = ()
    manipulation_type: ManipulationType | None = None
    pose: PoseOrAxis | None = None

    def __post_init__(self):
        object.__setattr__(self, "task", VqaTaskKind(self.task))
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if self.manipulation_type is not None:
            object.__setattr__(self, "manipulation_type", ManipulationType(self.manipulation_type))

    @property
    def box(self) -> RotatedBox2D:
        return self.boxes[0]

    def to_json(self) -> dict:
        if self.task is VqaTaskKind.POSE_DETECTION_6D:
            return {"manipulation_type": self.manipulation_type.value, "pose": pose_to_json(self.pose)}
        return {"boxes": [box_to_json(b) for b in self.boxes]}

    @classmethod
    def from_json(cls, task, d: dict) -> "Prediction":
        task = VqaTaskKind(task)
        if task is VqaTaskKind.POSE_DETECTION_6D:
            return cls(task, manipulation_type=ManipulationType(d["manipulation_type"]), pose=pose_from_json(d["pose"]))
        return cls(task, boxes=tuple(box_from_json(b) for b in d["boxes"]))


@dataclass(frozen=True)
class VqaRecord:
    scene_id: str
    task: VqaTaskKind
    prompt: str
    answer: str
    grounding: dict
    part_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "task", VqaTaskKind(self.task))

    def to_json(self) -> str:
        return dumps({"scene_id": self.scene_id, "task": self.task.value, "part_id": self.part_id,
                      "prompt": self.prompt, "answer": self.answer, "grounding": self.grounding})

    @classmethod
    def from_dict(cls, d: dict) -> "VqaRecord":
        return cls(d["scene_id"], VqaTaskKind(d["task"]), d["prompt"], d["answer"], d["grounding"], d.get("part_id"))

    @property
    def prediction(self) -> Prediction:
        return Prediction.from_json(self.task, self.grounding)


# --------------------------------------------------------------------------
# emitting


def fmt_num(value: float, decimals: int) -> str:
    """Fixed-point text without a negative zero."""
    s = f"{value:.{decimals}f}"
    if float(s) == 0.0:
        s = f"{0.0:.{decimals}f}"
    return s


def format_box(box: RotatedBox2D) -> str:
    return "[" + ",".join(f"({fmt_num(x, PX_DECIMALS)},{fmt_num(y, PX_DECIMALS)})" for x, y in box.vertices) + "]"


def _fmt_point3(p) -> str:
    return "(" + ",".join(fmt_num(v, POSE_DECIMALS) for v in p) + ")"


def format_pose(pose: PoseOrAxis) -> str:
    if isinstance(pose, Pose6D):
        rows = pose.rows()
    else:
        rows = [pose.p0, pose.p1]
    return "[" + ",".join(_fmt_point3(r) for r in rows) + "]"


def format_answer(pred: Prediction) -> str:
    """The canonical answer text of a prediction (inverse of :func:`parse_answer`)."""
    if pred.task is VqaTaskKind.PART_DETECTION_2D:
        boxes = ", ".join(format_box(b) for b in pred.boxes)
        return (f"There are {len(pred.boxes)} manipulable object parts, "
                f"each with a corresponding 2D bounding box: {boxes}.")
    if pred.task is VqaTaskKind.POSE_DETECTION_6D:
        return f"{pred.manipulation_type.label} and its 6D pose: {format_pose(pred.pose)}."
    word = _REGION_WORD[pred.task]
    return f"Here is the {word} affordance region BBox {format_box(pred.box)}."


def format_prompt(task: VqaTaskKind, part_box: RotatedBox2D | None = None) -> str:
    task = VqaTaskKind(task)
    if task in _REGION_WORD:
        if part_box is None:
            raise MissingTargetPart(f"{task.value} needs a target part")
        return PROMPTS[task].format(box=format_box(part_box))
    return PROMPTS[task]


def ground_truth(sample: SceneSample, task: VqaTaskKind, part: PartAnnotation | None) -> Prediction:
    task = VqaTaskKind(task)
    if task is VqaTaskKind.PART_DETECTION_2D:
        return Prediction(task, boxes=tuple(p.part_box for _, p in sample.iter_parts()))
    if part is None:
        raise MissingTargetPart(f"{task.value} needs a target part")
    if task is VqaTaskKind.POSE_DETECTION_6D:
        return Prediction(task, manipulation_type=part.manipulation_type, pose=part.pose)
    if task is VqaTaskKind.GRASP_AFFORDANCE_2D:
        return Prediction(task, boxes=(part.grasp_box,))
    if part.functional_box is None:
        raise MissingFunctionalBox(f"part {part.part_id} has no functional region")
    return Prediction(task, boxes=(part.functional_box,))


def _target(sample: SceneSample, task: VqaTaskKind, part_id: str | None) -> PartAnnotation | None:
    if task is VqaTaskKind.PART_DETECTION_2D:
        return None
    if part_id is None:
        if task is VqaTaskKind.POSE_DETECTION_6D:
            return next(sample.iter_parts())[1]
        raise MissingTargetPart(f"{task.value} needs a target part")
    return sample.find_part(part_id)[1]


def serialize_task(sample: SceneSample, task: VqaTaskKind, part_id: str | None = None) -> VqaRecord:
    """One prompt/answer pair.

    The pose task defaults to the scene's first part when ``part_id`` is not
    given; the affordance tasks embed the target's part box in the prompt and
    require ``part_id``.
    """
    task = VqaTaskKind(task)
    part = _target(sample, task, part_id)
    gt = ground_truth(sample, task, part)
    prompt = format_prompt(task, part.part_box if part is not None else None)
    return VqaRecord(sample.scene_id, task, prompt, format_answer(gt), gt.to_json(),
                     part.part_id if part is not None else None)


def task_targets(sample: SceneSample) -> list[tuple[VqaTaskKind, str | None]]:
    """Every (task, part) question a sample can answer."""
    out: list[tuple[VqaTaskKind, str | None]] = [(VqaTaskKind.PART_DETECTION_2D, None)]
    for _, p in sample.iter_parts():
        out.append((VqaTaskKind.POSE_DETECTION_6D, p.part_id))
        out.append((VqaTaskKind.GRASP_AFFORDANCE_2D, p.part_id))
        if p.functional_box is not None:
            out.append((VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D, p.part_id))
    return out


def evaluation_records(samples: Iterable[SceneSample]) -> Iterator[VqaRecord]:
    for s in samples:
        for task, pid in task_targets(s):
            yield serialize_task(s, task, pid)


# --------------------------------------------------------------------------
# parsing

_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_CLOSE = {"(": ")", "[": "]"}
_TYPE_LABELS = sorted(((t.label, t) for t in ManipulationType), key=lambda x: -len(x[0]))


class _Scanner:
    def __init__(self, text: str):
        self.s = text
        self.i = 0

    def fail(self, expected: str):
        raise MalformedAnswer(self.i, expected)

    def ws(self) -> int:
        start = self.i
        s, n = self.s, len(self.s)
        while self.i < n and s[self.i].isspace():
            self.i += 1
        return self.i - start

    def word(self, w: str) -> bool:
        if self.s[self.i:self.i + len(w)].lower() == w.lower():
            self.i += len(w)
            return True
        return False

    def phrase(self, text: str) -> None:
        for k, w in enumerate(text.split()):
            gap = self.ws()
            if k > 0 and gap == 0:
                self.fail(f"whitespace before {w!r}")
            if not self.word(w):
                self.fail(repr(w))

    def punct(self, ch: str, optional: bool = False) -> bool:
        self.ws()
        if self.s.startswith(ch, self.i):
            self.i += 1
            return True
        if not optional:
            self.fail(repr(ch))
        return False

    def integer(self) -> int:
        self.ws()
        start = self.i
        while self.i < len(self.s) and self.s[self.i] in "0123456789":
            self.i += 1
        if self.i == start or self.i - start > 9:
            self.i = start
            self.fail("a part count")
        return int(self.s[start:self.i])

    def number(self, limit: float) -> float:
        self.ws()
        m = _NUMBER.match(self.s, self.i)
        if not m or len(m.group()) > 64:
            self.fail("a number")
        value = float(m.group())
        if not math.isfinite(value) or abs(value) > limit:
            raise ValueOutOfRange(self.i, value, limit)
        self.i = m.end()
        return value

    def open(self) -> str:
        self.ws()
        ch = self.s[self.i:self.i + 1]
        if ch not in _CLOSE:
            self.fail("'(' or '['")
        self.i += 1
        return _CLOSE[ch]

    def tuple_of(self, k: int, limit: float) -> tuple[float, ...]:
        close = self.open()
        vals = [self.number(limit)]
        for _ in range(k - 1):
            self.punct(",")
            vals.append(self.number(limit))
        self.punct(close)
        return tuple(vals)

    def box(self) -> RotatedBox2D:
        close = self.open()
        pts = [self.tuple_of(2, MAX_ABS_PX)]
        for _ in range(3):
            self.punct(",")
            pts.append(self.tuple_of(2, MAX_ABS_PX))
        self.punct(close)
        return RotatedBox2D(tuple(pts))

    def peek_open(self) -> bool:
        j = self.i
        while j < len(self.s) and self.s[j].isspace():
            j += 1
        return self.s[j:j + 1] in _CLOSE

    def end(self) -> None:
        self.punct(".", optional=True)
        self.ws()
        if self.i != len(self.s):
            self.fail("end of answer")


def _parse_part_detection(sc: _Scanner) -> Prediction:
    sc.phrase("There are")
    n_pos = sc.i
    n = sc.integer()
    sc.phrase("manipulable object parts")
    sc.punct(",", optional=True)
    sc.phrase("each with a corresponding 2D bounding box")
    sc.punct(":")
    boxes = []
    if sc.peek_open():
        boxes.append(sc.box())
        while True:
            save = sc.i
            if not sc.punct(",", optional=True):
                break
            if not sc.peek_open():
                sc.i = save
                break
            boxes.append(sc.box())
    sc.end()
    if n != len(boxes):
        err = CountMismatch(n, len(boxes))
        err.position = n_pos
        raise err
    return Prediction(VqaTaskKind.PART_DETECTION_2D, boxes=tuple(boxes))


def _parse_pose(sc: _Scanner) -> Prediction:
    sc.ws()
    for text, mt in _TYPE_LABELS:
        save = sc.i
        try:
            sc.phrase(text)
            break
        except MalformedAnswer:
            sc.i = save
    else:
        sc.fail("a manipulation type")
    sc.phrase("and its 6D pose")
    sc.punct(":")
    close = sc.open()
    rows = [sc.tuple_of(3, MAX_ABS_POSE)]
    while sc.punct(",", optional=True):
        rows.append(sc.tuple_of(3, MAX_ABS_POSE))
        if len(rows) > 4:
            sc.fail(repr(close))
    if len(rows) not in (2, 4):
        sc.fail("2 axis points or a 4x3 pose block")
    sc.punct(close)
    sc.end()
    pose: PoseOrAxis = JointAxis(*rows) if len(rows) == 2 else Pose6D.from_rows(rows)
    return Prediction(VqaTaskKind.POSE_DETECTION_6D, manipulation_type=mt, pose=pose)


def _parse_region(sc: _Scanner, task: VqaTaskKind) -> Prediction:
    sc.phrase(f"Here is the {_REGION_WORD[task]} affordance region")
    sc.ws()
    sc.word("BBox")
    box = sc.box()
    sc.end()
    return Prediction(task, boxes=(box,))


def parse_answer(text: str | bytes, task: VqaTaskKind) -> Prediction:
    """Decode an answer; raises only :class:`AnswerError` subclasses on bad input."""
    task = VqaTaskKind(task)
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    sc = _Scanner(text)
    if task is VqaTaskKind.PART_DETECTION_2D:
        return _parse_part_detection(sc)
    if task is VqaTaskKind.POSE_DETECTION_6D:
        return _parse_pose(sc)
    return _parse_region(sc, task)


def parse_prompt_box(prompt: str) -> RotatedBox2D:
    """The part box embedded in an affordance prompt."""
    key = "with BBox"
    at = prompt.find(key)
    if at < 0:
        raise MalformedAnswer(0, repr(key))
    sc = _Scanner(prompt)
    sc.i = at + len(key)
    return sc.box()


# --------------------------------------------------------------------------
# oracle


@dataclass(frozen=True)
class NoiseConfig:
    """Perturbations applied by the oracle predictor; all zero means exact labels."""

    center_sigma_px: float = 0.0
    angle_sigma_deg: float = 0.0
    axis_error_deg: float = 0.0
    type_confusion: float = 0.0

    def __post_init__(self):
        if min(self.center_sigma_px, self.angle_sigma_deg, self.axis_error_deg) < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if not 0.0 <= self.type_confusion <= 1.0:
            raise ValueError("type_confusion is a probability")

    @property
    def is_zero(self) -> bool:
        return not (self.center_sigma_px or self.angle_sigma_deg or self.axis_error_deg or self.type_confusion)

    def to_json(self) -> dict:
        return {"center_sigma_px": self.center_sigma_px, "angle_sigma_deg": self.angle_sigma_deg,
                "axis_error_deg": self.axis_error_deg, "type_confusion": self.type_confusion}


def noise_rng(seed: int, scene_id: str, task: VqaTaskKind, part_id: str | None) -> np.random.Generator:
    """Per-question stream; independent of evaluation order and worker count."""
    key = zlib.crc32(f"{scene_id}|{VqaTaskKind(task).value}|{part_id or ''}".encode())
    return np.random.default_rng([seed, key])


def _jitter_box(box: RotatedBox2D, noise: NoiseConfig, rng) -> RotatedBox2D:
    dx, dy, da = rng.standard_normal(3)
    shift = (noise.center_sigma_px * dx, noise.center_sigma_px * dy)
    angle = noise.angle_sigma_deg * da
    if angle == 0.0 and shift == (0.0, 0.0):
        return box
    if box.degenerate:
        return RotatedBox2D(tuple((x + shift[0], y + shift[1]) for x, y in box.vertices), degenerate=True)
    return transform_box(box, angle, shift)


def _random_perpendicular(rng, d: np.ndarray) -> np.ndarray:
    u = rng.standard_normal(3)
    u -= (u @ d) * d
    n = np.linalg.norm(u)
    if n < 1e-12:
        u = np.cross(d, [1.0, 0.0, 0.0])
        if np.linalg.norm(u) < 1e-9:
            u = np.cross(d, [0.0, 1.0, 0.0])
        n = np.linalg.norm(u)
    return u / n


def _perturb_pose(pose: PoseOrAxis, angle_deg: float, rng) -> PoseOrAxis:
    if isinstance(pose, JointAxis):
        d = pose.direction
        u = _random_perpendicular(rng, d)
        if angle_deg == 0.0:
            return pose
        a = math.radians(angle_deg)
        d2 = math.cos(a) * d + math.sin(a) * u
        return JointAxis(pose.p0, pose.origin + pose.length * d2)
    k = rng.standard_normal(3)
    k /= np.linalg.norm(k)
    if angle_deg == 0.0:
        return pose
    return Pose6D(pose.position, axis_angle_matrix(k, math.radians(angle_deg)) @ pose.R)


def _confuse(mt: ManipulationType, p: float, rng) -> ManipulationType:
    u = rng.random()
    pool = [t for t in ARTICULATED_TYPES if t is not mt]
    pick = pool[int(rng.integers(len(pool)))]
    return pick if u < p else mt


def oracle_predict(sample: SceneSample, task: VqaTaskKind, noise: NoiseConfig = NoiseConfig(),
                   part_id: str | None = None, seed: int = 0) -> Prediction:
    """Ground truth perturbed by ``noise``.

    The draws do not depend on the noise magnitudes, so sweeping one
    magnitude with a fixed seed changes each prediction monotonically.
    """
    task = VqaTaskKind(task)
    gt = ground_truth(sample, task, _target(sample, task, part_id))
    if noise.is_zero:
        return gt
    rng = noise_rng(seed, sample.scene_id, task, part_id)
    if task is VqaTaskKind.POSE_DETECTION_6D:
        mt = _confuse(gt.manipulation_type, noise.type_confusion, rng)
        return Prediction(task, manipulation_type=mt, pose=_perturb_pose(gt.pose, noise.axis_error_deg, rng))
    return Prediction(task, boxes=tuple(_jitter_box(b, noise, rng) for b in gt.boxes))


# --------------------------------------------------------------------------
# dataset


def build_vqa_dataset(corpus: Sequence[SceneSample], mix: Sequence[int] | dict, seed: int = 0) -> Iterator[VqaRecord]:
    """Records with exactly ``mix[task]`` questions per task.

    Questions of a task are drawn from its pool (all scenes for part
    detection, all parts for pose and grasp, tool parts for function) in a
    seeded permuted order, cycling when a count exceeds the pool. A task
    whose pool is empty yields nothing.
    """
    counts = dict(zip(TASKS, mix)) if not isinstance(mix, dict) else {VqaTaskKind(k): v for k, v in mix.items()}
    pools: dict[VqaTaskKind, list[tuple[SceneSample, str | None]]] = {t: [] for t in TASKS}
    for s in corpus:
        for task, pid in task_targets(s):
            pools[task].append((s, pid))
    for ti, task in enumerate(TASKS):
        pool = pools[task]
        n = int(counts.get(task, 0))
        if not pool or n <= 0:
            continue
        rng = np.random.default_rng([seed, 5, ti])
        order: list[int] = []
        while len(order) < n:
            order.extend(rng.permutation(len(pool)).tolist())
        for k in order[:n]:
            s, pid = pool[k]
            yield serialize_task(s, task, pid)


# --------------------------------------------------------------------------
# predictor boundary


@dataclass(frozen=True)
class PredictRequest:
    scene_id: str
    task: VqaTaskKind
    prompt: str
    image_ref: str
    part_id: str | None = None

    def to_json(self) -> str:
        return dumps({"scene_id": self.scene_id, "task": VqaTaskKind(self.task).value, "prompt": self.prompt,
                      "image_ref": self.image_ref, "part_id": self.part_id})


class Predictor(Protocol):
    def answer(self, requests: Sequence[PredictRequest]) -> list[str]:
        ...


@dataclass
class OraclePredictor:
    """Noisy ground truth rendered back to answer text; safe to share across workers."""

    samples: dict[str, SceneSample]
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0

    def answer(self, requests: Sequence[PredictRequest]) -> list[str]:
        out = []
        for r in requests:
            pred = oracle_predict(self.samples[r.scene_id], r.task, self.noise, r.part_id, self.seed)
            out.append(format_answer(pred))
        return out


@dataclass
class SubprocessPredictor:
    """External model adapter speaking JSON lines over stdin and stdout.

    The command receives one request object per line and must print one
    ``{"answer": ...}`` object per line, in order.
    """

    command: Sequence[str]
    timeout: float | None = None

    def answer(self, requests: Sequence[PredictRequest]) -> list[str]:
        payload = "".join(r.to_json() + "\n" for r in requests)
        try:
            proc = subprocess.run(list(self.command), input=payload, capture_output=True, text=True,
                                  timeout=self.timeout, check=True)
        except subprocess.CalledProcessError as e:
            tail = (e.stderr or "").strip().splitlines()[-1:]
            raise PredictorFailure(f"predictor exited with status {e.returncode}"
                                   + (f": {tail[0]}" if tail else "")) from None
        except subprocess.TimeoutExpired:
            raise PredictorFailure(f"predictor timed out after {self.timeout} s") from None
        except OSError as e:
            raise PredictorFailure(f"cannot start predictor: {e.strerror}") from None
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != len(requests):
            raise PredictorFailure(f"predictor returned {len(lines)} answers for {len(requests)} requests")
        try:
            return [str(json.loads(ln)["answer"]) for ln in lines]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise PredictorFailure(f"predictor output is not answer JSON lines: {e}") from None
