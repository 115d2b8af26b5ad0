"""Stage functions shared by the CLI: predict, decode, plan and simulate."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import ManipulationType, SceneSample, dumps
from .datagen import GenConfig
from .datagen.generate import articulated_model, parse_object_id, tool_model
from .errors import AffordkitError
from .manip import (
    EpisodeLog,
    EpisodeResult,
    PlanParams,
    direction_for_state,
    execute,
    execute_tool,
    grasp_point,
    measure_success,
    plan_trajectory,
    Trajectory,
)
from .vqa import (
    AnswerError,
    NoiseConfig,
    Prediction,
    PredictRequest,
    Predictor,
    VqaTaskKind,
    format_prompt,
    parse_answer,
    task_targets,
)

EVAL_SPLITS = ("unseen_instance", "unseen_category")
TOOL_TARGET_OFFSET = (0.15, 0.0, 0.0)  # m, camera frame, from the functional point


@dataclass(frozen=True)
class AnswerRow:
    """One predictor answer as stored in the predictions JSONL."""

    scene_id: str
    task: VqaTaskKind
    part_id: str | None
    answer: str

    def to_json(self) -> str:
        return dumps({"scene_id": self.scene_id, "task": VqaTaskKind(self.task).value,
                      "part_id": self.part_id, "answer": self.answer})

    @classmethod
    def from_dict(cls, d: dict) -> "AnswerRow":
        return cls(d["scene_id"], VqaTaskKind(d["task"]), d.get("part_id"), d["answer"])


def requests_for(samples: Iterable[SceneSample], image_ref: str = "corpus.jsonl") -> list[PredictRequest]:
    out = []
    for s in samples:
        for task, pid in task_targets(s):
            box = s.find_part(pid)[1].part_box if pid is not None and task in (
                VqaTaskKind.GRASP_AFFORDANCE_2D, VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D) else None
            out.append(PredictRequest(s.scene_id, task, format_prompt(task, box), f"{image_ref}#{s.scene_id}", pid))
    return out


def predict(samples: Sequence[SceneSample], predictor: Predictor, image_ref: str = "corpus.jsonl",
            batch: int = 256) -> Iterator[AnswerRow]:
    reqs = requests_for(samples, image_ref)
    for i in range(0, len(reqs), batch):
        chunk = reqs[i:i + batch]
        for r, a in zip(chunk, predictor.answer(chunk)):
            yield AnswerRow(r.scene_id, r.task, r.part_id, a)


def decode(rows: Iterable[AnswerRow]) -> dict[tuple[str, VqaTaskKind, str | None], Prediction | AnswerError]:
    """Parse every answer; failures are kept as the error object."""
    out: dict = {}
    for r in rows:
        try:
            out[(r.scene_id, r.task, r.part_id)] = parse_answer(r.answer, r.task)
        except AnswerError as e:
            out[(r.scene_id, r.task, r.part_id)] = e
    return out


@dataclass
class SimulationSettings:
    params: PlanParams = field(default_factory=PlanParams)
    delta: float = 0.1
    mode: str = "normalized"
    noise: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("normalized", "absolute"):
            raise ValueError(f"mode must be 'normalized' or 'absolute', got {self.mode!r}")


def _rescore(result: EpisodeResult, settings: SimulationSettings) -> EpisodeResult:
    """Apply the configured success rule to an articulated episode."""
    if settings.mode == "normalized" or result.failure_reason == "attachment_failed":
        return result
    ok = measure_success(result, settings.delta, settings.mode)
    reason = None if ok else (result.failure_reason or "insufficient_motion")
    return replace(result, success=ok, failure_reason=reason)


@dataclass(frozen=True)
class PlanRecord:
    """Planner output for one part: a trajectory, or the reason there is none.

    Tool plans also carry the ground-truth functional point and the target
    it must reach, both in the camera frame.
    """

    scene_id: str
    part_id: str
    predicted_type: ManipulationType | None
    trajectory: Trajectory | None
    failure_reason: str | None = None
    function_point: tuple[float, float, float] | None = None
    target: tuple[float, float, float] | None = None

    def to_json(self) -> str:
        return dumps({
            "scene_id": self.scene_id,
            "part_id": self.part_id,
            "predicted_type": ManipulationType(self.predicted_type).value if self.predicted_type else None,
            "failure_reason": self.failure_reason,
            "function_point": list(self.function_point) if self.function_point is not None else None,
            "target": list(self.target) if self.target is not None else None,
            "trajectory": self.trajectory.to_dict() if self.trajectory is not None else None,
        })

    @classmethod
    def from_dict(cls, d: dict) -> "PlanRecord":
        pt = d.get("predicted_type")
        fp, tg, tr = d.get("function_point"), d.get("target"), d.get("trajectory")
        return cls(d["scene_id"], d["part_id"], ManipulationType(pt) if pt else None,
                   Trajectory.from_dict(tr) if tr is not None else None, d.get("failure_reason"),
                   tuple(fp) if fp is not None else None, tuple(tg) if tg is not None else None)


def _with_direction(p: PlanParams, direction: int) -> PlanParams:
    return replace(p, direction=direction)


def tool_function_point(sample: SceneSample, part) -> np.ndarray:
    """The ground-truth functional contact point: the F box seen through the depth map."""
    return grasp_point(part.functional_box, sample.depth, sample.intrinsics)


def plan_part(sample: SceneSample, part_id: str, decoded: dict,
              settings: SimulationSettings = SimulationSettings()) -> PlanRecord:
    """Turn the decoded pose and affordance answers for a part into a trajectory."""
    _, part = sample.find_part(part_id)
    key = (sample.scene_id, VqaTaskKind.POSE_DETECTION_6D, part_id)
    pose_pred = decoded.get(key)
    grasp_pred = decoded.get((sample.scene_id, VqaTaskKind.GRASP_AFFORDANCE_2D, part_id))
    predicted = pose_pred.manipulation_type if isinstance(pose_pred, Prediction) else None

    def failed(reason: str, **kw) -> PlanRecord:
        return PlanRecord(sample.scene_id, part_id, predicted, None, reason, **kw)

    tool = part.manipulation_type is ManipulationType.FREEDOM_OBJECT
    extra = {}
    params = settings.params
    needed = [pose_pred, grasp_pred]
    if tool:
        try:
            fp_true = tool_function_point(sample, part)
        except AffordkitError as e:
            return failed(type(e).__name__)
        target = fp_true + np.asarray(TOOL_TARGET_OFFSET)
        extra = {"function_point": tuple(float(x) for x in fp_true), "target": tuple(float(x) for x in target)}
        func_pred = decoded.get((sample.scene_id, VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D, part_id))
        needed.append(func_pred)
    if not all(isinstance(p, Prediction) for p in needed):
        return failed("unparseable_prediction", **extra)
    try:
        g = grasp_point(grasp_pred.box, sample.depth, sample.intrinsics)
        if tool:
            fp_pred = grasp_point(func_pred.box, sample.depth, sample.intrinsics)
            params = replace(params, function_point=tuple(fp_pred), target=extra["target"])
        else:
            params = _with_direction(params, direction_for_state(part.normalized_state))
        traj = plan_trajectory(pose_pred.manipulation_type, pose_pred.pose, g, params)
    except AffordkitError as e:
        return failed(type(e).__name__, **extra)
    except ValueError as e:
        return failed(f"invalid_trajectory: {e}", **extra)
    return PlanRecord(sample.scene_id, part_id, predicted, traj, None, **extra)


def plan(samples: Sequence[SceneSample], decoded: dict, settings: SimulationSettings = SimulationSettings(),
         include_tools: bool = True) -> list[PlanRecord]:
    out = []
    for s in samples:
        for _, part in s.iter_parts():
            if part.manipulation_type is ManipulationType.FREEDOM_OBJECT and not include_tools:
                continue
            out.append(plan_part(s, part.part_id, decoded, settings))
    return out


def execute_plan(sample: SceneSample, record: PlanRecord, cfg: GenConfig,
                 settings: SimulationSettings = SimulationSettings()) -> EpisodeLog:
    """Run a planned trajectory against the scene's object and score it."""
    obj, part = sample.find_part(record.part_id)

    def log(result: EpisodeResult) -> EpisodeLog:
        return EpisodeLog(sample.scene_id, obj.object_id, part.part_id, sample.split, obj.category,
                          part.manipulation_type, record.predicted_type, settings.noise, result)

    if part.manipulation_type is ManipulationType.FREEDOM_OBJECT:
        d0 = (float(np.linalg.norm(np.asarray(record.target) - np.asarray(record.function_point)))
              if record.target is not None else None)
        if record.trajectory is None:
            return log(EpisodeResult(0.0, 0.0, 0.0, False, record.failure_reason, distance_to_target=d0))
        model = tool_model(cfg, *parse_object_id(obj.object_id))
        points = obj.root_pose.apply(model.points)
        return log(execute_tool(points, record.function_point, record.trajectory, record.target))

    tree = articulated_model(cfg, *parse_object_id(obj.object_id))
    tree.root_pose = obj.root_pose
    links = {p.part_id.split("/", 1)[1]: p for p in obj.parts}
    for j in tree.movable_joints():
        if j.child in links:
            tree.set_state(j.name, links[j.child].joint_state)
    joint = tree.parent_joint(record.part_id.split("/", 1)[1])
    q0 = tree.joint_states[joint.name]
    if record.trajectory is None:
        return log(EpisodeResult(q0, q0, 0.0, False, record.failure_reason, joint.range, joint.is_angular))
    delta = settings.delta if settings.mode == "normalized" else 1.0
    return log(_rescore(execute(tree, joint.name, record.trajectory, delta=delta), settings))


def execute_plans(samples: Sequence[SceneSample], records: Iterable[PlanRecord], cfg: GenConfig,
                  settings: SimulationSettings = SimulationSettings()) -> list[EpisodeLog]:
    by_id = {s.scene_id: s for s in samples}
    return [execute_plan(by_id[r.scene_id], r, cfg, settings) for r in records]


def simulate_part(sample: SceneSample, part_id: str, decoded: dict, cfg: GenConfig,
                  settings: SimulationSettings = SimulationSettings()) -> EpisodeLog:
    """One closed-loop episode for a part from its decoded answers."""
    return execute_plan(sample, plan_part(sample, part_id, decoded, settings), cfg, settings)


def simulate(samples: Sequence[SceneSample], decoded: dict, cfg: GenConfig,
             settings: SimulationSettings = SimulationSettings(), include_tools: bool = True) -> list[EpisodeLog]:
    return execute_plans(samples, plan(samples, decoded, settings, include_tools), cfg, settings)
