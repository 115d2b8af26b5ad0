"""Random structured payloads for round-trip and fuzz tests."""

from __future__ import annotations

import numpy as np

from affordkit.core import ARTICULATED_TYPES, JointAxis, ManipulationType, Pose6D
from affordkit.geometry import box_from_center
from affordkit.vqa import POSE_DECIMALS, PX_DECIMALS, TASKS, Prediction, VqaTaskKind

from oracles import random_rotation

PX_TOL = 0.5 * 10 ** -PX_DECIMALS + 1e-9
POSE_TOL = 0.5 * 10 ** -POSE_DECIMALS + 1e-9


def random_box(rng):
    return box_from_center(rng.uniform(-50, 500, 2), rng.uniform(1, 300), rng.uniform(1, 300), rng.uniform(0, 180))


def random_prediction(rng, task: VqaTaskKind | None = None) -> Prediction:
    task = task or TASKS[int(rng.integers(len(TASKS)))]
    if task is VqaTaskKind.PART_DETECTION_2D:
        return Prediction(task, boxes=tuple(random_box(rng) for _ in range(int(rng.integers(0, 6)))))
    if task is VqaTaskKind.POSE_DETECTION_6D:
        if rng.random() < 0.5:
            p0 = rng.uniform(-2, 2, 3)
            d = rng.standard_normal(3)
            return Prediction(task, manipulation_type=ARTICULATED_TYPES[int(rng.integers(4))],
                              pose=JointAxis(p0, p0 + 0.1 * d / np.linalg.norm(d)))
        return Prediction(task, manipulation_type=ManipulationType.FREEDOM_OBJECT,
                          pose=Pose6D(rng.uniform(-2, 2, 3), random_rotation(rng)))
    return Prediction(task, boxes=(random_box(rng),))


def round_trip_error(a: Prediction, b: Prediction) -> str | None:
    """Why ``b`` does not reproduce ``a`` at declared precision, or ``None``."""
    if a.task is not b.task:
        return "task"
    if a.task is VqaTaskKind.POSE_DETECTION_6D:
        if a.manipulation_type is not b.manipulation_type:
            return "type"
        if type(a.pose) is not type(b.pose):
            return "pose kind"
        ra = a.pose.rows() if isinstance(a.pose, Pose6D) else [a.pose.p0, a.pose.p1]
        rb = b.pose.rows() if isinstance(b.pose, Pose6D) else [b.pose.p0, b.pose.p1]
        if np.abs(np.array(ra) - np.array(rb)).max() > POSE_TOL:
            return "pose value"
        return None
    if len(a.boxes) != len(b.boxes):
        return "box count"
    for x, y in zip(a.boxes, b.boxes):
        if np.abs(x.as_array() - y.as_array()).max() > PX_TOL:
            return "box value"
    return None
