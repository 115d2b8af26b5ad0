"""From predicted constraints to gripper motion and a scored episode.

The planner turns (manipulation type, axis or pose, grasp point) into a
waypoint list; the executor is a kinematic attachment model that moves the
target joint by the part of each commanded step its single degree of
freedom can realize. Success compares the joint change, normalized by the
joint range, against a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .articulation import (
    KinematicTree,
    axis_angle_matrix,
    forward_kinematics_matrices,
    joint_frame,
    link_points_world,
)
from .core import Intrinsics, JointAxis, ManipulationType, Pose6D, PoseOrAxis, RotatedBox2D, dumps
from .errors import AffordkitError

PHASES = ("approach", "grasp", "manipulate", "retreat")
MAX_STEP = 0.05  # m between consecutive waypoints
STEP_TOL = 1e-9
APPROACH_STANDOFF = 0.08  # m
ATTACH_DISTANCE = 0.03  # m
DETACH_RESIDUAL = 0.02  # m per step
DEFAULT_DELTA = 0.1
SUCCESS_TOL = 1e-9  # float slack so an exact-threshold change counts as success
TOOL_SUCCESS_DISTANCE = 0.03  # m
MIN_AXIS_LENGTH = 1e-6
SCREW_ITERATIONS = 20


class ConstraintMismatch(AffordkitError):
    pass


class DegenerateAxis(AffordkitError):
    pass


class NoDepthInBox(AffordkitError):
    pass


class AttachmentFailed(AffordkitError):
    pass


# --------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class Trajectory:
    """Gripper poses in the camera frame, each tagged with its phase."""

    waypoints: tuple[Pose6D, ...]
    phases: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        object.__setattr__(self, "phases", tuple(self.phases))
        if len(self.waypoints) < 2:
            raise ValueError("a trajectory needs at least two waypoints")
        if len(self.phases) != len(self.waypoints):
            raise ValueError("one phase tag per waypoint")
        bad = set(self.phases) - set(PHASES)
        if bad:
            raise ValueError(f"unknown phases {sorted(bad)}")
        steps = self.step_lengths()
        if steps.size and steps.max() > MAX_STEP + STEP_TOL:
            raise ValueError(f"waypoint step {steps.max():.4f} m exceeds {MAX_STEP} m")

    def positions(self) -> np.ndarray:
        return np.array([w.position for w in self.waypoints])

    def step_lengths(self) -> np.ndarray:
        p = self.positions()
        return np.linalg.norm(np.diff(p, axis=0), axis=1)

    def phase(self, name: str) -> list[Pose6D]:
        return [w for w, ph in zip(self.waypoints, self.phases) if ph == name]

    def to_dict(self) -> dict:
        return {"waypoints": [w.rows() for w in self.waypoints], "phases": list(self.phases)}

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(tuple(Pose6D.from_rows(r) for r in d["waypoints"]), tuple(d["phases"]))


@dataclass(frozen=True)
class EpisodeResult:
    """Outcome of one episode.

    ``delta_change`` is the joint change in units of the joint range. Tool
    episodes carry ``distance_to_target`` instead of joint states (both
    zero) and score by distance.
    """

    initial_state: float
    final_state: float
    delta_change: float
    success: bool
    failure_reason: str | None = None
    joint_range: float = 0.0
    angular: bool = False
    distance_to_target: float | None = None

    @property
    def absolute_change(self) -> float:
        """Joint change in radians for angular joints, meters otherwise."""
        d = abs(self.final_state - self.initial_state)
        return math.radians(d) if self.angular else d


def measure_success(result: EpisodeResult, delta: float = DEFAULT_DELTA, mode: str = "normalized") -> bool:
    """``delta_change >= delta`` (inclusive, up to ``SUCCESS_TOL``); ``mode="absolute"`` compares radians or meters."""
    if not 0.0 < delta <= 1.0 and mode == "normalized":
        raise ValueError("delta must lie in (0, 1]")
    if result.distance_to_target is not None:
        return result.distance_to_target <= TOOL_SUCCESS_DISTANCE
    if mode == "normalized":
        return result.delta_change >= delta - SUCCESS_TOL
    if mode == "absolute":
        return result.absolute_change >= delta - SUCCESS_TOL
    raise ValueError(f"unknown mode {mode!r}")


# --------------------------------------------------------------------------
# grasp point


def points_in_box(uv: np.ndarray, box: RotatedBox2D, tol: float = 1e-9) -> np.ndarray:
    """Boolean mask of pixel points inside a convex quadrilateral (either winding)."""
    v = box.as_array()
    sign = 1.0 if box.signed_area >= 0 else -1.0
    mask = np.ones(len(uv), dtype=bool)
    for i in range(4):
        a, b = v[i], v[(i + 1) % 4]
        e = b - a
        cr = e[0] * (uv[:, 1] - a[1]) - e[1] * (uv[:, 0] - a[0])
        mask &= sign * cr >= -tol * max(1.0, float(np.hypot(*e)))
    return mask


def grasp_point(box: RotatedBox2D, depth, intrinsics: Intrinsics) -> np.ndarray:
    """Back-project the box center at the median depth of in-box depth samples."""
    pts = depth.as_array() if hasattr(depth, "as_array") else np.asarray(depth, dtype=float).reshape(-1, 3)
    inside = pts[points_in_box(pts[:, :2], box)] if len(pts) else pts
    if len(inside) == 0:
        raise NoDepthInBox(f"no depth sample inside box centered at {box.center}")
    z = float(np.median(inside[:, 2]))
    u, v = box.center
    return np.array([(u - intrinsics.cx) * z / intrinsics.fx, (v - intrinsics.cy) * z / intrinsics.fy, z])


# --------------------------------------------------------------------------
# planning


@dataclass(frozen=True)
class PlanParams:
    """Motion extents and discretization; ``direction`` +1 opens, -1 closes."""

    revolute_sweep_deg: float = 45.0
    prismatic_extent: float = 0.15
    lid_extent: float = 0.10
    cap_sweep_deg: float = 360.0
    pitch: float = 0.008
    max_angle_step_deg: float = 5.0
    direction: int = 1
    lid_normal: tuple[float, float, float] | None = None
    standoff: float = APPROACH_STANDOFF
    lift: float = 0.10
    function_point: tuple[float, float, float] | None = None
    target: tuple[float, float, float] | None = None


def _orthonormal_frame(z) -> np.ndarray:
    """Rotation whose third column is ``z``; the first column avoids camera-y."""
    z = np.asarray(z, dtype=float)
    z = z / np.linalg.norm(z)
    ref = np.array([0.0, 1.0, 0.0]) if abs(z[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    x = np.cross(ref, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def _segment(start, end, R, phase) -> tuple[list[Pose6D], list[str]]:
    """Straight moves from ``start`` (excluded) to ``end`` (included) in bounded steps."""
    start, end = np.asarray(start, dtype=float), np.asarray(end, dtype=float)
    n = max(1, math.ceil(np.linalg.norm(end - start) / MAX_STEP - 1e-12))
    pts = [start + (end - start) * (k / n) for k in range(1, n + 1)]
    return [Pose6D(p, R) for p in pts], [phase] * n


def _approach(grasp: np.ndarray, approach_dir: np.ndarray, standoff: float):
    d = approach_dir / np.linalg.norm(approach_dir)
    R = _orthonormal_frame(d)
    start = grasp - standoff * d
    wps, ph = [Pose6D(start, R)], ["approach"]
    w, p = _segment(start, grasp, R, "approach")
    wps += w[:-1]
    ph += p[:-1]
    wps.append(Pose6D(grasp, R))
    ph.append("grasp")
    return wps, ph, R


def _screw_waypoints(grasp, R0, p0, d, sweep_deg, rise_per_deg, max_angle_step):
    """Rotate the grasp about the line (p0, d) by ``sweep_deg`` while rising along d."""
    r = np.linalg.norm((grasp - p0) - ((grasp - p0) @ d) * d)
    total_rise = abs(rise_per_deg * sweep_deg)
    arc = math.radians(abs(sweep_deg)) * r
    n = max(1, math.ceil(abs(sweep_deg) / max_angle_step - 1e-12), math.ceil(math.hypot(arc, total_rise) / MAX_STEP - 1e-12))
    wps = []
    for k in range(1, n + 1):
        a = sweep_deg * k / n
        Rk = axis_angle_matrix(d, math.radians(a))
        pos = p0 + Rk @ (grasp - p0) + rise_per_deg * a * d
        wps.append(Pose6D(pos, Rk @ R0))
    return wps


def plan_trajectory(mtype: ManipulationType, constraint: PoseOrAxis, grasp, params: PlanParams = PlanParams()) -> Trajectory:
    """Approach, grasp, manipulate and retreat waypoints for one part."""
    mtype = ManipulationType(mtype)
    grasp = np.asarray(grasp, dtype=float)
    if mtype is ManipulationType.FREEDOM_OBJECT:
        if not isinstance(constraint, Pose6D):
            raise ConstraintMismatch("a freedom object needs a full 6D pose")
        return _plan_tool(constraint, grasp, params)
    if not isinstance(constraint, JointAxis):
        raise ConstraintMismatch(f"{mtype.label} needs a joint axis")
    if constraint.length < MIN_AXIS_LENGTH:
        raise DegenerateAxis(f"axis length {constraint.length} below {MIN_AXIS_LENGTH}")
    d = constraint.direction
    p0 = constraint.origin
    sgn = 1.0 if params.direction >= 0 else -1.0
    approach = grasp if np.linalg.norm(grasp) > 0 else np.array([0.0, 0.0, 1.0])
    wps, ph, R0 = _approach(grasp, approach, params.standoff)
    if mtype is ManipulationType.REVOLUTE_PART:
        man = _screw_waypoints(grasp, R0, p0, d, sgn * params.revolute_sweep_deg, 0.0, params.max_angle_step_deg)
    elif mtype is ManipulationType.BOTTLE_CAP:
        man = _screw_waypoints(grasp, R0, p0, d, sgn * params.cap_sweep_deg, params.pitch / 360.0,
                               params.max_angle_step_deg)
    else:
        extent = params.prismatic_extent if mtype is ManipulationType.PRISMATIC_PART else params.lid_extent
        line = d
        if mtype is ManipulationType.SLIDING_LID and params.lid_normal is not None:
            n = np.asarray(params.lid_normal, dtype=float)
            n /= np.linalg.norm(n)
            line = d - (d @ n) * n
            if np.linalg.norm(line) < 1e-9:
                raise DegenerateAxis("sliding direction is normal to the lid plane")
            line /= np.linalg.norm(line)
        man, _ = _segment(grasp, grasp + sgn * extent * line, R0, "manipulate")
    wps += man
    ph += ["manipulate"] * len(man)
    last = man[-1]
    back, bph = _segment(last.t, last.t - params.standoff * last.R[:, 2], last.R, "retreat")
    return Trajectory(tuple(wps + back), tuple(ph + bph))


def _plan_tool(pose: Pose6D, grasp: np.ndarray, params: PlanParams) -> Trajectory:
    approach_dir = -pose.R[:, 2]
    wps, ph, R0 = _approach(grasp, approach_dir, params.standoff)
    lifted = grasp + np.array([0.0, -params.lift, 0.0])
    w, p = _segment(grasp, lifted, R0, "manipulate")
    wps += w
    ph += p
    if params.target is not None:
        fp = np.asarray(params.function_point if params.function_point is not None else grasp, dtype=float)
        shift = np.asarray(params.target, dtype=float) - fp
        w, p = _segment(lifted, grasp + shift, R0, "manipulate")
        wps += w
        ph += p
    last = wps[-1]
    back, bph = _segment(last.t, last.t - params.standoff * last.R[:, 2], last.R, "retreat")
    return Trajectory(tuple(wps + back), tuple(ph + bph))


# --------------------------------------------------------------------------
# execution


def _solve_joint(joint, F: np.ndarray, x_local: np.ndarray, q0: float, target_world: np.ndarray) -> float:
    """Joint value whose motion brings the grasped point closest to ``target_world``.

    ``x_local`` is the grasped point in the joint frame at zero motion and
    ``F`` the world transform of that frame. The result is clamped to limits.
    """
    a = np.asarray(joint.axis)
    y = F[:3, :3].T @ (target_world - F[:3, 3])
    lo, hi = joint.lower, joint.upper
    if joint.kind == "prismatic":
        q = float((y - x_local) @ a)
        return min(max(q, lo), hi)

    def rotate(q):
        return axis_angle_matrix(a, math.radians(q)) @ x_local

    xq = rotate(q0)
    xp = xq - (xq @ a) * a
    if joint.kind == "screw":
        c = joint.screw_pitch / 360.0
        y_eff = y - (c * q0) * a
    else:
        c = 0.0
        y_eff = y
    yp = y_eff - (y_eff @ a) * a
    dq = math.degrees(math.atan2(float(a @ np.cross(xp, yp)), float(xp @ yp))) if np.linalg.norm(xp) > 1e-12 else 0.0
    q = q0 + dq
    if joint.kind == "screw":
        for _ in range(SCREW_ITERATIONS):
            R = axis_angle_matrix(a, math.radians(q))
            r = R @ x_local + c * q * a - y
            J = math.radians(1.0) * np.cross(a, R @ x_local) + c * a
            step = -float(r @ J) / float(J @ J)
            q += step
            if abs(step) < 1e-12:
                break
    return min(max(q, lo), hi)


def _point_at(joint, F, x_local, q) -> np.ndarray:
    return F[:3, :3] @ (joint.motion(q)[:3, :3] @ x_local + joint.motion(q)[:3, 3]) + F[:3, 3]


def execute(tree: KinematicTree, joint_name: str, trajectory: Trajectory,
            attach_distance: float = ATTACH_DISTANCE, detach_residual: float = DETACH_RESIDUAL,
            delta: float = DEFAULT_DELTA) -> EpisodeResult:
    """Run a trajectory against ``tree`` (mutated to the final state).

    The gripper attaches at the first grasp waypoint if it lies within
    ``attach_distance`` of the target part; each manipulate step's commanded
    displacement is realized as far as the joint allows and the gripper
    slips off when the unrealized remainder exceeds ``detach_residual``.
    """
    j = tree.joints[joint_name]
    q_init = tree.joint_states[joint_name]
    rng_ = j.range

    def result(q, reason=None):
        dc = min(1.0, max(0.0, abs(q - q_init) / rng_)) if rng_ > 0 else 0.0
        ok = reason != "attachment_failed" and dc >= delta - SUCCESS_TOL
        if ok:
            reason = None
        elif reason is None:
            reason = "insufficient_motion"
        return EpisodeResult(q_init, q, dc, ok, reason, rng_, j.is_angular)

    grasps = [w for w, ph in zip(trajectory.waypoints, trajectory.phases) if ph == "grasp"]
    if not grasps:
        return result(q_init, "no_grasp_waypoint")
    g = grasps[0].t
    poses = forward_kinematics_matrices(tree)
    cloud = link_points_world(tree, tree.rigid_group(j.child), poses)
    if len(cloud) == 0 or float(np.min(np.linalg.norm(cloud - g, axis=1))) > attach_distance:
        return result(q_init, "attachment_failed")
    F = joint_frame(tree, j, poses)
    M = j.motion(q_init)
    local_now = F[:3, :3].T @ (g - F[:3, 3])
    x_local = M[:3, :3].T @ (local_now - M[:3, 3])

    q = q_init
    gripper = g.copy()
    prev = g
    started = False
    reason = None
    for w, ph in zip(trajectory.waypoints, trajectory.phases):
        if ph == "grasp" and not started:
            prev = w.t
            continue
        if ph != "manipulate":
            if started:
                break
            continue
        started = True
        target = gripper + (w.t - prev)
        prev = w.t
        q = _solve_joint(j, F, x_local, q, target)
        gripper = _point_at(j, F, x_local, q)
        if float(np.linalg.norm(gripper - target)) > detach_residual:
            reason = "detached"
            break
    tree.set_state(joint_name, q)
    return result(q, reason)


def execute_tool(points: np.ndarray, function_point, trajectory: Trajectory, target,
                 attach_distance: float = ATTACH_DISTANCE) -> EpisodeResult:
    """Carry a rigid tool along a trajectory; success when its functional point reaches ``target``."""
    pts = np.asarray(points, dtype=float)
    fp = np.asarray(function_point, dtype=float)
    target = np.asarray(target, dtype=float)
    d0 = float(np.linalg.norm(fp - target))
    grasps = [w for w, ph in zip(trajectory.waypoints, trajectory.phases) if ph == "grasp"]
    if not grasps or float(np.min(np.linalg.norm(pts - grasps[0].t, axis=1))) > attach_distance:
        return EpisodeResult(0.0, 0.0, 0.0, False, "attachment_failed", distance_to_target=d0)
    G = grasps[0]
    man = trajectory.phase("manipulate")
    end = man[-1] if man else G
    rel = G.inverse().apply(fp[None])[0]
    fp_end = end.apply(rel[None])[0]
    d1 = float(np.linalg.norm(fp_end - target))
    dc = min(1.0, max(0.0, 1.0 - d1 / d0)) if d0 > 0 else 1.0
    ok = d1 <= TOOL_SUCCESS_DISTANCE
    return EpisodeResult(0.0, 0.0, dc, ok, None if ok else "missed_target", distance_to_target=d1)


# --------------------------------------------------------------------------
# logs


@dataclass(frozen=True)
class EpisodeLog:
    scene_id: str
    object_id: str
    part_id: str
    split: str | None
    category: str
    task_type: ManipulationType
    predicted_type: ManipulationType | None
    noise: dict
    result: EpisodeResult
    extra: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.result.success

    def to_json(self) -> str:
        r = self.result
        return dumps({
            "scene_id": self.scene_id,
            "object_id": self.object_id,
            "part_id": self.part_id,
            "split": self.split,
            "category": self.category,
            "task_type": ManipulationType(self.task_type).value,
            "predicted_type": ManipulationType(self.predicted_type).value if self.predicted_type else None,
            "noise": self.noise,
            "initial_state": r.initial_state,
            "final_state": r.final_state,
            "joint_range": r.joint_range,
            "angular": r.angular,
            "delta_change": r.delta_change,
            "distance_to_target": r.distance_to_target,
            "success": r.success,
            "failure_reason": r.failure_reason,
            **self.extra,
        })

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeLog":
        known = {"scene_id", "object_id", "part_id", "split", "category", "task_type", "predicted_type", "noise",
                 "initial_state", "final_state", "joint_range", "angular", "delta_change", "distance_to_target",
                 "success", "failure_reason"}
        result = EpisodeResult(d["initial_state"], d["final_state"], d["delta_change"], d["success"],
                               d.get("failure_reason"), d.get("joint_range", 0.0), d.get("angular", False),
                               d.get("distance_to_target"))
        return cls(d["scene_id"], d["object_id"], d["part_id"], d.get("split"), d["category"],
                   ManipulationType(d["task_type"]),
                   ManipulationType(d["predicted_type"]) if d.get("predicted_type") else None,
                   d.get("noise", {}), result, {k: v for k, v in d.items() if k not in known})


def direction_for_state(normalized_state: float | None) -> int:
    """Open parts in the lower half of their range, close the others."""
    return 1 if normalized_state is None or normalized_state < 0.5 else -1

