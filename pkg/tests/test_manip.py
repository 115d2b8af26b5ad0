import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affordkit.articulation import Joint, KinematicTree, Link, joint_axis_world
from affordkit.core import Intrinsics, JointAxis, ManipulationType, Pose6D, SparseDepth
from affordkit.geometry import box_from_center
from affordkit.manip import (
    MAX_STEP,
    PHASES,
    ConstraintMismatch,
    DegenerateAxis,
    EpisodeLog,
    EpisodeResult,
    NoDepthInBox,
    PlanParams,
    Trajectory,
    direction_for_state,
    execute,
    execute_tool,
    grasp_point,
    measure_success,
    plan_trajectory,
)

from oracles import random_rotation

K = Intrinsics.default()
MT = ManipulationType


def drawer_tree(root_pose=Pose6D.identity(), extent=0.3):
    """A drawer sliding along +x whose front face holds points around (0, 0, 1)."""
    face = np.array([[0.0, y, z] for y in np.linspace(-0.1, 0.1, 9) for z in np.linspace(0.9, 1.1, 9)])
    links = {"body": Link("body"), "drawer": Link("drawer", face, {"handle"})}
    j = Joint("slide", "prismatic", "body", "drawer", axis=(1, 0, 0), lower=0, upper=extent)
    return KinematicTree("d", links, {"slide": j}, "body", root_pose=root_pose)


def door_tree(root_pose=Pose6D.identity()):
    """A door hinged about the z axis through the origin; panel along +x."""
    panel = np.array([[x, 0.0, z] for x in np.linspace(0.05, 0.4, 15) for z in np.linspace(0.9, 1.1, 5)])
    links = {"body": Link("body"), "door": Link("door", panel, {"edge"})}
    j = Joint("hinge", "revolute", "body", "door", axis=(0, 0, 1), lower=0, upper=120)
    return KinematicTree("door", links, {"hinge": j}, "body", root_pose=root_pose)


def cap_tree():
    rim = np.array([[0.02 * math.cos(a), 0.02 * math.sin(a), 0.3] for a in np.linspace(0, 2 * math.pi, 24)])
    links = {"bottle": Link("bottle"), "cap": Link("cap", rim, {"cap"})}
    j = Joint("twist", "screw", "bottle", "cap", axis=(0, 0, 1), lower=0, upper=720, screw_pitch=0.008)
    return KinematicTree("b", links, {"twist": j}, "bottle")


def manipulate_end(traj):
    return traj.phase("manipulate")[-1].t


def test_prismatic_line():
    traj = plan_trajectory(MT.PRISMATIC_PART, JointAxis((0, 0, 1), (1, 0, 1)), (0, 0, 1))
    np.testing.assert_allclose(manipulate_end(traj), [0.15, 0, 1], atol=1e-12)
    man = traj.phase("manipulate")
    assert all(np.allclose(w.R, man[0].R) for w in man)
    assert traj.step_lengths().max() <= MAX_STEP + 1e-9


def test_revolute_quarter_turn():
    traj = plan_trajectory(MT.REVOLUTE_PART, JointAxis((0, 0, 1), (0, 0, 1.1)), (0.3, 0, 1),
                           PlanParams(revolute_sweep_deg=90))
    np.testing.assert_allclose(manipulate_end(traj), [0, 0.3, 1], atol=1e-12)


def test_bottle_cap_helix():
    grasp = np.array([0.02, 0.0, 0.3])
    traj = plan_trajectory(MT.BOTTLE_CAP, JointAxis((0, 0, 0), (0, 0, 0.1)), grasp)
    end = traj.phase("manipulate")[-1]
    np.testing.assert_allclose(end.t, grasp + [0, 0, 0.008], atol=1e-12)
    R0 = traj.phase("grasp")[0].R
    np.testing.assert_allclose(end.R, R0, atol=1e-12)


def test_sliding_lid_projects_onto_plane():
    traj = plan_trajectory(MT.SLIDING_LID, JointAxis((0, 0, 1), (0.1, 0, 1.1)), (0, 0, 1),
                           PlanParams(lid_normal=(0, 0, 1)))
    np.testing.assert_allclose(manipulate_end(traj), [0.10, 0, 1], atol=1e-12)
    with pytest.raises(DegenerateAxis):
        plan_trajectory(MT.SLIDING_LID, JointAxis((0, 0, 1), (0, 0, 1.1)), (0, 0, 1),
                        PlanParams(lid_normal=(0, 0, 1)))


def test_phase_order_and_approach_standoff():
    traj = plan_trajectory(MT.PRISMATIC_PART, JointAxis((0, 0, 1), (1, 0, 1)), (0, 0, 1))
    order = [p for i, p in enumerate(traj.phases) if i == 0 or traj.phases[i - 1] != p]
    assert order == list(PHASES)
    assert np.linalg.norm(traj.waypoints[0].t - np.array([0, 0, 1])) == pytest.approx(0.08)


def test_constraint_errors():
    with pytest.raises(ConstraintMismatch):
        plan_trajectory(MT.REVOLUTE_PART, Pose6D.identity(), (0, 0, 1))
    with pytest.raises(ConstraintMismatch):
        plan_trajectory(MT.FREEDOM_OBJECT, JointAxis((0, 0, 1), (1, 0, 1)), (0, 0, 1))
    with pytest.raises(DegenerateAxis):
        plan_trajectory(MT.PRISMATIC_PART, JointAxis((0, 0, 1), (0, 0, 1)), (0, 0, 1))


def test_trajectory_validation():
    a, b = Pose6D((0, 0, 0), np.eye(3)), Pose6D((0.1, 0, 0), np.eye(3))
    with pytest.raises(ValueError):
        Trajectory((a, b), ("approach", "grasp"))
    with pytest.raises(ValueError):
        Trajectory((a,), ("approach",))
    with pytest.raises(ValueError):
        Trajectory((a, a), ("approach", "wiggle"))
    t = plan_trajectory(MT.PRISMATIC_PART, JointAxis((0, 0, 1), (1, 0, 1)), (0, 0, 1))
    assert Trajectory.from_dict(t.to_dict()) == t


def test_drawer_half_range():
    tree = drawer_tree()
    traj = plan_trajectory(MT.PRISMATIC_PART, joint_axis_world(tree, "slide"), (0, 0, 1))
    r = execute(tree, "slide", traj)
    assert r.delta_change == pytest.approx(0.5, abs=1e-12)
    assert r.success and r.failure_reason is None
    assert tree.joint_states["slide"] == pytest.approx(0.15)


def test_orthogonal_motion_detaches():
    tree = drawer_tree()
    traj = plan_trajectory(MT.PRISMATIC_PART, JointAxis((0, 0, 1), (0, 1, 1)), (0, 0, 1))
    r = execute(tree, "slide", traj)
    assert not r.success and r.failure_reason == "detached"
    assert r.delta_change == pytest.approx(0.0, abs=1e-12)


def test_far_grasp_fails_attachment():
    tree = drawer_tree()
    traj = plan_trajectory(MT.PRISMATIC_PART, joint_axis_world(tree, "slide"), (-0.1, 0, 1))
    r = execute(tree, "slide", traj)
    assert not r.success and r.failure_reason == "attachment_failed"


def test_door_and_cap_execute():
    tree = door_tree()
    traj = plan_trajectory(MT.REVOLUTE_PART, joint_axis_world(tree, "hinge"), (0.4, 0, 1))
    r = execute(tree, "hinge", traj)
    assert r.success and r.final_state == pytest.approx(45.0, abs=1e-6)
    tree = cap_tree()
    traj = plan_trajectory(MT.BOTTLE_CAP, joint_axis_world(tree, "twist"), (0.02, 0, 0.3))
    r = execute(tree, "twist", traj)
    assert r.success and r.final_state == pytest.approx(360.0, abs=1e-6)


def test_measure_success_examples():
    def res(dc):
        return EpisodeResult(0, dc, dc, False)

    assert measure_success(res(0.15))
    assert not measure_success(res(0.0))
    assert measure_success(res(0.1))
    with pytest.raises(ValueError):
        measure_success(res(0.2), delta=0.0)


def test_exact_threshold_episode_succeeds():
    tree = drawer_tree(extent=1.5)
    traj = plan_trajectory(MT.PRISMATIC_PART, joint_axis_world(tree, "slide"), (0, 0, 1))
    r = execute(tree, "slide", traj)
    assert r.delta_change == pytest.approx(0.1, abs=1e-12)
    assert measure_success(EpisodeResult(0, 0.1, 0.1, False))
    assert r.success


def test_absolute_mode():
    r = EpisodeResult(0.0, 45.0, 0.375, True, joint_range=120.0, angular=True)
    assert measure_success(r, delta=0.5, mode="absolute") == (math.radians(45) >= 0.5)


def test_grasp_point_examples():
    box = box_from_center((224, 224), 20, 20, 0)
    np.testing.assert_allclose(grasp_point(box, SparseDepth(((224.0, 224.0, 1.0),)), K), [0, 0, 1])
    pts = [(u, v, 0.8) for u in range(200, 250, 5) for v in range(200, 250, 5)]
    assert grasp_point(box, SparseDepth(tuple(pts)), K)[2] == pytest.approx(0.8)
    with pytest.raises(NoDepthInBox):
        grasp_point(box, SparseDepth(((10.0, 10.0, 1.0),)), K)


def test_grasp_point_near_part(corpus):
    from affordkit.datagen.generate import VISIBLE_GRASP_DISTANCE

    n = 0
    for s in corpus:
        for _, p in s.iter_parts():
            g = grasp_point(p.grasp_box, s.depth, s.intrinsics)
            assert np.all(np.isfinite(g)) and g[2] > 0
            n += 1
    assert n > 0 and VISIBLE_GRASP_DISTANCE == 0.02


def test_tool_reaches_target():
    pts = np.array([[x, 0, 1] for x in np.linspace(-0.1, 0.1, 21)])
    fp = np.array([0.1, 0, 1])
    target = fp + [0.15, 0, 0]
    pose = Pose6D((0, 0, 1), np.eye(3))
    traj = plan_trajectory(MT.FREEDOM_OBJECT, pose, (0, 0, 1),
                           PlanParams(function_point=tuple(fp), target=tuple(target)))
    r = execute_tool(pts, fp, traj, target)
    assert r.success and r.distance_to_target == pytest.approx(0.0, abs=1e-9)
    miss = execute_tool(pts, fp, traj, target + [0, 0.2, 0])
    assert not miss.success and miss.failure_reason == "missed_target"


def test_direction_for_state():
    assert direction_for_state(None) == 1
    assert direction_for_state(0.2) == 1
    assert direction_for_state(0.8) == -1


def test_episode_log_round_trip():
    import json

    r = EpisodeResult(0.0, 0.15, 0.5, True, None, 0.3, False)
    log = EpisodeLog("s", "o", "o/p", "train", "safe", MT.PRISMATIC_PART, MT.PRISMATIC_PART, {}, r, {"x": 1})
    assert EpisodeLog.from_dict(json.loads(log.to_json())) == log


axes = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(lambda a: np.linalg.norm(a) > 0.05)
points = st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.5, 1.5))


def _line_distance(p, p0, d):
    r = p - p0
    return float(np.linalg.norm(r - (r @ d) * d))


@settings(max_examples=100, deadline=None)
@given(axes, points, points, st.floats(5, 180), st.sampled_from([1, -1]))
def test_revolute_waypoints_keep_radius(d, p0, grasp, sweep, sgn):
    ax = JointAxis(p0, np.add(p0, 0.1 * np.asarray(d) / np.linalg.norm(d)))
    traj = plan_trajectory(MT.REVOLUTE_PART, ax, grasp, PlanParams(revolute_sweep_deg=sweep, direction=sgn))
    r0 = _line_distance(np.asarray(grasp), ax.origin, ax.direction)
    for w in traj.phase("manipulate"):
        assert abs(_line_distance(w.t, ax.origin, ax.direction) - r0) < 1e-9
    assert traj.step_lengths().max() <= MAX_STEP + 1e-9


@settings(max_examples=100, deadline=None)
@given(axes, points, points, st.floats(0.01, 0.5))
def test_prismatic_waypoints_parallel(d, p0, grasp, extent):
    ax = JointAxis(p0, np.add(p0, np.asarray(d)))
    traj = plan_trajectory(MT.PRISMATIC_PART, ax, grasp, PlanParams(prismatic_extent=extent))
    for w in traj.phase("manipulate"):
        assert np.linalg.norm(np.cross(w.t - np.asarray(grasp), ax.direction)) < 1e-9
    assert np.linalg.norm(manipulate_end(traj) - grasp) == pytest.approx(extent, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(axes, points, points, st.floats(30, 720), st.floats(0.001, 0.02))
def test_cap_waypoints_on_helix(d, p0, grasp, sweep, pitch):
    ax = JointAxis(p0, np.add(p0, np.asarray(d)))
    g = np.asarray(grasp)
    traj = plan_trajectory(MT.BOTTLE_CAP, ax, g, PlanParams(cap_sweep_deg=sweep, pitch=pitch))
    r0 = _line_distance(g, ax.origin, ax.direction)
    h0 = (g - ax.origin) @ ax.direction
    man = traj.phase("manipulate")
    for k, w in enumerate(man, start=1):
        a = sweep * k / len(man)
        assert abs(_line_distance(w.t, ax.origin, ax.direction) - r0) < 1e-9
        assert abs((w.t - ax.origin) @ ax.direction - h0 - pitch * a / 360.0) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["drawer", "door"]))
def test_execution_is_frame_equivariant(seed, kind):
    rng = np.random.default_rng(seed)
    T = Pose6D(rng.normal(size=3), random_rotation(rng))
    build, joint, grasp, mt = ((drawer_tree, "slide", np.array([0, 0, 1.0]), MT.PRISMATIC_PART) if kind == "drawer"
                               else (door_tree, "hinge", np.array([0.4, 0, 1.0]), MT.REVOLUTE_PART))
    a = build()
    b = build(T)
    ra = execute(a, joint, plan_trajectory(mt, joint_axis_world(a, joint), grasp))
    rb = execute(b, joint, plan_trajectory(mt, joint_axis_world(b, joint), T.apply(grasp[None])[0]))
    assert ra.success == rb.success and ra.failure_reason == rb.failure_reason
    assert abs(ra.delta_change - rb.delta_change) < 1e-9
    assert abs(ra.final_state - rb.final_state) < 1e-9
