import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affordkit.articulation import (
    CycleDetected,
    DanglingReference,
    Joint,
    KinematicTree,
    LimitOrder,
    Link,
    ParseError,
    StateOutOfLimits,
    Unclassifiable,
    classify_manipulation_type,
    forward_kinematics,
    forward_kinematics_matrices,
    joint_axis_world,
    parse_urdf,
    write_urdf,
)
from affordkit.core import ManipulationType, Pose6D
from affordkit.datagen import ARTICULATED_CATEGORIES, build_articulated

from oracles import random_rotation, rodrigues, rot_z

DOOR = """
<robot name="cabinet">
  <link name="body" role="body"/>
  <link name="door" role="edge">
    <points>0.1 0 0  0.2 0.1 0</points>
  </link>
  <joint name="hinge" type="revolute">
    <parent link="body"/>
    <child link="door"/>
    <origin xyz="0.5 0 0" rpy="0 0 0"/>
    <axis xyz="0 0 1"/>
    <limit lower="0" upper="90"/>
  </joint>
</robot>
"""


def single(kind, **kw):
    j = Joint("j", kind, "base", "tip", **kw)
    return KinematicTree("t", {"base": Link("base"), "tip": Link("tip")}, {"j": j}, "base")


def test_parse_starts_at_lower_limit():
    t = parse_urdf(DOOR)
    assert t.joint_states == {"hinge": 0.0}
    assert t.links["door"].points.shape == (2, 3)
    assert t.links["door"].roles == {"edge"}


def test_missing_link_is_dangling():
    with pytest.raises(DanglingReference):
        parse_urdf(DOOR.replace('<child link="door"/>', '<child link="lid"/>'))


def test_parse_errors():
    with pytest.raises(LimitOrder):
        parse_urdf(DOOR.replace('upper="90"', 'upper="-5"'))
    with pytest.raises(ParseError) as e:
        parse_urdf(DOOR.replace("<axis", "<mesh/><axis"))
    assert e.value.line > 0
    with pytest.raises(ParseError):
        parse_urdf(DOOR.replace('type="revolute"', 'type="planar"'))
    with pytest.raises(ParseError):
        parse_urdf("<robot name='x'><link name='a'>")
    with pytest.raises(ParseError):
        parse_urdf(DOOR.replace('role="edge"', 'role="wheel"'))


def test_lenient_mode_skips_unknown_elements():
    t = parse_urdf(DOOR.replace("<axis", "<mesh file='x'/><axis"), strict=False)
    assert len(t.warnings) == 1 and "mesh" in t.warnings[0]


def test_cycle_detected():
    extra = ('<joint name="back" type="fixed"><parent link="door"/><child link="body"/></joint></robot>')
    with pytest.raises(CycleDetected):
        parse_urdf(DOOR.replace("</robot>", extra))


def test_state_out_of_limits():
    t = parse_urdf(DOOR)
    with pytest.raises(StateOutOfLimits):
        t.set_state("hinge", 91.0)


@pytest.mark.parametrize("category", ARTICULATED_CATEGORIES)
def test_write_parse_identity(category):
    t = build_articulated(category, np.random.default_rng(3))
    assert parse_urdf(write_urdf(t)) == KinematicTree(t.name, t.links, t.joints, t.root)


def test_classification_table_is_total():
    table = {
        ("screw", frozenset()): ManipulationType.BOTTLE_CAP,
        ("screw", frozenset({"lid"})): ManipulationType.BOTTLE_CAP,
        ("revolute", frozenset({"cap"})): ManipulationType.BOTTLE_CAP,
        ("revolute", frozenset({"edge"})): ManipulationType.REVOLUTE_PART,
        ("revolute", frozenset()): ManipulationType.REVOLUTE_PART,
        ("prismatic", frozenset({"lid"})): ManipulationType.SLIDING_LID,
        ("prismatic", frozenset({"handle"})): ManipulationType.PRISMATIC_PART,
        ("prismatic", frozenset()): ManipulationType.PRISMATIC_PART,
    }
    for (kind, roles), expected in table.items():
        j = Joint("j", kind, "a", "b", lower=0, upper=1)
        assert classify_manipulation_type(j, Link("b", roles=roles)) is expected
    with pytest.raises(Unclassifiable):
        classify_manipulation_type(Joint("j", "fixed", "a", "b"), Link("b"))


def test_chain_matches_hand_composition():
    links = {n: Link(n) for n in ("a", "b", "c")}
    j1 = Joint("j1", "revolute", "a", "b", axis=(0, 0, 1), origin_xyz=(1, 0, 0), lower=0, upper=90)
    j2 = Joint("j2", "prismatic", "b", "c", axis=(1, 0, 0), origin_xyz=(0, 0.5, 0), lower=0, upper=1)
    t = KinematicTree("chain", links, {"j1": j1, "j2": j2}, "a", {"j1": 30.0, "j2": 0.2})
    T1 = np.eye(4)
    T1[:3, 3] = (1, 0, 0)
    R = np.eye(4)
    R[:3, :3] = rot_z(30)
    T2 = np.eye(4)
    T2[:3, 3] = (0, 0.5, 0)
    P = np.eye(4)
    P[:3, 3] = (0.2, 0, 0)
    expected = T1 @ R @ T2 @ P
    np.testing.assert_allclose(forward_kinematics_matrices(t)["c"], expected, atol=1e-12)


def test_joint_axis_world_segment():
    t = parse_urdf(DOOR)
    ax = joint_axis_world(t, "hinge")
    np.testing.assert_allclose(np.subtract(ax.p1, ax.p0), [0, 0, 0.1], atol=1e-15)
    np.testing.assert_allclose(ax.p0, [0.5, 0, 0])


def fk_closed_form_errors() -> dict[str, float]:
    """Max deviation of single-joint FK from its closed form, per joint kind."""
    out = {}
    t = single("revolute", axis=(0, 0, 1), lower=0, upper=180)
    t.set_state("j", 90.0)
    exp = np.eye(4)
    exp[:3, :3] = [[0, -1, 0], [1, 0, 0], [0, 0, 1]]
    out["revolute 90 deg"] = float(np.abs(forward_kinematics_matrices(t)["tip"] - exp).max())
    t = single("prismatic", axis=(0, 1, 0), lower=0, upper=0.5)
    t.set_state("j", 0.2)
    exp = np.eye(4)
    exp[1, 3] = 0.2
    out["prismatic 0.2 m"] = float(np.abs(forward_kinematics_matrices(t)["tip"] - exp).max())
    t = single("screw", axis=(0, 0, 1), lower=0, upper=720, screw_pitch=0.008)
    t.set_state("j", 360.0)
    exp = np.eye(4)
    exp[2, 3] = 0.008
    out["screw 360 deg / 8 mm"] = float(np.abs(forward_kinematics_matrices(t)["tip"] - exp).max())
    return out


def fk_equivariance_error(n: int = 100, seed: int = 0) -> float:
    """Max deviation of FK(T * root) from T * FK(root) over random rigid T."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    categories = list(ARTICULATED_CATEGORIES)
    for i in range(n):
        tree = build_articulated(categories[i % len(categories)], rng)
        for j in tree.movable_joints():
            tree.set_state(j.name, rng.uniform(j.lower, j.upper))
        T = Pose6D(rng.normal(size=3), random_rotation(rng))
        base = forward_kinematics_matrices(tree, Pose6D.identity())
        moved = forward_kinematics_matrices(tree, T)
        for name in base:
            worst = max(worst, float(np.abs(moved[name] - T.matrix @ base[name]).max()))
    return worst


def test_fk_closed_forms():
    for name, err in fk_closed_form_errors().items():
        assert err <= 1e-9, name


def test_fk_equivariance_small():
    assert fk_equivariance_error(n=14) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda a: np.linalg.norm(a) > 1e-3), st.floats(-360, 360))
def test_revolute_motion_is_rodrigues(axis, angle):
    j = Joint("j", "revolute", "a", "b", axis=axis, lower=-360, upper=360)
    np.testing.assert_allclose(j.motion(angle)[:3, :3], rodrigues(axis, angle), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 720))
def test_screw_rise_is_linear(q):
    t = single("screw", axis=(1, 0, 0), lower=0, upper=720, screw_pitch=0.01)
    t.set_state("j", q)
    pose = forward_kinematics(t)["tip"]
    assert pose.position[0] == pytest.approx(0.01 * q / 360.0, abs=1e-12)
    assert pose.is_rigid(1e-9)
