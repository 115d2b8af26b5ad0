import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affordkit.core import (
    ARTICULATED_TYPES,
    Intrinsics,
    JointAxis,
    ManipulationType,
    NotARectangle,
    ObjectRecord,
    PartAnnotation,
    Pose6D,
    SceneSample,
    build_manifest,
    canonicalize_box,
    is_canonical_order,
    read_samples,
    sample_from_json,
    sample_to_json,
    validate,
    write_samples,
)
from affordkit.geometry import box_from_center

from oracles import random_rotation


def _part(**kw):
    base = dict(
        part_id="obj/door",
        pose=JointAxis((0, 0, 1), (0, 0.1, 1)),
        part_box=box_from_center((200, 200), 80, 60, 10),
        grasp_box=box_from_center((220, 200), 10, 20, 10),
        manipulation_type=ManipulationType.REVOLUTE_PART,
        description="Open the door of the microwave slightly.",
        joint_state=10.0,
        joint_limits=(0.0, 90.0),
    )
    base.update(kw)
    return PartAnnotation(**base)


def _sample(parts, **kw):
    return SceneSample("s0", Intrinsics.default(), (ObjectRecord("obj", "microwave", tuple(parts)),),
                       448, 448, **kw)


def test_manipulation_type_labels():
    assert {t.label for t in ManipulationType} == {
        "bottle cap", "revolute part", "sliding lid",
        "prismatic part", "freedom object"}
    for t in ManipulationType:
        assert ManipulationType.from_label(t.label) is t
    assert len(ARTICULATED_TYPES) == 4
    assert ManipulationType.REVOLUTE_PART.is_angular and not ManipulationType.PRISMATIC_PART.is_angular


def test_default_intrinsics():
    K = Intrinsics.default()
    assert (K.fx, K.fy, K.cx, K.cy) == (400.0, 400.0, 224.0, 224.0)


def test_pose_rows_layout():
    p = Pose6D((1, 2, 3), np.eye(3))
    assert p.rows()[0] == [1.0, 2.0, 3.0]
    assert Pose6D.from_rows(p.rows()) == p
    with pytest.raises(ValueError):
        Pose6D.from_rows([[0, 0, 0]] * 3)


def test_not_a_rectangle():
    with pytest.raises(NotARectangle):
        canonicalize_box([(0, 0), (2, 0), (2, 1), (0, 3)])


def test_valid_sample_has_no_violations():
    assert validate(_sample([_part()])) == []


def test_validate_reports_each_invariant():
    s = _sample([_part(joint_state=120.0)])
    assert [v.invariant for v in validate(s)] == ["within_limits"]
    s = _sample([_part(functional_box=box_from_center((200, 200), 5, 5, 0))])
    assert "present_iff_freedom_object" in {v.invariant for v in validate(s)}
    s = _sample([_part(pose=Pose6D.identity())])
    assert "articulated_axis" in {v.invariant for v in validate(s)}
    skew = Pose6D((0, 0, 1), [[1, 0.1, 0], [0, 1, 0], [0, 0, 1]])
    tool = _part(manipulation_type=ManipulationType.FREEDOM_OBJECT, pose=skew, joint_state=None,
                 joint_limits=None, functional_box=box_from_center((180, 200), 5, 5, 0))
    assert {v.invariant for v in validate(_sample([tool]))} == {"rotation_orthonormal"}
    s = _sample([_part(pose=JointAxis((0, 0, 1), (0, 0, 1)))])
    assert "axis_length" in {v.invariant for v in validate(s)}
    assert "part_count" in {v.invariant for v in validate(_sample([]))}


def test_validate_flags_order_and_viewport():
    b = box_from_center((200, 200), 80, 60, 10)
    reversed_box = replace(b, vertices=b.vertices[::-1])
    s = _sample([_part(part_box=reversed_box)])
    assert [v.path for v in validate(s)] == ["objects[0].parts[0].part_box"]
    far = box_from_center((1000, 200), 10, 10, 0)
    assert {v.invariant for v in validate(_sample([_part(grasp_box=far)]))} == {"viewport"}


def test_json_round_trip(tmp_path, corpus):
    for s in corpus[:10]:
        assert sample_from_json(sample_to_json(s)) == s
    path = tmp_path / "c.jsonl"
    assert write_samples(path, corpus) == len(corpus)
    assert read_samples(path) == corpus


def test_manifest_counts(corpus):
    m = build_manifest(corpus)
    assert m["total_samples"] == len(corpus)
    assert sum(v["samples"] for v in m["splits"].values()) == len(corpus)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pose_inverse_and_composition(seed):
    rng = np.random.default_rng(seed)
    a = Pose6D(rng.normal(size=3), random_rotation(rng))
    b = Pose6D(rng.normal(size=3), random_rotation(rng))
    assert a.is_rigid()
    np.testing.assert_allclose((a @ a.inverse()).matrix, np.eye(4), atol=1e-12)
    pts = rng.normal(size=(5, 3))
    np.testing.assert_allclose((a @ b).apply(pts), a.apply(b.apply(pts)), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 400), st.floats(0, 400), st.floats(1, 100), st.floats(1, 100), st.floats(-360, 360),
       st.permutations(range(4)))
def test_canonicalize_is_order_independent(cx, cy, w, h, angle, perm):
    t = math.radians(angle)
    c, s = math.cos(t), math.sin(t)
    pts = [(cx + c * dx - s * dy, cy + s * dx + c * dy)
           for dx, dy in ((-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2))]
    a = canonicalize_box(pts)
    b = canonicalize_box([pts[i] for i in perm])
    assert a == b
    assert is_canonical_order(a)
    assert a.area == pytest.approx(w * h, rel=1e-9)
