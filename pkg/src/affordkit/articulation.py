"""URDF-subset kinematic trees, forward kinematics and manipulation typing.

The accepted document grammar is described in ``docs/urdf_subset.md``. It
differs from stock URDF in three ways: joint limits of revolute and screw
joints are in degrees, a ``screw`` joint kind with a ``pitch`` attribute
(meters per revolution) couples rotation and translation, and links carry
surface samples in a ``<points>`` element plus a ``role`` attribute.
"""

from __future__ import annotations

import logging
import math
import re
import xml.parsers.expat
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import JointAxis, ManipulationType, Pose6D
from .errors import AffordkitError

log = logging.getLogger(__name__)

JOINT_KINDS = ("revolute", "prismatic", "screw", "fixed")
ROLE_TAGS = frozenset({"handle", "lid", "cap", "body", "edge"})
DEFAULT_SCREW_PITCH = 0.008  # m per revolution
AXIS_SEGMENT = 0.1  # m
LIMIT_TOL = 1e-9


class ParseError(AffordkitError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class CycleDetected(AffordkitError):
    pass


class DanglingReference(AffordkitError):
    def __init__(self, name: str):
        super().__init__(f"reference to undefined link {name!r}")
        self.name = name


class LimitOrder(AffordkitError):
    def __init__(self, name: str):
        super().__init__(f"joint {name!r} has lower > upper")
        self.name = name


class StateOutOfLimits(AffordkitError):
    def __init__(self, joint: str, value: float, lower: float, upper: float):
        super().__init__(f"joint {joint!r} state {value} outside [{lower}, {upper}]")
        self.joint = joint


class Unclassifiable(AffordkitError):
    pass


# --------------------------------------------------------------------------
# rotations


def axis_angle_matrix(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues' rotation matrix about a unit ``axis``."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle_rad) * K + (1.0 - math.cos(angle_rad)) * (K @ K)


def rpy_matrix(rpy) -> np.ndarray:
    """URDF fixed-axis roll/pitch/yaw: ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    r, p, y = (float(a) for a in rpy)
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def matrix_rpy(R) -> tuple[float, float, float]:
    R = np.asarray(R, dtype=float)
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    if abs(math.cos(pitch)) > 1e-9:
        roll = math.atan2(R[2, 1], R[2, 2])
        yaw = math.atan2(R[1, 0], R[0, 0])
    else:
        roll = math.atan2(-R[1, 2], R[1, 1])
        yaw = 0.0
    return (roll, pitch, yaw)


# --------------------------------------------------------------------------
# tree types


@dataclass(frozen=True)
class Joint:
    name: str
    kind: str
    parent: str
    child: str
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    origin_xyz: tuple[float, float, float] = (0.0, 0.0, 0.0)
    origin_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    lower: float = 0.0
    upper: float = 0.0
    screw_pitch: float | None = None

    def __post_init__(self):
        if self.kind not in JOINT_KINDS:
            raise ValueError(f"unknown joint kind {self.kind!r}")
        a = np.asarray(self.axis, dtype=float)
        n = float(np.linalg.norm(a))
        if n == 0:
            raise ValueError(f"joint {self.name!r} has a zero axis")
        if abs(n - 1.0) > 1e-6:
            a = a / n
        object.__setattr__(self, "axis", tuple(float(x) for x in a))
        object.__setattr__(self, "origin_xyz", tuple(float(x) for x in self.origin_xyz))
        object.__setattr__(self, "origin_rpy", tuple(float(x) for x in self.origin_rpy))
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if self.kind == "screw" and self.screw_pitch is None:
            object.__setattr__(self, "screw_pitch", DEFAULT_SCREW_PITCH)
        if self.screw_pitch is not None:
            if not self.screw_pitch > 0:
                raise ValueError(f"joint {self.name!r} needs a positive screw pitch")
            object.__setattr__(self, "screw_pitch", float(self.screw_pitch))

    @property
    def origin(self) -> Pose6D:
        return Pose6D(self.origin_xyz, rpy_matrix(self.origin_rpy))

    @property
    def range(self) -> float:
        return self.upper - self.lower

    @property
    def is_angular(self) -> bool:
        return self.kind in ("revolute", "screw")

    def motion(self, state: float) -> np.ndarray:
        """4x4 transform produced by the joint at ``state`` (deg or m)."""
        T = np.eye(4)
        a = np.asarray(self.axis)
        if self.kind == "revolute":
            T[:3, :3] = axis_angle_matrix(a, math.radians(state))
        elif self.kind == "prismatic":
            T[:3, 3] = state * a
        elif self.kind == "screw":
            T[:3, :3] = axis_angle_matrix(a, math.radians(state))
            T[:3, 3] = (self.screw_pitch * state / 360.0) * a
        return T


@dataclass(eq=False)
class Link:
    name: str
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    roles: frozenset = frozenset()

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.roles = frozenset(self.roles)

    def __eq__(self, other):
        if not isinstance(other, Link):
            return NotImplemented
        return (
            self.name == other.name
            and self.roles == other.roles
            and self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
        )


@dataclass(eq=False)
class KinematicTree:
    name: str
    links: dict[str, Link]
    joints: dict[str, Joint]
    root: str
    joint_states: dict[str, float] = field(default_factory=dict)
    root_pose: Pose6D = field(default_factory=Pose6D.identity)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        check_tree(self)
        for j in self.joints.values():
            if j.kind != "fixed":
                self.joint_states.setdefault(j.name, j.lower)
        for name, value in list(self.joint_states.items()):
            self.set_state(name, value)

    def __eq__(self, other):
        if not isinstance(other, KinematicTree):
            return NotImplemented
        return (
            self.name == other.name
            and self.root == other.root
            and self.links == other.links
            and self.joints == other.joints
            and self.joint_states == other.joint_states
            and self.root_pose == other.root_pose
        )

    def set_state(self, joint: str, value: float) -> None:
        j = self.joints[joint]
        value = float(value)
        if not (j.lower - LIMIT_TOL <= value <= j.upper + LIMIT_TOL):
            raise StateOutOfLimits(joint, value, j.lower, j.upper)
        self.joint_states[joint] = min(max(value, j.lower), j.upper)

    def parent_joint(self, link: str) -> Joint | None:
        for j in self.joints.values():
            if j.child == link:
                return j
        return None

    def children(self, link: str) -> list[Joint]:
        return [j for j in self.joints.values() if j.parent == link]

    def movable_joints(self) -> list[Joint]:
        return [j for j in self.joints.values() if j.kind != "fixed"]

    def rigid_group(self, link: str) -> list[str]:
        """``link`` plus every descendant attached through fixed joints only."""
        out = [link]
        stack = [link]
        while stack:
            cur = stack.pop()
            for j in self.children(cur):
                if j.kind == "fixed":
                    out.append(j.child)
                    stack.append(j.child)
        return out

    def copy(self) -> "KinematicTree":
        return KinematicTree(
            self.name,
            dict(self.links),
            dict(self.joints),
            self.root,
            dict(self.joint_states),
            self.root_pose,
        )


def check_tree(tree: KinematicTree) -> None:
    """Raise if the tree has dangling references, bad limits or is not a tree."""
    for j in tree.joints.values():
        for ref in (j.parent, j.child):
            if ref not in tree.links:
                raise DanglingReference(ref)
        if j.lower > j.upper:
            raise LimitOrder(j.name)
    if tree.root not in tree.links:
        raise DanglingReference(tree.root)
    parents: dict[str, str] = {}
    for j in tree.joints.values():
        if j.child in parents or j.child == tree.root:
            raise CycleDetected(f"link {j.child!r} has more than one parent")
        parents[j.child] = j.parent
    seen = {tree.root}
    frontier = [tree.root]
    while frontier:
        cur = frontier.pop()
        for j in tree.joints.values():
            if j.parent == cur and j.child not in seen:
                seen.add(j.child)
                frontier.append(j.child)
    missing = set(tree.links) - seen
    if missing:
        raise CycleDetected(f"links not reachable from root {tree.root!r}: {sorted(missing)}")


# --------------------------------------------------------------------------
# parsing


_ALLOWED_CHILDREN = {
    None: {"robot"},
    "robot": {"link", "joint"},
    "link": {"points"},
    "joint": {"parent", "child", "origin", "axis", "limit"},
    "points": set(),
    "parent": set(),
    "child": set(),
    "origin": set(),
    "axis": set(),
    "limit": set(),
}


def _floats(text: str, n: int | None, where: tuple[int, int], what: str) -> list[float]:
    try:
        vals = [float(t) for t in re.split(r"[\s,;]+", text.strip()) if t]
    except ValueError:
        raise ParseError(*where, f"{what}: expected numbers, got {text!r}") from None
    if any(not math.isfinite(v) for v in vals):
        raise ParseError(*where, f"{what}: non-finite value")
    if n is not None and len(vals) != n:
        raise ParseError(*where, f"{what}: expected {n} numbers, got {len(vals)}")
    return vals


class _Builder:
    def __init__(self, parser, strict: bool):
        self.p = parser
        self.strict = strict
        self.stack: list[str | None] = []
        self.skip_depth = 0
        self.robot_name = None
        self.links: dict[str, dict] = {}
        self.joints: dict[str, dict] = {}
        self.cur = None
        self.text: list[str] = []
        self.warnings: list[str] = []

    def pos(self) -> tuple[int, int]:
        return (self.p.CurrentLineNumber, self.p.CurrentColumnNumber + 1)

    def start(self, name, attrs):
        if self.skip_depth:
            self.skip_depth += 1
            return
        parent = self.stack[-1] if self.stack else None
        if name not in _ALLOWED_CHILDREN.get(parent, set()):
            if self.strict or parent is None:
                raise ParseError(*self.pos(), f"unexpected element <{name}> inside <{parent or 'document'}>")
            msg = f"line {self.pos()[0]}: skipped unsupported element <{name}>"
            self.warnings.append(msg)
            log.warning(msg)
            self.skip_depth = 1
            return
        self.stack.append(name)
        where = self.pos()
        if name == "robot":
            self.robot_name = attrs.get("name", "")
        elif name == "link":
            lname = self._req(attrs, "name")
            if lname in self.links:
                raise ParseError(*where, f"duplicate link {lname!r}")
            roles = frozenset(t for t in re.split(r"[\s,]+", attrs.get("role", "")) if t)
            bad = roles - ROLE_TAGS
            if bad:
                raise ParseError(*where, f"unknown role tags {sorted(bad)}")
            self.cur = {"name": lname, "roles": roles, "points": [], "where": where}
            self.links[lname] = self.cur
        elif name == "joint":
            jname = self._req(attrs, "name")
            kind = self._req(attrs, "type")
            if kind not in JOINT_KINDS:
                raise ParseError(*where, f"unsupported joint type {kind!r}")
            if jname in self.joints:
                raise ParseError(*where, f"duplicate joint {jname!r}")
            pitch = attrs.get("pitch")
            self.cur = {"name": jname, "kind": kind, "where": where,
                        "pitch": _floats(pitch, 1, where, "pitch")[0] if pitch is not None else None}
            self.joints[jname] = self.cur
        elif name in ("parent", "child"):
            self.cur[name] = self._req(attrs, "link")
        elif name == "origin":
            self.cur["xyz"] = _floats(attrs.get("xyz", "0 0 0"), 3, where, "origin xyz")
            self.cur["rpy"] = _floats(attrs.get("rpy", "0 0 0"), 3, where, "origin rpy")
        elif name == "axis":
            self.cur["axis"] = _floats(self._req(attrs, "xyz"), 3, where, "axis xyz")
        elif name == "limit":
            self.cur["lower"] = _floats(self._req(attrs, "lower"), 1, where, "limit lower")[0]
            self.cur["upper"] = _floats(self._req(attrs, "upper"), 1, where, "limit upper")[0]
        elif name == "points":
            self.text = []

    def end(self, name):
        if self.skip_depth:
            self.skip_depth -= 1
            return
        self.stack.pop()
        if name == "points":
            vals = _floats("".join(self.text), None, self.pos(), "points")
            if len(vals) % 3:
                raise ParseError(*self.pos(), "points: count is not a multiple of 3")
            self.cur["points"].extend(vals)
            self.text = []

    def chars(self, data):
        if self.skip_depth:
            return
        if self.stack and self.stack[-1] == "points":
            self.text.append(data)
        elif data.strip():
            raise ParseError(*self.pos(), f"unexpected text {data.strip()[:20]!r}")

    def _req(self, attrs, key):
        if key not in attrs:
            raise ParseError(*self.pos(), f"missing attribute {key!r}")
        return attrs[key]


def parse_urdf(text: str, strict: bool = True) -> KinematicTree:
    """Parse a URDF-subset document into a :class:`KinematicTree`.

    In lenient mode (``strict=False``) unknown elements are skipped and
    recorded in ``tree.warnings``. Joint states start at each lower limit.
    """
    parser = xml.parsers.expat.ParserCreate()
    b = _Builder(parser, strict)
    parser.StartElementHandler = b.start
    parser.EndElementHandler = b.end
    parser.CharacterDataHandler = b.chars
    try:
        parser.Parse(text, True)
    except xml.parsers.expat.ExpatError as exc:
        raise ParseError(exc.lineno, exc.offset + 1, xml.parsers.expat.ErrorString(exc.code)) from None
    if b.robot_name is None:
        raise ParseError(1, 1, "document has no <robot> element")
    if not b.links:
        raise ParseError(1, 1, "robot has no links")

    links = {n: Link(n, np.array(d["points"], dtype=float).reshape(-1, 3), d["roles"]) for n, d in b.links.items()}
    joints = {}
    for n, d in b.joints.items():
        for key in ("parent", "child"):
            if key not in d:
                raise ParseError(*d["where"], f"joint {n!r} lacks <{key}>")
        for key in ("parent", "child"):
            if d[key] not in links:
                raise DanglingReference(d[key])
        if d["kind"] != "fixed" and ("lower" not in d or "upper" not in d):
            raise ParseError(*d["where"], f"joint {n!r} lacks <limit>")
        if d.get("lower", 0.0) > d.get("upper", 0.0):
            raise LimitOrder(n)
        if d["pitch"] is not None and d["kind"] != "screw":
            raise ParseError(*d["where"], "pitch is only valid on screw joints")
        try:
            joints[n] = Joint(
                name=n,
                kind=d["kind"],
                parent=d["parent"],
                child=d["child"],
                axis=tuple(d.get("axis", (1.0, 0.0, 0.0))),
                origin_xyz=tuple(d.get("xyz", (0.0, 0.0, 0.0))),
                origin_rpy=tuple(d.get("rpy", (0.0, 0.0, 0.0))),
                lower=d.get("lower", 0.0),
                upper=d.get("upper", 0.0),
                screw_pitch=d["pitch"],
            )
        except ValueError as exc:
            raise ParseError(*d["where"], str(exc)) from None
    children = {j.child for j in joints.values()}
    roots = [n for n in links if n not in children]
    if not roots:
        raise CycleDetected("every link has a parent joint")
    if len(roots) > 1:
        raise CycleDetected(f"multiple root links {roots}")
    tree = KinematicTree(b.robot_name, links, joints, roots[0])
    tree.warnings = b.warnings
    return tree


def _fmt(values: Iterable[float]) -> str:
    return " ".join(repr(float(v)) for v in values)


def write_urdf(tree: KinematicTree) -> str:
    """Emit a document that :func:`parse_urdf` reads back to an equal tree."""
    out = [f'<robot name="{tree.name}">']
    for link in tree.links.values():
        role = f' role="{" ".join(sorted(link.roles))}"' if link.roles else ""
        if len(link.points):
            out.append(f'  <link name="{link.name}"{role}>')
            out.append("    <points>")
            for p in link.points:
                out.append("      " + _fmt(p))
            out.append("    </points>")
            out.append("  </link>")
        else:
            out.append(f'  <link name="{link.name}"{role}/>')
    for j in tree.joints.values():
        pitch = f' pitch="{j.screw_pitch!r}"' if j.kind == "screw" else ""
        out.append(f'  <joint name="{j.name}" type="{j.kind}"{pitch}>')
        out.append(f'    <parent link="{j.parent}"/>')
        out.append(f'    <child link="{j.child}"/>')
        out.append(f'    <origin xyz="{_fmt(j.origin_xyz)}" rpy="{_fmt(j.origin_rpy)}"/>')
        out.append(f'    <axis xyz="{_fmt(j.axis)}"/>')
        if j.kind != "fixed":
            out.append(f'    <limit lower="{j.lower!r}" upper="{j.upper!r}"/>')
        out.append("  </joint>")
    out.append("</robot>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# kinematics


def forward_kinematics(tree: KinematicTree, root_pose: Pose6D | None = None) -> dict[str, Pose6D]:
    """Camera-frame pose of every link for the tree's current joint states."""
    mats = forward_kinematics_matrices(tree, root_pose)
    return {name: Pose6D.from_matrix(T) for name, T in mats.items()}


def forward_kinematics_matrices(tree: KinematicTree, root_pose: Pose6D | None = None) -> dict[str, np.ndarray]:
    root = (root_pose or tree.root_pose).matrix
    out = {tree.root: root}
    frontier = [tree.root]
    while frontier:
        cur = frontier.pop(0)
        for j in tree.children(cur):
            q = tree.joint_states.get(j.name, 0.0) if j.kind != "fixed" else 0.0
            if j.kind != "fixed" and not (j.lower - LIMIT_TOL <= q <= j.upper + LIMIT_TOL):
                raise StateOutOfLimits(j.name, q, j.lower, j.upper)
            out[j.child] = out[cur] @ j.origin.matrix @ j.motion(q)
            frontier.append(j.child)
    return out


def joint_frame(tree: KinematicTree, joint: Joint | str, poses: dict[str, np.ndarray] | None = None) -> np.ndarray:
    """World transform of the joint frame before its own motion is applied."""
    j = tree.joints[joint] if isinstance(joint, str) else joint
    poses = poses if poses is not None else forward_kinematics_matrices(tree)
    return poses[j.parent] @ j.origin.matrix


def joint_axis_world(tree: KinematicTree, joint: Joint | str, poses=None) -> JointAxis:
    """Two camera-frame points on the joint axis, 0.1 m apart along its direction."""
    j = tree.joints[joint] if isinstance(joint, str) else joint
    F = joint_frame(tree, j, poses)
    p0 = F[:3, 3]
    d = F[:3, :3] @ np.asarray(j.axis)
    return JointAxis(p0, p0 + AXIS_SEGMENT * d)


def classify_manipulation_type(joint: Joint, child: Link) -> ManipulationType:
    """Map a joint and its child link's role tags to a manipulation type.

    ==========  ============  ===============
    kind        child roles   type
    ==========  ============  ===============
    screw       any           bottle cap
    revolute    has ``cap``   bottle cap
    revolute    otherwise     revolute part
    prismatic   has ``lid``   sliding lid
    prismatic   otherwise     prismatic part
    fixed       any           Unclassifiable
    ==========  ============  ===============
    """
    if joint.kind == "screw":
        return ManipulationType.BOTTLE_CAP
    if joint.kind == "revolute":
        return ManipulationType.BOTTLE_CAP if "cap" in child.roles else ManipulationType.REVOLUTE_PART
    if joint.kind == "prismatic":
        return ManipulationType.SLIDING_LID if "lid" in child.roles else ManipulationType.PRISMATIC_PART
    raise Unclassifiable(f"fixed joint {joint.name!r} has no manipulation type")


def link_points_world(tree: KinematicTree, links: Iterable[str], poses: dict[str, np.ndarray] | None = None) -> np.ndarray:
    poses = poses if poses is not None else forward_kinematics_matrices(tree)
    chunks = []
    for name in links:
        P = tree.links[name].points
        if len(P):
            T = poses[name]
            chunks.append(P @ T[:3, :3].T + T[:3, 3])
    return np.concatenate(chunks) if chunks else np.zeros((0, 3))
