"""Automatic ψ labels: grasp-region sampling and part descriptions."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..core import ManipulationType

DEFAULT_THETA_DEG = 30.0
EDGE_BAND = 0.05  # m, depth of the grasp band along a panel's free edge


class GraspRegion(str, Enum):
    HANDLE = "handle"
    EDGE = "edge"


@dataclass(frozen=True)
class GraspCandidates:
    """Point sets a part can be grasped by, in any common frame.

    ``edge_points`` is ``None`` for parts without a grippable free edge
    (drawers, caps, knobs); ``angular`` marks revolute-like joints whose
    state is an opening angle in degrees.
    """

    handle_points: np.ndarray
    edge_points: np.ndarray | None = None
    angular: bool = True


@dataclass(frozen=True)
class GraspRegionChoice:
    region: GraspRegion
    points: np.ndarray


def edge_weight(joint_state_deg: float, theta_deg: float = DEFAULT_THETA_DEG) -> float:
    """Probability of grasping the edge, ``(J - θ) / (180 - θ)``, clipped to [0, 1]."""
    if not 0.0 <= theta_deg < 180.0:
        raise ValueError(f"theta must lie in [0, 180), got {theta_deg}")
    if joint_state_deg <= theta_deg:
        return 0.0
    return min(1.0, (joint_state_deg - theta_deg) / (180.0 - theta_deg))


def sample_grasp_affordance(part: GraspCandidates, joint_state_deg: float, theta_deg: float,
                            rng: np.random.Generator) -> GraspRegionChoice:
    """Choose Handle or Edge for one part.

    Consumes exactly one uniform draw from ``rng`` whenever the edge is an
    option, none otherwise, so the caller's stream stays aligned.
    """
    if not part.angular or part.edge_points is None or len(part.edge_points) == 0:
        return GraspRegionChoice(GraspRegion.HANDLE, part.handle_points)
    w = edge_weight(joint_state_deg, theta_deg)
    if w <= 0.0:
        return GraspRegionChoice(GraspRegion.HANDLE, part.handle_points)
    if rng.random() < w:
        return GraspRegionChoice(GraspRegion.EDGE, part.edge_points)
    return GraspRegionChoice(GraspRegion.HANDLE, part.handle_points)


def edge_band(points: np.ndarray, axis_direction, axis_origin=(0.0, 0.0, 0.0), band: float = EDGE_BAND) -> np.ndarray:
    """Points of a hinged panel within ``band`` of its farthest extent from the hinge."""
    P = np.asarray(points, dtype=float)
    d = np.asarray(axis_direction, dtype=float)
    d = d / np.linalg.norm(d)
    rel = P - np.asarray(axis_origin, dtype=float)
    radial = rel - np.outer(rel @ d, d)
    dist = np.linalg.norm(radial, axis=1)
    return P[dist >= dist.max() - band]


# --------------------------------------------------------------------------
# descriptions

TEMPLATES = {
    "open_deg": "the {part} of the {category}, currently open {n} degrees",
    "open_cm": "the {part} of the {category}, currently open {n} cm",
    "unscrewed": "the {part} of the {category}, currently unscrewed {n} degrees",
    "closed": "the {part} of the {category}, currently closed",
    "tool_grasp": "the handle used to grasp the {category}",
    "tool_function": "the {part} of the {category}, used for {verb}",
}

_PATTERNS = {
    tid: re.compile("^" + re.sub(r"\\\{(\w+)\\\}", r"(?P<\1>.+?)", re.escape(text)) + "$")
    for tid, text in TEMPLATES.items()
}


def _state_amount(state: float, manipulation_type: ManipulationType) -> tuple[str, int]:
    if manipulation_type is ManipulationType.BOTTLE_CAP:
        return "unscrewed", int(math.floor(state + 0.5))
    if manipulation_type is ManipulationType.REVOLUTE_PART:
        return "open_deg", int(math.floor(state + 0.5))
    return "open_cm", int(math.floor(100.0 * state + 0.5))


def template_for(part: str, category: str, state: float | None, manipulation_type: ManipulationType,
                 verb: str | None = None) -> tuple[str, dict]:
    """Template id and fields for a part; the string form is :func:`describe_part`."""
    mt = ManipulationType(manipulation_type)
    if mt is ManipulationType.FREEDOM_OBJECT:
        if verb is None:
            return "tool_grasp", {"category": category}
        return "tool_function", {"part": part, "category": category, "verb": verb}
    if state is None:
        raise ValueError("articulated parts need a joint state")
    tid, n = _state_amount(state, mt)
    if n == 0:
        return "closed", {"part": part, "category": category}
    return tid, {"part": part, "category": category, "n": str(n)}


def describe_part(part: str, category: str, state: float | None, manipulation_type: ManipulationType,
                  verb: str | None = None) -> str:
    """Fill the description template.

    ``state`` is in degrees for revolute and screw joints and in meters for
    prismatic ones; it is rounded half up to whole degrees or centimeters.
    Tools take ``verb`` for their functional part; without it the grasp
    template is used.

    >>> describe_part("door", "microwave", 45.2, ManipulationType.REVOLUTE_PART)
    'the door of the microwave, currently open 45 degrees'
    >>> describe_part("drawer", "storage furniture", 0.001, ManipulationType.PRISMATIC_PART)
    'the drawer of the storage furniture, currently closed'
    """
    tid, fields = template_for(part, category, state, manipulation_type, verb)
    return TEMPLATES[tid].format(**fields)


def match_description(text: str) -> tuple[str, dict] | None:
    """Inverse of :func:`describe_part`: ``(template_id, fields)`` or ``None``."""
    for tid, pat in _PATTERNS.items():
        m = pat.match(text)
        if m:
            return tid, m.groupdict()
    return None
