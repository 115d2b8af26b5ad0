"""Scene generation: objects in sampled states seen from sampled viewpoints.

Every random quantity is drawn from a generator seeded by
``(config.seed, stream, category index, instance, ...)``, so any object,
state or scene can be regenerated in isolation and the output never depends
on iteration order or parallelism.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..articulation import (
    KinematicTree,
    classify_manipulation_type,
    forward_kinematics_matrices,
    joint_axis_world,
    link_points_world,
)
from ..core import (
    Intrinsics,
    ManipulationType,
    ObjectRecord,
    PartAnnotation,
    Pose6D,
    RotatedBox2D,
    SceneSample,
    SparseDepth,
    validate,
)
from ..errors import AffordkitError
from ..geometry import BehindCamera, min_area_rotated_rect, project_points
from ..manip import NoDepthInBox, grasp_point
from .catalog import (
    ARTICULATED_CATEGORIES,
    TOOL_CATEGORIES,
    ToolModel,
    build_articulated,
    build_tool,
    part_noun,
)
from .config import SPLITS, GenConfig, InsufficientObjects, articulated_split_counts, tool_split_counts
from .labels import GraspCandidates, describe_part, edge_band, sample_grasp_affordance
from .shapes import random_rotation

log = logging.getLogger(__name__)

STREAM_SHAPE, STREAM_STATE, STREAM_VIEW, STREAM_GRASP = 0, 1, 2, 3
KIND_ARTICULATED, KIND_TOOL, KIND_TOOL_SCENE = 0, 1, 2
SPLIT_CODE = {s: i for i, s in enumerate(SPLITS)}

VIEW_RETRIES = 16
RING_ATTEMPTS = 4  # later attempts draw the azimuth from the full circle
DEPTH_CELL_PX = 6.0
DEPTH_KEEP_M = 0.02
CAMERA_DISTANCE = 3.0  # multiples of the object's bounding radius
AZIMUTH_SPAN_DEG = 60.0
AZIMUTH_JITTER_DEG = 8.0
ELEVATION_RINGS_DEG = (20.0, 40.0)
ELEVATION_JITTER_DEG = 5.0
TOOL_XY_RANGE = 0.1  # m
TOOL_Z_RANGE = (0.65, 0.95)  # m
VISIBLE_GRASP_DISTANCE = 0.02  # m, depth-derived grasp point to the labeled part


class EmptyProjection(AffordkitError):
    def __init__(self, part: str):
        super().__init__(f"part {part!r} has no point in front of the camera")
        self.part = part


def slug(category: str) -> str:
    return re.sub(r"\W+", "_", category.strip().lower())


def object_id(category: str, instance: int) -> str:
    return f"{slug(category)}_{instance:03d}"


def parse_object_id(oid: str) -> tuple[str, int]:
    stem, _, num = oid.rpartition("_")
    for cat in ARTICULATED_CATEGORIES + TOOL_CATEGORIES:
        if slug(cat) == stem:
            return cat, int(num)
    raise KeyError(oid)


def _rng(cfg: GenConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, *key])


@dataclass(frozen=True)
class PlannedObject:
    kind: str  # "articulated" or "tool"
    category: str
    instance: int
    split: str

    @property
    def object_id(self) -> str:
        return object_id(self.category, self.instance)


def plan_objects(cfg: GenConfig) -> list[PlannedObject]:
    """Object-level split assignment; the last instances of a category are held out."""
    out: list[PlannedObject] = []
    for kind, mode, table, splitter, catalog in (
        ("articulated", cfg.articulated_mode, cfg.articulated, articulated_split_counts, ARTICULATED_CATEGORIES),
        ("tool", cfg.tool_mode, cfg.tools, tool_split_counts, TOOL_CATEGORIES),
    ):
        if not mode:
            continue
        per_split = splitter(cfg)
        for cat in catalog:
            if cat not in table:
                continue
            idx = 0
            for split in SPLITS:
                for _ in range(per_split[split].get(cat, 0)):
                    out.append(PlannedObject(kind, cat, idx, split))
                    idx += 1
    return out


def articulated_model(cfg: GenConfig, category: str, instance: int) -> KinematicTree:
    rng = _rng(cfg, KIND_ARTICULATED, ARTICULATED_CATEGORIES.index(category), instance, STREAM_SHAPE)
    return build_articulated(category, rng)


def tool_model(cfg: GenConfig, category: str, instance: int) -> ToolModel:
    rng = _rng(cfg, KIND_TOOL, TOOL_CATEGORIES.index(category), instance, STREAM_SHAPE)
    return build_tool(category, rng)


def model_for_object_id(cfg: GenConfig, oid: str):
    """Regenerate the procedural model behind an object id."""
    category, instance = parse_object_id(oid)
    if category in ARTICULATED_CATEGORIES:
        return articulated_model(cfg, category, instance)
    return tool_model(cfg, category, instance)


# --------------------------------------------------------------------------
# cameras, projection and depth


def look_at(eye, target) -> Pose6D:
    """Object-to-camera transform for a camera at ``eye`` looking at ``target``.

    The object frame is z-up; the camera's +y is the image-down direction,
    chosen as world-down projected orthogonal to the viewing ray.
    """
    eye = np.asarray(eye, dtype=float)
    z = np.asarray(target, dtype=float) - eye
    z /= np.linalg.norm(z)
    down = np.array([0.0, 0.0, -1.0])
    y = down - (down @ z) * z
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    R = np.vstack([x, y, z])
    return Pose6D(-R @ eye, R)


def sample_view(rng, center, radius, view_index: int, n_views: int, wide: bool = False) -> Pose6D:
    """Camera on a fixed-elevation ring facing the object's front.

    Views are spread over an azimuth fan in front of the object (+x); with
    ``wide`` the azimuth is drawn from the whole circle instead, which is
    the fallback when the fan cannot see a grasp region.
    """
    if wide:
        az = rng.uniform(-180.0, 180.0)
    elif n_views == 1:
        az = 0.0
    else:
        az = -AZIMUTH_SPAN_DEG + 2 * AZIMUTH_SPAN_DEG * (view_index + 0.5) / n_views
    az += rng.uniform(-AZIMUTH_JITTER_DEG, AZIMUTH_JITTER_DEG)
    el = ELEVATION_RINGS_DEG[view_index % len(ELEVATION_RINGS_DEG)]
    el += rng.uniform(-ELEVATION_JITTER_DEG, ELEVATION_JITTER_DEG)
    a, e = np.radians(az), np.radians(el)
    direction = np.array([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)])
    return look_at(np.asarray(center) + CAMERA_DISTANCE * radius * direction, center)


def zbuffer_depth(points_cam: np.ndarray, intrinsics: Intrinsics, width: int, height: int) -> SparseDepth:
    """Visible-surface samples: per coarse pixel cell keep points near the nearest one."""
    uv = project_points(points_cam, intrinsics)
    z = points_cam[:, 2]
    inside = (uv[:, 0] >= 0) & (uv[:, 0] < width) & (uv[:, 1] >= 0) & (uv[:, 1] < height)
    uv, z = uv[inside], z[inside]
    cells = np.floor(uv / DEPTH_CELL_PX).astype(np.int64)
    key = cells[:, 1] * (int(width // DEPTH_CELL_PX) + 2) + cells[:, 0]
    uniq, inv = np.unique(key, return_inverse=True)
    zmin = np.full(len(uniq), np.inf)
    np.minimum.at(zmin, inv, z)
    keep = z <= zmin[inv] + DEPTH_KEEP_M
    rows = np.column_stack([np.round(uv[keep], 2), np.round(z[keep], 4)])
    order = np.lexsort((rows[:, 2], rows[:, 0], rows[:, 1]))
    return SparseDepth(tuple(map(tuple, rows[order])))


def region_visible(box: RotatedBox2D, depth: SparseDepth, intrinsics: Intrinsics, points: np.ndarray) -> bool:
    """True when the depth map sees ``points`` through ``box``.

    The depth-derived 3D point of the box must lie within
    :data:`VISIBLE_GRASP_DISTANCE` of the region's own points; otherwise an
    occluder sits in front of it and the view is rejected.
    """
    try:
        g = grasp_point(box, depth, intrinsics)
    except NoDepthInBox:
        return False
    return float(np.min(np.linalg.norm(points - g, axis=1))) <= VISIBLE_GRASP_DISTANCE


def fit_box(points_cam: np.ndarray, intrinsics: Intrinsics, extra: list[RotatedBox2D] = ()) -> RotatedBox2D:
    uv = project_points(points_cam, intrinsics)
    if extra:
        uv = np.concatenate([uv] + [b.as_array() for b in extra])
    return min_area_rotated_rect(uv)


# --------------------------------------------------------------------------
# articulated objects


def _handle_links(tree: KinematicTree, child: str) -> list[str]:
    group = tree.rigid_group(child)
    handles = [n for n in group if "handle" in tree.links[n].roles]
    return handles or [child]


def grasp_candidates(tree: KinematicTree, joint_name: str, poses) -> GraspCandidates:
    j = tree.joints[joint_name]
    child = tree.links[j.child]
    handle = link_points_world(tree, _handle_links(tree, j.child), poses)
    edge = None
    if j.kind == "revolute" and "edge" in child.roles:
        local = edge_band(child.points, j.axis)
        T = poses[j.child]
        edge = local @ T[:3, :3].T + T[:3, 3]
    return GraspCandidates(handle, edge, angular=j.kind == "revolute")


def label_articulated_part(tree, joint_name, poses, intrinsics, category, theta_deg, rng, oid) -> PartAnnotation:
    j = tree.joints[joint_name]
    mt = classify_manipulation_type(j, tree.links[j.child])
    state = tree.joint_states[joint_name]
    choice = sample_grasp_affordance(grasp_candidates(tree, joint_name, poses), state, theta_deg, rng)
    try:
        G = fit_box(choice.points, intrinsics)
        B = fit_box(link_points_world(tree, tree.rigid_group(j.child), poses), intrinsics, [G])
    except BehindCamera:
        raise EmptyProjection(f"{oid}/{j.child}") from None
    return PartAnnotation(
        part_id=f"{oid}/{j.child}",
        pose=joint_axis_world(tree, j, poses),
        part_box=B,
        grasp_box=G,
        manipulation_type=mt,
        description=describe_part(part_noun(j.child), category, state, mt),
        joint_state=state,
        joint_limits=(j.lower, j.upper),
    )


def render_articulated(cfg: GenConfig, tree: KinematicTree, planned: PlannedObject, state_index: int,
                       view_index: int, intrinsics: Intrinsics) -> SceneSample | None:
    """One sample; ``tree`` must already hold the state's joint values."""
    oid = planned.object_id
    cat_code = ARTICULATED_CATEGORIES.index(planned.category)
    obj_poses = forward_kinematics_matrices(tree, Pose6D.identity())
    pts = link_points_world(tree, tree.links, obj_poses)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = 0.5 * (lo + hi)
    radius = float(np.linalg.norm(pts - center, axis=1).max())
    view_rng = _rng(cfg, KIND_ARTICULATED, cat_code, planned.instance, STREAM_VIEW, state_index, view_index)
    for attempt in range(VIEW_RETRIES):
        grasp_rng = _rng(cfg, KIND_ARTICULATED, cat_code, planned.instance, STREAM_GRASP, state_index, view_index)
        root = sample_view(view_rng, center, radius, view_index, cfg.views_per_object, wide=attempt >= RING_ATTEMPTS)
        poses = forward_kinematics_matrices(tree, root)
        try:
            parts = tuple(
                label_articulated_part(tree, j.name, poses, intrinsics, planned.category, cfg.theta_deg, grasp_rng, oid)
                for j in tree.movable_joints()
            )
            world = link_points_world(tree, tree.links, poses)
            depth = zbuffer_depth(world, intrinsics, cfg.image_width, cfg.image_height)
        except (EmptyProjection, BehindCamera):
            continue
        if not all(region_visible(p.grasp_box, depth, intrinsics,
                                  link_points_world(tree, tree.rigid_group(p.part_id.split("/", 1)[1]), poses))
                   for p in parts):
            log.debug("view %d of %s hides a grasp region on attempt %d", view_index, oid, attempt)
            continue
        sample = SceneSample(
            scene_id=f"{oid}_s{state_index:02d}_v{view_index:02d}",
            intrinsics=intrinsics,
            objects=(ObjectRecord(oid, planned.category, parts, root_pose=root),),
            image_width=cfg.image_width,
            image_height=cfg.image_height,
            depth=depth,
            split=planned.split,
        )
        if not validate(sample):
            return sample
        log.debug("view %d of %s rejected on attempt %d", view_index, oid, attempt)
    log.warning("skipping %s state %d view %d after %d attempts", oid, state_index, view_index, VIEW_RETRIES)
    return None


def sample_states(cfg: GenConfig, tree: KinematicTree, planned: PlannedObject, state_index: int) -> dict[str, float]:
    rng = _rng(cfg, KIND_ARTICULATED, ARTICULATED_CATEGORIES.index(planned.category), planned.instance,
               STREAM_STATE, state_index)
    return {j.name: float(rng.uniform(j.lower, j.upper)) for j in tree.movable_joints()}


def generate_object(cfg: GenConfig, planned: PlannedObject) -> Iterator[SceneSample]:
    tree = articulated_model(cfg, planned.category, planned.instance)
    intrinsics = Intrinsics.default(cfg.image_width, cfg.image_height)
    for s in range(cfg.states_per_object):
        for name, value in sample_states(cfg, tree, planned, s).items():
            tree.set_state(name, value)
        for v in range(cfg.views_per_object):
            sample = render_articulated(cfg, tree, planned, s, v, intrinsics)
            if sample is not None:
                yield sample


def generate_articulated(cfg: GenConfig, category: str) -> Iterator[SceneSample]:
    """All samples of one articulated category, object by object."""
    if category not in ARTICULATED_CATEGORIES:
        raise ValueError(f"unknown articulated category {category!r}")
    for planned in plan_objects(cfg):
        if planned.kind == "articulated" and planned.category == category:
            yield from generate_object(cfg, planned)


# --------------------------------------------------------------------------
# tools


def label_tool(model: ToolModel, pose: Pose6D, intrinsics: Intrinsics, oid: str) -> ObjectRecord:
    g = pose.apply(model.grasp_points)
    f = pose.apply(model.functional_points)
    try:
        G = fit_box(g, intrinsics)
        F = fit_box(f, intrinsics)
        B = fit_box(np.concatenate([g, f]), intrinsics, [G, F])
    except BehindCamera:
        raise EmptyProjection(f"{oid}/tool") from None
    part = PartAnnotation(
        part_id=f"{oid}/tool",
        pose=pose,
        part_box=B,
        grasp_box=G,
        manipulation_type=ManipulationType.FREEDOM_OBJECT,
        description=describe_part(model.functional_name, model.category, None,
                                   ManipulationType.FREEDOM_OBJECT, model.verb),
        functional_box=F,
    )
    return ObjectRecord(oid, model.category, (part,), root_pose=pose)


def sample_tool_pose(rng) -> Pose6D:
    t = (rng.uniform(-TOOL_XY_RANGE, TOOL_XY_RANGE), rng.uniform(-TOOL_XY_RANGE, TOOL_XY_RANGE),
         rng.uniform(*TOOL_Z_RANGE))
    return Pose6D(t, random_rotation(rng))


def _tool_pool(cfg: GenConfig, split: str) -> list[PlannedObject]:
    return [p for p in plan_objects(cfg) if p.kind == "tool" and p.split == split]


def scene_primaries(cfg: GenConfig, split: str) -> list[PlannedObject]:
    """Primary tool of each scene in a split: categories round-robin, instances cycling."""
    pool = _tool_pool(cfg, split)
    n = cfg.tool_scenes.get(split, 0)
    if not pool:
        return []
    by_cat: dict[str, list[PlannedObject]] = {}
    for p in pool:
        by_cat.setdefault(p.category, []).append(p)
    cats = list(by_cat)
    out = []
    for i in range(n):
        members = by_cat[cats[i % len(cats)]]
        out.append(members[(i // len(cats)) % len(members)])
    return out


def tool_scene(cfg: GenConfig, split: str, index: int, primary: PlannedObject, pool: list[PlannedObject],
               models: dict[str, ToolModel], intrinsics: Intrinsics) -> SceneSample | None:
    rng = _rng(cfg, KIND_TOOL_SCENE, SPLIT_CODE[split], index)
    lo, hi = cfg.distractors
    others = [p for p in pool if p.object_id != primary.object_id]
    k = min(int(rng.integers(lo, hi + 1)), len(others))
    picks = [others[i] for i in sorted(rng.choice(len(others), size=k, replace=False))] if k else []
    placed: list[ObjectRecord] = []
    for rank, p in enumerate([primary] + picks):
        obj = _place_tool(rng, models, placed, p, intrinsics, cfg)
        if obj is None:
            if rank == 0 or len(placed) - 1 < lo:
                log.warning("skipping tool scene %s/%d: %s could not be placed", split, index, p.object_id)
                return None
            log.debug("dropping distractor %s from scene %s/%d", p.object_id, split, index)
            continue
        placed.append(obj)
    depth = _scene_depth(placed, models, intrinsics, cfg)
    sample = SceneSample(
        scene_id=f"tools_{split}_{index:05d}",
        intrinsics=intrinsics,
        objects=tuple(placed),
        image_width=cfg.image_width,
        image_height=cfg.image_height,
        depth=depth,
        split=split,
    )
    problems = validate(sample)
    if problems:
        log.warning("skipping tool scene %s/%d: %s", split, index, problems[0])
        return None
    return sample


def _scene_depth(objects, models, intrinsics: Intrinsics, cfg: GenConfig) -> SparseDepth:
    world = np.concatenate([o.root_pose.apply(models[o.object_id].points) for o in objects])
    return zbuffer_depth(world, intrinsics, cfg.image_width, cfg.image_height)


def _tool_regions_visible(o: ObjectRecord, model: ToolModel, depth: SparseDepth, intrinsics: Intrinsics) -> bool:
    part = o.parts[0]
    return (region_visible(part.grasp_box, depth, intrinsics, o.root_pose.apply(model.grasp_points))
            and region_visible(part.functional_box, depth, intrinsics, o.root_pose.apply(model.functional_points)))


def _place_tool(rng, models, placed: list[ObjectRecord], p: PlannedObject, intrinsics: Intrinsics,
                cfg: GenConfig) -> ObjectRecord | None:
    """Pose for ``p`` that leaves its own and every placed tool's regions visible."""
    for _ in range(VIEW_RETRIES):
        try:
            obj = label_tool(models[p.object_id], sample_tool_pose(rng), intrinsics, p.object_id)
        except EmptyProjection:
            continue
        scene = placed + [obj]
        depth = _scene_depth(scene, models, intrinsics, cfg)
        if all(_tool_regions_visible(o, models[o.object_id], depth, intrinsics) for o in scene):
            return obj
    return None


def generate_tools(cfg: GenConfig, category: str | None = None) -> Iterator[SceneSample]:
    """Cluttered tool scenes; with ``category`` only scenes whose primary tool is of it."""
    if category is not None and category not in TOOL_CATEGORIES:
        raise ValueError(f"unknown tool category {category!r}")
    intrinsics = Intrinsics.default(cfg.image_width, cfg.image_height)
    for split in SPLITS:
        pool = _tool_pool(cfg, split)
        models = {p.object_id: tool_model(cfg, p.category, p.instance) for p in pool}
        for i, primary in enumerate(scene_primaries(cfg, split)):
            if category is not None and primary.category != category:
                continue
            sample = tool_scene(cfg, split, i, primary, pool, models, intrinsics)
            if sample is not None:
                yield sample


# --------------------------------------------------------------------------
# corpus


def generate_corpus(cfg: GenConfig) -> list[SceneSample]:
    """Every sample of the configuration in a fixed order (articulated, then tools)."""
    out: list[SceneSample] = []
    if cfg.articulated_mode:
        for planned in plan_objects(cfg):
            if planned.kind == "articulated":
                out.extend(generate_object(cfg, planned))
    if cfg.tool_mode:
        out.extend(generate_tools(cfg))
    return out


def split_objects(objects: dict[str, list[str]], train_ratio: float, unseen_instance_ratio: float,
                  held_out_categories=()) -> dict[str, list[str]]:
    """Object-level split of ``{category: [object ids]}``.

    Held-out categories go whole to ``unseen_category``; every other
    category gives its trailing ``unseen_instance_ratio`` share (rounded half
    up) to ``unseen_instance``.
    """
    if abs(train_ratio + unseen_instance_ratio - 1.0) > 1e-9:
        raise ValueError("train and unseen-instance ratios must sum to 1")
    out = {s: [] for s in SPLITS}
    for cat, ids in objects.items():
        ids = list(ids)
        if cat in held_out_categories:
            if not ids:
                raise InsufficientObjects(f"held-out category {cat!r} has no objects")
            out["unseen_category"].extend(ids)
            continue
        k = int(len(ids) * unseen_instance_ratio + 0.5)
        out["train"].extend(ids[: len(ids) - k])
        out["unseen_instance"].extend(ids[len(ids) - k:])
    return out


def split_dataset(samples: list[SceneSample]) -> dict[str, dict]:
    """Group samples by their split into manifests of scene and object ids.

    Raises :class:`InsufficientObjects` if an object appears in two splits,
    since that would leak instances between training and evaluation.
    """
    out = {s: {"scenes": [], "objects": set(), "categories": set()} for s in SPLITS}
    owner: dict[str, str] = {}
    for s in samples:
        if s.split not in out:
            raise ValueError(f"sample {s.scene_id} has no split")
        entry = out[s.split]
        entry["scenes"].append(s.scene_id)
        for o in s.objects:
            if owner.setdefault(o.object_id, s.split) != s.split:
                raise InsufficientObjects(f"object {o.object_id} appears in {owner[o.object_id]} and {s.split}")
            entry["objects"].add(o.object_id)
            entry["categories"].add(o.category)
    return {s: {"scenes": e["scenes"], "objects": sorted(e["objects"]), "categories": sorted(e["categories"])}
            for s, e in out.items()}
