"""Generation settings and the count arithmetic behind ``--dry-run``."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import DEFAULT_IMAGE_SIZE
from .catalog import ARTICULATED_CATEGORIES, ARTICULATED_UNSEEN, TOOL_CATEGORIES, TOOL_UNSEEN
from .labels import DEFAULT_THETA_DEG

SPLITS = ("train", "unseen_instance", "unseen_category")


class InsufficientObjects(ValueError):
    pass


def largest_remainder(total: int, weights) -> list[int]:
    """Integer apportionment of ``total`` proportional to ``weights``.

    Ties in the fractional part go to the earlier entry, so the result is a
    pure function of its inputs.

    >>> largest_remainder(400, [13, 13, 13, 1])
    [130, 130, 130, 10]
    """
    weights = [float(w) for w in weights]
    s = sum(weights)
    if total < 0 or any(w < 0 for w in weights):
        raise ValueError("negative total or weight")
    if s == 0:
        return [0] * len(weights)
    exact = [total * w / s for w in weights]
    base = [int(e) for e in exact]
    rest = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return base


@dataclass
class GenConfig:
    """Everything that determines a generated corpus besides code version.

    ``articulated`` and ``tools`` map category to object count (all splits
    together). Categories listed in ``unseen_categories`` form the
    unseen-category split whole. Among the remaining categories the
    unseen-instance split receives either exactly ``*_unseen_instances``
    objects (apportioned over categories by size) or, when that is ``None``,
    ``unseen_instance_ratio`` of each category.
    """

    seed: int = 0
    articulated: dict[str, int] = field(default_factory=dict)
    tools: dict[str, int] = field(default_factory=dict)
    states_per_object: int = 20
    views_per_object: int = 5
    image_width: int = DEFAULT_IMAGE_SIZE
    image_height: int = DEFAULT_IMAGE_SIZE
    theta_deg: float = DEFAULT_THETA_DEG
    unseen_instance_ratio: float = 0.2
    articulated_unseen_instances: int | None = None
    tool_unseen_instances: int | None = None
    unseen_categories: tuple[str, ...] = ARTICULATED_UNSEEN + TOOL_UNSEEN
    tool_scenes: dict[str, int] = field(
        default_factory=lambda: {"train": 200, "unseen_instance": 60, "unseen_category": 60})
    distractors: tuple[int, int] = (1, 4)
    articulated_mode: bool = True
    tool_mode: bool = True
    emit_urdf: bool = False

    def __post_init__(self):
        self.unseen_categories = tuple(self.unseen_categories)
        self.distractors = tuple(int(x) for x in self.distractors)
        self.check()

    def check(self) -> None:
        for name, table, known in (("articulated", self.articulated, ARTICULATED_CATEGORIES),
                                   ("tools", self.tools, TOOL_CATEGORIES)):
            for cat, n in table.items():
                if cat not in known:
                    raise ValueError(f"unknown {name} category {cat!r}")
                if n < 0:
                    raise ValueError(f"negative count for {cat!r}")
        if not 0.0 <= self.theta_deg < 180.0:
            raise ValueError(f"theta_deg must lie in [0, 180), got {self.theta_deg}")
        if self.states_per_object < 1 or self.views_per_object < 1:
            raise ValueError("states_per_object and views_per_object must be at least 1")
        if not 0.0 <= self.unseen_instance_ratio <= 1.0:
            raise ValueError("unseen_instance_ratio must lie in [0, 1]")
        if any(n < 0 for n in self.tool_scenes.values()) or set(self.tool_scenes) - set(SPLITS):
            raise ValueError(f"tool_scenes keys must be among {SPLITS} with non-negative counts")
        lo, hi = self.distractors
        if not 0 <= lo <= hi:
            raise ValueError("distractors must satisfy 0 <= min <= max")

    @property
    def images_per_object(self) -> int:
        return self.states_per_object * self.views_per_object


def split_counts(counts: dict[str, int], unseen_categories, unseen_total: int | None, ratio: float) -> dict[str, dict[str, int]]:
    """Per-category object counts for each split (category order preserved)."""
    out = {s: {} for s in SPLITS}
    seen = [(c, n) for c, n in counts.items() if c not in unseen_categories]
    for c, n in counts.items():
        if c in unseen_categories:
            out["unseen_category"][c] = n
    if unseen_total is None:
        held = [int(n * ratio + 0.5) if n > 1 or ratio >= 1 else 0 for _, n in seen]
    else:
        avail = sum(n for _, n in seen)
        if unseen_total > avail:
            raise InsufficientObjects(f"{unseen_total} unseen instances requested from {avail} objects")
        held = largest_remainder(unseen_total, [n for _, n in seen])
    for (c, n), h in zip(seen, held):
        out["train"][c] = n - h
        out["unseen_instance"][c] = h
    return out


def articulated_split_counts(cfg: GenConfig) -> dict[str, dict[str, int]]:
    return split_counts(cfg.articulated, cfg.unseen_categories, cfg.articulated_unseen_instances, cfg.unseen_instance_ratio)


def tool_split_counts(cfg: GenConfig) -> dict[str, dict[str, int]]:
    return split_counts(cfg.tools, cfg.unseen_categories, cfg.tool_unseen_instances, cfg.unseen_instance_ratio)


def planned_counts(cfg: GenConfig) -> dict:
    """What a full run would emit, computed without generating anything."""
    art = articulated_split_counts(cfg) if cfg.articulated_mode else {s: {} for s in SPLITS}
    tools = tool_split_counts(cfg) if cfg.tool_mode else {s: {} for s in SPLITS}
    out = {"articulated": {}, "tools": {}}
    for s in SPLITS:
        n_obj = sum(art[s].values())
        out["articulated"][s] = {
            "objects": n_obj,
            "categories": len([c for c, n in art[s].items() if n > 0]),
            "images": n_obj * cfg.images_per_object,
        }
        n_tools = sum(tools[s].values())
        out["tools"][s] = {
            "objects": n_tools,
            "categories": len([c for c, n in tools[s].items() if n > 0]),
            "scenes": cfg.tool_scenes.get(s, 0) if n_tools > 0 else 0,
        }
    return out
