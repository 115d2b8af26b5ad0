"""Procedural object catalog: category -> kinematic structure.

Articulated objects are built in an object frame with +x pointing out of the
front face, +z up and the origin at the bottom center of the body. Every
movable joint's child link is one labeled part; links tagged ``handle``
attached to it through fixed joints are its grasp region. Panels tagged
``edge`` may also be grasped along their free edge once open.

=================  ==============================  ================
category           movable part (link)             joint
=================  ==============================  ================
bottle             cap                             screw, 0..1080 deg
box                lid (role lid)                  prismatic, slides +x
bucket             handle (bail) + grip            revolute about y
dispenser          pump_head                       prismatic, presses -z
door               door + handle                   revolute about z
folding chair      seat + handle lip               revolute about y
kitchen pot        lid (role lid) + knob           prismatic, lifts +z
laptop             screen + handle lip             revolute about y
microwave          door + handle                   revolute about z
refrigerator       1-2 doors + handles             revolute about z
safe               door + handle                   revolute about z
storage furniture  1-3 drawers + handles           prismatic +x
trash can          lid + handle lip                revolute about y
faucet             lever                           revolute about z
oven               door + handle (drop-down)       revolute about y
table              drawer + handle                 prismatic +x
toilet             lid + handle lip                revolute about y
kettle             lid (role lid) + knob           prismatic, lifts +z
washing machine    door + handle                   revolute about z
=================  ==============================  ================

Tools are two rigid point sets in a canonical frame: the grasp part lies on
the -x side, the functional part on the +x side, origin at the bounding-box
center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..articulation import Joint, KinematicTree, Link
from .shapes import arc_tube, box_surface, cylinder_surface, disk, hemisphere

N_BODY = 384
N_PANEL = 320
N_HANDLE = 96
N_KNOB = 64
PANEL_DENSITY = 1000.0  # points per square meter on movable panels
PANEL_MAX = 3000

ARTICULATED_CATEGORIES = (
    "bottle", "box", "bucket", "dispenser", "door", "folding chair", "kitchen pot",
    "laptop", "microwave", "refrigerator", "safe", "storage furniture", "trash can",
    "faucet", "oven", "table", "toilet", "kettle", "washing machine",
)
ARTICULATED_UNSEEN = ("faucet", "oven", "table", "toilet", "kettle", "washing machine")

TOOL_CATEGORIES = (
    "brush", "razor", "screwdriver", "hair dryer", "hammer", "knife", "spoon",
    "spatula", "power drill", "flower shovel", "fork", "ladle",
)
TOOL_UNSEEN = ("flower shovel", "fork", "ladle")


class _Assembly:
    def __init__(self, name: str):
        self.name = name
        self.links: dict[str, Link] = {}
        self.joints: dict[str, Joint] = {}

    def link(self, name, points, roles=()):
        self.links[name] = Link(name, np.asarray(points, dtype=float), frozenset(roles))
        return name

    def joint(self, name, kind, parent, child, xyz=(0, 0, 0), axis=(0, 0, 1), lower=0.0, upper=0.0, pitch=None, rpy=(0, 0, 0)):
        self.joints[name] = Joint(name, kind, parent, child, tuple(axis), tuple(xyz), tuple(rpy), lower, upper, pitch)

    def fixed(self, parent, child, xyz):
        self.joint(f"{child}_mount", "fixed", parent, child, xyz)

    def build(self) -> KinematicTree:
        return KinematicTree(self.name, self.links, self.joints, "body")


def _panel(rng, lo, hi, n_min=N_PANEL):
    """Box surface with a point count that grows with its area, so large doors stay dense."""
    size = np.subtract(hi, lo)
    area = 2 * (size[0] * size[1] + size[1] * size[2] + size[0] * size[2])
    return box_surface(rng, lo, hi, int(min(PANEL_MAX, max(n_min, PANEL_DENSITY * area))))


def _u(rng, lo, hi):
    return float(rng.uniform(lo, hi))


def _handle_bar(rng, axis, length, radius=0.011, n=N_HANDLE):
    return cylinder_surface(rng, (0, 0, 0), axis, radius, length, n)


def _vertical_door(asm, rng, parent, name, front_x, hinge_y, width, z0, height, side, upper, handle_len):
    """A panel hinged on a vertical edge; ``side`` +1 extends toward +y."""
    t = 0.02
    ylo, yhi = (0.0, width) if side > 0 else (-width, 0.0)
    asm.link(name, _panel(rng, (0, ylo, 0), (t, yhi, height)), roles=("edge",))
    asm.joint(f"{name}_hinge", "revolute", parent, name, xyz=(front_x, hinge_y, z0),
              axis=(0, 0, -side), lower=0.0, upper=upper)
    hname = f"{name}_handle" if name != "door" else "handle"
    asm.link(hname, _handle_bar(rng, "z", handle_len), roles=("handle",))
    asm.fixed(name, hname, (t + 0.03, side * (width - 0.05), 0.55 * height))


def _cabinet(rng, name, dims, upper, handle_len, doors=1):
    D, W, H = (_u(rng, *r) for r in dims)
    asm = _Assembly(name)
    asm.link("body", box_surface(rng, (-D / 2, -W / 2, 0), (D / 2, W / 2, H), N_BODY), roles=("body",))
    if doors == 1:
        _vertical_door(asm, rng, "body", "door", D / 2, -W / 2, W, 0.0, H, +1, upper, handle_len)
    else:
        _vertical_door(asm, rng, "body", "door_1", D / 2, -W / 2, W / 2, 0.0, H, +1, upper, handle_len)
        _vertical_door(asm, rng, "body", "door_2", D / 2, W / 2, W / 2, 0.0, H, -1, upper, handle_len)
    return asm.build()


def _microwave(rng):
    return _cabinet(rng, "microwave", ((0.30, 0.40), (0.45, 0.60), (0.28, 0.35)), 110.0, 0.16)


def _refrigerator(rng):
    doors = int(rng.integers(1, 3))
    return _cabinet(rng, "refrigerator", ((0.60, 0.70), (0.60, 0.80), (1.20, 1.60)), 120.0, 0.30, doors)


def _safe(rng):
    return _cabinet(rng, "safe", ((0.40, 0.50), (0.40, 0.50), (0.40, 0.60)), 100.0, 0.10)


def _washing_machine(rng):
    D, W, H = _u(rng, 0.55, 0.60), _u(rng, 0.55, 0.60), _u(rng, 0.80, 0.90)
    asm = _Assembly("washing machine")
    asm.link("body", box_surface(rng, (-D / 2, -W / 2, 0), (D / 2, W / 2, H), N_BODY), roles=("body",))
    wd = 0.75 * W
    _vertical_door(asm, rng, "body", "door", D / 2, -wd / 2, wd, 0.35 * H, 0.45 * H, +1, 100.0, 0.10)
    return asm.build()


def _door(rng):
    W, H = _u(rng, 0.75, 0.90), _u(rng, 1.90, 2.05)
    asm = _Assembly("door")
    frame = np.concatenate([
        box_surface(rng, (-0.05, -W / 2 - 0.06, 0), (0.05, -W / 2, H + 0.06), N_BODY // 3),
        box_surface(rng, (-0.05, W / 2, 0), (0.05, W / 2 + 0.06, H + 0.06), N_BODY // 3),
        box_surface(rng, (-0.05, -W / 2, H), (0.05, W / 2, H + 0.06), N_BODY - 2 * (N_BODY // 3)),
    ])
    asm.link("body", frame, roles=("body",))
    _vertical_door(asm, rng, "body", "door", 0.03, -W / 2, W, 0.0, H, +1, 100.0, 0.14)
    return asm.build()


def _oven(rng):
    D, W, H = _u(rng, 0.55, 0.60), _u(rng, 0.55, 0.60), _u(rng, 0.80, 0.90)
    asm = _Assembly("oven")
    asm.link("body", box_surface(rng, (-D / 2, -W / 2, 0), (D / 2, W / 2, H), N_BODY), roles=("body",))
    t, wd, hd = 0.02, 0.9 * W, 0.6 * H
    asm.link("door", _panel(rng, (0, -wd / 2, 0), (t, wd / 2, hd)), roles=("edge",))
    asm.joint("door_hinge", "revolute", "body", "door", xyz=(D / 2, 0.0, 0.1 * H), axis=(0, 1, 0), upper=90.0)
    asm.link("handle", _handle_bar(rng, "y", 0.5 * wd), roles=("handle",))
    asm.fixed("door", "handle", (t + 0.03, 0.0, hd - 0.05))
    return asm.build()


def _drawers(rng, asm, parent, D, W, z_centers, h):
    t = 0.02
    depth = 0.8 * D
    for i, zc in enumerate(z_centers, start=1):
        name = f"drawer_{i}" if len(z_centers) > 1 else "drawer"
        w = 0.9 * W
        front = _panel(rng, (0, -w / 2, -h / 2), (t, w / 2, h / 2), N_PANEL // 2)
        tray = box_surface(rng, (-depth, -w / 2 + 0.01, -h / 2 + 0.01), (0, w / 2 - 0.01, h / 2 - 0.02), N_PANEL // 2)
        asm.link(name, np.concatenate([front, tray]))
        asm.joint(f"{name}_slide", "prismatic", parent, name, xyz=(D / 2, 0.0, zc), axis=(1, 0, 0), upper=0.7 * depth)
        hname = f"{name}_handle" if len(z_centers) > 1 else "handle"
        asm.link(hname, _handle_bar(rng, "y", min(0.2, 0.5 * w)), roles=("handle",))
        asm.fixed(name, hname, (t + 0.03, 0.0, 0.0))


def _storage_furniture(rng):
    D, W, H = _u(rng, 0.40, 0.50), _u(rng, 0.50, 0.80), _u(rng, 0.60, 1.00)
    k = int(rng.integers(1, 4))
    asm = _Assembly("storage furniture")
    asm.link("body", box_surface(rng, (-D / 2, -W / 2, 0), (D / 2, W / 2, H), N_BODY), roles=("body",))
    h = H / k
    _drawers(rng, asm, "body", D, W, [h * (i + 0.5) for i in range(k)], 0.8 * h)
    return asm.build()


def _table(rng):
    D, W, H = _u(rng, 0.50, 0.70), _u(rng, 0.80, 1.10), _u(rng, 0.70, 0.78)
    asm = _Assembly("table")
    top = box_surface(rng, (-D / 2, -W / 2, H - 0.04), (D / 2, W / 2, H), N_BODY // 2)
    legs = [box_surface(rng, (sx * D / 2 - 0.025 - sx * 0.025, sy * W / 2 - 0.025 - sy * 0.025, 0),
                        (sx * D / 2 + 0.025 - sx * 0.025, sy * W / 2 + 0.025 - sy * 0.025, H - 0.04), N_BODY // 8)
            for sx in (-1, 1) for sy in (-1, 1)]
    asm.link("body", np.concatenate([top] + legs), roles=("body",))
    _drawers(rng, asm, "body", D, 0.5 * W, [H - 0.1], 0.1)
    return asm.build()


def _hinged_lid(rng, asm, parent, D, W, z, t, upper, name="lid", roles=("edge",), x0=None):
    """A panel lying flat on top, hinged along its back edge."""
    x0 = -D / 2 if x0 is None else x0
    asm.link(name, _panel(rng, (0, -W / 2, 0), (D, W / 2, t)), roles=roles)
    asm.joint(f"{name}_hinge", "revolute", parent, name, xyz=(x0, 0.0, z), axis=(0, -1, 0), upper=upper)
    hname = "handle" if name in ("lid", "screen", "seat") else f"{name}_handle"
    asm.link(hname, _handle_bar(rng, "y", min(0.15, 0.5 * W), radius=0.008), roles=("handle",))
    asm.fixed(name, hname, (D + 0.012, 0.0, t / 2))


def _trash_can(rng):
    D, W, H = _u(rng, 0.25, 0.35), _u(rng, 0.22, 0.30), _u(rng, 0.35, 0.50)
    asm = _Assembly("trash can")
    asm.link("body", box_surface(rng, (-D / 2, -W / 2, 0), (D / 2, W / 2, H), N_BODY), roles=("body",))
    _hinged_lid(rng, asm, "body", D, W, H, 0.02, 100.0)
    return asm.build()


def _toilet(rng):
    D, W, H = _u(rng, 0.45, 0.55), _u(rng, 0.36, 0.42), _u(rng, 0.38, 0.42)
    asm = _Assembly("toilet")
    bowl = box_surface(rng, (-D / 2, -W / 2, 0), (D / 2, W / 2, H), 2 * N_BODY // 3)
    tank = box_surface(rng, (-D / 2 - 0.18, -W / 2, 0), (-D / 2, W / 2, H + 0.35), N_BODY - 2 * N_BODY // 3)
    asm.link("body", np.concatenate([bowl, tank]), roles=("body",))
    _hinged_lid(rng, asm, "body", D, W, H, 0.03, 105.0)
    return asm.build()


def _laptop(rng):
    D, W, Hb = _u(rng, 0.22, 0.26), _u(rng, 0.30, 0.36), _u(rng, 0.015, 0.02)
    asm = _Assembly("laptop")
    asm.link("body", box_surface(rng, (-D / 2, -W / 2, 0), (D / 2, W / 2, Hb), N_BODY), roles=("body",))
    _hinged_lid(rng, asm, "body", D, W, Hb, 0.008, 135.0, name="screen")
    return asm.build()


def _folding_chair(rng):
    D, W, H = _u(rng, 0.38, 0.45), _u(rng, 0.40, 0.46), _u(rng, 0.42, 0.48)
    asm = _Assembly("folding chair")
    legs = [box_surface(rng, (sx * D / 2 - 0.015, sy * W / 2 - 0.015, 0), (sx * D / 2 + 0.015, sy * W / 2 + 0.015, H),
                        N_BODY // 8) for sx in (-1, 1) for sy in (-1, 1)]
    back = box_surface(rng, (-D / 2 - 0.02, -W / 2, H), (-D / 2, W / 2, H + 0.4), N_BODY // 2)
    asm.link("body", np.concatenate(legs + [back]), roles=("body",))
    _hinged_lid(rng, asm, "body", D, W, H, 0.02, 90.0, name="seat", roles=())
    return asm.build()


def _box(rng):
    D, W, H = _u(rng, 0.20, 0.35), _u(rng, 0.15, 0.30), _u(rng, 0.10, 0.20)
    asm = _Assembly("box")
    asm.link("body", box_surface(rng, (-D / 2, -W / 2, 0), (D / 2, W / 2, H), N_BODY), roles=("body",))
    t = 0.01
    asm.link("lid", _panel(rng, (-D / 2, -W / 2, 0), (D / 2, W / 2, t)), roles=("lid",))
    asm.joint("lid_slide", "prismatic", "body", "lid", xyz=(0.0, 0.0, H), axis=(1, 0, 0), upper=0.6 * D)
    asm.link("handle", cylinder_surface(rng, (0, 0, 0), "z", 0.012, 0.02, N_KNOB), roles=("handle",))
    asm.fixed("lid", "handle", (D / 2 - 0.035, 0.0, t + 0.01))
    return asm.build()


def _lifting_lid(rng, name, r_range, h_range, lid_frac, upper):
    r, H = _u(rng, *r_range), _u(rng, *h_range)
    asm = _Assembly(name)
    asm.link("body", cylinder_surface(rng, (0, 0, H / 2), "z", r, H, N_BODY, caps=False), roles=("body",))
    t = 0.01
    asm.link("lid", disk(rng, (0, 0, t / 2), lid_frac * r, t, N_PANEL), roles=("lid",))
    asm.joint("lid_lift", "prismatic", "body", "lid", xyz=(0.0, 0.0, H), axis=(0, 0, 1), upper=upper)
    asm.link("handle", cylinder_surface(rng, (0, 0, 0), "z", 0.015, 0.03, N_KNOB), roles=("handle",))
    asm.fixed("lid", "handle", (0.0, 0.0, t + 0.015))
    return asm.build()


def _kitchen_pot(rng):
    return _lifting_lid(rng, "kitchen pot", (0.10, 0.15), (0.10, 0.16), 1.0, 0.20)


def _kettle(rng):
    return _lifting_lid(rng, "kettle", (0.08, 0.10), (0.20, 0.25), 0.55, 0.15)


def _bottle(rng):
    r, H = _u(rng, 0.03, 0.045), _u(rng, 0.18, 0.28)
    rc, hc = _u(rng, 0.015, 0.02), _u(rng, 0.02, 0.025)
    asm = _Assembly("bottle")
    body = cylinder_surface(rng, (0, 0, H / 2), "z", r, H, N_BODY - 64)
    neck = cylinder_surface(rng, (0, 0, H + 0.015), "z", rc - 0.002, 0.03, 64, caps=False)
    asm.link("body", np.concatenate([body, neck]), roles=("body",))
    asm.link("cap", cylinder_surface(rng, (0, 0, hc / 2), "z", rc, hc, N_HANDLE + 32), roles=("cap",))
    asm.joint("cap_screw", "screw", "body", "cap", xyz=(0.0, 0.0, H + 0.02), axis=(0, 0, 1), upper=1080.0, pitch=0.008)
    return asm.build()


def _dispenser(rng):
    r, H = _u(rng, 0.035, 0.05), _u(rng, 0.15, 0.22)
    asm = _Assembly("dispenser")
    body = cylinder_surface(rng, (0, 0, H / 2), "z", r, H, N_BODY - 48)
    stem_fixed = cylinder_surface(rng, (0, 0, H + 0.015), "z", 0.006, 0.03, 48, caps=False)
    asm.link("body", np.concatenate([body, stem_fixed]), roles=("body",))
    head = np.concatenate([
        box_surface(rng, (-0.02, -0.015, 0.0), (0.05, 0.015, 0.025), N_HANDLE),
        cylinder_surface(rng, (0.05, 0, 0.012), "x", 0.005, 0.02, 32),
    ])
    asm.link("pump_head", head, roles=("handle",))
    asm.joint("pump_press", "prismatic", "body", "pump_head", xyz=(0.0, 0.0, H + 0.06), axis=(0, 0, -1), upper=0.03)
    return asm.build()


def _bucket(rng):
    r, H = _u(rng, 0.12, 0.15), _u(rng, 0.20, 0.25)
    asm = _Assembly("bucket")
    asm.link("body", cylinder_surface(rng, (0, 0, H / 2), "z", r, H, N_BODY, caps=False), roles=("body",))
    asm.link("handle", arc_tube(rng, r + 0.005, 0.0, np.pi, 0.004, N_HANDLE))
    asm.joint("handle_pivot", "revolute", "body", "handle", xyz=(0.0, 0.0, H), axis=(0, 1, 0), upper=90.0)
    asm.link("grip", arc_tube(rng, r + 0.005, np.radians(70), np.radians(110), 0.015, N_KNOB), roles=("handle",))
    asm.fixed("handle", "grip", (0.0, 0.0, 0.0))
    return asm.build()


def _faucet(rng):
    Hb = _u(rng, 0.12, 0.18)
    L = _u(rng, 0.08, 0.12)
    asm = _Assembly("faucet")
    base = cylinder_surface(rng, (0, 0, Hb / 2), "z", 0.025, Hb, N_BODY // 2)
    spout = box_surface(rng, (0.0, -0.012, Hb - 0.06), (0.16, 0.012, Hb - 0.035), N_BODY - N_BODY // 2)
    asm.link("body", np.concatenate([base, spout]), roles=("body",))
    lever = cylinder_surface(rng, (-L / 2, 0, 0.02), "x", 0.009, L, N_HANDLE + 32)
    asm.link("lever", lever, roles=("handle",))
    asm.joint("lever_pivot", "revolute", "body", "lever", xyz=(0.0, 0.0, Hb), axis=(0, 0, 1), upper=90.0)
    return asm.build()


ARTICULATED_BUILDERS = {
    "bottle": _bottle,
    "box": _box,
    "bucket": _bucket,
    "dispenser": _dispenser,
    "door": _door,
    "folding chair": _folding_chair,
    "kitchen pot": _kitchen_pot,
    "laptop": _laptop,
    "microwave": _microwave,
    "refrigerator": _refrigerator,
    "safe": _safe,
    "storage furniture": _storage_furniture,
    "trash can": _trash_can,
    "faucet": _faucet,
    "oven": _oven,
    "table": _table,
    "toilet": _toilet,
    "kettle": _kettle,
    "washing machine": _washing_machine,
}


def build_articulated(category: str, rng) -> KinematicTree:
    try:
        builder = ARTICULATED_BUILDERS[category]
    except KeyError:
        raise ValueError(f"unknown articulated category {category!r}") from None
    return builder(rng)


def part_noun(link_name: str) -> str:
    """Readable noun for a link name: ``drawer_2`` -> ``drawer``."""
    base = link_name.rsplit("_", 1)[0] if link_name.rsplit("_", 1)[-1].isdigit() else link_name
    return base.replace("_", " ")


# --------------------------------------------------------------------------
# tools


@dataclass(frozen=True)
class ToolModel:
    category: str
    grasp_points: np.ndarray
    functional_points: np.ndarray
    functional_name: str
    verb: str

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([self.grasp_points, self.functional_points])

    @property
    def functional_point(self) -> np.ndarray:
        return self.functional_points.mean(axis=0)


TOOL_FUNCTIONS = {
    "brush": ("bristles", "sweeping"),
    "razor": ("blade", "shaving"),
    "screwdriver": ("tip", "driving screws"),
    "hair dryer": ("nozzle", "blowing air"),
    "hammer": ("head", "striking"),
    "knife": ("blade", "cutting"),
    "spoon": ("bowl", "scooping"),
    "spatula": ("blade", "flipping"),
    "power drill": ("chuck", "drilling"),
    "flower shovel": ("blade", "digging"),
    "fork": ("tines", "piercing food"),
    "ladle": ("bowl", "scooping liquid"),
}

GAP = 0.006


def _tool_parts(category: str, rng):
    n = N_HANDLE + 32
    if category == "brush":
        L = _u(rng, 0.12, 0.18)
        g = cylinder_surface(rng, (L / 2, 0, 0), "x", _u(rng, 0.010, 0.013), L, n)
        hl = _u(rng, 0.05, 0.08)
        f = box_surface(rng, (L + GAP, -0.018, -0.015), (L + GAP + hl, 0.018, 0.02), n)
    elif category == "razor":
        L = _u(rng, 0.10, 0.12)
        g = box_surface(rng, (0, -0.006, -0.004), (L, 0.006, 0.004), n)
        f = box_surface(rng, (L + GAP, -0.022, -0.005), (L + GAP + 0.014, 0.022, 0.006), n)
    elif category == "screwdriver":
        L = _u(rng, 0.08, 0.11)
        g = cylinder_surface(rng, (L / 2, 0, 0), "x", _u(rng, 0.014, 0.018), L, n)
        s = _u(rng, 0.08, 0.12)
        f = cylinder_surface(rng, (L + GAP + s / 2, 0, 0), "x", 0.0035, s, n)
    elif category == "hair dryer":
        L = _u(rng, 0.09, 0.12)
        g = box_surface(rng, (0, -0.015, -0.02), (L, 0.015, 0.02), n)
        b = _u(rng, 0.14, 0.18)
        f = cylinder_surface(rng, (L + GAP + 0.04, 0, 0), "z", 0.04, b, n)
    elif category == "hammer":
        L = _u(rng, 0.20, 0.28)
        g = cylinder_surface(rng, (L / 2, 0, 0), "x", _u(rng, 0.012, 0.016), L, n)
        hz = _u(rng, 0.09, 0.11)
        f = box_surface(rng, (L + GAP, -hz / 2, -0.0125), (L + GAP + 0.032, hz / 2, 0.0125), n)
    elif category == "knife":
        L = _u(rng, 0.10, 0.12)
        g = box_surface(rng, (0, -0.0075, -0.01), (L, 0.0075, 0.01), n)
        b = _u(rng, 0.12, 0.18)
        f = box_surface(rng, (L + GAP, -0.001, -0.015), (L + GAP + b, 0.001, _u(rng, 0.012, 0.02)), n)
    elif category == "spoon":
        L = _u(rng, 0.12, 0.15)
        g = box_surface(rng, (0, -0.006, -0.002), (L, 0.006, 0.002), n)
        f = disk(rng, (L + GAP + 0.025, 0, 0), 0.022, 0.008, n) * np.array([1.2, 0.8, 1.0]) + np.array([-0.2 * (L + GAP + 0.025), 0, 0])
    elif category == "spatula":
        L = _u(rng, 0.15, 0.20)
        g = cylinder_surface(rng, (L / 2, 0, 0), "x", 0.011, L, n)
        b = _u(rng, 0.08, 0.10)
        w = _u(rng, 0.06, 0.08)
        f = box_surface(rng, (L + GAP, -w / 2, -0.0015), (L + GAP + b, w / 2, 0.0015), n)
    elif category == "power drill":
        L = _u(rng, 0.12, 0.15)
        g = box_surface(rng, (0, -0.025, -0.03), (L, 0.025, 0.03), n)
        s = _u(rng, 0.05, 0.08)
        f = cylinder_surface(rng, (L + GAP + s / 2, 0, 0), "x", _u(rng, 0.006, 0.010), s, n)
    elif category == "flower shovel":
        L = _u(rng, 0.10, 0.14)
        g = cylinder_surface(rng, (L / 2, 0, 0), "x", 0.014, L, n)
        b = _u(rng, 0.10, 0.14)
        w = _u(rng, 0.06, 0.08)
        f = box_surface(rng, (L + GAP, -w / 2, -0.002), (L + GAP + b, w / 2, 0.002), n)
    elif category == "fork":
        L = _u(rng, 0.10, 0.13)
        g = box_surface(rng, (0, -0.006, -0.002), (L, 0.006, 0.002), n)
        tl = _u(rng, 0.04, 0.05)
        f = np.concatenate([
            box_surface(rng, (L + GAP, y - 0.0015, -0.0015), (L + GAP + tl, y + 0.0015, 0.0015), n // 4)
            for y in (-0.009, -0.003, 0.003, 0.009)
        ])
    elif category == "ladle":
        L = _u(rng, 0.20, 0.25)
        g = cylinder_surface(rng, (L / 2, 0, 0), "x", 0.006, L, n)
        r = _u(rng, 0.04, 0.05)
        f = hemisphere(rng, (L + GAP + r, 0, 0), r, n)
    else:
        raise ValueError(f"unknown tool category {category!r}")
    return g, f


def build_tool(category: str, rng) -> ToolModel:
    g, f = _tool_parts(category, rng)
    allpts = np.concatenate([g, f])
    center = 0.5 * (allpts.min(axis=0) + allpts.max(axis=0))
    name, verb = TOOL_FUNCTIONS[category]
    return ToolModel(category, g - center, f - center, name, verb)
