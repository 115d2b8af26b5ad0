"""INI configuration shared by every CLI stage.

A config file has the sections ``[gen] [articulated] [tools] [tool_scenes]
[vqa] [predict] [noise] [manip] [eval]``; every section and key is optional.
``docs/config.md`` lists the keys. Category sections map a category name to
an object count; the key ``all`` sets every category of that kind at once
and explicit entries override it.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .datagen import GenConfig
from .datagen.catalog import ARTICULATED_CATEGORIES, TOOL_CATEGORIES
from .datagen.config import SPLITS, largest_remainder
from .errors import AffordkitError
from .manip import DEFAULT_DELTA, PlanParams
from .vqa import DEFAULT_MIX, TASKS, NoiseConfig

SECTIONS = ("gen", "articulated", "tools", "tool_scenes", "vqa", "predict", "noise", "manip", "eval")


class ConfigError(AffordkitError):
    """A config file that cannot be read or holds an invalid value."""


@dataclass
class VqaSettings:
    total: int | None = None
    mix: tuple[int, ...] = DEFAULT_MIX

    def counts(self) -> dict:
        """Per-task record counts: ``total`` apportioned by ``mix``."""
        if self.total is None:
            raise ValueError("no [vqa] total configured; the vqa stage then emits one pass over the corpus")
        return {t: n for t, n in zip(TASKS, largest_remainder(self.total, self.mix))}


@dataclass
class PredictSettings:
    predictor: str = "oracle"
    command: str | None = None
    timeout: float = 60.0


@dataclass
class ManipSettings:
    delta: float = DEFAULT_DELTA
    mode: str = "normalized"
    include_tools: bool = True
    params: PlanParams = field(default_factory=PlanParams)


@dataclass
class EvalSettings:
    weighting: str = "category"
    missing: str = "zero"
    box_mode: str = "rotated"


@dataclass
class PipelineConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    vqa: VqaSettings = field(default_factory=VqaSettings)
    predict: PredictSettings = field(default_factory=PredictSettings)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    manip: ManipSettings = field(default_factory=ManipSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)

    @property
    def seed(self) -> int:
        return self.gen.seed

    def with_seed(self, seed: int | None) -> "PipelineConfig":
        if seed is None:
            return self
        return replace(self, gen=replace(self.gen, seed=int(seed)))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(":", ",").split(",") if x.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


def _names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _counts(section, known: tuple[str, ...], what: str) -> dict[str, int]:
    out: dict[str, int] = {}
    if "all" in section:
        out = {c: int(section["all"]) for c in known}
    for key, value in section.items():
        if key == "all":
            continue
        if key not in known:
            raise ValueError(f"unknown {what} category {key!r}; choose from {', '.join(known)}")
        out[key] = int(value)
    return {c: out[c] for c in known if c in out}


_GEN_KEYS = {
    "seed": int, "states_per_object": int, "views_per_object": int, "image_width": int, "image_height": int,
    "theta_deg": float, "unseen_instance_ratio": float, "articulated_unseen_instances": _optional_int,
    "tool_unseen_instances": _optional_int, "unseen_categories": _names, "distractors": _ints,
    "articulated_mode": _bool, "tool_mode": _bool, "emit_urdf": _bool,
}
_PLAN_TYPES = {f.name: float for f in fields(PlanParams)
               if f.name not in ("direction", "lid_normal", "function_point", "target")}


def _take(section, table: dict, what: str) -> dict:
    out = {}
    for key, value in section.items():
        if key not in table:
            raise ValueError(f"unknown key {key!r} in [{what}]; expected one of {', '.join(sorted(table))}")
        out[key] = table[key](value)
    return out


def parse_config(text: str, source: str = "<string>") -> PipelineConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = lambda s: " ".join(s.lower().split())
    try:
        cp.read_string(text, source=source)
        unknown = [s for s in cp.sections() if s not in SECTIONS]
        if unknown:
            raise ValueError(f"unknown section [{unknown[0]}]; expected one of {', '.join(SECTIONS)}")
        sec = {s: (cp[s] if cp.has_section(s) else {}) for s in SECTIONS}
        gen_kw = _take(sec["gen"], _GEN_KEYS, "gen")
        if "distractors" in gen_kw and len(gen_kw["distractors"]) != 2:
            raise ValueError("distractors takes two integers: min, max")
        gen_kw["articulated"] = _counts(sec["articulated"], ARTICULATED_CATEGORIES, "articulated")
        gen_kw["tools"] = _counts(sec["tools"], TOOL_CATEGORIES, "tool")
        if sec["tool_scenes"]:
            gen_kw["tool_scenes"] = _take(sec["tool_scenes"], {s: int for s in SPLITS}, "tool_scenes")
        gen = GenConfig(**gen_kw)
        vqa_kw = _take(sec["vqa"], {"total": _optional_int, "mix": _ints}, "vqa")
        vqa = VqaSettings(**vqa_kw)
        if len(vqa.mix) != len(TASKS):
            raise ValueError(f"[vqa] mix needs {len(TASKS)} weights, got {len(vqa.mix)}")
        predict = PredictSettings(**_take(sec["predict"], {"predictor": str, "command": str, "timeout": float},
                                          "predict"))
        if predict.predictor not in ("oracle", "command"):
            raise ValueError("[predict] predictor must be 'oracle' or 'command'")
        if predict.predictor == "command" and not predict.command:
            raise ValueError("[predict] predictor = command needs a 'command' key")
        noise = NoiseConfig(**_take(sec["noise"], {f.name: float for f in fields(NoiseConfig)}, "noise"))
        manip_kw = _take(sec["manip"], {"delta": float, "mode": str, "include_tools": _bool, **_PLAN_TYPES}, "manip")
        plan_kw = {k: manip_kw.pop(k) for k in list(manip_kw) if k in _PLAN_TYPES}
        manip = ManipSettings(**manip_kw, params=PlanParams(**plan_kw))
        if manip.mode not in ("normalized", "absolute"):
            raise ValueError("[manip] mode must be 'normalized' or 'absolute'")
        ev = EvalSettings(**_take(sec["eval"], {"weighting": str, "missing": str, "box_mode": str}, "eval"))
        for key, allowed in (("weighting", ("category", "sample")), ("missing", ("zero", "exclude")),
                             ("box_mode", ("rotated", "axis_aligned"))):
            if getattr(ev, key) not in allowed:
                raise ValueError(f"[eval] {key} must be one of {', '.join(allowed)}")
    except (configparser.Error, ValueError, TypeError) as e:
        raise ConfigError(f"{source}: {e}") from None
    return PipelineConfig(gen, vqa, predict, noise, manip, ev)


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return PipelineConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e.strerror}") from None
    return parse_config(text, str(p))
