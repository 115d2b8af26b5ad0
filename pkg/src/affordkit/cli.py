"""Command-line pipeline: gen, vqa, predict, plan, simulate, eval, report, pipeline.

Every stage reads and writes fixed file names inside ``--workdir`` (each
overridable) so stages chain without extra flags::

    affordkit gen      --config configs/desk.cfg --workdir out
    affordkit vqa      --workdir out
    affordkit predict  --workdir out
    affordkit plan     --workdir out
    affordkit simulate --workdir out
    affordkit eval     --workdir out
    affordkit report   --workdir out

Outputs are written atomically, so a failing stage never leaves a partial
file and never touches the outputs of earlier stages. Exit status is 0 on
success, 1 when an input or output fails validation, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, PipelineConfig, load_config
from .core import atomic_write_text, build_manifest, iter_jsonl, sample_from_dict, validate, write_samples, write_jsonl
from .datagen import InsufficientObjects, generate_corpus
from .datagen.config import SPLITS, planned_counts
from .evaluation import (
    TABLE_III_COLUMNS,
    TOOL_SUCCESS_COLUMNS,
    fmt,
    iou_table,
    render_csv,
    render_text,
    report_json,
    reports_from_json,
    success_table,
)
from .manip import EpisodeLog
from .pipeline import EVAL_SPLITS, AnswerRow, PlanRecord, SimulationSettings, decode, execute_plans, plan, predict
from .vqa import NoiseConfig, OraclePredictor, PredictorFailure, SubprocessPredictor, build_vqa_dataset, evaluation_records

log = logging.getLogger("affordkit")

FILES = {
    "corpus": "corpus.jsonl",
    "manifest": "manifest.json",
    "vqa": "vqa.jsonl",
    "predictions": "predictions.jsonl",
    "plans": "plans.jsonl",
    "episodes": "episodes.jsonl",
    "eval": "eval.json",
    "reports": "reports",
}
PRODUCER = {"corpus": "gen", "predictions": "predict", "plans": "plan", "episodes": "simulate", "eval": "eval"}
REPORT_NAMES = ("tools_iou", "articulated_iou", "articulated_success", "tool_success")


class UsageError(Exception):
    """Bad invocation; exit status 2."""


class ValidationFailure(Exception):
    """Invalid input or output data; exit status 1."""


# --------------------------------------------------------------------------
# helpers


def _path(args, name: str) -> Path:
    explicit = getattr(args, name, None)
    return Path(explicit) if explicit else Path(args.workdir) / FILES[name]


def _require(args, name: str) -> Path:
    p = _path(args, name)
    if not p.exists():
        hint = f"; run `affordkit {PRODUCER[name]}` first" if name in PRODUCER else ""
        raise UsageError(f"missing input {p}{hint}")
    return p


def _config(args) -> PipelineConfig:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        raise UsageError(str(e)) from None
    return cfg.with_seed(args.seed)


def _jsonl(path: Path, parse, what: str) -> list:
    out = []
    try:
        for i, d in enumerate(iter_jsonl(path), 1):
            try:
                out.append(parse(d))
            except KeyError as e:
                raise ValidationFailure(f"{path}:{i}: invalid {what} record: missing key {e}") from None
            except (TypeError, ValueError) as e:
                raise ValidationFailure(f"{path}:{i}: invalid {what} record: {e}") from None
    except json.JSONDecodeError as e:
        raise ValidationFailure(f"{path}: not JSON lines: {e}") from None
    return out


def _load_corpus(args, check: bool = True) -> list:
    samples = _jsonl(_require(args, "corpus"), sample_from_dict, "sample")
    if check:
        for s in samples:
            problems = validate(s)
            if problems:
                raise ValidationFailure(f"sample {s.scene_id} fails validation: {problems[0]}")
    return samples


def _eval_samples(samples, splits=EVAL_SPLITS) -> list:
    return [s for s in samples if s.split in splits]


def _settings(cfg: PipelineConfig, args) -> SimulationSettings:
    return SimulationSettings(cfg.manip.params, cfg.manip.delta, cfg.manip.mode, _noise(cfg, args).to_json())


def _decoded(args) -> dict:
    return decode(_jsonl(_require(args, "predictions"), AnswerRow.from_dict, "prediction"))


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


# --------------------------------------------------------------------------
# stages


def format_plan(cfg: PipelineConfig) -> str:
    """Human-readable planned counts, the output of ``gen --dry-run``."""
    g = cfg.gen
    plan_ = planned_counts(g)
    a, t = plan_["articulated"], plan_["tools"]
    lines = []
    for s in SPLITS:
        lines.append(f"articulated {s}: {a[s]['objects']:,} objects in {a[s]['categories']} categories, "
                     f"{a[s]['images']:,} images")
    tr = a["train"]
    lines.append(f"articulated images: {tr['images']:,} "
                 f"({tr['objects']:,} train objects x {g.states_per_object} states x {g.views_per_object} views)")
    lines.append(f"articulated images, all splits: {sum(a[s]['images'] for s in SPLITS):,}")
    for s in SPLITS:
        lines.append(f"tools {s}: {t[s]['objects']:,} tools in {t[s]['categories']} categories, "
                     f"{t[s]['scenes']:,} scenes")
    counts = cfg.vqa.counts() if cfg.vqa.total is not None else None
    mix = ":".join(str(m) for m in cfg.vqa.mix)
    if counts is None:
        lines.append(f"vqa mix {mix}, total set by corpus size")
    else:
        lines.append(f"vqa records: {sum(counts.values()):,} at mix {mix} ("
                     + ", ".join(f"{k.value} {v:,}" for k, v in counts.items()) + ")")
    return "\n".join(lines)


def cmd_gen(args) -> int:
    cfg = _config(args)
    if args.dry_run:
        try:
            print(format_plan(cfg))
        except InsufficientObjects as e:
            raise UsageError(str(e)) from None
        return 0
    try:
        samples = generate_corpus(cfg.gen)
    except InsufficientObjects as e:
        raise UsageError(str(e)) from None
    bad = [(s.scene_id, v) for s in samples for v in validate(s)]
    if bad:
        raise ValidationFailure(f"{len(bad)} invalid samples, first {bad[0][0]}: {bad[0][1]}")
    manifest = build_manifest(samples)
    manifest["seed"] = cfg.gen.seed
    manifest["planned"] = planned_counts(cfg.gen)
    write_samples(_path(args, "corpus"), samples)
    atomic_write_text(_path(args, "manifest"), json.dumps(manifest, indent=2) + "\n")
    _say(args, f"gen: {len(samples)} samples -> {_path(args, 'corpus')}")
    return 0


def cmd_vqa(args) -> int:
    cfg = _config(args)
    samples = _load_corpus(args)
    train = [s for s in samples if s.split in (None, "train")]
    if cfg.vqa.total is None:
        records = list(evaluation_records(train))
    else:
        counts = cfg.vqa.counts()
        records = list(build_vqa_dataset(train, counts, seed=cfg.seed))
    n = write_jsonl(_path(args, "vqa"), (r.to_json() for r in records))
    _say(args, f"vqa: {n} records from {len(train)} training samples -> {_path(args, 'vqa')}")
    return 0


def _noise(cfg: PipelineConfig, args) -> NoiseConfig:
    kw = {}
    for name in ("center_sigma_px", "angle_sigma_deg", "axis_error_deg", "type_confusion"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    try:
        return replace(cfg.noise, **kw) if kw else cfg.noise
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_predict(args) -> int:
    cfg = _config(args)
    samples = _eval_samples(_load_corpus(args))
    noise = _noise(cfg, args)
    kind = args.predictor or cfg.predict.predictor
    if kind == "oracle":
        predictor = OraclePredictor({s.scene_id: s for s in samples}, noise, seed=cfg.seed)
    else:
        command = args.command or cfg.predict.command
        if not command:
            raise UsageError("--predictor command needs --command or [predict] command")
        predictor = SubprocessPredictor(shlex.split(command), timeout=cfg.predict.timeout)
    rows = list(predict(samples, predictor, image_ref=str(_path(args, "corpus").name)))
    n = write_jsonl(_path(args, "predictions"), (r.to_json() for r in rows))
    _say(args, f"predict: {n} answers ({kind}) -> {_path(args, 'predictions')}")
    return 0


def cmd_plan(args) -> int:
    cfg = _config(args)
    samples = _eval_samples(_load_corpus(args))
    records = plan(samples, _decoded(args), _settings(cfg, args), include_tools=cfg.manip.include_tools)
    n = write_jsonl(_path(args, "plans"), (r.to_json() for r in records))
    failed = sum(r.trajectory is None for r in records)
    _say(args, f"plan: {n} plans ({failed} without trajectory) -> {_path(args, 'plans')}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    samples = _eval_samples(_load_corpus(args))
    records = _jsonl(_require(args, "plans"), PlanRecord.from_dict, "plan")
    known = {s.scene_id for s in samples}
    stray = [r.scene_id for r in records if r.scene_id not in known]
    if stray:
        raise ValidationFailure(f"plan for unknown scene {stray[0]}")
    logs = execute_plans(samples, records, cfg.gen, _settings(cfg, args))
    n = write_jsonl(_path(args, "episodes"), (e.to_json() for e in logs))
    ok = sum(e.success for e in logs)
    _say(args, f"simulate: {n} episodes, {ok} successes -> {_path(args, 'episodes')}")
    return 0


def build_reports(cfg: PipelineConfig, samples, decoded, logs, weighting=None, missing=None, box_mode=None) -> dict:
    ev = cfg.eval
    kw = dict(weighting=weighting or ev.weighting, missing=missing or ev.missing, box_mode=box_mode or ev.box_mode)
    return {
        "tools_iou": iou_table(decoded, samples, "tools", **kw),
        "articulated_iou": iou_table(decoded, samples, "articulated", **kw),
        "articulated_success": success_table(logs, TABLE_III_COLUMNS),
        "tool_success": success_table(logs, TOOL_SUCCESS_COLUMNS),
    }


def cmd_eval(args) -> int:
    cfg = _config(args)
    samples = _eval_samples(_load_corpus(args))
    logs = _jsonl(_require(args, "episodes"), EpisodeLog.from_dict, "episode")
    reports = build_reports(cfg, samples, _decoded(args), logs, args.weighting,
                            "exclude" if args.exclude_missing else None, args.box_mode)
    atomic_write_text(_path(args, "eval"), report_json(reports))
    r = reports["tools_iou"]
    _say(args, "eval: tool IoU AVG " + ", ".join(f"{t.value} {fmt(r.avg(t))}" for t in r.rows)
         + f" -> {_path(args, 'eval')}")
    return 0


def cmd_report(args) -> int:
    path = _require(args, "eval")
    try:
        reports = reports_from_json(path.read_text())
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ValidationFailure(f"{path}: invalid evaluation file: {e}") from None
    out = _path(args, "reports")
    titles = {
        "tools_iou": "Tool affordance IoU",
        "articulated_iou": "Articulated part IoU",
        "articulated_success": "Articulated manipulation success",
        "tool_success": "Tool use success",
    }
    for name, rep in reports.items():
        atomic_write_text(out / f"{name}.txt", render_text(rep, titles.get(name, name)))
        atomic_write_text(out / f"{name}.csv", render_csv(rep))
    if not args.quiet:
        for name, rep in reports.items():
            print(render_text(rep, titles.get(name, name)))
    return 0


def cmd_pipeline(args) -> int:
    if args.dry_run:
        return cmd_gen(args)
    for stage in (cmd_gen, cmd_vqa, cmd_predict, cmd_plan, cmd_simulate, cmd_eval, cmd_report):
        rc = stage(args)
        if rc:
            return rc
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file (see docs/config.md)")
    p.add_argument("--seed", type=int, help="overrides [gen] seed; every stage is deterministic given it")
    p.add_argument("--workdir", default="out", help="directory holding stage inputs and outputs (default: out)")
    p.add_argument("-q", "--quiet", action="store_true", help="no summary on stdout")


def _files(p: argparse.ArgumentParser, *names: str) -> None:
    for n in names:
        p.add_argument(f"--{n}", metavar="PATH", help=f"override {FILES[n]} in the workdir")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="affordkit", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"affordkit {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = ap.add_subparsers(dest="command_name", metavar="STAGE")
    sub.required = True

    p = sub.add_parser("gen", help="generate the labeled corpus and its manifest")
    _common(p)
    _files(p, "corpus", "manifest")
    p.add_argument("--dry-run", action="store_true", help="print planned counts without generating")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("vqa", help="serialize training samples into VQA records")
    _common(p)
    _files(p, "corpus", "vqa")
    p.set_defaults(func=cmd_vqa)

    def noise_flags(p):
        p.add_argument("--predictor", choices=("oracle", "command"), help="overrides [predict] predictor")
        p.add_argument("--command", help="external predictor command (JSON lines on stdin/stdout)")
        for name, unit in (("center_sigma_px", "px"), ("angle_sigma_deg", "deg"), ("axis_error_deg", "deg"),
                           ("type_confusion", "probability")):
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float, metavar=unit.upper()[:4],
                           help=f"oracle noise in {unit}; overrides [noise] {name}")

    p = sub.add_parser("predict", help="answer every evaluation question")
    _common(p)
    _files(p, "corpus", "predictions")
    noise_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("plan", help="decode answers and plan trajectories")
    _common(p)
    _files(p, "corpus", "predictions", "plans")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="execute plans and log episodes")
    _common(p)
    _files(p, "corpus", "plans", "episodes")
    p.set_defaults(func=cmd_simulate)

    def eval_flags(p):
        p.add_argument("--weighting", choices=("category", "sample"), help="AVG column weighting")
        p.add_argument("--exclude-missing", action="store_true", help="leave missing predictions out of means")
        p.add_argument("--box-mode", choices=("rotated", "axis_aligned"), help="IoU on rotated or axis-aligned boxes")

    p = sub.add_parser("eval", help="aggregate IoU and success into eval.json")
    _common(p)
    _files(p, "corpus", "predictions", "episodes", "eval")
    eval_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render eval.json as text and CSV tables")
    _common(p)
    _files(p, "eval", "reports")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="run every stage with one config")
    _common(p)
    _files(p, *[k for k in FILES])
    p.add_argument("--dry-run", action="store_true", help="print planned counts without generating")
    noise_flags(p)
    eval_flags(p)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"affordkit {args.command_name}: error: {e}", file=sys.stderr)
        return 2
    except ValidationFailure as e:
        print(f"affordkit {args.command_name}: validation failed: {e}", file=sys.stderr)
        return 1
    except PredictorFailure as e:
        print(f"affordkit {args.command_name}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
