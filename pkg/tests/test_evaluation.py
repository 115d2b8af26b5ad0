import csv
import io
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affordkit.core import ManipulationType
from affordkit.evaluation import (
    TABLE_II_COLUMNS,
    TABLE_III_COLUMNS,
    IouCell,
    IouReport,
    IouTask,
    SuccessReport,
    UnmatchedPrediction,
    axis_aligned_iou,
    fmt,
    greedy_match,
    iou_table,
    render_csv,
    render_text,
    report_json,
    reports_from_json,
    success_table,
)
from affordkit.geometry import box_from_center, rotated_iou
from affordkit.manip import EpisodeLog, EpisodeResult
from affordkit.pipeline import decode, predict, simulate
from affordkit.vqa import MalformedAnswer, NoiseConfig, OraclePredictor, Prediction, VqaTaskKind

MT = ManipulationType
PAPER_TABLE_II_GRASP = (0.751, 0.692, 0.768, 0.717, 0.758, 0.768, 0.684, 0.740, 0.834, 0.713, 0.606, 0.641)


def decoded_for(corpus, noise=NoiseConfig(), seed=0):
    return decode(predict(corpus, OraclePredictor({s.scene_id: s for s in corpus}, noise, seed)))


@pytest.fixture(scope="module")
def exact(corpus):
    return decoded_for(corpus)


def log(split, mt, ok, i=0):
    r = EpisodeResult(0.0, 1.0 if ok else 0.0, 1.0 if ok else 0.0, ok)
    return EpisodeLog(f"s{i}", "o", "o/p", split, "c", mt, mt, {}, r)


def table_from_means(means, columns):
    cells = {(IouTask.GRASP, c): IouCell(1, m) for c, m in zip(columns, means)}
    return IouReport((IouTask.GRASP,), tuple(columns), cells)


def test_paper_table_ii_average():
    r = table_from_means(PAPER_TABLE_II_GRASP, TABLE_II_COLUMNS)
    assert fmt(r.avg(IouTask.GRASP)) == "0.723"
    assert [c for c in r.grid()[0][1:-1]] == ["Sl", "Sp", "Kf", "Ra", "Pd", "Hd", "Ha", "Br", "Sd", "Fs", "Ld", "Fr"]


def test_two_category_average():
    r = table_from_means((0.6, 0.8), TABLE_II_COLUMNS[:2])
    assert r.avg(IouTask.GRASP) == pytest.approx(0.7)


def test_sample_weighting():
    cols = TABLE_II_COLUMNS[:2]
    r = IouReport((IouTask.GRASP,), cols, {(IouTask.GRASP, cols[0]): IouCell(3, 3 * 0.6),
                                           (IouTask.GRASP, cols[1]): IouCell(1, 0.8)}, weighting="sample")
    assert r.avg(IouTask.GRASP) == pytest.approx((1.8 + 0.8) / 4)


def test_success_rate_arithmetic():
    logs = [log("unseen_instance", MT.REVOLUTE_PART, i < 7, i) for i in range(10)]
    r = success_table(logs)
    assert r.rate("oracle", ("unseen_instance", MT.REVOLUTE_PART)) == pytest.approx(0.7)
    assert r.rate("oracle", ("unseen_category", MT.REVOLUTE_PART)) is None
    assert "n/a" in render_text(r)


def test_table_iii_layout():
    assert [s for s, _ in TABLE_III_COLUMNS].count("unseen_instance") == 4
    assert [s for s, _ in TABLE_III_COLUMNS].count("unseen_category") == 3
    assert (("unseen_category", MT.BOTTLE_CAP)) not in TABLE_III_COLUMNS
    r = success_table([])
    header = r.grid()[0]
    assert header == ["Method", "Bottle Cap", "Sliding Lid", "Revolute Part", "Prismatic Part",
                      "Sliding Lid", "Revolute Part", "Prismatic Part"]
    text = render_text(r)
    assert "Unseen Instances" in text and "Unseen Categories" in text


def test_excluded_episodes_counted():
    r = success_table([log("train", MT.REVOLUTE_PART, True), log("unseen_category", MT.BOTTLE_CAP, True)])
    assert r.excluded == 2


def test_ground_truth_scores_one(corpus, exact):
    for kind in ("tools", "articulated"):
        r = iou_table(exact, corpus, kind)
        assert r.cells
        for row in r.rows:
            assert r.avg(row) == 1.0
        assert r.missing == 0 and r.unparseable == 0 and r.unmatched == []


def test_missing_and_unparseable(corpus, exact):
    preds = dict(exact)
    evaluated = {s.scene_id for s in corpus if s.split != "train"}
    grasp = [k for k in preds if k[1] is VqaTaskKind.GRASP_AFFORDANCE_2D and k[0] in evaluated]
    dropped, broken = grasp[0], grasp[1]
    del preds[dropped]
    preds[broken] = MalformedAnswer(0, "x")
    kinds = ["tools" if "/tool" in k[2] else "articulated" for k in (dropped, broken)]
    zero = {k: iou_table(preds, corpus, k) for k in set(kinds)}
    assert sum(r.missing for r in zero.values()) == 2
    assert sum(r.unparseable for r in zero.values()) == 1
    assert any(r.avg(IouTask.GRASP) < 1.0 for r in zero.values())
    excl = {k: iou_table(preds, corpus, k, missing="exclude") for k in set(kinds)}
    assert all(r.avg(IouTask.GRASP) == 1.0 for r in excl.values())


def test_unmatched_predictions(corpus, exact):
    preds = dict(exact)
    preds[("ghost", VqaTaskKind.GRASP_AFFORDANCE_2D, "ghost/p")] = next(iter(exact.values()))
    r = iou_table(preds, corpus, "tools")
    assert r.unmatched == [("ghost", VqaTaskKind.GRASP_AFFORDANCE_2D, "ghost/p")]
    assert r.avg(IouTask.GRASP) == 1.0
    assert "unmatched: ghost" in render_text(r)
    with pytest.raises(UnmatchedPrediction):
        iou_table(preds, corpus, "tools", strict=True)


def test_jitter_ordering_of_avg(corpus, exact):
    avgs = [iou_table(decoded_for(corpus, NoiseConfig(center_sigma_px=s)), corpus, "tools").avg(IouTask.GRASP)
            for s in (0.0, 4.0, 16.0)]
    assert avgs[0] == 1.0 > avgs[1] > avgs[2]


def naive_iou_means(decoded, corpus, kind):
    """Recompute every cell straight from the predictions, without the report types."""
    from affordkit.vqa import format_answer, ground_truth, parse_answer

    sums = defaultdict(list)
    for s in corpus:
        if s.split not in ("unseen_instance", "unseen_category"):
            continue
        is_tool = any(p.functional_box is not None for _, p in s.iter_parts())
        if is_tool != (kind == "tools"):
            continue
        for obj, part in s.iter_parts():
            for task, row in ((VqaTaskKind.GRASP_AFFORDANCE_2D, "Grasp"), (VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D,
                                                                            "Function")):
                if task is VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D and part.functional_box is None:
                    continue
                gt = parse_answer(format_answer(ground_truth(s, task, part)), task).box
                pred = decoded.get((s.scene_id, task, part.part_id))
                v = rotated_iou(pred.box, gt) if isinstance(pred, Prediction) else 0.0
                sums[(row, s.split, obj.category)].append(v)
    return {k: sum(v) / len(v) for k, v in sums.items()}


def test_report_matches_naive_recomputation(corpus):
    decoded = decoded_for(corpus, NoiseConfig(center_sigma_px=6, angle_sigma_deg=5), seed=3)
    for kind in ("tools", "articulated"):
        r = iou_table(decoded, corpus, kind)
        naive = naive_iou_means(decoded, corpus, kind)
        for (row, split, cat), m in naive.items():
            assert r.mean(IouTask(row), (split, cat)) == m
        for row in ("Grasp", "Function"):
            cols = [k for k in naive if k[0] == row]
            if cols:
                assert r.avg(IouTask(row)) == pytest.approx(np.mean([naive[k] for k in cols]), abs=1e-12)


def test_success_matches_naive_recomputation(corpus, small_cfg):
    decoded = decoded_for(corpus, NoiseConfig(axis_error_deg=30), seed=2)
    logs = simulate(corpus, decoded, small_cfg)
    r = success_table(logs)
    counts = defaultdict(lambda: [0, 0])
    for lg in logs:
        counts[(lg.split, lg.task_type)][0] += 1
        counts[(lg.split, lg.task_type)][1] += int(lg.success)
    for col in TABLE_III_COLUMNS:
        n, k = counts.get(col, [0, 0])
        assert r.cell("oracle", col).episodes == n
        assert r.rate("oracle", col) == (k / n if n else None)


def numbers_in(text: str) -> list[str]:
    import re

    return re.findall(r"\d+\.\d{3}|n/a", text)


def test_csv_and_text_agree(corpus):
    decoded = decoded_for(corpus, NoiseConfig(center_sigma_px=5), seed=1)
    for report in (iou_table(decoded, corpus, "tools"), iou_table(decoded, corpus, "articulated"),
                   success_table([log("unseen_instance", MT.SLIDING_LID, i % 3 == 0, i) for i in range(7)])):
        text, table = render_text(report), render_csv(report)
        rows = list(csv.reader(io.StringIO(table)))
        cells = [c for row in rows[2:] for c in row[1:]]
        assert numbers_in(" ".join(cells)) == numbers_in(text.split("missing=")[0].split("excluded=")[0])
        assert rows[1] == report.grid()[0]


def test_json_round_trip(corpus, exact):
    reports = {"tools": iou_table(exact, corpus, "tools"),
               "success": success_table([log("unseen_instance", MT.BOTTLE_CAP, True)])}
    back = reports_from_json(report_json(reports))
    assert isinstance(back["tools"], IouReport) and isinstance(back["success"], SuccessReport)
    assert render_text(back["tools"]) == render_text(reports["tools"])
    assert render_csv(back["success"]) == render_csv(reports["success"])


def test_axis_aligned_mode(corpus, exact):
    r = iou_table(exact, corpus, "tools", box_mode="axis_aligned")
    assert r.avg(IouTask.GRASP) == 1.0
    a = box_from_center((100, 100), 20, 10, 0)
    b = box_from_center((100, 100), 20, 10, 90)
    assert axis_aligned_iou(a, b) == pytest.approx(rotated_iou(a, b))


def test_greedy_match_one_to_one():
    t = [box_from_center((100, 100), 20, 20, 0), box_from_center((200, 200), 20, 20, 0)]
    p = [box_from_center((101, 100), 20, 20, 0)]
    scores = greedy_match(p, t)
    assert scores[1] == 0.0 and 0.9 < scores[0] < 1.0
    assert greedy_match(p + p, t[:1])[0] == scores[0]


def test_fmt():
    assert fmt(None) == "n/a"
    assert fmt(-0.0001) == "0.000"
    assert fmt(0.7225) in ("0.722", "0.723")
    assert fmt(1) == "1.000"


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_category_avg_is_mean_of_means(means):
    r = table_from_means(means, TABLE_II_COLUMNS[:len(means)])
    assert r.avg(IouTask.GRASP) == pytest.approx(sum(means) / len(means), abs=1e-12)
    assert 0.0 <= r.avg(IouTask.GRASP) <= 1.0
