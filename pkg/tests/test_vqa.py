import json
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affordkit.core import ManipulationType, Pose6D
from affordkit.datagen import GenConfig, generate_articulated
from affordkit.geometry import rotated_iou
from affordkit.vqa import (
    PROMPTS,
    TASKS,
    AnswerError,
    CountMismatch,
    MalformedAnswer,
    MissingFunctionalBox,
    MissingTargetPart,
    NoiseConfig,
    OraclePredictor,
    PredictRequest,
    SubprocessPredictor,
    ValueOutOfRange,
    VqaRecord,
    VqaTaskKind,
    build_vqa_dataset,
    format_answer,
    ground_truth,
    oracle_predict,
    parse_answer,
    parse_prompt_box,
    serialize_task,
    task_targets,
)

from generators import random_prediction, round_trip_error


@pytest.fixture(scope="module")
def microwave():
    cfg = GenConfig(seed=7, articulated={"microwave": 1}, states_per_object=1, views_per_object=1,
                    unseen_instance_ratio=0.0)
    return next(generate_articulated(cfg, "microwave"))


def tools_of(corpus):
    return [s for s in corpus if any(p.functional_box is not None for _, p in s.iter_parts())]


def test_four_tasks_and_prompts():
    assert len(TASKS) == 4
    assert PROMPTS[VqaTaskKind.PART_DETECTION_2D] == \
        "Please detect all manipulable parts and provide their 2D rotated bounding boxes."
    assert PROMPTS[VqaTaskKind.POSE_DETECTION_6D] == \
        "Please detect the manipulation type of the object and provide the 6D pose."


def test_part_detection_answer(microwave):
    rec = serialize_task(microwave, VqaTaskKind.PART_DETECTION_2D)
    prefix = "There are 1 manipulable object parts, each with a corresponding 2D bounding box: [("
    assert rec.answer.startswith(prefix)
    numbers = rec.answer[len(prefix) - 2:].replace("(", " ").replace(")", " ").replace(",", " ").strip(" [].")
    assert all(len(x.split(".")[1]) == 2 for x in numbers.split())


def test_tool_pose_answer(corpus):
    s = tools_of(corpus)[0]
    part = next(p for _, p in s.iter_parts())
    rec = serialize_task(s, VqaTaskKind.POSE_DETECTION_6D, part.part_id)
    assert rec.answer.startswith("freedom object")
    body = rec.answer.split(":", 1)[1]
    nums = [x for x in body.replace("(", ",").replace(")", ",").strip(" [].").split(",") if x.strip()]
    assert len(nums) == 12


def test_affordance_prompt_embeds_part_box(microwave):
    part = next(p for _, p in microwave.iter_parts())
    rec = serialize_task(microwave, VqaTaskKind.GRASP_AFFORDANCE_2D, part.part_id)
    assert rec.prompt.startswith("Please detect the grasp region of part with BBox [")
    assert np.abs(parse_prompt_box(rec.prompt).as_array() - part.part_box.as_array()).max() <= 0.005 + 1e-9
    assert rec.answer.startswith("Here is the grasp affordance region BBox")


def test_missing_targets(microwave):
    part = next(p for _, p in microwave.iter_parts())
    with pytest.raises(MissingFunctionalBox):
        serialize_task(microwave, VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D, part.part_id)
    with pytest.raises(MissingTargetPart):
        serialize_task(microwave, VqaTaskKind.GRASP_AFFORDANCE_2D)


def test_count_mismatch():
    text = "There are 2 manipulable object parts, each with a corresponding 2D bounding box: " \
           "[(1.00,1.00),(3.00,1.00),(3.00,2.00),(1.00,2.00)]."
    with pytest.raises(CountMismatch) as e:
        parse_answer(text, VqaTaskKind.PART_DETECTION_2D)
    assert (e.value.stated, e.value.parsed) == (2, 1)


def test_structured_errors():
    with pytest.raises(MalformedAnswer) as e:
        parse_answer("Here is the grasp affordance region BBox [(1,2),(3,4)]", VqaTaskKind.GRASP_AFFORDANCE_2D)
    assert e.value.position > 0
    with pytest.raises(ValueOutOfRange):
        parse_answer("Here is the grasp affordance region BBox [(1e9,2),(3,4),(5,6),(7,8)]",
                     VqaTaskKind.GRASP_AFFORDANCE_2D)
    with pytest.raises(MalformedAnswer):
        parse_answer("", VqaTaskKind.POSE_DETECTION_6D)


def test_record_round_trip_on_corpus(corpus):
    for s in corpus:
        for task, pid in task_targets(s):
            rec = serialize_task(s, task, pid)
            dec = parse_answer(rec.answer, task)
            assert round_trip_error(rec.prediction, dec) is None
            assert VqaRecord.from_dict(json.loads(rec.to_json())) == rec


def benign_mutation(text: str, rng) -> str:
    """Whitespace, bracket style and final-period drift."""
    out = []
    for ch in text:
        if ch == " ":
            out.append(" " * int(rng.integers(1, 4)))
        elif ch in ",:" and rng.random() < 0.3:
            out.append(ch + " ")
        elif ch == "(" and rng.random() < 0.3:
            out.append("[")
            out.append("\x00")
            continue
        else:
            out.append(ch)
    s = "".join(out)
    # an opening bracket flipped above must close with the matching style
    parts = s.split("\x00")
    fixed = parts[0]
    for rest in parts[1:]:
        k = rest.index(")")
        fixed += rest[:k] + "]" + rest[k + 1:]
    if rng.random() < 0.5:
        fixed = fixed.rstrip(".")
    if rng.random() < 0.3:
        fixed = "  " + fixed + " \n"
    return fixed


def test_benign_mutations_parse():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        pred = random_prediction(rng)
        text = benign_mutation(format_answer(pred), rng)
        assert round_trip_error(pred, parse_answer(text, pred.task)) is None, text


def test_canonical_text_is_a_fixed_point():
    rng = np.random.default_rng(8)
    for _ in range(2000):
        pred = random_prediction(rng)
        text = format_answer(pred)
        assert format_answer(parse_answer(text, pred.task)) == text


def test_injective_at_precision():
    from affordkit.core import JointAxis, RotatedBox2D

    rng = np.random.default_rng(9)
    for _ in range(1000):
        pred = random_prediction(rng)
        if pred.task is VqaTaskKind.POSE_DETECTION_6D:
            ulp, pose = 1e-4, pred.pose
            rows = np.array(pose.rows() if isinstance(pose, Pose6D) else [pose.p0, pose.p1])
            i, j = int(rng.integers(len(rows))), int(rng.integers(3))
            rows[i, j] += 1.5 * ulp * rng.choice([-1, 1])
            other = Pose6D.from_rows(rows) if isinstance(pose, Pose6D) else JointAxis(*rows)
            twin = type(pred)(pred.task, manipulation_type=pred.manipulation_type, pose=other)
        else:
            if not pred.boxes:
                continue
            ulp = 1e-2
            k = int(rng.integers(len(pred.boxes)))
            v = pred.boxes[k].as_array()
            v[int(rng.integers(4)), int(rng.integers(2))] += 1.5 * ulp * rng.choice([-1, 1])
            boxes = list(pred.boxes)
            boxes[k] = RotatedBox2D(tuple(map(tuple, v)))
            twin = type(pred)(pred.task, boxes=tuple(boxes))
        assert format_answer(twin) != format_answer(pred)


def test_oracle_zero_noise_is_exact(corpus):
    for s in corpus[:20]:
        for task, pid in task_targets(s):
            gt = ground_truth(s, task, s.find_part(pid)[1] if pid else None)
            assert oracle_predict(s, task, NoiseConfig(), pid) == gt


def mean_region_iou(samples, sigma: float, seed: int = 0) -> float:
    noise = NoiseConfig(center_sigma_px=sigma)
    vals = []
    for s in samples:
        for task, pid in task_targets(s):
            if task in (VqaTaskKind.GRASP_AFFORDANCE_2D, VqaTaskKind.FUNCTIONAL_AFFORDANCE_2D):
                gt = oracle_predict(s, task, NoiseConfig(), pid)
                vals.append(rotated_iou(gt.box, oracle_predict(s, task, noise, pid, seed).box))
    return float(np.mean(vals))


def test_center_jitter_ordering(corpus):
    m0, m4, m16 = (mean_region_iou(corpus, s) for s in (0.0, 4.0, 16.0))
    assert m0 == 1.0
    assert m16 < m4 < 1.0


def test_type_confusion_never_true(corpus):
    noise = NoiseConfig(type_confusion=1.0)
    n = 0
    for s in corpus:
        for task, pid in task_targets(s):
            part = s.find_part(pid)[1] if pid else None
            if task is VqaTaskKind.POSE_DETECTION_6D and part.manipulation_type.is_articulated:
                pred = oracle_predict(s, task, noise, pid)
                assert pred.manipulation_type is not part.manipulation_type
                assert pred.manipulation_type.is_articulated
                n += 1
    assert n > 10


def test_noise_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(center_sigma_px=-1)
    with pytest.raises(ValueError):
        NoiseConfig(type_confusion=1.5)


def test_dataset_mix(corpus):
    recs = list(build_vqa_dataset(corpus, (13, 13, 13, 1), seed=0))
    assert len(recs) == 40
    scaled = list(build_vqa_dataset(corpus, {t: n for t, n in zip(TASKS, (130, 130, 130, 10))}, seed=0))
    counts = [sum(r.task is t for r in scaled) for t in TASKS]
    assert counts == [130, 130, 130, 10]
    assert list(build_vqa_dataset([], (130, 130, 130, 10))) == []
    again = list(build_vqa_dataset(corpus, (13, 13, 13, 1), seed=0))
    assert [r.to_json() for r in recs] == [r.to_json() for r in again]


def test_oracle_predictor_answers_parse(corpus):
    pred = OraclePredictor({s.scene_id: s for s in corpus}, NoiseConfig(center_sigma_px=2, axis_error_deg=5), 1)
    s = corpus[0]
    reqs = [PredictRequest(s.scene_id, t, "", "x", pid) for t, pid in task_targets(s)]
    for r, a in zip(reqs, pred.answer(reqs)):
        parse_answer(a, r.task)


def test_subprocess_predictor(tmp_path):
    script = tmp_path / "echo_model.py"
    script.write_text(
        "import json, sys\n"
        "for line in sys.stdin:\n"
        "    req = json.loads(line)\n"
        "    print(json.dumps({'answer': req['task'] + ':' + req['scene_id']}))\n")
    p = SubprocessPredictor([sys.executable, str(script)], timeout=30)
    reqs = [PredictRequest("s1", VqaTaskKind.PART_DETECTION_2D, "q", "img"),
            PredictRequest("s2", VqaTaskKind.POSE_DETECTION_6D, "q", "img", "p")]
    assert p.answer(reqs) == ["PartDetection2D:s1", "PoseDetection6D:s2"]


@settings(max_examples=500, deadline=None)
@given(st.binary(max_size=200), st.sampled_from(TASKS))
def test_parser_total_on_bytes(data, task):
    try:
        parse_answer(data, task)
    except AnswerError:
        pass


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="There are 0123456789.,:()[] -eE+BboxHisgrapfunctional6DPvxmjt\n", max_size=120),
       st.sampled_from(TASKS))
def test_parser_total_on_near_miss_text(text, task):
    try:
        parse_answer(text, task)
    except AnswerError:
        pass
