import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infestscope.detections import Box, TreeClass, iou
from infestscope.fem import ngbdi, vdvi
from infestscope.metrics import evaluate
from infestscope.situation.density import PlotExtent
from infestscope.synth import (
    JITTER_FRACTION,
    ClusterSpec,
    DetectorNoise,
    HealthySpec,
    SceneSpec,
    SynthError,
    generate,
    render,
)


def spec(**kw):
    base = dict(
        seed=3,
        extent=PlotExtent(0, 0, 1000, 800),
        clusters=[ClusterSpec((300, 300), 40, 30)],
        healthy=HealthySpec(20, [ClusterSpec((700, 500), 40, 25)]),
        crown_area_range=(200, 500),
        min_spacing=25.0,
    )
    base.update(kw)
    return SceneSpec(**base)


def test_zero_noise_is_identity():
    t = generate(spec())
    assert [(d.image_id, d.box, d.cls) for d in t.detections] == [(a.image_id, a.box, a.cls) for a in t.annotations]
    assert all(d.score == 1.0 for d in t.detections)
    assert t.counts.fp == t.counts.fn == 0
    assert t.expected["score_model"] == "ideal"
    assert t.expected["n_infected"] == 30 and t.expected["n_healthy"] == 45


def test_miss_everything():
    t = generate(spec(detector_noise=DetectorNoise(miss_rate=1.0)))
    assert t.detections == []
    assert t.counts.fn == len(t.annotations)


def test_fixed_seed_is_bit_identical():
    s = spec(detector_noise=DetectorNoise(0.2, 0.3, 1.5))
    a, b = generate(s), generate(s)
    assert a.annotations == b.annotations and a.detections == b.detections and a.expected == b.expected
    assert generate(spec(seed=4)).annotations != a.annotations


def test_spec_dict_round_trip():
    s = spec(detector_noise=DetectorNoise(0.1, 0.2, 1.0, "overlap"), infected_crown_area_range=(100, 200))
    assert SceneSpec.from_dict(s.to_dict()) == s
    with pytest.raises(SynthError, match="malformed"):
        SceneSpec.from_dict({"extent": [0, 0, 1, 1]})


def test_placement_respects_extent_and_spacing():
    t = generate(spec())
    e = t.expected["spec"]["extent"]
    centers = np.array([a.box.center for a in t.annotations])
    for a in t.annotations:
        assert e[0] <= a.box.x_min and a.box.x_max <= e[2] and e[1] <= a.box.y_min and a.box.y_max <= e[3]
    d = np.sqrt(((centers[:, None] - centers[None]) ** 2).sum(-1)) + np.eye(len(centers)) * 1e9
    assert d.min() >= 25.0


def test_infeasible_specs():
    with pytest.raises(SynthError, match="infeasible"):
        generate(spec(healthy=HealthySpec(5000)))
    with pytest.raises(SynthError, match="infeasible"):
        generate(spec(min_spacing=200.0))
    with pytest.raises(SynthError, match="box_jitter"):
        generate(spec(detector_noise=DetectorNoise(box_jitter=math.sqrt(200) * JITTER_FRACTION)))


def test_jitter_bound_keeps_iou_above_half():
    s_min = math.sqrt(200)
    j = JITTER_FRACTION * s_min * 0.999
    t = generate(spec(detector_noise=DetectorNoise(box_jitter=j)))
    for a, d in zip(t.annotations, t.detections):
        assert iou(a.box, d.box) > 0.5
    # worst case: every edge pulled inward by the full bound on the smallest crown
    b = Box(0, 0, s_min, s_min)
    assert iou(b, Box(j, j, s_min - j, s_min - j)) > 0.5
    j = JITTER_FRACTION * s_min * 1.001
    assert iou(b, Box(j, j, s_min - j, s_min - j)) < 0.5


@settings(max_examples=15, deadline=None)
@given(
    st.integers(0, 2**31),
    st.floats(0, 0.6),
    st.floats(0, 0.6),
    st.floats(0, 0.9),
)
def test_evaluation_reproduces_recorded_counts(seed, miss, false, jitter_frac):
    s_min = math.sqrt(200)
    noise = DetectorNoise(miss, false, jitter_frac * JITTER_FRACTION * s_min)
    # spacing above the largest crown side keeps crowns from overlapping
    t = generate(spec(seed=seed, detector_noise=noise, min_spacing=math.sqrt(2 * 500)))
    assert evaluate(t.detections, t.annotations).counts == t.counts


def test_overlap_score_model_ranges():
    t = generate(spec(detector_noise=DetectorNoise(0.0, 0.5, 0.0, "overlap"), min_spacing=32.0))
    src = {a.box for a in t.annotations}
    tp = [d.score for d in t.detections if d.box in src]
    fp = [d.score for d in t.detections if d.box not in src]
    assert fp and all(0.6 <= s <= 1.0 for s in tp) and all(0.1 <= s <= 0.7 for s in fp)
    assert t.expected["score_model"] == "overlap"


def test_render_palette():
    one_healthy = spec(clusters=[], healthy=HealthySpec(1))
    t = generate(one_healthy)
    r = render(t, 0.5)
    assert (r.width, r.height) == (500, 400)
    i, j = (int(c * 0.5) for c in t.annotations[0].box.center[::-1])
    assert vdvi(r)[i, j] > 0 and ngbdi(r)[i, j] > 0

    t = generate(spec(clusters=[ClusterSpec((500, 400), 10, 1)], healthy=HealthySpec()))
    r = render(t)
    i, j = (int(c) for c in t.annotations[0].box.center[::-1])
    assert vdvi(r)[i, j] < 0


def test_render_empty_scene_is_background():
    r = render(generate(spec(clusters=[], healthy=HealthySpec())), 0.1)
    assert np.all(r.data == r.data[0, 0])
    with pytest.raises(SynthError):
        render(generate(spec(clusters=[], healthy=HealthySpec())), 0)


def test_infection_decreases_with_size_when_planted_that_way():
    t = generate(spec(infected_crown_area_range=(200, 300), crown_area_range=(200, 500)))
    inf = [a.box.area for a in t.annotations if a.cls == TreeClass.INFECTED]
    assert max(inf) <= 300 + 1e-9
