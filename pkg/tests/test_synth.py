import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csbc.errors import ConfigurationError, PlacementError
from csbc.geometry import jaccard
from csbc.synth import (
    DetectorProfile, SceneConfig, default_profiles, generate_dataset, generate_scene, simulate_detector,
)

TREES = SceneConfig(n_pedestrians=0, n_distractors={"tree": 4, "wall": 0})


def test_blank_scene():
    s = generate_scene(3, SceneConfig(n_pedestrians=0, n_distractors={}))
    assert s.gts == () and s.distractors == ()
    assert s.image.shape == (240, 480)
    assert s.image.min() >= 0 and s.image.max() <= 1


def test_same_seed_same_scene():
    a, b = generate_scene(11), generate_scene(11)
    assert np.array_equal(a.image, b.image) and a.gts == b.gts and a.distractors == b.distractors
    assert not np.array_equal(a.image, generate_scene(12).image)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_objects_respect_overlap_budget(seed):
    cfg = SceneConfig()
    s = generate_scene(seed, cfg)
    assert len(s.gts) == 3
    boxes = [g.bbox for g in s.gts] + [b for b, _ in s.distractors]
    for i in range(len(boxes)):
        assert 0 <= boxes[i].x and boxes[i].x2 <= cfg.width and boxes[i].y2 <= cfg.height
        for j in range(i):
            assert jaccard(boxes[i], boxes[j]) < cfg.overlap_budget


def test_pixels_are_8bit_levels():
    img = generate_scene(0).image
    assert np.array_equal(np.rint(img * 255) / 255, img)


def test_config_errors():
    with pytest.raises(ConfigurationError):
        SceneConfig(width=100)
    with pytest.raises(ConfigurationError):
        SceneConfig(n_distractors={"car": 1})
    with pytest.raises(PlacementError):
        generate_scene(0, SceneConfig(width=128, height=128, n_pedestrians=12, max_tries=20))


def test_profile_validation():
    with pytest.raises(ConfigurationError):
        DetectorProfile("d", tp_rate=1.5)
    with pytest.raises(ConfigurationError):
        DetectorProfile("d", fp_rate_per_class={"tree": -0.1})
    with pytest.raises(ConfigurationError):
        DetectorProfile("d", fp_rate_per_class={"sky": 0.1})


def test_perfect_and_silent_detectors():
    scene = generate_scene(5)
    perfect = simulate_detector(DetectorProfile("p", 1.0, {}, 0.0), scene)
    assert [d.bbox for d in perfect] == [g.bbox for g in scene.gts]
    silent = simulate_detector(DetectorProfile("s", 0.0, {}), scene)
    assert len(silent) == 0


def test_false_positives_sit_on_distractors():
    scene = generate_scene(8, SceneConfig(n_distractors={"tree": 2, "wall": 2}))
    dets = simulate_detector(DetectorProfile("t", 0.0, {"tree": 1.0}, 0.0), scene)
    trees = sorted(b.as_tuple() for b, c in scene.distractors if c == "tree")
    assert sorted(d.bbox.as_tuple() for d in dets) == trees


def test_certain_firing_count():
    scene = generate_scene(2, TREES)
    assert len(simulate_detector(DetectorProfile("t", 1.0, {"tree": 1.0}), scene)) == 4


def test_fp_rate_monte_carlo():
    p, fired, trials = 0.3, 0, 0
    prof = DetectorProfile("t", 0.0, {"tree": p}, rng_seed=99)
    for seed in range(250):
        scene = generate_scene(seed, TREES)
        fired += len(simulate_detector(prof, scene))
        trials += len(scene.distractors)
    se = np.sqrt(p * (1 - p) / trials)
    assert abs(fired / trials - p) < 3 * se


def test_dataset_layout_and_determinism():
    a = generate_dataset(1, 4, default_profiles(1), prefix="x", start=10)
    assert a.frame_ids() == ["x000010", "x000011", "x000012", "x000013"]
    assert set(a.detections) == {"root", "treeish", "wallish"}
    b = generate_dataset(1, 4, default_profiles(1), prefix="x", start=10)
    assert all(np.array_equal(a.images[f], b.images[f]) for f in a.frame_ids())
    assert list(a.detections["root"]) == list(b.detections["root"])
    assert generate_dataset(1, 0, default_profiles(1)).frame_ids() == []
