import numpy as np
import pytest

from csbc import pls
from csbc.errors import DegenerateTargetError, EmptyTrainingSetError, MissingImageError
from csbc.features import Descriptor
from csbc.geometry import BoundingBox, jaccard
from csbc.model_io import Detection, DetectionSet, GroundTruthBox
from csbc.synth import default_profiles, generate_dataset
from csbc.trainer import build_training_set, label_window, select_windows, train_detector_model


class ColumnFeatures:
    """Fake extractor: one column holding the box x coordinate."""

    tag = "external"

    def window_features(self, images, windows):
        return np.array([[w.bbox.x, 1.0] for w in windows])


def gt(fid, *box, ignore=False):
    return GroundTruthBox(fid, BoundingBox(*box), ignore)


def test_label_window():
    b = BoundingBox(0, 0, 10, 10)
    assert label_window(b, []) == 0.0
    assert label_window(b, [gt("f", 0, 0, 10, 10)]) == 1.0


def test_label_is_max_jaccard():
    b = BoundingBox(0, 0, 10, 10)
    gts = [gt("f", 8, 0, 10, 10), gt("f", 2.5, 0, 10, 10), gt("f", 5, 0, 10, 10)]
    js = [jaccard(b, g.bbox) for g in gts]
    assert label_window(b, gts) == max(js)
    assert label_window(b, [gt("f", 0, 0, 10, 10, ignore=True)]) == 0.0


def test_single_hit_row():
    img = np.random.default_rng(0).random((200, 100))
    dets = DetectionSet.from_detections("d", [Detection("f", BoundingBox(5, 5, 32, 64), 1.0, "d")])
    X, y = build_training_set(dets, [gt("f", 5, 5, 32, 64)], {"f": img}, Descriptor("gray"))
    assert X.shape == (1, 512) and y.tolist() == [1.0]


def test_frames_without_gt_get_zero_labels():
    dets = DetectionSet.from_detections(
        "d", [Detection(f, BoundingBox(i, 0, 5, 5), 1.0, "d") for i, f in enumerate("abc")]
    )
    _, y = build_training_set(dets, [gt("zzz", 0, 0, 5, 5)], None, ColumnFeatures())
    assert y.tolist() == [0.0, 0.0, 0.0]


def test_synthetic_labels_match_bruteforce():
    data = generate_dataset(5, 6, default_profiles(5))
    dets = data.detections["treeish"]
    _, y = build_training_set(dets, data.gts, data.images, ColumnFeatures())
    expected = []
    for fid in sorted({d.frame_id for d in dets}):
        for w in dets.in_frame(fid):
            best = 0.0
            for g in data.gts:
                if g.frame_id == fid:
                    best = max(best, jaccard(w.bbox, g.bbox))
            expected.append(best)
    assert y.tolist() == expected
    assert np.all((y >= 0) & (y <= 1))


def test_errors():
    with pytest.raises(EmptyTrainingSetError):
        build_training_set(DetectionSet("d"), [], {}, ColumnFeatures())
    dets = DetectionSet.from_detections("d", [Detection("nope", BoundingBox(0, 0, 5, 5), 1.0, "d")])
    with pytest.raises(MissingImageError, match="nope"):
        build_training_set(dets, [], {}, Descriptor("hog"))


def test_all_misses_is_degenerate():
    dets = DetectionSet.from_detections(
        "d", [Detection("f", BoundingBox(i * 10, 0, 5, 5), 1.0, "d") for i in range(6)]
    )
    with pytest.raises(DegenerateTargetError, match="background"):
        train_detector_model(dets, [], None, ColumnFeatures(), k=1)


def test_recovers_simple_regression():
    # label = jaccard against a GT box, window x drives the label
    gts = [gt("f", 0, 0, 10, 10)]
    wins = [Detection("f", BoundingBox(x, 0, 10, 10), 1.0, "d") for x in (0.0, 1.0, 2.5, 4.0, 6.0, 9.0)]
    dets = DetectionSet.from_detections("d", wins)
    m = train_detector_model(dets, gts, None, ColumnFeatures(), k=1)
    x = np.array([w.bbox.x for w in wins])
    y = np.array([label_window(w.bbox, gts) for w in wins])
    slope = np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2)
    fitted = y.mean() + slope * (x - x.mean())
    np.testing.assert_allclose(m.predict(np.column_stack([x, np.ones_like(x)])), fitted, atol=1e-8)


def test_training_is_deterministic():
    data = generate_dataset(2, 8, default_profiles(2))
    args = (data.detections["wallish"], data.gts, data.images, Descriptor("hog"), 3)
    assert pls.dumps(train_detector_model(*args)) == pls.dumps(train_detector_model(*args))


def test_stride_subsampling():
    dets = DetectionSet.from_detections("d", [Detection("f", BoundingBox(i, 0, 5, 5), 1.0, "d") for i in range(10)])
    assert [w.bbox.x for w in select_windows(dets, 4)] == [0, 2, 5, 7]
    assert len(select_windows(dets, 50)) == 10
