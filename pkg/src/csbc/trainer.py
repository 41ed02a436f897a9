"""Per-detector PLS training sets: window content -> overlap with the truth."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from csbc import pls
from csbc.errors import ConfigurationError, DegenerateTargetError, EmptyTrainingSetError
from csbc.geometry import BoundingBox, jaccard
from csbc.model_io import DetectionSet, GroundTruthBox, group_ground_truth


def label_window(bbox: BoundingBox, frame_gts: Sequence[GroundTruthBox]) -> float:
    """Jaccard with the best-overlapping non-ignored ground-truth box (0 if none)."""
    return max((jaccard(bbox, g.bbox) for g in frame_gts if not g.ignore), default=0.0)


def select_windows(dets: DetectionSet, max_windows: int | None = None) -> list:
    """Windows in canonical order, stride-subsampled down to ``max_windows``."""
    windows = list(dets)
    if max_windows is not None:
        if max_windows < 1:
            raise ConfigurationError(f"max_windows_per_detector must be >= 1, got {max_windows}")
        if len(windows) > max_windows:
            idx = (np.arange(max_windows) * len(windows)) // max_windows
            windows = [windows[i] for i in idx]
    return windows


def build_training_set(
    dets: DetectionSet,
    gts: Sequence[GroundTruthBox],
    images,
    extractor,
    max_windows_per_detector: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    windows = select_windows(dets, max_windows_per_detector)
    if not windows:
        raise EmptyTrainingSetError(f"detector {dets.detector_id!r} has no windows to train on")
    by_frame = group_ground_truth(gts)
    y = np.array([label_window(w.bbox, by_frame.get(w.frame_id, ())) for w in windows])
    X = extractor.window_features(images, windows)
    return X, y


def train_detector_model(
    dets: DetectionSet,
    gts: Sequence[GroundTruthBox],
    images,
    extractor,
    k: int = 5,
    scale: bool = False,
    max_windows_per_detector: int | None = None,
) -> pls.PlsModel:
    X, y = build_training_set(dets, gts, images, extractor, max_windows_per_detector)
    if X.shape[0] < k + 1:
        raise ConfigurationError(
            f"detector {dets.detector_id!r}: {X.shape[0]} windows cannot support {k} components"
        )
    try:
        return pls.fit(X, y, k, scale=scale, feature_tag=extractor.tag)
    except DegenerateTargetError:
        raise DegenerateTargetError(
            f"detector {dets.detector_id!r}: every window has the same overlap label "
            f"({y[0]:.3g}); add background windows (false positives) or ground truth"
        ) from None
