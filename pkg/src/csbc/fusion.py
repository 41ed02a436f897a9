"""Spatial-consensus fusion of a root detector with support detectors.

For each root window ``w_r`` every support window ``w_j`` on the same frame
with ``jaccard(w_r, w_j) >= overlap_threshold`` contributes to the new score::

    sc:    score(w_r) + sum_j tau_j(score(w_j)) * J_rj
    csbc:  score(w_r) + sum_j tau_j(score(w_j)) * clamp(PLS_j(theta(w_j)))

Root windows without any support are dropped. Boxes are never moved and
support windows never enter the output.

Contributions are summed in a canonical order (support detector id, then
window order within the frame) so the result does not depend on the order in
which support detectors are passed, down to the last bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from csbc.calibration import CalibrationMap
from csbc.errors import ConfigurationError
from csbc.geometry import jaccard
from csbc.model_io import Detection, DetectionSet
from csbc.pls import PlsModel

MODES = ("sc", "csbc")
SUPPORT_POLICIES = ("all_windows", "best_per_detector")


@dataclass(frozen=True)
class FusionConfig:
    overlap_threshold: float = 0.5
    mode: str = "sc"
    weight_clamp: tuple[float, float] = (0.0, 1.0)
    support_policy: str = "all_windows"
    # also multiply the PLS weight by J_rj in csbc mode
    multiply_jaccard: bool = False
    feature: str | None = None

    def __post_init__(self):
        if not 0.0 < self.overlap_threshold <= 1.0:
            raise ConfigurationError(f"overlap_threshold must be in (0, 1], got {self.overlap_threshold}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        lo, hi = self.weight_clamp
        if not lo <= hi:
            raise ConfigurationError(f"weight_clamp low must not exceed high, got {self.weight_clamp}")
        if self.support_policy not in SUPPORT_POLICIES:
            raise ConfigurationError(f"support_policy must be one of {SUPPORT_POLICIES}")


@dataclass
class FusionStats:
    windows_in: int = 0
    discarded: int = 0
    windows_out: int = 0
    support_terms: int = 0


@dataclass(frozen=True)
class FusionResult:
    detections: DetectionSet
    stats: FusionStats = field(default_factory=FusionStats)


def _canonical_supports(others: Sequence[DetectionSet], root_id: str | None = None) -> list[DetectionSet]:
    seen = set()
    for s in others:
        if s.detector_id == root_id:
            raise ConfigurationError(f"support detectors must exclude the root {root_id!r}")
        if s.detector_id in seen:
            raise ConfigurationError(f"support detector {s.detector_id!r} given twice")
        seen.add(s.detector_id)
    return sorted(others, key=lambda s: s.detector_id)


def find_support(
    w_r: Detection, others: Sequence[DetectionSet], cfg: FusionConfig
) -> list[tuple[Detection, float]]:
    """Support windows of ``w_r`` with their Jaccard, in canonical order."""
    out = []
    for s in _canonical_supports(others):
        hits = [(w, j) for w in s.in_frame(w_r.frame_id) if (j := jaccard(w_r.bbox, w.bbox)) >= cfg.overlap_threshold]
        if cfg.support_policy == "best_per_detector" and hits:
            # max J, then higher score, then first in input order
            best = max(enumerate(hits), key=lambda t: (t[1][1], t[1][0].score, -t[0]))[1]
            hits = [best]
        out.extend(hits)
    return out


def _check_calibrations(others, cals: Mapping[str, CalibrationMap]) -> None:
    for s in others:
        if s.detector_id not in cals:
            raise ConfigurationError(f"no calibration map for support detector {s.detector_id!r}")


def _fuse(root, others, cals, cfg, weight_fn) -> FusionResult:
    supports = _canonical_supports(others, root.detector_id)
    _check_calibrations(supports, cals)
    stats = FusionStats()
    out = []
    for fid in root.frame_ids():
        frame_windows = root.in_frame(fid)
        stats.windows_in += len(frame_windows)
        found = [find_support(w_r, supports, cfg) for w_r in frame_windows]
        weights = weight_fn(fid, frame_windows, found)
        for w_r, support, ws in zip(frame_windows, found, weights):
            if not support:
                stats.discarded += 1
                continue
            score = w_r.score
            for (w_j, _), wt in zip(support, ws):
                score += cals[w_j.detector_id](w_j.score) * wt
            stats.support_terms += len(support)
            out.append(w_r.with_score(score))
    stats.windows_out = len(out)
    return FusionResult(DetectionSet.from_detections(root.detector_id, out), stats)


def fuse_sc(
    root: DetectionSet,
    others: Sequence[DetectionSet],
    cals: Mapping[str, CalibrationMap],
    cfg: FusionConfig = FusionConfig(),
) -> FusionResult:
    """Spatial consensus: support terms weighted by their Jaccard with the root window."""
    if cfg.mode != "sc":
        cfg = replace(cfg, mode="sc")

    def weights(_fid, _windows, found):
        return [[j for _, j in support] for support in found]

    return _fuse(root, others, cals, cfg, weights)


def fuse_csbc(
    root: DetectionSet,
    others: Sequence[DetectionSet],
    cals: Mapping[str, CalibrationMap],
    models: Mapping[str, PlsModel],
    images,
    extractor,
    cfg: FusionConfig = FusionConfig(mode="csbc"),
) -> FusionResult:
    """Content-based spatial consensus: support terms weighted by each
    support detector's PLS prediction on the support window's own content."""
    supports = _canonical_supports(others, root.detector_id)
    for s in supports:
        model = models.get(s.detector_id)
        if model is None:
            raise ConfigurationError(f"no PLS model for support detector {s.detector_id!r}")
        if model.feature_tag != extractor.tag:
            raise ConfigurationError(
                f"model of {s.detector_id!r} was trained on {model.feature_tag!r} features, "
                f"fusion uses {extractor.tag!r}"
            )
    if cfg.feature is not None and cfg.feature != extractor.tag:
        raise ConfigurationError(f"config feature {cfg.feature!r} does not match extractor {extractor.tag!r}")
    lo, hi = cfg.weight_clamp

    def weights(fid, _windows, found):
        # one feature pass per frame over the distinct support windows
        distinct: dict[tuple[str, int], Detection] = {}
        for support in found:
            for w_j, _ in support:
                distinct.setdefault((w_j.detector_id, id(w_j)), w_j)
        if not distinct:
            return [[] for _ in found]
        keys = list(distinct)
        feats = extractor.window_features(images, [distinct[k] for k in keys])
        pred = {}
        for det_id in sorted({k[0] for k in keys}):
            rows = [i for i, k in enumerate(keys) if k[0] == det_id]
            vals = np.clip(np.atleast_1d(models[det_id].predict(feats[rows])), lo, hi)
            pred.update({keys[i]: float(v) for i, v in zip(rows, vals)})
        out = []
        for support in found:
            ws = []
            for w_j, j in support:
                wt = pred[(w_j.detector_id, id(w_j))]
                ws.append(wt * j if cfg.multiply_jaccard else wt)
            out.append(ws)
        return out

    return _fuse(root, others, cals, cfg, weights)
