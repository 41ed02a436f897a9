"""Caltech-style evaluation: greedy matching, miss rate vs FPPI, LAMR.

Matching per frame: detections in descending score order (ties by input
order) take the unmatched non-ignored ground truth with the highest Jaccard
at or above the IoU threshold. A detection with no such box but overlapping
an ignore region is neither a true nor a false positive.

The log-average miss rate samples the curve at 9 FPPI values
``10 ** (-2 + k/4)``, k = 0..8, floors each sample at 1e-5 and returns the
geometric mean in percent.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from csbc.errors import ConfigurationError, UndefinedMissRateError
from csbc.geometry import jaccard
from csbc.model_io import Detection, DetectionSet, GroundTruthBox, group_ground_truth

REFERENCE_FPPI = tuple(10.0 ** (-2.0 + k / 4.0) for k in range(9))
MISS_RATE_FLOOR = 1e-5

TP, FP, IGNORED = 1, 0, -1


@dataclass(frozen=True)
class EvalCurve:
    points: tuple[tuple[float, float], ...]  # (fppi, miss_rate), fppi strictly increasing
    n_frames: int
    n_gt: int

    def __post_init__(self):
        fppi = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(fppi, fppi[1:])):
            raise ValueError("curve fppi values must be strictly increasing")
        for f, m in self.points:
            if f < 0 or not 0.0 <= m <= 1.0:
                raise ValueError(f"curve point out of range: ({f}, {m})")

    @property
    def fppi(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def miss_rate(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])


def _check_iou(iou_threshold: float) -> None:
    if not 0.0 < iou_threshold <= 1.0:
        raise ConfigurationError(f"iou_threshold must be in (0, 1], got {iou_threshold}")


def match_outcomes(
    dets: Sequence[Detection], gts: Sequence[GroundTruthBox], iou_threshold: float
) -> tuple[list[int], list[int]]:
    """Greedy matching on one frame.

    Returns the processing order (indices into ``dets``, descending score) and
    the outcome of each detection in that order: ``TP``, ``FP`` or ``IGNORED``.
    """
    _check_iou(iou_threshold)
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    matched = [False] * len(gts)
    outcomes = []
    for i in order:
        box = dets[i].bbox
        best, best_j = -1, iou_threshold
        for g, gt in enumerate(gts):
            if gt.ignore or matched[g]:
                continue
            j = jaccard(box, gt.bbox)
            if j >= best_j and (best < 0 or j > best_j):
                best, best_j = g, j
        if best >= 0:
            matched[best] = True
            outcomes.append(TP)
        elif any(gt.ignore and jaccard(box, gt.bbox) >= iou_threshold for gt in gts):
            outcomes.append(IGNORED)
        else:
            outcomes.append(FP)
    return order, outcomes


def match_frame(
    dets: Sequence[Detection], gts: Sequence[GroundTruthBox], iou_threshold: float = 0.5
) -> tuple[int, int, int]:
    """``(tp, fp, missed)`` for one frame."""
    _, outcomes = match_outcomes(dets, gts, iou_threshold)
    tp = outcomes.count(TP)
    fp = outcomes.count(FP)
    n_gt = sum(1 for g in gts if not g.ignore)
    return tp, fp, n_gt - tp


def det_curve(
    dets: DetectionSet,
    gts: Sequence[GroundTruthBox],
    iou_threshold: float = 0.5,
    frame_ids: Sequence[str] | None = None,
) -> EvalCurve:
    """Miss rate vs FPPI over all score thresholds.

    Frames are those of the ground truth plus any frame with detections,
    unless ``frame_ids`` is given. Greedy matching by descending score makes
    the matches at a threshold a prefix of the full matching, so a single
    pass per frame gives every threshold.
    """
    _check_iou(iou_threshold)
    gt_by_frame = group_ground_truth(gts)
    n_gt = sum(1 for g in gts if not g.ignore)
    if n_gt == 0:
        raise UndefinedMissRateError("miss rate is undefined without (non-ignored) ground truth")
    frames = sorted(set(frame_ids) if frame_ids is not None else set(gt_by_frame) | set(dets.frame_ids()))
    n_frames = len(frames)

    scores, tps, fps = [], [], []
    for fid in frames:
        frame_dets = dets.in_frame(fid)
        order, outcomes = match_outcomes(frame_dets, gt_by_frame.get(fid, ()), iou_threshold)
        for i, o in zip(order, outcomes):
            scores.append(frame_dets[i].score)
            tps.append(o == TP)
            fps.append(o == FP)

    points = {0.0: 1.0}
    if scores:
        s = np.array(scores)
        order = np.argsort(-s, kind="stable")
        s = s[order]
        cum_tp = np.cumsum(np.array(tps)[order])
        cum_fp = np.cumsum(np.array(fps)[order])
        # last index of each run of equal scores = the threshold at that score
        ends = np.flatnonzero(np.append(s[1:] != s[:-1], True))
        for e in ends:
            f = float(cum_fp[e]) / n_frames
            m = float(n_gt - cum_tp[e]) / n_gt
            points[f] = min(points.get(f, 1.0), m)
    return EvalCurve(tuple(sorted(points.items())), n_frames, n_gt)


def sample_miss_rates(curve: EvalCurve, references: Sequence[float] = REFERENCE_FPPI) -> np.ndarray:
    if not curve.points:
        raise ValueError("empty curve")
    fppi = curve.fppi
    mr = curve.miss_rate
    out = []
    for ref in references:
        idx = np.searchsorted(fppi, ref, side="right") - 1
        out.append(mr[max(idx, 0)])
    return np.array(out)


def log_average_miss_rate(curve: EvalCurve) -> float:
    """LAMR in percent."""
    samples = np.maximum(sample_miss_rates(curve), MISS_RATE_FLOOR)
    return 100.0 * math.exp(float(np.mean(np.log(samples))))


def lamr(dets: DetectionSet, gts: Sequence[GroundTruthBox], iou_threshold: float = 0.5, frame_ids=None) -> float:
    return log_average_miss_rate(det_curve(dets, gts, iou_threshold, frame_ids))


def curve_csv(curve: EvalCurve) -> str:
    buf = io.StringIO()
    buf.write("fppi,miss_rate\n")
    for f, m in curve.points:
        buf.write(f"{f:.10g},{m:.10g}\n")
    buf.write(f"lamr,{log_average_miss_rate(curve):.2f}\n")
    return buf.getvalue()


def read_curve_csv(text: str) -> EvalCurve:
    points = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(("fppi", "lamr", "#")):
            continue
        f, m = line.split(",")
        points.append((float(f), float(m)))
    return EvalCurve(tuple(points), 0, 0)


def curve_svg(curves: dict[str, EvalCurve]) -> str:
    """Log-log miss-rate/FPPI plot with the reference FPPI gridlines."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "csbc", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        for ref in REFERENCE_FPPI:
            ax.axvline(ref, color="0.85", linewidth=0.6, zorder=0)
        for name, curve in sorted(curves.items()):
            f = np.maximum(curve.fppi, 1e-3)
            m = np.maximum(curve.miss_rate, MISS_RATE_FLOOR)
            ax.step(f, m, where="post", label=f"{log_average_miss_rate(curve):.2f}% {name}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlim(1e-3, 1e1)
        ax.set_ylim(5e-2, 1.0)
        ax.set_xlabel("false positives per image")
        ax.set_ylabel("miss rate")
        ax.legend(loc="lower left", fontsize=8)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return buf.getvalue()
