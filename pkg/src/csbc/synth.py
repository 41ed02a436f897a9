"""Synthetic scenes and simulated detectors with content-dependent errors.

Scenes contain pedestrians (a dark head-and-body silhouette) and distractor
objects of two texture classes: ``tree`` (fine vertical stripes) and ``wall``
(a flat bright slab with horizontal mortar lines). Simulated detectors find
pedestrians with some probability and fire false positives only on
distractors, with a per-class firing probability. Because false positives
sit on recognisable content, a content model can learn which support windows
to trust.

Randomness comes from numpy's PCG64 generator (``numpy.random.Generator``)
seeded through ``SeedSequence``; outputs are a pure function of the seeds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from csbc.errors import ConfigurationError, PlacementError
from csbc.geometry import BoundingBox, jaccard
from csbc.model_io import Detection, DetectionSet, GroundTruthBox

CLASSES = ("tree", "wall")


@dataclass(frozen=True)
class SceneConfig:
    width: int = 480
    height: int = 240
    n_pedestrians: int = 3
    n_distractors: Mapping[str, int] = field(default_factory=lambda: {"tree": 2, "wall": 2})
    box_height: tuple[int, int] = (64, 112)
    aspect: float = 0.5  # width / height
    # placed boxes must have pairwise jaccard strictly below this; the default
    # admits no overlap at all between integer boxes of this size
    overlap_budget: float = 1e-6
    noise_sd: float = 0.04
    max_tries: int = 200

    def __post_init__(self):
        if self.width < 128 or self.height < 128:
            raise ConfigurationError(f"frame must be at least 128x128, got {self.width}x{self.height}")
        if self.n_pedestrians < 0 or any(v < 0 for v in self.n_distractors.values()):
            raise ConfigurationError("object counts must be non-negative")
        unknown = set(self.n_distractors) - set(CLASSES)
        if unknown:
            raise ConfigurationError(f"unknown distractor classes {sorted(unknown)}; known: {CLASSES}")
        lo, hi = self.box_height
        if not 8 <= lo <= hi or hi > self.height or round(hi * self.aspect) > self.width:
            raise ConfigurationError(f"box_height range {self.box_height} does not fit the frame")
        if not 0.0 < self.overlap_budget <= 1.0:
            raise ConfigurationError("overlap_budget must be in (0, 1]")


@dataclass(frozen=True)
class DetectorProfile:
    detector_id: str
    tp_rate: float = 0.8
    fp_rate_per_class: Mapping[str, float] = field(default_factory=dict)
    localization_sigma: float = 2.0
    score_tp: tuple[float, float] = (1.0, 0.3)
    score_fp: tuple[float, float] = (0.8, 0.3)
    rng_seed: int = 0

    def __post_init__(self):
        if not self.detector_id:
            raise ConfigurationError("detector_id must be non-empty")
        if not 0.0 <= self.tp_rate <= 1.0:
            raise ConfigurationError(f"tp_rate must be in [0, 1], got {self.tp_rate}")
        for cls, p in self.fp_rate_per_class.items():
            if cls not in CLASSES:
                raise ConfigurationError(f"unknown content class {cls!r}")
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"fp rate for {cls!r} must be in [0, 1], got {p}")
        if self.localization_sigma < 0 or self.score_tp[1] < 0 or self.score_fp[1] < 0:
            raise ConfigurationError("standard deviations must be non-negative")


@dataclass(frozen=True, eq=False)
class Scene:
    frame_id: str
    seed: int
    image: np.ndarray
    gts: tuple[GroundTruthBox, ...]
    distractors: tuple[tuple[BoundingBox, str], ...]


# ---------------------------------------------------------------------------
# rendering


def _paint_pedestrian(img, box: BoundingBox, rng) -> None:
    x0, y0, w, h = (int(round(v)) for v in box.as_tuple())
    tone = rng.uniform(0.08, 0.25)
    yy, xx = np.mgrid[0:h, 0:w]
    cx = w / 2 + rng.normal(0, w * 0.03)
    head_r = 0.11 * h
    head = (xx - cx) ** 2 + (yy - 0.16 * h) ** 2 <= head_r**2
    torso = (np.abs(xx - cx) <= 0.27 * w) & (yy >= 0.26 * h) & (yy <= 0.62 * h)
    gap = 0.05 * w
    legs = (yy > 0.62 * h) & (yy <= 0.96 * h) & (np.abs(xx - cx) <= 0.24 * w) & (np.abs(xx - cx) >= gap)
    mask = head | torso | legs
    region = img[y0 : y0 + h, x0 : x0 + w]
    region[mask] = tone


def _paint_tree(img, box: BoundingBox, rng) -> None:
    x0, y0, w, h = (int(round(v)) for v in box.as_tuple())
    period = int(rng.integers(2, 4))
    dark, light = rng.uniform(0.15, 0.3), rng.uniform(0.7, 0.9)
    cols = ((np.arange(w) // period) % 2).astype(bool)
    region = img[y0 : y0 + h, x0 : x0 + w]
    region[:, :] = np.where(cols[None, :], light, dark)


def _paint_wall(img, box: BoundingBox, rng) -> None:
    x0, y0, w, h = (int(round(v)) for v in box.as_tuple())
    tone = rng.uniform(0.72, 0.85)
    region = img[y0 : y0 + h, x0 : x0 + w]
    region[:, :] = tone
    spacing = int(rng.integers(10, 16))
    region[spacing // 2 :: spacing, :] = tone - 0.25


_PAINTERS = {"pedestrian": _paint_pedestrian, "tree": _paint_tree, "wall": _paint_wall}


def _place(rng, cfg: SceneConfig, placed: list[BoundingBox]) -> BoundingBox:
    lo, hi = cfg.box_height
    for _ in range(cfg.max_tries):
        h = int(rng.integers(lo, hi + 1))
        w = max(2, int(round(h * cfg.aspect)))
        x = int(rng.integers(0, cfg.width - w + 1))
        y = int(rng.integers(0, cfg.height - h + 1))
        box = BoundingBox(float(x), float(y), float(w), float(h))
        if all(jaccard(box, b) < cfg.overlap_budget for b in placed):
            return box
    raise PlacementError(
        f"could not place box {len(placed) + 1} in {cfg.max_tries} tries; reduce object counts"
    )


def generate_scene(seed: int, cfg: SceneConfig = SceneConfig(), frame_id: str | None = None) -> Scene:
    """Render one frame; deterministic in ``seed``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    # smooth background: bilinear upsampling of a coarse random grid
    coarse = rng.uniform(0.35, 0.6, size=(cfg.height // 32 + 2, cfg.width // 32 + 2))
    ys = np.linspace(0, coarse.shape[0] - 1, cfg.height)
    xs = np.linspace(0, coarse.shape[1] - 1, cfg.width)
    y0 = np.minimum(ys.astype(int), coarse.shape[0] - 2)
    x0 = np.minimum(xs.astype(int), coarse.shape[1] - 2)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    img = (
        coarse[y0][:, x0] * (1 - fy) * (1 - fx)
        + coarse[y0][:, x0 + 1] * (1 - fy) * fx
        + coarse[y0 + 1][:, x0] * fy * (1 - fx)
        + coarse[y0 + 1][:, x0 + 1] * fy * fx
    )

    kinds = ["pedestrian"] * cfg.n_pedestrians
    for cls in CLASSES:
        kinds += [cls] * int(cfg.n_distractors.get(cls, 0))
    placed: list[BoundingBox] = []
    for _ in kinds:
        placed.append(_place(rng, cfg, placed))
    for kind, box in zip(kinds, placed):
        _PAINTERS[kind](img, box, rng)
    if cfg.noise_sd > 0:
        img = img + rng.normal(0.0, cfg.noise_sd, size=img.shape)
    img = np.clip(img, 0.0, 1.0)
    # quantize to 8 bits so in-memory scenes equal their PGM files
    img = np.rint(img * 255.0) / 255.0
    img.setflags(write=False)

    fid = frame_id if frame_id is not None else f"s{seed}"
    gts = tuple(GroundTruthBox(fid, b) for k, b in zip(kinds, placed) if k == "pedestrian")
    distractors = tuple((b, k) for k, b in zip(kinds, placed) if k != "pedestrian")
    return Scene(fid, int(seed), img, gts, distractors)


# ---------------------------------------------------------------------------
# detectors


def _jitter(rng, box: BoundingBox, sigma: float) -> BoundingBox:
    if sigma == 0:
        return box
    x1, y1, x2, y2 = np.array([box.x, box.y, box.x2, box.y2]) + rng.normal(0.0, sigma, 4)
    x2 = max(x2, x1 + 2.0)
    y2 = max(y2, y1 + 2.0)
    return BoundingBox(float(x1), float(y1), float(x2 - x1), float(y2 - y1))


def simulate_detector(profile: DetectorProfile, scene: Scene) -> DetectionSet:
    """Deterministic in ``(profile.rng_seed, scene.seed)``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([profile.rng_seed, scene.seed])))
    dets = []
    for gt in scene.gts:
        hit = rng.random() < profile.tp_rate
        box = _jitter(rng, gt.bbox, profile.localization_sigma)
        score = rng.normal(*profile.score_tp)
        if hit:
            dets.append(Detection(scene.frame_id, box, float(score), profile.detector_id))
    for box, cls in scene.distractors:
        fire = rng.random() < profile.fp_rate_per_class.get(cls, 0.0)
        jbox = _jitter(rng, box, profile.localization_sigma)
        score = rng.normal(*profile.score_fp)
        if fire:
            dets.append(Detection(scene.frame_id, jbox, float(score), profile.detector_id))
    return DetectionSet.from_detections(profile.detector_id, dets)


# ---------------------------------------------------------------------------
# datasets


def frame_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    images: Mapping[str, np.ndarray]
    gts: tuple[GroundTruthBox, ...]
    detections: Mapping[str, DetectionSet]
    scenes: tuple[Scene, ...]

    def frame_ids(self) -> list[str]:
        return [s.frame_id for s in self.scenes]


def generate_dataset(
    seed: int,
    n_frames: int,
    profiles: Sequence[DetectorProfile],
    cfg: SceneConfig = SceneConfig(),
    prefix: str = "f",
    start: int = 0,
) -> SyntheticDataset:
    """Frames ``<prefix>000000``, ... with one detection set per profile."""
    if n_frames < 0:
        raise ConfigurationError("n_frames must be non-negative")
    scenes = tuple(
        generate_scene(frame_seed(seed, i), cfg, f"{prefix}{i:06d}") for i in range(start, start + n_frames)
    )
    dets = {}
    for p in profiles:
        all_dets = [d for s in scenes for d in simulate_detector(p, s)]
        dets[p.detector_id] = DetectionSet.from_detections(p.detector_id, all_dets)
    return SyntheticDataset(
        images={s.frame_id: s.image for s in scenes},
        gts=tuple(g for s in scenes for g in s.gts),
        detections=dets,
        scenes=scenes,
    )


def default_profiles(seed: int = 0) -> tuple[DetectorProfile, ...]:
    """Root detector plus two support detectors whose false positives
    concentrate on one distractor class each."""
    return (
        DetectorProfile("root", 0.85, {"tree": 0.5, "wall": 0.5}, 2.0, (1.0, 0.3), (0.8, 0.3), seed * 10 + 1),
        DetectorProfile("treeish", 0.8, {"tree": 0.9}, 2.0, (1.0, 0.3), (1.0, 0.3), seed * 10 + 2),
        DetectorProfile("wallish", 0.8, {"wall": 0.9}, 2.0, (1.0, 0.3), (1.0, 0.3), seed * 10 + 3),
    )
