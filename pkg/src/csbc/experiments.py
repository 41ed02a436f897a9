"""End-to-end SC vs CSBC comparison on synthetic worlds."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from csbc import synth
from csbc.calibration import fit_calibration
from csbc.evaluation import lamr
from csbc.features import Descriptor
from csbc.fusion import FusionConfig, fuse_csbc, fuse_sc
from csbc.trainer import train_detector_model


@dataclass(frozen=True)
class ExperimentConfig:
    n_train: int = 200
    n_test: int = 100
    components: int = 5
    overlap_threshold: float = 0.5
    weight_clamp: tuple[float, float] = (0.0, 1.0)
    iou_threshold: float = 0.5
    scene: synth.SceneConfig = field(default_factory=synth.SceneConfig)


@dataclass(frozen=True)
class ExperimentResult:
    seed: int
    descriptor: str
    lamr_root: float
    lamr_sc: float
    lamr_csbc: float

    @property
    def improvement(self) -> float:
        return self.lamr_sc - self.lamr_csbc


def make_world(seed: int, cfg: ExperimentConfig = ExperimentConfig(), profiles=None):
    """Disjoint train and test splits drawn from one seed."""
    profiles = profiles or synth.default_profiles(seed)
    train = synth.generate_dataset(seed, cfg.n_train, profiles, cfg.scene, prefix="tr")
    test = synth.generate_dataset(seed, cfg.n_test, profiles, cfg.scene, prefix="te", start=cfg.n_train)
    return profiles, train, test


def run_direction_experiment(
    seed: int,
    descriptors: Sequence[str] = ("hog",),
    cfg: ExperimentConfig = ExperimentConfig(),
    profiles=None,
) -> list[ExperimentResult]:
    """Train per-support-detector PLS models on the train split, fuse the test
    split with SC and CSBC, and report the log-average miss rates."""
    profiles, train, test = make_world(seed, cfg, profiles)
    root_id = profiles[0].detector_id
    support_ids = [p.detector_id for p in profiles[1:]]

    root_scores = train.detections[root_id].scores()
    cals = {d: fit_calibration(train.detections[d].scores(), root_scores, d) for d in support_ids}

    root = test.detections[root_id]
    others = [test.detections[d] for d in support_ids]
    frames = test.frame_ids()
    fusion_cfg = FusionConfig(overlap_threshold=cfg.overlap_threshold, weight_clamp=cfg.weight_clamp)
    sc = fuse_sc(root, others, cals, fusion_cfg).detections
    lamr_root = lamr(root, test.gts, cfg.iou_threshold, frames)
    lamr_sc = lamr(sc, test.gts, cfg.iou_threshold, frames)

    results = []
    for name in descriptors:
        extractor = Descriptor(name)
        models = {
            d: train_detector_model(train.detections[d], train.gts, train.images, extractor, cfg.components)
            for d in support_ids
        }
        csbc = fuse_csbc(
            root, others, cals, models, test.images, extractor, FusionConfig(
                overlap_threshold=cfg.overlap_threshold, mode="csbc", weight_clamp=cfg.weight_clamp
            )
        ).detections
        results.append(
            ExperimentResult(seed, name, lamr_root, lamr_sc, lamr(csbc, test.gts, cfg.iou_threshold, frames))
        )
    return results
