"""Window content descriptors.

Every window is first cropped from its frame and resampled to a canonical
64x128 (width x height) grayscale patch. Descriptors then operate on stacks
of patches of shape ``(n, 128, 64)`` so that a detector's windows can be
processed in one vectorized pass:

==========  ======  =====================================================
tag         length  content
==========  ======  =====================================================
hog         3780    Dalal-Triggs HOG, 8px cells, 9 unsigned bins,
                    2x2-cell blocks at 8px stride, L2 block norm
glcm        20      5 Haralick statistics for 4 offsets, 8 gray levels
gray        512     4x4 block means (16x32 thumbnail), row-major
hog+glcm    3800    concatenation
external    any     precomputed vectors loaded from a file
==========  ======  =====================================================
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from PIL import Image

from csbc.errors import (
    ConfigurationError,
    FormatError,
    InputError,
    MissingImageError,
    OutOfBoundsError,
    ParseError,
)
from csbc.geometry import BoundingBox, intersection_area
from csbc.model_io import _parse_box, _text_lines

PATCH_W = 64
PATCH_H = 128

HOG_CELL = 8
HOG_BINS = 9
HOG_EPS = 1e-6
HOG_LENGTH = (PATCH_W // HOG_CELL - 1) * (PATCH_H // HOG_CELL - 1) * 4 * HOG_BINS  # 3780

GLCM_LEVELS = 8
GLCM_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))
GLCM_STATS = ("contrast", "correlation", "energy", "homogeneity", "entropy")

GRAY_BLOCK = 4

TAGS = ("hog", "glcm", "gray", "hog+glcm", "external")

LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class WindowPatch:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (PATCH_H, PATCH_W):
            raise ValueError(f"patch must be {PATCH_H}x{PATCH_W} (rows x cols), got {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("patch intensities must be finite and in [0, 1]")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    tag: str

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown descriptor tag {self.tag!r}")
        v = np.asarray(self.values, dtype=np.float64).ravel().copy()
        if not np.all(np.isfinite(v)):
            raise InputError("feature vector has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# images


def to_gray(arr: np.ndarray) -> np.ndarray:
    """8-bit (or float) image array -> float grayscale in [0, 1]."""
    arr = np.asarray(arr)
    scale = 255.0 if arr.dtype == np.uint8 else (65535.0 if arr.dtype == np.uint16 else 1.0)
    a = arr.astype(np.float64) / scale
    if a.ndim == 3:
        a = a[..., :3] @ np.asarray(LUMA)
    if a.ndim != 2:
        raise InputError(f"expected a 2-D image, got shape {arr.shape}")
    return a


def load_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA", "I;16"):
            im = im.convert("RGB")
        return to_gray(np.asarray(im))


def save_pgm(path: str | Path, image: np.ndarray) -> None:
    """Write a [0, 1] float image as binary 8-bit PGM (P5)."""
    u8 = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(u8, mode="L").save(path, format="PPM")


class ImageDirectory:
    """Frames stored as ``<root>/<frame_id>.pgm`` or ``<root>/<frame_id>.png``."""

    extensions = ("pgm", "png")

    def __init__(self, root: str | Path, cache_size: int = 16):
        self.root = Path(root)
        self._load = lru_cache(maxsize=cache_size)(self._read)

    def _read(self, frame_id: str) -> np.ndarray:
        for ext in self.extensions:
            p = self.root / f"{frame_id}.{ext}"
            if p.is_file():
                img = load_image(p)
                img.setflags(write=False)
                return img
        raise MissingImageError(frame_id, f"looked in {self.root}")

    def __getitem__(self, frame_id: str) -> np.ndarray:
        return self._load(frame_id)


def get_image(images, frame_id: str) -> np.ndarray:
    """Look up a frame in any mapping-like image source."""
    if images is None:
        raise MissingImageError(frame_id, "no image source given")
    try:
        return images[frame_id]
    except MissingImageError:
        raise
    except KeyError:
        raise MissingImageError(frame_id) from None


# ---------------------------------------------------------------------------
# patches


def _resample_axis(start: float, length: float, n_out: int, n_src: int):
    # output pixel centers mapped onto source pixel centers; clamping the
    # coordinate replicates the edge pixel outside the image
    pos = start + (np.arange(n_out) + 0.5) * (length / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_src - 1)
    i0 = np.minimum(np.floor(pos).astype(np.intp), max(n_src - 2, 0))
    frac = pos - i0
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, frac


def extract_patch_array(image: np.ndarray, bbox: BoundingBox) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise InputError("image must be a non-empty 2-D array")
    h, w = img.shape
    if intersection_area(bbox, BoundingBox(0.0, 0.0, float(w), float(h))) == 0.0:
        raise OutOfBoundsError(f"box {bbox.as_tuple()} lies outside the {w}x{h} image")
    x0, x1, fx = _resample_axis(bbox.x, bbox.w, PATCH_W, w)
    y0, y1, fy = _resample_axis(bbox.y, bbox.h, PATCH_H, h)
    fx = fx[None, :]
    fy = fy[:, None]
    top = img[y0][:, x0] * (1.0 - fx) + img[y0][:, x1] * fx
    bottom = img[y1][:, x0] * (1.0 - fx) + img[y1][:, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def extract_patch(image: np.ndarray, bbox: BoundingBox) -> WindowPatch:
    """Crop ``bbox`` from ``image`` and bilinearly resample it to 64x128."""
    return WindowPatch(np.clip(extract_patch_array(image, bbox), 0.0, 1.0))


def _as_stack(patches) -> np.ndarray:
    if isinstance(patches, WindowPatch):
        return patches.pixels[None]
    arr = np.asarray(patches, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[1:] != (PATCH_H, PATCH_W):
        raise InputError(f"patch stack must have shape (n, {PATCH_H}, {PATCH_W}), got {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# descriptors on patch stacks


def hog_stack(patches) -> np.ndarray:
    p = _as_stack(patches)
    n = p.shape[0]
    gx = np.zeros_like(p)
    gy = np.zeros_like(p)
    gx[:, :, 1:-1] = p[:, :, 2:] - p[:, :, :-2]
    gy[:, 1:-1, :] = p[:, 2:, :] - p[:, :-2, :]
    mag = np.hypot(gx, gy)
    ang = np.rad2deg(np.arctan2(gy, gx)) % 180.0

    # linear vote between the two nearest bin centers (10, 30, ..., 170 deg)
    width = 180.0 / HOG_BINS
    pos = ang / width - 0.5
    lo = np.floor(pos)
    frac = pos - lo
    b0 = lo.astype(np.intp) % HOG_BINS
    b1 = (b0 + 1) % HOG_BINS

    rows, cols = PATCH_H // HOG_CELL, PATCH_W // HOG_CELL
    cell = (np.arange(PATCH_H) // HOG_CELL)[:, None] * cols + (np.arange(PATCH_W) // HOG_CELL)[None, :]
    base = (np.arange(n)[:, None, None] * (rows * cols) + cell[None]) * HOG_BINS
    size = n * rows * cols * HOG_BINS
    hist = np.bincount((base + b0).ravel(), (mag * (1.0 - frac)).ravel(), minlength=size)
    hist += np.bincount((base + b1).ravel(), (mag * frac).ravel(), minlength=size)
    hist = hist.reshape(n, rows, cols, HOG_BINS)

    blocks = np.stack(
        [hist[:, :-1, :-1], hist[:, :-1, 1:], hist[:, 1:, :-1], hist[:, 1:, 1:]], axis=3
    ).reshape(n, rows - 1, cols - 1, 4 * HOG_BINS)
    norm = np.sqrt(np.sum(blocks**2, axis=-1, keepdims=True) + HOG_EPS**2)
    return (blocks / norm).reshape(n, -1)


def quantize(patches, levels: int = GLCM_LEVELS) -> np.ndarray:
    p = _as_stack(patches)
    return np.minimum((p * levels).astype(np.intp), levels - 1)


def glcm_matrices(patches, levels: int = GLCM_LEVELS) -> np.ndarray:
    """Symmetric normalized co-occurrence matrices, shape ``(n, 4, L, L)``."""
    q = quantize(patches, levels)
    n = q.shape[0]
    out = np.empty((n, len(GLCM_OFFSETS), levels, levels))
    offset_idx = (np.arange(n) * levels * levels)[:, None, None]
    for k, (dr, dc) in enumerate(GLCM_OFFSETS):
        if dc >= 0:
            a = q[:, : PATCH_H - dr, : PATCH_W - dc]
            b = q[:, dr:, dc:]
        else:
            a = q[:, : PATCH_H - dr, -dc:]
            b = q[:, dr:, : PATCH_W + dc]
        counts = np.bincount((offset_idx + a * levels + b).ravel(), minlength=n * levels * levels)
        m = counts.reshape(n, levels, levels).astype(np.float64)
        m = m + m.transpose(0, 2, 1)
        out[:, k] = m / m.sum(axis=(1, 2), keepdims=True)
    return out


def haralick(mats: np.ndarray) -> np.ndarray:
    """Contrast, correlation, energy, homogeneity, entropy over the last two axes."""
    levels = mats.shape[-1]
    i = np.arange(levels, dtype=np.float64)[:, None]
    j = np.arange(levels, dtype=np.float64)[None, :]
    contrast = np.sum(mats * (i - j) ** 2, axis=(-2, -1))
    mu_i = np.sum(mats * i, axis=(-2, -1))
    mu_j = np.sum(mats * j, axis=(-2, -1))
    var_i = np.sum(mats * (i - mu_i[..., None, None]) ** 2, axis=(-2, -1))
    var_j = np.sum(mats * (j - mu_j[..., None, None]) ** 2, axis=(-2, -1))
    cov = np.sum(mats * (i - mu_i[..., None, None]) * (j - mu_j[..., None, None]), axis=(-2, -1))
    denom = np.sqrt(var_i * var_j)
    flat = denom < 1e-15
    # single-level texture: perfectly (trivially) correlated
    correlation = np.where(flat, 1.0, cov / np.where(flat, 1.0, denom))
    energy = np.sum(mats**2, axis=(-2, -1))
    homogeneity = np.sum(mats / (1.0 + (i - j) ** 2), axis=(-2, -1))
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(mats > 0, mats * np.log2(np.where(mats > 0, mats, 1.0)), 0.0)
    entropy = -np.sum(plogp, axis=(-2, -1))
    return np.stack([contrast, correlation, energy, homogeneity, entropy], axis=-1)


def glcm_stack(patches) -> np.ndarray:
    mats = glcm_matrices(patches)
    return haralick(mats).reshape(mats.shape[0], -1)


def gray_stack(patches) -> np.ndarray:
    p = _as_stack(patches)
    n = p.shape[0]
    b = GRAY_BLOCK
    return p.reshape(n, PATCH_H // b, b, PATCH_W // b, b).mean(axis=(2, 4)).reshape(n, -1)


def hog_glcm_stack(patches) -> np.ndarray:
    return np.concatenate([hog_stack(patches), glcm_stack(patches)], axis=1)


STACK_DESCRIPTORS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "hog": hog_stack,
    "glcm": glcm_stack,
    "gray": gray_stack,
    "hog+glcm": hog_glcm_stack,
}


def hog(patch: WindowPatch) -> FeatureVector:
    return FeatureVector(hog_stack(patch)[0], "hog")


def glcm(patch: WindowPatch) -> FeatureVector:
    return FeatureVector(glcm_stack(patch)[0], "glcm")


def gray(patch: WindowPatch) -> FeatureVector:
    return FeatureVector(gray_stack(patch)[0], "gray")


def concat(a: FeatureVector, b: FeatureVector) -> FeatureVector:
    tag = "hog+glcm" if (a.tag, b.tag) == ("hog", "glcm") else "external"
    return FeatureVector(np.concatenate([a.values, b.values]), tag)


# ---------------------------------------------------------------------------
# precomputed features


def load_precomputed(source) -> dict[tuple[str, BoundingBox], FeatureVector]:
    """Read ``frame_id x y w h v1 ... vD`` lines into a lookup table."""
    table: dict[tuple[str, BoundingBox], FeatureVector] = {}
    dim = None
    for lineno, line in _text_lines(source):
        parts = line.split()
        if len(parts) < 6:
            raise FormatError(f"line {lineno}: need frame, box and at least one value")
        try:
            box = _parse_box(parts[1:5], lineno)
            values = np.array([float(v) for v in parts[5:]])
        except (ParseError, ValueError) as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise FormatError(f"line {lineno}: expected {dim} values, got {len(values)}")
        key = (parts[0], box)
        if key in table:
            raise FormatError(f"line {lineno}: duplicate window {parts[0]} {box.as_tuple()}")
        try:
            table[key] = FeatureVector(values, "external")
        except InputError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    return table


# ---------------------------------------------------------------------------
# extractors: window lists -> feature matrices


def _l2_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms > 0, norms, 1.0)


@dataclass(frozen=True)
class Descriptor:
    """Computes one descriptor for windows cropped from frame images."""

    tag: str
    normalize: bool = False

    def __post_init__(self):
        if self.tag not in STACK_DESCRIPTORS:
            raise ValueError(f"unknown descriptor {self.tag!r}")

    def window_features(self, images, windows: Sequence) -> np.ndarray:
        """Feature matrix with one row per window (objects with frame_id and bbox)."""
        if not windows:
            return np.zeros((0, 0))
        patches = np.empty((len(windows), PATCH_H, PATCH_W))
        by_frame: dict[str, list[int]] = {}
        for i, w in enumerate(windows):
            by_frame.setdefault(w.frame_id, []).append(i)
        for fid in sorted(by_frame):
            img = get_image(images, fid)
            for i in by_frame[fid]:
                patches[i] = extract_patch_array(img, windows[i].bbox)
        np.clip(patches, 0.0, 1.0, out=patches)
        x = STACK_DESCRIPTORS[self.tag](patches)
        return _l2_rows(x) if self.normalize else x


@dataclass(frozen=True, eq=False)
class PrecomputedFeatures:
    table: Mapping[tuple[str, BoundingBox], FeatureVector]
    normalize: bool = False
    tag: str = "external"

    @classmethod
    def from_file(cls, path: str | Path, normalize: bool = False) -> PrecomputedFeatures:
        return cls(load_precomputed(Path(path)), normalize)

    def window_features(self, images, windows: Sequence) -> np.ndarray:
        if not windows:
            return np.zeros((0, 0))
        rows = []
        for w in windows:
            fv = self.table.get((w.frame_id, w.bbox))
            if fv is None:
                raise InputError(f"no precomputed features for {w.frame_id} {w.bbox.as_tuple()}")
            rows.append(fv.values)
        x = np.vstack(rows)
        return _l2_rows(x) if self.normalize else x


def make_extractor(spec: str, normalize: bool = False):
    """``hog``, ``glcm``, ``gray``, ``hog+glcm`` or ``external:<path>``."""
    if spec.startswith("external:"):
        return PrecomputedFeatures.from_file(spec.split(":", 1)[1], normalize)
    if spec not in STACK_DESCRIPTORS:
        raise ConfigurationError(
            f"unknown feature {spec!r}; choose from {', '.join(STACK_DESCRIPTORS)} or external:<file>"
        )
    return Descriptor(spec, normalize)
