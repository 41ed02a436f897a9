"""Detection and ground-truth records and their text file formats.

Detection file, one record per line::

    frame_id x y w h score

Ground-truth file::

    frame_id x y w h ignore_flag      # ignore_flag in {0, 1}

Fields are whitespace separated, ``#`` starts a comment line, blank lines are
skipped. Numbers always use ``.`` as decimal point.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

from csbc.errors import ParseError
from csbc.geometry import BoundingBox


@dataclass(frozen=True, slots=True)
class Detection:
    frame_id: str
    bbox: BoundingBox
    score: float
    detector_id: str

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"detection score must be finite, got {self.score!r}")
        if not self.detector_id:
            raise ValueError("detector_id must be non-empty")

    def with_score(self, score: float) -> Detection:
        return Detection(self.frame_id, self.bbox, score, self.detector_id)


@dataclass(frozen=True, slots=True)
class GroundTruthBox:
    frame_id: str
    bbox: BoundingBox
    ignore: bool = False


@dataclass(frozen=True)
class DetectionSet:
    """All windows of one detector, grouped by frame.

    Per-frame order is the input order. Iteration is canonical: frames in
    lexicographic order, then input order within a frame.
    """

    detector_id: str
    frames: Mapping[str, tuple[Detection, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.detector_id:
            raise ValueError("detector_id must be non-empty")
        frames = {}
        for fid, dets in self.frames.items():
            dets = tuple(dets)
            for d in dets:
                if d.detector_id != self.detector_id:
                    raise ValueError(
                        f"detection from {d.detector_id!r} in set of {self.detector_id!r}"
                    )
                if d.frame_id != fid:
                    raise ValueError(f"detection of frame {d.frame_id!r} filed under {fid!r}")
            if dets:
                frames[fid] = dets
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_detections(cls, detector_id: str, dets: Iterable[Detection]) -> DetectionSet:
        frames: dict[str, list[Detection]] = {}
        for d in dets:
            frames.setdefault(d.frame_id, []).append(d)
        return cls(detector_id, {k: tuple(v) for k, v in frames.items()})

    def frame_ids(self) -> list[str]:
        return sorted(self.frames)

    def in_frame(self, frame_id: str) -> tuple[Detection, ...]:
        return self.frames.get(frame_id, ())

    def __iter__(self) -> Iterator[Detection]:
        for fid in self.frame_ids():
            yield from self.frames[fid]

    def __len__(self) -> int:
        return sum(len(v) for v in self.frames.values())

    def scores(self) -> list[float]:
        return [d.score for d in self]


def group_ground_truth(gts: Iterable[GroundTruthBox]) -> dict[str, list[GroundTruthBox]]:
    out: dict[str, list[GroundTruthBox]] = {}
    for g in gts:
        out.setdefault(g.frame_id, []).append(g)
    return out


def _text_lines(source) -> Iterator[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}") from None
    for lineno, line in enumerate(data.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, stripped


def _parse_box(fields: list[str], lineno: int) -> BoundingBox:
    try:
        x, y, w, h = (float(v) for v in fields)
    except ValueError:
        raise ParseError(f"non-numeric box field in {fields!r}", lineno) from None
    try:
        return BoundingBox(x, y, w, h)
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def read_detections(source, detector_id: str) -> DetectionSet:
    """Parse a detection file (path or byte/text stream)."""
    if not detector_id:
        raise ValueError("detector_id must be non-empty")
    dets = []
    for lineno, line in _text_lines(source):
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", lineno)
        bbox = _parse_box(parts[1:5], lineno)
        try:
            score = float(parts[5])
        except ValueError:
            raise ParseError(f"non-numeric score {parts[5]!r}", lineno) from None
        if not math.isfinite(score):
            raise ParseError(f"non-finite score {parts[5]!r}", lineno)
        dets.append(Detection(parts[0], bbox, score, detector_id))
    return DetectionSet.from_detections(detector_id, dets)


def read_ground_truth(source) -> list[GroundTruthBox]:
    gts = []
    for lineno, line in _text_lines(source):
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", lineno)
        bbox = _parse_box(parts[1:5], lineno)
        if parts[5] not in ("0", "1"):
            raise ParseError(f"ignore flag must be 0 or 1, got {parts[5]!r}", lineno)
        gts.append(GroundTruthBox(parts[0], bbox, parts[5] == "1"))
    return gts


def format_coord(v: float) -> str:
    """Shortest exact representation, without a trailing ``.0``."""
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


def format_score(v: float) -> str:
    return format(float(v), ".9g")


def _write_text(sink, text: str) -> None:
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(text.encode("utf-8"))
    elif isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode("utf-8"))


def write_detections(dets: DetectionSet, sink: IO, header: bool = True) -> None:
    """Write ``dets`` in canonical order (frames sorted, then input order)."""
    lines = []
    if header:
        lines.append(f"# detector {dets.detector_id}: frame_id x y w h score")
    for d in dets:
        b = d.bbox
        lines.append(
            " ".join([d.frame_id, *(format_coord(v) for v in b.as_tuple()), format_score(d.score)])
        )
    _write_text(sink, "".join(line + "\n" for line in lines))


def write_ground_truth(gts: Iterable[GroundTruthBox], sink: IO, header: bool = True) -> None:
    lines = ["# frame_id x y w h ignore_flag"] if header else []
    for g in gts:
        lines.append(
            " ".join([g.frame_id, *(format_coord(v) for v in g.bbox.as_tuple()), "1" if g.ignore else "0"])
        )
    _write_text(sink, "".join(line + "\n" for line in lines))


def load_detections(path: str | Path, detector_id: str | None = None) -> DetectionSet:
    """Read a detection file; the detector id defaults to the file stem."""
    path = Path(path)
    return read_detections(path, detector_id or path.stem)
