"""Reading and writing MOT-Challenge text files.

All files are comma separated with 1-based frame numbers and top-left box
origin; nothing is converted on the way in or out.
"""

from __future__ import annotations

import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass

from .geometry import BoundingBox

log = logging.getLogger(__name__)


class MotParseError(ValueError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Observation:
    frame: int
    box: BoundingBox
    confidence: float = 1.0

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frame numbers start at 1, got {self.frame}")

    @property
    def center(self):
        return self.box.center


@dataclass(frozen=True)
class GroundTruthEntry:
    id: int
    box: BoundingBox
    considered: bool = True


@dataclass(frozen=True)
class SequenceMeta:
    name: str
    frame_rate: float
    image_width: int
    image_height: int
    length: int

    def __post_init__(self):
        for key in ("frame_rate", "image_width", "image_height", "length"):
            if not getattr(self, key) > 0:
                raise ValueError(f"{key} must be positive")


def _as_text(source):
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def _rows(source, min_fields):
    for line_no, raw in enumerate(_as_text(source), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) < min_fields:
            raise MotParseError(line_no, f"expected at least {min_fields} fields, got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError:
            bad = next(f for f in fields if not _is_number(f))
            raise MotParseError(line_no, f"non-numeric field {bad!r}") from None
        if not all(math.isfinite(v) for v in values[:6]):
            raise MotParseError(line_no, "non-finite frame, id or box value")
        yield line_no, values


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _frame(line_no, value):
    if value != int(value) or value < 1:
        raise MotParseError(line_no, f"bad frame number {value}")
    return int(value)


def parse_detections(source, conf_floor=-math.inf):
    """Parse a detection file into ``{frame: [Observation, ...]}``.

    The returned mapping yields an empty list for frames without rows.
    Rows with non-positive size are dropped and counted in a warning; rows
    scoring below ``conf_floor`` are skipped.
    """
    out = defaultdict(list)
    dropped = 0
    for line_no, v in _rows(source, 7):
        frame = _frame(line_no, v[0])
        if v[4] <= 0 or v[5] <= 0:
            dropped += 1
            continue
        if v[6] < conf_floor:
            continue
        out[frame].append(Observation(frame, BoundingBox(v[2], v[3], v[4], v[5]), v[6]))
    if dropped:
        log.warning("dropped %d detection rows with non-positive width or height", dropped)
    return out


def parse_ground_truth(source, classes=frozenset({1})):
    """Parse a ground-truth file into ``{frame: [GroundTruthEntry, ...]}``.

    A row is considered when its flag column is non-zero and its class is in
    ``classes``.  Class ``-1`` (files without class information, as in
    MOT15) is treated as unspecified and does not exclude the row.
    """
    out = defaultdict(list)
    seen = set()
    dropped = 0
    for line_no, v in _rows(source, 7):
        frame = _frame(line_no, v[0])
        tid = int(v[1])
        if (frame, tid) in seen:
            raise MotParseError(line_no, f"duplicate id {tid} in frame {frame}")
        seen.add((frame, tid))
        if v[4] <= 0 or v[5] <= 0:
            dropped += 1
            continue
        considered = v[6] != 0
        if len(v) > 7 and v[7] != -1 and int(v[7]) not in classes:
            considered = False
        out[frame].append(GroundTruthEntry(tid, BoundingBox(v[2], v[3], v[4], v[5]), considered))
    if dropped:
        log.warning("dropped %d ground-truth rows with non-positive width or height", dropped)
    return out


def parse_results(source):
    """Parse a tracker result file into ``{frame: [(id, BoundingBox), ...]}``."""
    out = defaultdict(list)
    seen = set()
    for line_no, v in _rows(source, 6):
        frame = _frame(line_no, v[0])
        tid = int(v[1])
        if (frame, tid) in seen:
            raise MotParseError(line_no, f"duplicate id {tid} in frame {frame}")
        seen.add((frame, tid))
        if v[4] <= 0 or v[5] <= 0:
            raise MotParseError(line_no, "non-positive box size")
        out[frame].append((tid, BoundingBox(v[2], v[3], v[4], v[5])))
    return out


def write_results(tracks, sink):
    """Write ``{frame: [(id, box), ...]}`` in result format; returns row count."""
    rows = 0
    for frame in sorted(tracks):
        for tid, box in sorted(tracks[frame], key=lambda t: t[0]):
            sink.write(f"{frame},{tid},{box.left:.2f},{box.top:.2f},"
                       f"{box.width:.2f},{box.height:.2f},-1,-1,-1,-1\n")
            rows += 1
    return rows


def write_detections(detections, sink):
    rows = 0
    for frame in sorted(detections):
        for obs in detections[frame]:
            b = obs.box
            sink.write(f"{frame},-1,{b.left:.2f},{b.top:.2f},{b.width:.2f},"
                       f"{b.height:.2f},{obs.confidence:.4f},-1,-1,-1\n")
            rows += 1
    return rows


def write_ground_truth(gt, sink):
    rows = 0
    for frame in sorted(gt):
        for entry in sorted(gt[frame], key=lambda e: e.id):
            b = entry.box
            sink.write(f"{frame},{entry.id},{b.left:.2f},{b.top:.2f},{b.width:.2f},"
                       f"{b.height:.2f},{int(entry.considered)},1,1.0\n")
            rows += 1
    return rows


_META_KEYS = {
    "name": ("name", str),
    "framerate": ("frame_rate", float),
    "seqlength": ("length", int),
    "imwidth": ("image_width", int),
    "imheight": ("image_height", int),
}


def parse_seqinfo(source) -> SequenceMeta:
    """Read ``key=value`` sequence metadata (a MOT ``seqinfo.ini``)."""
    values = {}
    for line_no, raw in enumerate(_as_text(source), start=1):
        line = raw.strip()
        if not line or line.startswith(("[", "#", ";")):
            continue
        if "=" not in line:
            raise MotParseError(line_no, f"expected key=value, got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key.lower() in _META_KEYS:
            attr, conv = _META_KEYS[key.lower()]
            try:
                values[attr] = conv(value)
            except ValueError:
                raise MotParseError(line_no, f"bad value for {key}: {value!r}") from None
    missing = {a for a, _ in _META_KEYS.values()} - set(values)
    if missing:
        raise MotParseError(0, f"missing sequence keys: {', '.join(sorted(missing))}")
    return SequenceMeta(**values)
