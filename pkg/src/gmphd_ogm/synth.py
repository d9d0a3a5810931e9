"""Synthetic box-tracking scenarios with misses, clutter and duplicate boxes.

Randomness comes from :class:`SplitMix64`, a small fixed 64-bit generator, so
a scenario file and its seed pin the output down exactly on any platform.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

from .geometry import BoundingBox, iou
from .motio import GroundTruthEntry, Observation

_MASK = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 stream (Steele, Lea & Flood's increment/mix constants).

    ``uniform`` uses the top 53 bits; ``normal`` is Box-Muller without caching;
    ``poisson`` is Knuth's product-of-uniforms method.
    """

    def __init__(self, seed):
        self.state = seed & _MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self, low=0.0, high=1.0):
        return low + (high - low) * ((self.next_u64() >> 11) * 2.0 ** -53)

    def normal(self, mean=0.0, sigma=1.0):
        u1 = 1.0 - self.uniform()          # (0, 1]
        u2 = self.uniform()
        return mean + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, lam):
        if lam <= 0:
            return 0
        limit = math.exp(-lam)
        k, p = 0, 1.0
        while True:
            p *= self.uniform()
            if p <= limit:
                return k
            k += 1


@dataclass
class ObjectSpec:
    birth: int
    death: int
    box: BoundingBox
    velocity: tuple = (0.0, 0.0)

    def box_at(self, frame):
        dt = frame - self.birth
        return BoundingBox(self.box.left + self.velocity[0] * dt,
                           self.box.top + self.velocity[1] * dt,
                           self.box.width, self.box.height)


@dataclass
class ScenarioSpec:
    seed: int = 0
    length: int = 100
    objects: list = field(default_factory=list)
    miss_rate: float = 0.0
    clutter_rate: float = 0.0
    duplicate_rate: float = 0.0
    position_noise_sigma: float = 0.0
    occlusion_miss: bool = False
    image_width: float = 1920.0
    image_height: float = 1080.0

    def validate(self):
        for name in ("miss_rate", "duplicate_rate", "clutter_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.length < 1:
            raise ValueError("length must be at least 1")
        if self.position_noise_sigma < 0:
            raise ValueError("position_noise_sigma must be non-negative")
        for k, obj in enumerate(self.objects):
            if not all(math.isfinite(v) for v in obj.velocity):
                raise ValueError(f"object {k + 1} has a non-finite velocity")
            if obj.birth < 1 or obj.death < obj.birth:
                raise ValueError(f"object {k + 1} has an empty life span")


@dataclass
class FrameLog:
    frame: int
    gt: int = 0
    misses: int = 0
    duplicates: int = 0
    clutter: int = 0
    detections: int = 0


def _jitter(rng, box):
    # +-20% of extent on position and size
    w = box.width * (1.0 + rng.uniform(-0.2, 0.2))
    h = box.height * (1.0 + rng.uniform(-0.2, 0.2))
    cx, cy = box.center
    cx += box.width * rng.uniform(-0.2, 0.2)
    cy += box.height * rng.uniform(-0.2, 0.2)
    return BoundingBox.from_center(cx, cy, w, h)


def generate(spec: ScenarioSpec, log=None):
    """Return ``(ground_truth, detections)`` maps for every frame of ``spec``.

    When ``log`` is a list, one :class:`FrameLog` per frame is appended.
    """
    spec.validate()
    rng = SplitMix64(spec.seed)
    gt = {}
    det = {}
    for frame in range(1, spec.length + 1):
        entry = FrameLog(frame)
        alive = [(k + 1, obj.box_at(frame)) for k, obj in enumerate(spec.objects)
                 if obj.birth <= frame <= obj.death]
        gt[frame] = [GroundTruthEntry(oid, box, True) for oid, box in alive]
        entry.gt = len(alive)

        hidden = set()
        if spec.occlusion_miss:
            for a in range(len(alive)):
                for b in range(a + 1, len(alive)):
                    if iou(alive[a][1], alive[b][1]) > 0.3:
                        hidden.add(alive[b][0])

        frame_det = []
        for oid, box in alive:
            # draw every stream value even for hidden objects so the miss
            # pattern of one object does not shift the others
            drop = rng.uniform() < spec.miss_rate
            dx = rng.normal(0.0, spec.position_noise_sigma) if spec.position_noise_sigma else 0.0
            dy = rng.normal(0.0, spec.position_noise_sigma) if spec.position_noise_sigma else 0.0
            dup = rng.uniform() < spec.duplicate_rate
            if drop or oid in hidden:
                entry.misses += 1
                continue
            seen = BoundingBox(box.left + dx, box.top + dy, box.width, box.height)
            frame_det.append(Observation(frame, seen, 1.0))
            if dup:
                frame_det.append(Observation(frame, _jitter(rng, seen), 1.0))
                entry.duplicates += 1
        n_clutter = rng.poisson(spec.clutter_rate)
        for _ in range(n_clutter):
            w = rng.uniform(20.0, 80.0)
            h = w * rng.uniform(2.0, 3.0)
            left = rng.uniform(0.0, max(spec.image_width - w, 1.0))
            top = rng.uniform(0.0, max(spec.image_height - h, 1.0))
            frame_det.append(Observation(frame, BoundingBox(left, top, w, h), rng.uniform(0.3, 1.0)))
        entry.clutter = n_clutter
        entry.detections = len(frame_det)
        det[frame] = frame_det
        if log is not None:
            log.append(entry)
    return gt, det


_FLOAT_KEYS = ("miss_rate", "clutter_rate", "duplicate_rate", "position_noise_sigma",
               "image_width", "image_height")


def parse_scenario(source) -> ScenarioSpec:
    """Read a ``key=value`` scenario file.

    Objects are given one per line as
    ``object = birth,death,left,top,width,height,vx,vy``.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    spec = ScenarioSpec()
    for line_no, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {line_no}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        try:
            if key == "object":
                v = [float(x) for x in value.split(",")]
                if len(v) != 8:
                    raise ValueError("object needs 8 comma-separated values")
                spec.objects.append(ObjectSpec(int(v[0]), int(v[1]),
                                               BoundingBox(v[2], v[3], v[4], v[5]), (v[6], v[7])))
            elif key in ("seed", "length"):
                setattr(spec, key, int(value))
            elif key in _FLOAT_KEYS:
                setattr(spec, key, float(value))
            elif key == "occlusion_miss":
                spec.occlusion_miss = value.lower() in ("1", "true", "yes", "on")
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
    spec.validate()
    return spec


def format_scenario(spec: ScenarioSpec) -> str:
    lines = [f"seed = {spec.seed}", f"length = {spec.length}"]
    lines += [f"{k} = {getattr(spec, k)!r}" for k in _FLOAT_KEYS]
    lines.append(f"occlusion_miss = {str(spec.occlusion_miss).lower()}")
    for o in spec.objects:
        b = o.box
        lines.append(f"object = {o.birth},{o.death},{b.left!r},{b.top!r},{b.width!r},"
                     f"{b.height!r},{o.velocity[0]!r},{o.velocity[1]!r}")
    return "\n".join(lines) + "\n"
