"""
Bridging a detection gap
========================

A single walker disappears for a number of frames.  Track-to-track
association links the track that ends before the gap to the one starting
after it, as long as the gap stays within ``theta_t2t`` frames.
"""

from gmphd_ogm.geometry import BoundingBox
from gmphd_ogm.hda import TrackerConfig, run_sequence
from gmphd_ogm.metrics import evaluate
from gmphd_ogm.synth import ObjectSpec, ScenarioSpec, generate

config = TrackerConfig(theta_t2t=30, tau_t2t=2)
walker = [ObjectSpec(1, 120, BoundingBox(100, 200, 40, 100), (2.0, 1.0))]

for gap in (5, 20, 30, 31, 40):
    gt, det = generate(ScenarioSpec(seed=1, length=120, objects=walker))
    for frame in range(21, 21 + gap):
        det[frame] = []
    out = run_sequence(det, config, 1, 120)
    ids = sorted({tid for items in out.values() for tid, _ in items})
    print(f"gap {gap:3d}: ids {ids}, identity switches {evaluate(gt, out).IDS}")
