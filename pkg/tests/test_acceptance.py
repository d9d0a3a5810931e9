"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the verdicts are repeated in an
"acceptance criteria" section at the end of the pytest report.

Criterion 10 needs the MOT15 training sequences with public detections.
Point ``MOT15_DIR`` at a directory holding ``<sequence>/det/det.txt`` and
``<sequence>/gt/gt.txt`` (optionally ``seqinfo.ini``) to enable it.
"""

import itertools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

import gmphd_ogm.hda as hda
from acceptance_log import record, skip
from gmphd_ogm.assignment import solve_min_cost
from gmphd_ogm.geometry import BoundingBox, iou, sioa
from gmphd_ogm.gmphd import FilterParams, GaussianComponent, predict
from gmphd_ogm.hda import TrackerConfig, d2ta, run_sequence
from gmphd_ogm.metrics import evaluate
from gmphd_ogm.motio import GroundTruthEntry, Observation, parse_detections, parse_ground_truth
from gmphd_ogm.motio import parse_seqinfo
from gmphd_ogm.ogm import merge
from gmphd_ogm.synth import ObjectSpec, ScenarioSpec, generate
from oracles import brute_force_assignment, grid_counts, topology_energy


def _best_injection(a):
    """Brute-force optimal pairs over all injective maps of the shorter side."""
    flip = a.shape[0] > a.shape[1]
    b = a.T if flip else a
    r, c = b.shape
    perm = min(itertools.permutations(range(c), r),
               key=lambda p: sum(b[i, p[i]] for i in range(r)))
    pairs = [(p, i) if flip else (i, p) for i, p in enumerate(perm)]
    return sorted(pairs)


def _row_sum(a, pairs):
    return sum(a[i, j] for i, j in sorted(pairs))


def test_criterion_01_assignment_optimality():
    rng = np.random.default_rng(2024)
    solver_time = 0.0
    mismatches = 0
    for _ in range(200):
        r, c = (int(v) for v in rng.integers(1, 8, 2))
        a = rng.uniform(0, 100, (r, c))
        best = _best_injection(a)
        start = time.perf_counter()
        got = solve_min_cost(a)
        solver_time += time.perf_counter() - start
        mismatches += _row_sum(a, got.pairs) != _row_sum(a, best)
    ok = mismatches == 0 and solver_time < 5.0
    record(1, ok, f"200 random matrices up to 7x7, {mismatches} cost mismatches, "
                  f"solver time {solver_time:.3f} s")
    assert ok


def test_criterion_02_weight_normalisation_and_covariances():
    params = FilterParams()
    config = TrackerConfig(params)
    rng = np.random.default_rng(77)
    objects = [np.array([rng.uniform(100, 1800), rng.uniform(100, 900), *rng.normal(0, 3, 2)])
               for _ in range(6)]
    states = []
    next_id = itertools.count(1).__next__
    worst_sum, min_eig, prunes = 0.0, math.inf, 0
    for frame in range(1, 1001):
        detections = []
        for o in objects:
            o[:2] += o[2:]
            o[:2] %= (1900, 1000)
            if rng.random() < 0.85:
                cx, cy = o[:2] + rng.normal(0, 3, 2)
                detections.append(Observation(frame, BoundingBox.from_center(cx, cy, 40, 100),
                                              rng.uniform(0.2, 1.0)))
        for _ in range(rng.poisson(2)):
            detections.append(Observation(frame, BoundingBox.from_center(
                *rng.uniform(0, 1900, 2), 40, 100), rng.uniform(-0.5, 1.0)))
        states, _, _ = d2ta(states, detections, config, frame, next_id)
        if states:
            prunes += 1
            worst_sum = max(worst_sum, abs(sum(s.weight for s in states) - 1.0))
        for s in states:
            np.linalg.cholesky(s.covariance)
            min_eig = min(min_eig, float(np.linalg.eigvalsh(s.covariance).min()))
    ok = worst_sum <= 1e-9 and min_eig > 0
    record(2, ok, f"1000 frames, {prunes} non-empty prunes, max |sum w - 1| = {worst_sum:.1e}, "
                  f"min covariance eigenvalue {min_eig:.3g}")
    assert ok


def test_criterion_03_metric_ordering():
    rng = np.random.default_rng(3)
    violations = equal_non_coincident = pairs = 0
    while pairs < 10_000:
        if pairs % 100 == 0:
            a = BoundingBox(*rng.uniform(0, 100, 2), *rng.uniform(1, 80, 2))
            b = BoundingBox(*a.as_tuple())
        else:
            a = BoundingBox(*rng.uniform(0, 100, 2), *rng.uniform(1, 80, 2))
            b = BoundingBox(*rng.uniform(0, 100, 2), *rng.uniform(1, 80, 2))
        i, s = iou(a, b), sioa(a, b)
        if i == 0.0:
            continue
        pairs += 1
        if not 0.0 <= i <= s <= 1.0:
            violations += 1
        if abs(s - i) <= 1e-12 and a != b:
            equal_non_coincident += 1
        if a == b and not (i == s == 1.0):
            violations += 1
    ok = violations == 0 and equal_non_coincident == 0
    record(3, ok, f"{pairs} overlapping pairs, {violations} ordering violations, "
                  f"{equal_non_coincident} non-coincident pairs with SIOA = IOU")
    assert ok


def _state(cid, box):
    cx, cy = box.center
    return GaussianComponent(cid, 1.0, np.array([cx, cy, 0.0, 0.0]), FilterParams().P0.copy(),
                             (box.width, box.height))


def test_criterion_04_sioa_merges_where_iou_does_not():
    large = BoundingBox(1, 0, 19, 16)
    small = BoundingBox(0, 0, 10, 20)
    inter, na, nb, union = grid_counts(large, small)
    grid_iou = inter / union
    grid_sioa = 0.5 * (inter / na + inter / nb)
    geometry_ok = (abs(grid_iou - iou(large, small)) < 1e-12
                   and abs(grid_sioa - sioa(large, small)) < 1e-12
                   and abs(grid_iou - 0.40) <= 0.02 and abs(grid_sioa - 0.60) <= 0.02)
    by_sioa = [_state(1, large), _state(2, small)]
    merge(by_sioa, 0.5, "sioa")
    by_iou = [_state(1, large), _state(2, small)]
    _, groups = merge(by_iou, 0.5, "iou")
    merged_sioa = not by_sioa[1].active
    merged_iou = not by_iou[1].active
    ok = geometry_ok and merged_sioa and not merged_iou and len(groups) == 1
    record(4, ok, f"IOU {grid_iou:.3f}, SIOA {grid_sioa:.3f} (grid oracle, {inter} shared cells); "
                  f"merged under SIOA: {merged_sioa}, merged under IOU: {merged_iou}")
    assert ok


def _duplicate_scenario(seed):
    objs = [ObjectSpec(1, 200, BoundingBox(100 + 300 * k, 200 + 100 * (k % 2), 40, 100),
                       ((-1) ** k * 1.5, 0.5)) for k in range(5)]
    return ScenarioSpec(seed=seed, length=200, objects=objs, duplicate_rate=0.3,
                        clutter_rate=0.0, position_noise_sigma=1.0)


def test_criterion_05_intrinsic_occlusion_suppression():
    wins = 0
    rows = []
    for seed in range(10):
        gt, det = generate(_duplicate_scenario(seed))
        on = evaluate(gt, run_sequence(det, TrackerConfig(ogm_enabled=True), 1, 200))
        off = evaluate(gt, run_sequence(det, TrackerConfig(ogm_enabled=False), 1, 200))
        wins += on.FP < off.FP and on.MOTA > off.MOTA
        rows.append(f"{on.FP}/{off.FP}")
    ok = wins == 10
    record(5, ok, f"OGM better on {wins}/10 seeds; FP on/off per seed: {' '.join(rows)}")
    assert ok


def _gap_run(gap, start=20, length=120):
    spec = ScenarioSpec(seed=1, length=length,
                        objects=[ObjectSpec(1, length, BoundingBox(100, 200, 40, 100), (2.0, 1.0))])
    gt, det = generate(spec)
    for f in range(start + 1, start + gap + 1):
        det[f] = []
    res = run_sequence(det, TrackerConfig(theta_t2t=30, tau_t2t=2), 1, length)
    return evaluate(gt, res).IDS


def test_criterion_06_gap_recovery():
    theta = 30
    short = {g: _gap_run(g) for g in range(1, theta + 1)}
    long_ids = _gap_run(theta + 10)
    ok = all(v == 0 for v in short.values()) and long_ids == 1
    bad = [g for g, v in short.items() if v]
    record(6, ok, f"IDS = 0 for every gap 1..{theta} (failing gaps: {bad or 'none'}); "
                  f"gap {theta + 10}: IDS = {long_ids}")
    assert ok


def _crossing():
    objs = [ObjectSpec(1, 100, BoundingBox(300, 200, 40, 100), (1.0, 0.0)),
            ObjectSpec(1, 100, BoundingBox(400, 230, 40, 100), (-1.0, 0.0))]
    return ScenarioSpec(seed=3, length=100, objects=objs, position_noise_sigma=0.5)


def test_criterion_07_ogem_rescue(monkeypatch):
    spec = _crossing()
    gt, det = generate(spec)
    band = sum(1 for f in gt if sioa(gt[f][0].box, gt[f][1].box) > 0.5)

    merge_only = evaluate(gt, run_sequence(det, TrackerConfig(ogem_enabled=False), 1, 100))

    checks = {"groups": 0, "rescues": 0, "worst": 0.0}
    real_ogem = hda.ogem

    def audited(frame, groups_prev, states, params):
        from gmphd_ogm.ogm import best_hypothesis, enumerate_hypotheses
        for group in groups_prev:
            hyps = enumerate_hypotheses(group, states, params)
            if not hyps:
                continue
            best = best_hypothesis(hyps, group, params.R, params)
            # independent re-evaluation over every permutation
            active = {s.id: s for s in states if s.active}
            centers = [active[mid].mean[:2] if mid in active else predict(snap, params).mean[:2]
                       for mid, snap in group.members]
            pred = [predict(snap, params).mean[:2] for _, snap in group.members]
            energies = [topology_energy([centers[j] for j in perm], pred, params.R.tolist())
                        for perm in itertools.permutations(range(len(centers)))]
            checks["worst"] = max(checks["worst"], abs(min(energies) - best.energy))
            checks["groups"] += 1
            checks["rescues"] += any(best.dummies)
        return real_ogem(frame, groups_prev, states, params)

    monkeypatch.setattr(hda, "ogem", audited)
    full = evaluate(gt, run_sequence(det, TrackerConfig(), 1, 100))
    ok = (band > 0 and merge_only.FN > 0 and full.MT == 2 and full.FN < merge_only.FN
          and checks["rescues"] > 0 and checks["worst"] <= 1e-9)
    record(7, ok, f"{band} frames above the merge band; FN {full.FN} with OGEM vs "
                  f"{merge_only.FN} merge-only; MT {full.MT}/2; {checks['rescues']} rescues over "
                  f"{checks['groups']} groups; max energy gap {checks['worst']:.1e}")
    assert ok


def _walk(n):
    return {f: [GroundTruthEntry(1, BoundingBox(5.0 * f, 0, 50, 100))] for f in range(1, n + 1)}


def test_criterion_08_clear_mot_hand_walks():
    gt = _walk(10)
    same = {f: [(1, e[0].box)] for f, e in gt.items()}
    empty = {}
    switched = {f: [(7 if f <= 5 else 8, e[0].box)] for f, e in gt.items()}
    got = [evaluate(gt, r) for r in (same, empty, switched)]
    mota = [r.MOTA for r in got]
    ids = [r.IDS for r in got]
    ok = mota == [1.0, 0.0, 0.9] and ids == [0, 0, 1]
    record(8, ok, f"MOTA {mota}, IDS {ids}")
    assert ok


def test_criterion_09_throughput():
    objs = [ObjectSpec(1, 1000, BoundingBox(100 + 170 * k, 100 + 80 * (k % 5), 40, 100),
                       ((-1) ** k * 0.3, 0.1 * ((k % 3) - 1))) for k in range(10)]
    spec = ScenarioSpec(seed=1, length=1000, objects=objs, duplicate_rate=0.1, miss_rate=0.05,
                        clutter_rate=1.0, position_noise_sigma=1.0)
    _, det = generate(spec)
    start = time.perf_counter()
    run_sequence(det, TrackerConfig(), 1, 1000)
    elapsed = time.perf_counter() - start
    fps = 1000 / elapsed
    ok = fps >= 100
    record(9, ok, f"1000 frames x 10 objects with OGM: {fps:.0f} frames/s")
    assert ok


def _mot15_sequences(root):
    for seq in sorted(Path(root).rglob("det.txt")):
        base = seq.parent.parent
        if (base / "gt" / "gt.txt").exists():
            yield base


def test_criterion_10_mot15_sweep():
    root = os.environ.get("MOT15_DIR")
    if not root or not any(_mot15_sequences(root)):
        skip(10, "MOT15_DIR not set or holds no sequences; optional criterion not run")
        pytest.skip("MOT15 training data not supplied")
    data = []
    for base in _mot15_sequences(root):
        det = parse_detections((base / "det" / "det.txt").read_text())
        gt = parse_ground_truth((base / "gt" / "gt.txt").read_text())
        info = base / "seqinfo.ini"
        last = parse_seqinfo(info.read_text()).length if info.exists() else max(gt)
        data.append((det, gt, last))
    best = None
    for tau, theta in itertools.product((1, 2, 3), (5, 10, 20, 30, 50, 70, 100)):
        cfg = TrackerConfig(tau_t2t=tau, theta_t2t=theta, merge_metric="sioa")
        total = None
        for det, gt, last in data:
            r = evaluate(gt, run_sequence(det, cfg, 1, last))
            total = r if total is None else total + r
        if best is None or total.MOTA > best[0]:
            best = (total.MOTA, tau, theta)
    ok = abs(100 * best[0] - 35.8) <= 3.0
    record(10, ok, f"best MOTA {100 * best[0]:.1f}% at tau={best[1]}, theta={best[2]} "
                   f"over {len(data)} sequences (target 35.8 +- 3.0)")
    assert ok
