"""Hierarchical data association and the online tracking pipeline.

Each frame runs four stages:

1. detection-to-track association (predict, gated cost, Hungarian, update,
   birth, prune);
2. track merging, which also records occlusion groups;
3. track-to-track association, which hands the identity of a lost tracklet
   to a recently started live one;
4. occlusion group energy minimisation over the groups of the previous frame.

The tracklet pools are re-synchronised with the state set after stages 2, 3
and 4.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assignment import solve_min_cost
from .geometry import BoundingBox, overlap_ratio
from .gmphd import (
    FilterParams,
    GaussianComponent,
    association_cost,
    cost_from_log_weights,
    gated_log_weights,
    init_component,
    normalize_confidences,
    predict,
    prune,
    update,
)
from .ogm import OcclusionGroup, merge, ogem

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


class SequenceError(ValueError):
    """Frames were not presented in strictly increasing order."""


@dataclass
class TrackerConfig:
    filter: FilterParams = field(default_factory=FilterParams)
    sigma_m: float = 0.5
    tau_t2t: int = 2
    theta_t2t: int = 30
    merge_metric: str = "sioa"
    ogm_enabled: bool = True
    ogem_enabled: bool = True        # merge-only ablation when False
    carry_rescued_groups: bool = True
    interpolate: bool = False

    def __post_init__(self):
        if not 0 < self.sigma_m < 1:
            raise ValueError("sigma_m must lie in (0, 1)")
        if self.tau_t2t < 1 or self.theta_t2t < 1:
            raise ValueError("tau_t2t and theta_t2t must be at least 1")
        if self.merge_metric not in ("iou", "sioa"):
            raise ValueError(f"merge_metric must be 'iou' or 'sioa', got {self.merge_metric!r}")


@dataclass
class TrackletEntry:
    frame: int
    box: BoundingBox
    state: np.ndarray            # (cx, cy, vx, vy)
    component: GaussianComponent


@dataclass
class Tracklet:
    id: int
    entries: list = field(default_factory=list)
    status: str = "live"

    @property
    def first(self):
        return self.entries[0]

    @property
    def last(self):
        return self.entries[-1]

    @property
    def last_frame(self):
        return self.entries[-1].frame

    def __len__(self):
        return len(self.entries)


# -- stage 1 -----------------------------------------------------------------

def d2ta(states, detections, config, frame, next_id):
    """Associate one frame of detections with the current states.

    ``next_id`` is a zero-argument callable handing out fresh identities.
    Returns ``(updated, born, missed)``: the pruned list of updated states and
    newborn states (``born`` is the subset of it that is new) and the
    predicted states that found no detection.
    """
    params = config.filter
    predicted = [predict(s, params) for s in states]
    centers = np.array([o.box.center for o in detections], dtype=float).reshape(-1, 2)
    cost, sentinel = association_cost(predicted, centers, params)
    matching = solve_min_cost(cost, sentinel) if cost.size else None
    pairs = matching.row_to_col() if matching is not None else {}

    kept = []
    missed = []
    used = set()
    for i, comp in enumerate(predicted):
        j = pairs.get(i)
        if j is None:
            missed.append(comp.copy(active=False))
            continue
        used.add(j)
        obs = detections[j]
        post = update(comp, centers[j], (obs.box.width, obs.box.height), params, frame=frame)
        post.weight = math.exp(-cost[i, j])
        kept.append(post)

    conf = normalize_confidences([o.confidence for o in detections], params.prune_threshold)
    born_ids = set()
    for j, obs in enumerate(detections):
        if j in used:
            continue
        comp = init_component(obs, conf[j], next_id(), params, frame=frame)
        born_ids.add(comp.id)
        kept.append(comp)

    survivors = prune(kept, params.prune_threshold)
    kept_ids = {c.id for c in survivors}
    for comp in kept:
        if comp.id not in kept_ids and comp.id not in born_ids:
            missed.append(comp.copy(active=False))
    born = [c for c in survivors if c.id in born_ids]
    return survivors, born, missed


# -- tracklet pools ----------------------------------------------------------

def retire_age(config):
    """Frames since a lost tracklet's last entry after which it is dropped.

    A live tracklet becomes eligible for T2TA once it is ``tau_t2t`` long, so
    a lost tracklet is kept until no eligible partner could still start
    within ``theta_t2t`` missed frames of its end.
    """
    return config.theta_t2t + config.tau_t2t


def categorize(tracklets, frame, config):
    """Split tracklets into live (updated at ``frame``) and lost ones.

    Returns ``(live, lost, retired)`` lists; retired tracklets are lost ones
    too old to ever be re-associated.
    """
    live, lost, retired = [], [], []
    limit = retire_age(config)
    for t in tracklets:
        if t.last_frame == frame:
            t.status = "live"
            live.append(t)
        elif frame - t.last_frame > limit:
            retired.append(t)
        else:
            t.status = "lost"
            lost.append(t)
    return live, lost, retired


# -- stage 3 -----------------------------------------------------------------

def _lost_terminal_state(lost):
    """Last state of a lost tracklet with its span-averaged velocity."""
    a_t = lost.last
    a_s = lost.first
    state = a_t.state.copy()
    span = a_t.frame - a_s.frame
    if span > 0:
        state[2:] = (a_t.state[:2] - a_s.state[:2]) / span
    return state


def t2ta_transition(d_f):
    F = np.eye(4)
    F[0, 2] = F[1, 3] = d_f
    return F


def t2ta_feasible(lost, live, config):
    d_f = live.first.frame - lost.last_frame
    if d_f <= 0 or d_f - 1 > config.theta_t2t:
        return False
    return len(lost) >= config.tau_t2t and len(live) >= config.tau_t2t


def _t2ta_log_terms(lost, live, config):
    """(log q, squared Mahalanobis distance) of ``live``'s start under ``lost``."""
    params = config.filter
    d_f = live.first.frame - lost.last_frame
    F = t2ta_transition(d_f)
    x = F @ _lost_terminal_state(lost)
    P = params.Q + F @ lost.last.component.covariance @ F.T
    H = params.H
    S = params.R + H @ P @ H.T
    L = np.linalg.cholesky(S)
    nu = live.first.state[:2] - H @ x
    y = np.linalg.solve(L, nu)
    maha2 = float(y @ y)
    log_det = 2.0 * float(np.log(np.diag(L)).sum())
    return -0.5 * (maha2 + log_det + 2 * _LOG_2PI), maha2


def t2ta_cost_matrix(lost_list, live_list, config):
    """Cost of every (lost, live) pair; gated pairs hold the returned sentinel."""
    n, m = len(lost_list), len(live_list)
    log_q = np.full((n, m), -np.inf)
    maha2 = np.full((n, m), np.inf)
    for i, lt in enumerate(lost_list):
        for j, vt in enumerate(live_list):
            if t2ta_feasible(lt, vt, config):
                log_q[i, j], maha2[i, j] = _t2ta_log_terms(lt, vt, config)
    prior = [lt.last.component.weight for lt in lost_list]
    log_w = gated_log_weights(log_q, maha2, prior)
    return cost_from_log_weights(log_w)


def t2ta_cost(lost, live, config, competitors=()):
    """Cost of continuing ``lost`` with ``live``; ``math.inf`` when gated.

    The weight is normalised over ``lost`` and ``competitors`` (other lost
    tracklets bidding for the same live tracklet).
    """
    rows = [lost, *competitors]
    cost, sentinel = t2ta_cost_matrix(rows, [live], config)
    value = cost[0, 0]
    return math.inf if value == sentinel else float(value)


def t2ta(lost_list, live_list, config):
    """Match lost tracklets to live ones; returns ``{live id: lost id}``."""
    if not lost_list or not live_list:
        return {}
    cost, sentinel = t2ta_cost_matrix(lost_list, live_list, config)
    matching = solve_min_cost(cost, sentinel)
    return {live_list[j].id: lost_list[i].id for i, j in matching.pairs}


# -- pipeline ----------------------------------------------------------------

class GMPHDOGMTracker:
    """Online tracker; feed it one frame at a time through :meth:`step`.

    Not thread safe: calls to ``step`` must be serialised.
    """

    def __init__(self, config=None):
        self.config = config or TrackerConfig()
        self.states = []
        self.tracklets = {}          # id -> Tracklet (live and lost)
        self.retired = set()
        self.groups = []             # recorded at the current frame
        self.groups_prev = []
        self.frame = None
        self._next_id = 1
        self.last_relabels = {}

    def _allocate_id(self):
        nid = self._next_id
        self._next_id += 1
        return nid

    @property
    def live(self):
        return {i: t for i, t in self.tracklets.items() if t.status == "live"}

    @property
    def lost(self):
        return {i: t for i, t in self.tracklets.items() if t.status == "lost"}

    @property
    def known_ids(self):
        return set(range(1, self._next_id))

    def _sync(self, frame):
        """Make the pools agree with the active states at ``frame``."""
        self.states = [s for s in self.states if s.active]
        for t in self.tracklets.values():
            if t.entries and t.last_frame == frame:
                t.entries.pop()
        for s in self.states:
            t = self.tracklets.get(s.id)
            if t is None:
                t = self.tracklets[s.id] = Tracklet(s.id)
            t.entries.append(TrackletEntry(frame, s.box, s.mean.copy(), s.copy()))
        for tid in [i for i, t in self.tracklets.items() if not t.entries]:
            del self.tracklets[tid]
            self.retired.add(tid)
        _, _, retired = categorize(self.tracklets.values(), frame, self.config)
        for t in retired:
            del self.tracklets[t.id]
            self.retired.add(t.id)

    def _apply_t2ta(self, relabel):
        for live_id, lost_id in relabel.items():
            live_t = self.tracklets.pop(live_id)
            lost_t = self.tracklets.pop(lost_id)
            live_t.entries = lost_t.entries + live_t.entries
            live_t.id = lost_id
            for e in live_t.entries:
                e.component.id = lost_id
            self.tracklets[lost_id] = live_t
            self.retired.add(live_id)
        for s in self.states:
            if s.id in relabel:
                s.id = relabel[s.id]

    def _relabel_groups(self, mapping):
        if mapping:
            self.groups = [g.relabeled(mapping) for g in self.groups]
            self.groups_prev = [g.relabeled(mapping) for g in self.groups_prev]

    def step(self, frame, detections):
        """Process one frame; returns ``[(id, BoundingBox), ...]`` sorted by id."""
        if self.frame is not None and frame <= self.frame:
            raise SequenceError(f"frame {frame} does not follow frame {self.frame}")
        cfg = self.config
        first_sight = not self.tracklets
        self.frame = frame
        self.last_relabels = {}

        # 1. D2TA
        states, born, _ = d2ta(self.states, list(detections), cfg, frame, self._allocate_id)
        self.states = states

        # 2. merge and occlusion groups
        self.groups_prev = self.groups
        self.groups = []
        if cfg.ogm_enabled:
            _, self.groups = merge(self.states, cfg.sigma_m, cfg.merge_metric, frame)
        self._sync(frame)
        # births fused away at once never get a tracklet
        self.retired.update(c.id for c in born if c.id not in self.tracklets)

        # 3. T2TA
        live, lost, _ = categorize(self.tracklets.values(), frame, cfg)
        relabel = t2ta(lost, live, cfg)
        if relabel:
            self._apply_t2ta(relabel)
            self._relabel_groups(relabel)
            self.last_relabels.update(relabel)
            self._sync(frame)

        # 4. OGEM
        if cfg.ogm_enabled and cfg.ogem_enabled and self.groups_prev:
            self.states, swaps, revived = ogem(frame, self.groups_prev, self.states, cfg.filter)
            if swaps:
                self.groups = [g.relabeled(swaps) for g in self.groups]
            if cfg.carry_rescued_groups:
                self._carry_groups(revived, frame)
            self._sync(frame)
        self.groups_prev = []

        return self._report(first_sight)

    def _carry_groups(self, revived, frame):
        """Re-record groups whose restored members still touch a partner.

        Without this a member that was fused away or missed during a
        sustained overlap is restored for one frame only, because Merge never
        records a group for a pair above the merge threshold and a missed
        member has no state to group.
        """
        by_id = {s.id: s for s in self.states if s.active}
        recorded = {tuple(g.ids) for g in self.groups}
        metric = self.config.merge_metric
        for group, ids in revived:
            members = [(mid, by_id[mid].copy()) for mid in group.ids if mid in by_id]
            touching = any(
                overlap_ratio(by_id[i].box, snap.box, metric) > 0
                for i in ids if i in by_id for mid, snap in members if mid != i)
            if not touching:
                continue
            if len(members) < 2 or tuple(m[0] for m in members) in recorded:
                continue
            self.groups.append(OcclusionGroup(members[0][0], members, frame))
            recorded.add(tuple(m[0] for m in members))

    def _report(self, first_sight):
        out = []
        for s in sorted(self.states, key=lambda s: s.id):
            if first_sight or len(self.tracklets[s.id]) >= self.config.tau_t2t:
                out.append((s.id, s.box))
        return out


def run_sequence(detections, config=None, first_frame=1, last_frame=None):
    """Track a whole sequence; returns ``{frame: [(id, box), ...]}``.

    Every frame from ``first_frame`` to ``last_frame`` is stepped, including
    frames without detections.
    """
    tracker = GMPHDOGMTracker(config)
    if last_frame is None:
        last_frame = max(detections, default=first_frame - 1)
    out = {}
    for frame in range(first_frame, last_frame + 1):
        out[frame] = tracker.step(frame, detections.get(frame, []))
    if tracker.config.interpolate:
        out = interpolate_gaps(out, tracker.config.theta_t2t + tracker.config.tau_t2t)
    return out


def interpolate_gaps(tracks, max_gap):
    """Fill frames where an id disappears and comes back with linear boxes."""
    by_id = {}
    for frame, items in tracks.items():
        for tid, box in items:
            by_id.setdefault(tid, []).append((frame, box))
    filled = {f: list(items) for f, items in tracks.items()}
    for tid, seq in by_id.items():
        seq.sort(key=lambda fb: fb[0])
        for (f0, b0), (f1, b1) in zip(seq, seq[1:]):
            gap = f1 - f0
            if gap <= 1 or gap - 1 > max_gap:
                continue
            a = np.array(b0.as_tuple())
            b = np.array(b1.as_tuple())
            for f in range(f0 + 1, f1):
                alpha = (f - f0) / gap
                filled.setdefault(f, []).append((tid, BoundingBox(*((1 - alpha) * a + alpha * b))))
    for f in filled:
        filled[f].sort(key=lambda t: t[0])
    return filled
