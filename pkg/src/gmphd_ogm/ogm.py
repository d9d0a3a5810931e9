"""Occlusion group management: track merging and group energy minimisation.

Merging runs right after detection-to-track association.  Strongly overlapping
states are fused into the older identity; moderately overlapping ones are
recorded as an occlusion group.  One frame later, after track-to-track
association, every recorded group is re-examined: the labelling of its members
whose relative positions best match their predicted relative positions wins,
and members that went missing in the meantime are restored at their
predictions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import overlap_ratio
from .gmphd import FilterParams, predict

MERGE_KEEP = 0.9
MAX_GROUP_SIZE = 3
ENERGY_CEILING = 1e6


@dataclass
class OcclusionGroup:
    key: int
    members: list                    # [(id, GaussianComponent snapshot)], id-sorted
    formation_frame: int

    @property
    def ids(self):
        return [mid for mid, _ in self.members]

    def relabeled(self, mapping):
        """Copy with member ids passed through ``mapping`` (missing ids kept)."""
        if not any(mid in mapping for mid in self.ids):
            return self
        members = sorted(((mapping.get(mid, mid), snap.copy(id=mapping.get(mid, mid)))
                          for mid, snap in self.members), key=lambda m: m[0])
        return OcclusionGroup(members[0][0], members, self.formation_frame)


@dataclass
class TopologyHypothesis:
    """One labelling of a group's members.

    ``permutation[i] = j`` means label ``i`` (the i-th member by id) is
    realised by the state currently held by member ``j``.
    """

    permutation: tuple
    realizations: list               # centre of member j's realisation, indexed by j
    dummies: tuple                   # dummies[j]: member j is realised by its prediction
    energy: float = math.nan

    @property
    def moved(self):
        return sum(1 for i, j in enumerate(self.permutation) if i != j)


def _blend(keep, other):
    keep.mean[:2] = MERGE_KEEP * keep.mean[:2] + (1 - MERGE_KEEP) * other.mean[:2]
    keep.extent = (MERGE_KEEP * keep.extent[0] + (1 - MERGE_KEEP) * other.extent[0],
                   MERGE_KEEP * keep.extent[1] + (1 - MERGE_KEEP) * other.extent[1])


def merge(states, sigma_m=0.5, metric="sioa", frame=0):
    """Fuse strongly overlapping states and collect occlusion groups.

    ``states`` is modified in place (blended means/extents, ``active`` flags)
    and also returned, together with the list of groups formed at ``frame``.
    Ratios are all measured before any state is touched.
    """
    live = [s for s in states if s.active]
    n = len(live)
    boxes = [s.box for s in live]
    ratio = np.zeros((n, n))
    flagged = []
    grouped = {}
    for i in range(n):
        for j in range(i + 1, n):
            r = overlap_ratio(boxes[i], boxes[j], metric)
            ratio[i, j] = ratio[j, i] = r
            if r > sigma_m:
                flagged.append((i, j))
            elif r > 0:
                key = min(live[i].id, live[j].id)
                grouped.setdefault(key, set()).update((i, j))

    for i, j in flagged:
        keep, drop = (live[i], live[j]) if live[i].id < live[j].id else (live[j], live[i])
        _blend(keep, drop)
        drop.active = False

    groups = []
    for key in sorted(grouped):
        # Fused duplicates are not occlusion partners.
        idx = [i for i in grouped[key] if live[i].active]
        if len(idx) > MAX_GROUP_SIZE:
            score = {i: sum(ratio[i, j] for j in idx if j != i) for i in idx}
            idx = sorted(idx, key=lambda i: (-score[i], live[i].id))[:MAX_GROUP_SIZE]
        if len(idx) < 2:
            continue
        members = sorted(((live[i].id, live[i].copy()) for i in idx), key=lambda m: m[0])
        groups.append(OcclusionGroup(members[0][0], members, frame))
    return states, groups


def _predicted_centers(group, params):
    return np.array([predict(snap, params).mean[:2] for _, snap in group.members])


def enumerate_hypotheses(group, states_k, params=FilterParams()):
    """All label permutations of the group's members at the current frame.

    A member with no active state in ``states_k`` is realised by its
    constant-velocity prediction from the group snapshot (a dummy).
    """
    by_id = {s.id: s for s in states_k if s.active}
    n = len(group.members)
    if n < 2:
        return []
    centers = []
    dummies = []
    for mid, snap in group.members:
        if mid in by_id:
            centers.append(np.array(by_id[mid].mean[:2], dtype=float))
            dummies.append(False)
        else:
            centers.append(predict(snap, params).mean[:2].copy())
            dummies.append(True)
    if all(dummies):
        return []
    return [TopologyHypothesis(perm, centers, tuple(dummies))
            for perm in itertools.permutations(range(n))]


def _gauss2(diff, R_inv, norm):
    return norm * math.exp(-0.5 * float(diff @ R_inv @ diff))


def hypothesis_energy(h, group, R, params=FilterParams()):
    """Negative log of the summed topology likelihood of ``h``.

    Every ordered member pair contributes ``N(t; m, R)`` where ``t`` is the
    difference of the realised centres under ``h`` and ``m`` the difference
    of the predicted centres.
    """
    pred = _predicted_centers(group, params)
    R = np.asarray(R, dtype=float)
    R_inv = np.linalg.inv(R)
    norm = 1.0 / (2.0 * math.pi * math.sqrt(np.linalg.det(R)))
    n = len(h.permutation)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            t = h.realizations[h.permutation[j]] - h.realizations[h.permutation[i]]
            m = pred[j] - pred[i]
            total += _gauss2(t - m, R_inv, norm)
    if total <= 0.0:
        return ENERGY_CEILING
    return min(-math.log(total), ENERGY_CEILING)


def best_hypothesis(hypotheses, group, R, params=FilterParams()):
    for h in hypotheses:
        h.energy = hypothesis_energy(h, group, R, params)
    # identity-closest first, then lexicographic: stable min over that order
    ordered = sorted(hypotheses, key=lambda h: (h.moved, h.permutation))
    return min(ordered, key=lambda h: h.energy)


def ogem(frame, groups_prev, states, params=FilterParams()):
    """Resolve every occlusion group recorded at the previous frame.

    Relabels member states according to the minimum-energy hypothesis and
    restores missing members at their predictions.  Returns
    ``(states, relabel, revived)`` where ``relabel`` maps each state's id on
    entry to its id on exit and ``revived`` lists ``(group, ids)`` for every
    group that restored members.  States are never removed.
    """
    relabel = {}
    revived_by_group = []
    for group in groups_prev:
        hyps = enumerate_hypotheses(group, states, params)
        if not hyps:
            continue
        best = best_hypothesis(hyps, group, params.R, params)
        by_id = {s.id: s for s in states if s.active}
        ids = group.ids
        current = []
        for j, (mid, snap) in enumerate(group.members):
            if best.dummies[j]:
                revived = predict(snap, params).copy(active=True, last_frame=frame)
                states.append(revived)
                current.append(revived)
            else:
                current.append(by_id[mid])
        restored = [current[j] for j in range(len(current)) if best.dummies[j]]
        step_map = {}
        for i, j in enumerate(best.permutation):
            comp = current[j]
            if comp.id != ids[i]:
                step_map[comp.id] = ids[i]
        for i, j in enumerate(best.permutation):
            current[j].id = ids[i]
        # relabel tracks each state's label at entry -> label now
        inverse = {v: k for k, v in relabel.items()}
        for old, new in step_map.items():
            relabel[inverse.get(old, old)] = new
        if restored:
            revived_by_group.append((group, [c.id for c in restored]))
    return states, relabel, revived_by_group
