"""CLEAR-MOT evaluation with IOU matching."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .assignment import solve_min_cost
from .geometry import iou

MT_COVERAGE = 0.8
ML_COVERAGE = 0.2


class UndefinedMetricError(ZeroDivisionError):
    """Raised when MOTA is requested for a sequence without ground truth."""


@dataclass
class MotReport:
    FP: int = 0
    FN: int = 0
    IDS: int = 0
    Frag: int = 0
    MT: int = 0
    ML: int = 0
    gt_total: int = 0
    gt_tracks: int = 0
    matches: int = 0
    iou_sum: float = 0.0

    @property
    def MOTA(self):
        if self.gt_total == 0:
            raise UndefinedMetricError("MOTA is undefined without ground-truth boxes")
        return 1.0 - (self.FP + self.FN + self.IDS) / self.gt_total

    @property
    def MOTP(self):
        return self.iou_sum / self.matches if self.matches else 0.0

    @property
    def MT_percent(self):
        return 100.0 * self.MT / self.gt_tracks if self.gt_tracks else 0.0

    @property
    def ML_percent(self):
        return 100.0 * self.ML / self.gt_tracks if self.gt_tracks else 0.0

    def __add__(self, other):
        return MotReport(**{f.name: getattr(self, f.name) + getattr(other, f.name)
                            for f in fields(self)})

    def as_dict(self):
        return {
            "MOTA": self.MOTA, "MOTP": self.MOTP,
            "MT": self.MT, "MT%": self.MT_percent,
            "ML": self.ML, "ML%": self.ML_percent,
            "FP": self.FP, "FN": self.FN, "IDS": self.IDS, "Frag": self.Frag,
            "GT": self.gt_total,
        }

    def key_values(self):
        d = self.as_dict()
        lines = [f"MOTA={d['MOTA']:.3f}", f"MOTP={d['MOTP']:.3f}",
                 f"MT={self.MT}", f"ML={self.ML}"]
        lines += [f"{k}={d[k]}" for k in ("FP", "FN", "IDS", "Frag", "GT")]
        return "\n".join(lines)

    def table(self):
        d = self.as_dict()
        header = ["MOTA", "MOTP", "MT", "ML", "FP", "FN", "IDS", "Frag", "GT"]
        cells = [f"{100 * d['MOTA']:.1f}%", f"{100 * d['MOTP']:.1f}%",
                 f"{self.MT} ({d['MT%']:.1f}%)", f"{self.ML} ({d['ML%']:.1f}%)",
                 str(self.FP), str(self.FN), str(self.IDS), str(self.Frag), str(self.gt_total)]
        widths = [max(len(h), len(c)) for h, c in zip(header, cells)]
        return "\n".join([
            "  ".join(h.rjust(w) for h, w in zip(header, widths)),
            "  ".join(c.rjust(w) for c, w in zip(cells, widths)),
        ])


@dataclass
class _GtHistory:
    present: int = 0
    matched: int = 0
    last_hyp: object = None
    was_tracked: bool = False     # matched in the last frame where the id was present
    ever_tracked: bool = False


def evaluate(gt, results, iou_threshold=0.5) -> MotReport:
    """CLEAR-MOT metrics of ``results`` against ``gt``.

    ``gt`` maps frame -> entries with ``id``, ``box`` and ``considered``;
    ``results`` maps frame -> ``(id, box)`` pairs.  Ground-truth rows that are
    not considered are ignored entirely.
    """
    if not 0 < iou_threshold < 1:
        raise ValueError("iou_threshold must lie in (0, 1)")
    report = MotReport()
    history = {}
    active = {}                    # gt id -> hyp id matched in the previous frame
    frames = sorted(set(gt) | set(results))
    for frame in frames:
        g_items = [(e.id, e.box) for e in gt.get(frame, ()) if e.considered]
        h_items = list(results.get(frame, ()))
        report.gt_total += len(g_items)
        g_index = {gid: k for k, (gid, _) in enumerate(g_items)}
        h_index = {hid: k for k, (hid, _) in enumerate(h_items)}
        overlap = np.zeros((len(g_items), len(h_items)))
        for a, (_, gb) in enumerate(g_items):
            for b, (_, hb) in enumerate(h_items):
                overlap[a, b] = iou(gb, hb)

        matches = {}
        # keep last frame's correspondences while they still overlap enough
        for gid, hid in active.items():
            if gid in g_index and hid in h_index:
                a, b = g_index[gid], h_index[hid]
                if overlap[a, b] >= iou_threshold:
                    matches[a] = b
        free_g = [a for a in range(len(g_items)) if a not in matches]
        used_h = set(matches.values())
        free_h = [b for b in range(len(h_items)) if b not in used_h]
        if free_g and free_h:
            sub = overlap[np.ix_(free_g, free_h)]
            sentinel = 2.0
            cost = np.where(sub >= iou_threshold, 1.0 - sub, sentinel)
            for r, c in solve_min_cost(cost, sentinel).pairs:
                matches[free_g[r]] = free_h[c]

        new_active = {}
        for a, (gid, _) in enumerate(g_items):
            hist = history.setdefault(gid, _GtHistory())
            hist.present += 1
            if a in matches:
                b = matches[a]
                hid = h_items[b][0]
                hist.matched += 1
                report.matches += 1
                report.iou_sum += overlap[a, b]
                if hist.last_hyp is not None and hist.last_hyp != hid:
                    report.IDS += 1
                if hist.ever_tracked and not hist.was_tracked:
                    report.Frag += 1
                hist.last_hyp = hid
                hist.was_tracked = hist.ever_tracked = True
                new_active[gid] = hid
            else:
                report.FN += 1
                hist.was_tracked = False
        report.FP += len(h_items) - len(matches)
        active = new_active

    report.gt_tracks = len(history)
    for hist in history.values():
        coverage = hist.matched / hist.present
        if coverage >= MT_COVERAGE:
            report.MT += 1
        elif coverage <= ML_COVERAGE:
            report.ML += 1
    if report.gt_total == 0:
        raise UndefinedMetricError("ground truth holds no considered boxes")
    return report
