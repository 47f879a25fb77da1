"""Suite evaluation: event precision/recall, GRA, TSA, selector and plan agreement.

Events are scored one-to-one: a predicted event can match a truth event of the
same kind and the same (subject, object) pair whose inclusive frame span
overlaps it with intersection-over-union at least ``iou_threshold``. Candidate
pairs are taken greedily by descending IoU. An empty prediction has
precision 1.0 by convention; an empty truth has recall 1.0.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .config import Thresholds, WindowConfig
from .errors import EmptyInput, LengthMismatch
from .handselect import fused_decision, prior_policy
from .interactions import interaction_timeline
from .plangen import emit_plan
from .scenegraph import graph_accuracy, graph_sequence
from .segmentation import segment, segmentation_accuracy

__all__ = [
    "span_iou",
    "match_events",
    "event_prf",
    "selector_agreement",
    "DemoRecord",
    "EvalReport",
    "evaluate_demo",
    "evaluate_suite",
]

FIELDS = ("gra", "tsa", "event_precision", "event_recall", "selector_agreement", "plan_match")


def span_iou(a0, a1, b0, b1) -> float:
    """IoU of the inclusive frame spans ``[a0, a1]`` and ``[b0, b1]``."""
    inter = min(a1, b1) - max(a0, b0) + 1
    if inter <= 0:
        return 0.0
    union = (a1 - a0 + 1) + (b1 - b0 + 1) - inter
    return inter / union


def match_events(predicted, truth, iou_threshold=0.5):
    """Greedy one-to-one matching; returns ``[(pred_index, truth_index, iou), ...]``."""
    cands = []
    for i, p in enumerate(predicted):
        for j, t in enumerate(truth):
            if p.kind != t.kind or p.pair != t.pair:
                continue
            iou = span_iou(p.start_frame, p.end_frame, t.start_frame, t.end_frame)
            if iou >= iou_threshold and iou > 0:
                cands.append((-iou, i, j))
    cands.sort()
    used_p, used_t, out = set(), set(), []
    for neg, i, j in cands:
        if i in used_p or j in used_t:
            continue
        used_p.add(i)
        used_t.add(j)
        out.append((i, j, -neg))
    return out


def event_prf(predicted, truth, iou_threshold=0.5):
    """``(precision, recall)`` of the predicted timeline against the truth timeline."""
    if predicted.frame_count != truth.frame_count:
        raise LengthMismatch(f"timelines cover {predicted.frame_count} and {truth.frame_count} frames")
    p, t = list(predicted.events), list(truth.events)
    m = len(match_events(p, t, iou_threshold))
    precision = m / len(p) if p else 1.0
    recall = m / len(t) if t else 1.0
    return precision, recall


def selector_agreement(labels, selector=None) -> float:
    """Fraction of ``(state, expert)`` labels reproduced by the selector (or the prior)."""
    if not labels:
        return 1.0
    hits = 0
    for s, expert in labels:
        if selector is None:
            a = prior_policy(s)
        else:
            model, kappa = selector
            a = fused_decision(model, s, kappa)[0]
        hits += a == expert
    return hits / len(labels)


@dataclass(frozen=True)
class DemoRecord:
    demo_id: str
    gra: float
    tsa: float
    event_precision: float
    event_recall: float
    selector_agreement: float
    plan_match: bool

    def to_dict(self):
        return asdict(self)


def _std(values):
    return float(np.std(values)) if values else math.nan


@dataclass(frozen=True)
class EvalReport:
    records: tuple

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(sorted(self.records, key=lambda r: r.demo_id)))

    def column(self, name):
        return [float(getattr(r, name)) for r in self.records]

    @property
    def aggregates(self):
        out = {}
        for f in FIELDS:
            col = self.column(f)
            out[f] = {"mean": math.fsum(col) / len(col) if col else math.nan, "std": _std(col)}
        return out

    def to_dict(self):
        return {"records": [r.to_dict() for r in self.records], "aggregates": self.aggregates}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=False) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("demo_id",) + FIELDS)
        for r in self.records:
            w.writerow([r.demo_id] + [repr(float(getattr(r, f))) if f != "plan_match" else str(r.plan_match).lower()
                                      for f in FIELDS])
        return buf.getvalue()


def evaluate_demo(demo_id, demo, gt, cfg: WindowConfig = WindowConfig(), th: Thresholds = Thresholds(),
                  selector=None, iou_threshold=0.5) -> DemoRecord:
    """Run detection, graphs, segmentation and planning on one demo and score it."""
    timeline = interaction_timeline(demo, cfg, th)
    precision, recall = event_prf(timeline, gt.timeline, iou_threshold)
    gra = graph_accuracy(graph_sequence(demo, timeline, cfg), gt.graph_sequence)
    segs = segment(timeline, demo, lead=cfg.phi)
    tsa = segmentation_accuracy(segs, gt.segments, demo.frame_count)
    plan = emit_plan(segs, demo, selector=selector, task_name=gt.plan.task_name)
    return DemoRecord(str(demo_id), float(gra), float(tsa), float(precision), float(recall),
                      float(selector_agreement(gt.selector_labels, selector)),
                      plan.signature() == gt.plan.signature())


def evaluate_suite(suite, cfg: WindowConfig = WindowConfig(), th: Thresholds = Thresholds(), selector=None,
                   iou_threshold=0.5) -> EvalReport:
    """Evaluate ``[(demo_id, Demonstration, GroundTruth), ...]``.

    ``selector`` is ``(SelectorModel, kappa)`` or ``None`` for the prior alone.
    """
    suite = list(suite)
    if not suite:
        raise EmptyInput("evaluation suite is empty")
    return EvalReport(tuple(evaluate_demo(i, d, g, cfg, th, selector, iou_threshold) for i, d, g in suite))
