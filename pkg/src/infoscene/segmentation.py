"""Task-primitive segmentation of an interaction timeline.

Each hand gets a frame-exact tiling of ``[0, frame_count)`` with six labels:

* ``Transport`` - CoupledMotion frames with no concurrent EOO on the carried object;
* ``Place``     - CoupledMotion frames with a concurrent EOO (``target_id`` = partner);
* ``Hold``      - Docked frames;
* ``Reach``     - up to ``lead`` frames before a coupling onset;
* ``Retreat``   - up to ``lead`` frames after the hand's events end;
* ``Idle``      - everything else.

TOO events never influence the result.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import WindowConfig
from .errors import CoverageGap, ValidationError
from .interactions import COUPLED, DOCKED, EOO

IDLE = "Idle"
REACH = "Reach"
TRANSPORT = "Transport"
PLACE = "Place"
HOLD = "Hold"
RETREAT = "Retreat"
PRIMITIVES = (IDLE, REACH, TRANSPORT, PLACE, HOLD, RETREAT)
_CODE = {p: i for i, p in enumerate(PRIMITIVES)}


@dataclass(frozen=True)
class Segment:
    primitive: str
    hand_id: str | None
    object_id: str | None
    target_id: str | None
    start_frame: int
    end_frame: int  # inclusive

    def __post_init__(self):
        if self.primitive not in PRIMITIVES:
            raise ValidationError(f"unknown primitive {self.primitive!r}")
        if self.start_frame > self.end_frame:
            raise ValidationError("start_frame must not exceed end_frame")
        if self.primitive == PLACE and self.target_id is None:
            raise ValidationError("Place segments need a target_id")

    @property
    def length(self):
        return self.end_frame - self.start_frame + 1

    def to_dict(self):
        d = {"primitive": self.primitive, "hand": self.hand_id}
        if self.object_id is not None:
            d["object"] = self.object_id
        if self.target_id is not None:
            d["target"] = self.target_id
        d["start_frame"] = int(self.start_frame)
        d["end_frame"] = int(self.end_frame)
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["primitive"], d.get("hand"), d.get("object"), d.get("target"),
                       int(d["start_frame"]), int(d["end_frame"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed segment record: {exc}") from None


def segments_to_json(segments):
    return json.dumps([s.to_dict() for s in segments], indent=1) + "\n"


def segments_from_list(items):
    return [Segment.from_dict(d) for d in items]


def _hand_labels(hand_id, events, oo_by_subject, n, lead):
    """Per-frame (primitive code, object, target) arrays for one hand."""
    prim = np.full(n, _CODE[IDLE], dtype=np.int8)
    obj = [None] * n
    tgt = [None] * n
    busy = np.zeros(n, dtype=bool)
    for e in events:
        lo, hi = max(e.start_frame, 0), min(e.end_frame, n - 1)
        if lo > hi:
            continue
        busy[lo:hi + 1] = True
        if e.kind == DOCKED:
            prim[lo:hi + 1] = _CODE[HOLD]
            obj[lo:hi + 1] = [e.object_id] * (hi - lo + 1)
            continue
        prim[lo:hi + 1] = _CODE[TRANSPORT]
        obj[lo:hi + 1] = [e.object_id] * (hi - lo + 1)
        for oo in oo_by_subject.get(e.object_id, ()):
            a, b = max(lo, oo.start_frame), min(hi, oo.end_frame)
            if a <= b:
                prim[a:b + 1] = _CODE[PLACE]
                tgt[a:b + 1] = [oo.object_id] * (b - a + 1)

    # retreat first so that reach wins where both fit into one gap
    for a, b in _true_runs(busy):
        after = range(b + 1, min(b + 1 + lead, n))
        last = obj[b]
        for f in after:
            if busy[f]:
                break
            prim[f] = _CODE[RETREAT]
            obj[f] = last
    for a, b in _true_runs(busy):
        if prim[a] != _CODE[TRANSPORT] and prim[a] != _CODE[PLACE]:
            continue
        target = obj[a]
        for f in range(a - 1, max(a - 1 - lead, -1), -1):
            if busy[f]:
                break
            prim[f] = _CODE[REACH]
            obj[f] = target
            tgt[f] = None
    return prim, obj, tgt


def _true_runs(mask):
    m = np.concatenate(([False], mask, [False]))
    d = np.flatnonzero(m[1:] != m[:-1])
    return [(int(a), int(b) - 1) for a, b in zip(d[0::2], d[1::2])]


def _to_segments(hand_id, prim, obj, tgt):
    out = []
    n = len(prim)
    start = 0
    for f in range(1, n + 1):
        if f == n or prim[f] != prim[start] or obj[f] != obj[start] or tgt[f] != tgt[start]:
            p = PRIMITIVES[prim[start]]
            out.append(Segment(p, hand_id, obj[start] if p != IDLE else None,
                               tgt[start] if p == PLACE else None, start, f - 1))
            start = f
    return out


def segment(timeline, demo, lead=None):
    """Ordered primitive segments of every hand of ``demo``.

    ``lead`` bounds Reach and Retreat segments (frames); it defaults to the
    default window length.
    """
    n = demo.frame_count
    lead = WindowConfig().phi if lead is None else int(lead)
    oo_by_subject = {}
    for e in timeline.events:
        if e.kind == EOO:
            oo_by_subject.setdefault(e.subject_id, []).append(e)
    out = []
    for hand in sorted(demo.hands, key=lambda t: t.id):
        events = [e for e in timeline.events if e.subject_id == hand.id and e.kind in (COUPLED, DOCKED)]
        prim, obj, tgt = _hand_labels(hand.id, events, oo_by_subject, n, lead)
        out.extend(_to_segments(hand.id, prim, obj, tgt))
    return sorted(out, key=lambda s: (s.start_frame, s.hand_id or ""))


def _label_arrays(segments, frame_count, which):
    by_hand = {}
    for s in segments:
        by_hand.setdefault(s.hand_id, []).append(s)
    out = {}
    for hand, segs in by_hand.items():
        lab = np.full(frame_count, -1, dtype=np.int8)
        for s in segs:
            if s.start_frame < 0 or s.end_frame >= frame_count or np.any(lab[s.start_frame:s.end_frame + 1] >= 0):
                raise CoverageGap(f"{which} segments of {hand!r} overlap or leave [0, {frame_count})")
            lab[s.start_frame:s.end_frame + 1] = _CODE[s.primitive]
        if np.any(lab < 0):
            raise CoverageGap(f"{which} segments of {hand!r} do not cover [0, {frame_count})")
        out[hand] = lab
    return out


def segmentation_accuracy(predicted, truth, frame_count) -> float:
    """Frame-wise primitive agreement, averaged over the hands of ``truth``."""
    p = _label_arrays(predicted, frame_count, "predicted")
    t = _label_arrays(truth, frame_count, "truth")
    if set(p) != set(t):
        raise CoverageGap(f"hands differ: predicted {sorted(map(str, p))}, truth {sorted(map(str, t))}")
    if not t:
        raise CoverageGap("no segments")
    return float(np.mean([np.mean(p[h] == t[h]) for h in sorted(t, key=str)]))
