"""Hand-object and object-object interaction detection.

Both detectors walk the window-center grid. At every center a hand looks at
the objects whose mean distance (over the window) is below ``r_th_ho``,
nearest first, and stops at the first one that qualifies:

* ``CoupledMotion`` when the summed x/y/z mutual information exceeds
  ``alpha_mi``;
* ``Docked`` when the pair already coupled during the current contact
  episode and either the mutual information is falling while below
  ``gamma_mi`` or the pair was already docked at the previous center.

A contact episode is a maximal run of consecutive centers on which the
pair's proximity gate holds, so a coupling never licenses a much later touch.

Object-object relations are only searched while the hand has an active
event; the manipulated object is the subject. Within ``r_th_oo`` of a
background object the relation is ``EOO`` when the hand is docked, when the
pair was ``EOO`` at the previous center, or when the windowed entropy of
their distance is falling; otherwise it is ``TOO``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import Thresholds, WindowConfig
from .errors import SignalTooShort, UnknownEntity, ValidationError, WindowOutOfBounds
from .infotheory import ScalarSeries, entropy_series, mi_3d, series_derivative
from .trajectory import Demonstration

COUPLED = "CoupledMotion"
DOCKED = "Docked"
EOO = "EOO"
TOO = "TOO"
HO_KINDS = (COUPLED, DOCKED)
OO_KINDS = (EOO, TOO)
KINDS = HO_KINDS + OO_KINDS
_KIND_ORDER = {k: i for i, k in enumerate(KINDS)}


@dataclass(frozen=True)
class InteractionEvent:
    kind: str
    subject_id: str
    object_id: str
    start_frame: int
    end_frame: int
    mi_trace: ScalarSeries | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown interaction kind {self.kind!r}")
        if self.start_frame > self.end_frame:
            raise ValidationError("start_frame must not exceed end_frame")

    @property
    def is_ho(self):
        return self.kind in HO_KINDS

    @property
    def pair(self):
        return (self.subject_id, self.object_id)

    def active_at(self, frame):
        return self.start_frame <= frame <= self.end_frame

    def to_dict(self):
        return {
            "kind": self.kind,
            "subject": self.subject_id,
            "object": self.object_id,
            "start_frame": int(self.start_frame),
            "end_frame": int(self.end_frame),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["kind"], d["subject"], d["object"], int(d["start_frame"]), int(d["end_frame"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed event record: {exc}") from None


def event_sort_key(e):
    return (e.start_frame, e.end_frame, _KIND_ORDER[e.kind], e.subject_id, e.object_id)


@dataclass(frozen=True)
class InteractionTimeline:
    events: tuple
    frame_count: int

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(sorted(self.events, key=event_sort_key)))

    def ho_events(self):
        return [e for e in self.events if e.is_ho]

    def oo_events(self):
        return [e for e in self.events if not e.is_ho]

    def active(self, frame):
        return [e for e in self.events if e.active_at(frame)]

    def to_list(self):
        return [e.to_dict() for e in self.events]

    def to_json(self):
        return json.dumps(self.to_list(), indent=1) + "\n"

    @classmethod
    def from_list(cls, items, frame_count):
        return cls(tuple(InteractionEvent.from_dict(d) for d in items), int(frame_count))


def _windowed_mean(values, centers, half):
    view = sliding_window_view(values, 2 * half)
    return view[np.asarray(centers, dtype=np.int64) - half].mean(axis=1)


def _distances(pa, pb):
    return np.linalg.norm(np.asarray(pa) - np.asarray(pb), axis=1)


def mean_distance(a, b, center, phi) -> float:
    """Mean Euclidean distance between two position traces over ``[center - phi/2, center + phi/2)``."""
    pa = np.asarray(getattr(a, "positions", a), dtype=float)
    pb = np.asarray(getattr(b, "positions", b), dtype=float)
    half = phi // 2
    lo, hi = center - half, center + half
    if lo < 0 or hi > min(len(pa), len(pb)):
        raise WindowOutOfBounds(f"window [{lo}, {hi}) outside track bounds")
    return float(_distances(pa[lo:hi, :3], pb[lo:hi, :3]).mean())


def _runs(mask):
    """(start, stop) index pairs of the True runs in a boolean vector."""
    m = np.concatenate(([False], np.asarray(mask, dtype=bool), [False]))
    d = np.flatnonzero(m[1:] != m[:-1])
    return list(zip(d[0::2].tolist(), d[1::2].tolist()))


def _gated_series(gate, centers, compute, cfg, frame_rate):
    """Evaluate ``compute(centers)`` and its time derivative on gated runs.

    Each run is padded by one center on either side so the derivative at the
    run boundary is a central difference.
    """
    W = centers.size
    val = np.full(W, np.nan)
    der = np.full(W, np.nan)
    for a, b in _runs(gate):
        lo, hi = max(a - 1, 0), min(b + 1, W)
        series = compute(centers[lo:hi])
        val[a:b] = series.values[a - lo:b - lo]
        if len(series) >= 3:
            d = series_derivative(series, frame_rate, cfg.smoothing).values
        elif len(series) == 2:
            d = np.repeat(np.diff(series.values) / (np.diff(series.centers) / frame_rate), 2)
        else:
            d = np.zeros(1)
        der[a:b] = d[a - lo:b - lo]
    return val, der


def _states_to_events(kinds, partners, centers, subject, names, min_len, traces=None):
    events = []
    W = len(kinds)
    i = 0
    while i < W:
        k = kinds[i]
        if k is None:
            i += 1
            continue
        j = i
        while j + 1 < W and kinds[j + 1] == k and partners[j + 1] == partners[i]:
            j += 1
        if j - i + 1 >= min_len:
            trace = None
            if traces is not None:
                trace = ScalarSeries(centers[i:j + 1], traces[partners[i], i:j + 1])
            events.append(InteractionEvent(k, subject, names[partners[i]],
                                           int(centers[i]), int(centers[j]), trace))
        i = j + 1
    return events


def _check_demo(demo, cfg):
    if demo.frame_count < cfg.phi:
        raise SignalTooShort(f"demonstration has {demo.frame_count} frames, window needs {cfg.phi}")


def detect_ho(demo: Demonstration, hand_id, cfg: WindowConfig = WindowConfig(),
              th: Thresholds = Thresholds()):
    """Coupled-Motion / Docked events of one hand, ordered by start frame."""
    hand = demo.track(hand_id)
    if not hand.is_hand:
        raise UnknownEntity(f"{hand_id!r} is not a hand")
    _check_demo(demo, cfg)
    objs = sorted(demo.objects, key=lambda t: t.id)
    if not objs:
        return []
    centers = cfg.centers(demo.frame_count)
    W = centers.size
    hp = hand.positions
    rbar = np.stack([_windowed_mean(_distances(hp, o.positions), centers, cfg.half) for o in objs])
    gate = rbar < th.r_th_ho
    mi = np.full(rbar.shape, np.nan)
    dmi = np.full(rbar.shape, np.nan)
    for j, o in enumerate(objs):
        if gate[j].any():
            op = o.positions
            mi[j], dmi[j] = _gated_series(gate[j], centers, lambda c, op=op: mi_3d(hp, op, cfg, c),
                                          cfg, demo.frame_rate)

    kinds = [None] * W
    partners = [None] * W
    coupled_seen = np.zeros(len(objs), dtype=bool)
    any_gate = gate.any(axis=0)
    prev_kind, prev_obj = None, None
    for i in range(W):
        coupled_seen &= gate[:, i]
        if not any_gate[i]:
            prev_kind = prev_obj = None
            continue
        cand = np.flatnonzero(gate[:, i])
        # stable sort on distance; objs are id-sorted so ties break lexicographically
        cand = cand[np.argsort(rbar[cand, i], kind="stable")]
        det = None
        for j in cand:
            w = mi[j, i]
            if w > th.alpha_mi:
                det = (COUPLED, j)
                break
            if coupled_seen[j]:
                falling = dmi[j, i] < 0 and w < th.gamma_mi
                if falling or (prev_kind == DOCKED and prev_obj == j):
                    det = (DOCKED, j)
                    break
        if det is None:
            prev_kind = prev_obj = None
            continue
        if det[0] == COUPLED:
            coupled_seen[det[1]] = True
        kinds[i], partners[i] = det
        prev_kind, prev_obj = det
    return _states_to_events(kinds, partners, centers, hand.id, [o.id for o in objs],
                             th.min_event_centers, traces=mi)


def detect_oo(demo: Demonstration, ho_events, cfg: WindowConfig = WindowConfig(),
              th: Thresholds = Thresholds()):
    """EOO / TOO events of the objects manipulated in ``ho_events``."""
    _check_demo(demo, cfg)
    ho_events = [e for e in ho_events if e.is_ho]
    if not ho_events:
        return []
    objs = sorted(demo.objects, key=lambda t: t.id)
    names = [o.id for o in objs]
    index = {n: i for i, n in enumerate(names)}
    centers = cfg.centers(demo.frame_count)
    W = centers.size
    out = []
    by_hand = {}
    for e in ho_events:
        if e.object_id not in index:
            raise UnknownEntity(f"event object {e.object_id!r} is not an object of the demonstration")
        by_hand.setdefault(e.subject_id, []).append(e)

    for hand_id in sorted(by_hand):
        demo.track(hand_id)
        ho_kind = [None] * W
        ho_obj = np.full(W, -1)
        for e in by_hand[hand_id]:
            a = np.searchsorted(centers, e.start_frame)
            b = np.searchsorted(centers, e.end_frame, side="right")
            for i in range(a, b):
                ho_kind[i] = e.kind
            ho_obj[a:b] = index[e.object_id]

        # mean distance and distance-entropy slope for every (manipulated, background) pair
        pair_data = {}
        for m in np.unique(ho_obj[ho_obj >= 0]).tolist():
            active = ho_obj == m
            mp = objs[m].positions
            for bidx, bo in enumerate(objs):
                if bidx == m:
                    continue
                dist = _distances(mp, bo.positions)
                rb = np.full(W, np.inf)
                rb[active] = _windowed_mean(dist, centers[active], cfg.half)
                g = rb < th.r_th_oo
                if not g.any():
                    continue
                _, dh = _gated_series(g, centers, lambda c, d=dist: entropy_series(d, cfg, c),
                                      cfg, demo.frame_rate)
                pair_data[(m, bidx)] = (rb, g, dh)

        kinds = [None] * W
        partners = [None] * W
        prev = None
        for i in range(W):
            m = ho_obj[i]
            if m < 0:
                prev = None
                continue
            if i > 0 and ho_obj[i - 1] != m:
                prev = None
            gated = [(pd[0][i], b) for (mm, b), pd in pair_data.items() if mm == m and pd[1][i]]
            det = None
            if prev is not None and prev[0] == EOO and any(b == prev[1] for _, b in gated):
                det = prev
            elif gated:
                gated.sort(key=lambda t: (t[0], t[1]))
                b = gated[0][1]
                if ho_kind[i] == DOCKED:
                    det = (EOO, b)
                elif pair_data[(m, b)][2][i] < 0:
                    det = (EOO, b)
                else:
                    det = (TOO, b)
            if det is not None:
                kinds[i], partners[i] = det
            prev = det
        # OO subjects are the manipulated objects; emit one run per contiguous (kind, partner, subject)
        subj = [names[m] if m >= 0 else None for m in ho_obj.tolist()]
        i = 0
        while i < W:
            if kinds[i] is None:
                i += 1
                continue
            j = i
            while (j + 1 < W and kinds[j + 1] == kinds[i] and partners[j + 1] == partners[i]
                   and subj[j + 1] == subj[i]):
                j += 1
            if j - i + 1 >= th.min_event_centers:
                out.append(InteractionEvent(kinds[i], subj[i], names[partners[i]],
                                            int(centers[i]), int(centers[j])))
            i = j + 1
    return sorted(out, key=event_sort_key)


def interaction_timeline(demo: Demonstration, cfg: WindowConfig = WindowConfig(),
                         th: Thresholds = Thresholds()) -> InteractionTimeline:
    """Hand-object events for every hand, then object-object events where a hand is engaged."""
    ho = []
    for hand in sorted(demo.hands, key=lambda t: t.id):
        ho.extend(detect_ho(demo, hand.id, cfg, th))
    oo = detect_oo(demo, ho, cfg, th) if ho else []
    return InteractionTimeline(tuple(ho + oo), demo.frame_count)
