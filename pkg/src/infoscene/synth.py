"""Seeded synthetic tabletop demonstrations with script-defined ground truth.

Coordinates: x across the table (left hand at negative x), y away from the
demonstrator, z up; the tabletop is ``z = 0``. Blocks are 0.03 m cubes whose
centres rest at ``z = 0.015``.

Every scripted action is rendered as piecewise minimum-jerk legs: the hand
reaches the object, dwells while grasping, carries it (lift, via points,
descent onto the placement), holds it in place, then lifts away and returns
to rest. While carried, the object position equals the hand position.
Positional jitter is i.i.d. per entity, axis and frame, drawn from a normal
distribution with standard deviation ``noise_sigma / 2`` and clipped to
``+-noise_sigma``.

Resting positions lie on the centres of the default 0.01 m histogram bins,
so with ``noise_sigma < 0.005`` a resting entity never changes bin.

Ground truth comes from the script alone, never from the detectors:

* CoupledMotion spans the frames in which the object moves;
* Docked spans the frames after the placement while the windowed mean
  hand-object distance of the noiseless tracks stays below the HO radius;
* while either holds, an object-object relation is active whenever the
  windowed mean distance of the noiseless tracks to another block is below
  the OO radius (nearest block wins); a run of such frames is EOO when it
  lasts into the placement and TOO otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._io import atomic_write_text
from .config import Thresholds, WindowConfig
from .errors import InvalidConfig, InvalidRate, UnsupportedLetter, ValidationError
from .handselect import LEFT, RIGHT, SelectorState, from_wire, prior_policy, selector_state, to_wire
from .interactions import COUPLED, DOCKED, EOO, TOO, InteractionEvent, InteractionTimeline
from .plangen import BehaviorTree, emit_plan, parse_plan, serialize_plan
from .scenegraph import SceneGraphSequence, graph_sequence
from .segmentation import Segment, segment, segments_from_list
from .trajectory import HAND_LEFT, HAND_RIGHT, OBJECT, Demonstration, EntityTrack

BLOCK = 0.03
TABLE_Z = BLOCK / 2
GRID = 0.01
LIFT = 0.12
LEFT_HAND = "hand_left"
RIGHT_HAND = "hand_right"
REST = {LEFT_HAND: (-0.355, 0.055, 0.155), RIGHT_HAND: (0.355, 0.055, 0.155)}
DEFAULT_WORKSPACE = ((-0.5, 0.5), (0.0, 0.6), (0.0, 0.4))
LETTERS = {
    # 4-connected cell paths on a 0.04 m grid; the first cell holds the anchor block and every
    # later cell touches only its predecessor, so each placement has a single partner
    "L": ((0, 4), (0, 3), (0, 2), (0, 1), (0, 0), (1, 0)),
    "V": ((-2, 2), (-2, 1), (-1, 1), (-1, 0), (0, 0), (1, 0)),
    "R": ((0, 0), (0, 1), (0, 2), (1, 2), (2, 2), (2, 1)),
    "M": ((-2, 0), (-2, 1), (-2, 2), (-1, 2), (0, 2), (0, 1)),
}


def snap(v):
    """Nearest histogram-bin centre (``k * 0.01 + 0.005``) of each coordinate."""
    v = np.asarray(v, dtype=float)
    return np.round((v - GRID / 2) / GRID) * GRID + GRID / 2


def table_point(x, y):
    return np.array([*snap([x, y]), TABLE_Z])


@dataclass(frozen=True)
class ScriptedAction:
    """One pick-and-place episode.

    ``waypoints`` is the carry path after lift-off; its last entry is the
    placement position. With ``lift > 0`` the object is first raised by
    ``lift`` and lowered onto the placement from the same height. ``start``
    is the frame at which the reach begins.
    """

    hand: str
    object: str
    waypoints: tuple
    dwell: int = 24
    start: int = 0
    grasp: int = 6
    lift: float = LIFT
    carry_speed: float = 0.3
    reach_frames: int = 12
    settle: float = 0.02
    settle_frames: int = 15
    source: tuple | None = None
    label: bool = True
    leg_frames: tuple = ()

    def __post_init__(self):
        if not self.waypoints:
            raise InvalidConfig("a scripted action needs at least one waypoint")
        if self.dwell < 0 or self.grasp < 0 or self.start < 0:
            raise InvalidConfig("dwell, grasp and start must be non-negative")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    frame_rate: float = 30.0
    n_objects: int = 2
    workspace: tuple = DEFAULT_WORKSPACE
    noise_sigma: float = 0.001
    script: tuple = ()
    profile: str = "min_jerk"

    def __post_init__(self):
        if not (isinstance(self.frame_rate, (int, float)) and math.isfinite(self.frame_rate) and self.frame_rate > 0):
            raise InvalidConfig("frame_rate must be positive")
        if not (isinstance(self.noise_sigma, (int, float)) and self.noise_sigma >= 0):
            raise InvalidConfig("noise_sigma must be >= 0")
        if isinstance(self.n_objects, bool) or not isinstance(self.n_objects, int) or self.n_objects < 1:
            raise InvalidConfig("n_objects must be a positive integer")
        if self.profile not in ("min_jerk", "linear"):
            raise InvalidConfig("profile must be 'min_jerk' or 'linear'")
        ws = np.asarray(self.workspace, dtype=float)
        if ws.shape != (3, 2) or np.any(ws[:, 0] >= ws[:, 1]):
            raise InvalidConfig("workspace must be three (low, high) pairs")
        for a in self.script:
            for w in a.waypoints:
                if not self.contains(w[:3]):
                    raise InvalidConfig(f"waypoint {tuple(w)} lies outside the workspace")

    def contains(self, p):
        ws = np.asarray(self.workspace, dtype=float)
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= ws[:, 0]) and np.all(p <= ws[:, 1]))


@dataclass
class GroundTruth:
    timeline: InteractionTimeline
    segments: list
    graph_sequence: SceneGraphSequence
    plan: BehaviorTree
    selector_labels: list = field(default_factory=list)

    def to_dict(self):
        return {
            "frame_count": self.timeline.frame_count,
            "timeline": self.timeline.to_list(),
            "segments": [s.to_dict() for s in self.segments],
            "plan": json.loads(serialize_plan(self.plan)),
            "selector_labels": [{"state": s.as_array().tolist(), "expert": to_wire(a)}
                                for s, a in self.selector_labels],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1) + "\n"


def save_ground_truth(gt: GroundTruth, path):
    atomic_write_text(path, gt.to_json())


def load_ground_truth(path, demo, cfg: WindowConfig = WindowConfig()) -> GroundTruth:
    """Read a sidecar; the keyframe graphs are rebuilt from the stored timeline."""
    from pathlib import Path

    from .errors import MissingFile

    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such ground-truth file: {path}")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
        tl = InteractionTimeline.from_list(d["timeline"], d["frame_count"])
        segs = segments_from_list(d["segments"])
        plan = parse_plan(json.dumps(d["plan"]))
        labels = [(SelectorState(*r["state"]), from_wire(r["expert"])) for r in d["selector_labels"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed ground truth ({exc})") from None
    return GroundTruth(tl, segs, graph_sequence(demo, tl, cfg), plan, labels)


# ---------------------------------------------------------------------------
# rendering


def _profile(n, kind):
    tau = np.arange(1, n + 1) / n
    if kind == "linear":
        return tau
    return tau ** 3 * (10 - 15 * tau + 6 * tau ** 2)


class _Path:
    """Keyframed position track: holds between legs, interpolated legs."""

    def __init__(self, start):
        self.start = np.asarray(start, dtype=float)
        self.legs = []  # (f0, f1, p0, p1): frames f0+1..f1 interpolate p0 -> p1

    def position_at_end(self):
        return self.legs[-1][3] if self.legs else self.start

    def end_frame(self):
        return self.legs[-1][1] if self.legs else 0

    def move(self, f0, p1, frames, center=None):
        """Interpolate to ``p1`` over ``frames`` frames starting after ``f0``.

        With ``center`` (an x, y pair) the leg sweeps a horizontal arc around
        it, interpolating angle and radius; z is interpolated directly.
        """
        p0 = self.position_at_end()
        if f0 < self.end_frame():
            raise InvalidConfig("overlapping motions of one entity")
        c = None if center is None else np.asarray(center, dtype=float)
        self.legs.append((f0, f0 + frames, p0, np.asarray(p1, dtype=float), c))
        return f0 + frames

    def render(self, n, kind):
        out = np.empty((n, 3))
        out[:] = self.start
        for f0, f1, p0, p1, c in self.legs:
            if f0 >= n:
                break
            s = _profile(f1 - f0, kind)[:, None]
            if c is None:
                seg = p0 + (p1 - p0) * s
            else:
                v0, v1 = p0[:2] - c, p1[:2] - c
                a0, a1 = np.arctan2(v0[1], v0[0]), np.arctan2(v1[1], v1[0])
                da = (a1 - a0 + np.pi) % (2 * np.pi) - np.pi
                r0, r1 = np.hypot(*v0), np.hypot(*v1)
                ang = a0 + da * s[:, 0]
                rad = r0 + (r1 - r0) * s[:, 0]
                seg = np.column_stack([c[0] + rad * np.cos(ang), c[1] + rad * np.sin(ang),
                                       p0[2] + (p1[2] - p0[2]) * s[:, 0]])
            hi = min(f1, n - 1)
            out[f0 + 1:hi + 1] = seg[:hi - f0]
            out[hi + 1:] = p1
        return out


def _frames(dist, speed, fr, lo):
    return max(lo, int(round(fr * dist / speed)))


@dataclass
class _Episode:
    action: ScriptedAction
    hand: str
    obj: str
    reach_start: int
    lift_start: int  # last frame before the object moves
    place: int  # frame at which the object comes to rest
    retreat_end: int
    final: np.ndarray
    source: np.ndarray


def _compile(script, objects, fr):
    """Turn scripted actions into per-entity paths and episode records."""
    paths = {h: _Path(REST[h]) for h in (LEFT_HAND, RIGHT_HAND)}
    paths.update({o: _Path(p) for o, p in objects.items()})
    episodes = []
    for a in script:
        hp, op = paths[a.hand], paths[a.object]
        t = reach_start = max(a.start, hp.end_frame(), op.end_frame())
        obj_pos = op.position_at_end()
        src = obj_pos if a.source is None else np.asarray(a.source, dtype=float)
        t = hp.move(t, obj_pos, a.reach_frames)
        lift_start = t + a.grasp
        route = [np.asarray(w[:3], dtype=float) for w in a.waypoints]
        arcs = {k: tuple(w[3:5]) for k, w in enumerate(a.waypoints) if len(w) >= 5}
        final = route[-1]
        shift = 1 if a.lift > 0 else 0
        fixed = {k + shift: f for k, f in enumerate(a.leg_frames) if f}
        arcs = {k + shift: c for k, c in arcs.items()}
        slow = set()
        if a.lift > 0:
            up = np.array([0.0, 0.0, a.lift])
            route = [obj_pos + up] + route[:-1] + [final + up]
            if a.settle > 0:
                # a short slow settling leg ends the descent
                route.append(final + np.array([0.0, 0.0, a.settle]))
                slow.add(len(route))
            route.append(final)
        t = lift_start
        prev = obj_pos
        for k, w in enumerate(route):
            if k in slow:
                n = a.settle_frames
            elif k in fixed:
                n = int(fixed[k])
            else:
                n = _frames(np.linalg.norm(w - prev), a.carry_speed, fr, 15)
            op.move(t, w, n, arcs.get(k))
            t = hp.move(t, w, n, arcs.get(k))
            prev = w
        place = t
        t = hp.move(place + a.dwell, final + np.array([0.0, 0.0, LIFT]), 15)
        rest = np.asarray(REST[a.hand])
        t = hp.move(t, rest, _frames(np.linalg.norm(rest - hp.position_at_end()), a.carry_speed * 1.5, fr, 15))
        episodes.append(_Episode(a, a.hand, a.object, reach_start, lift_start, place, t, final, src))
    return paths, episodes


def _windowed_mean_all(d, half):
    """Mean of ``d`` over ``[t - half, t + half)`` for every frame, truncated at the ends."""
    c = np.concatenate(([0.0], np.cumsum(d)))
    n = d.size
    t = np.arange(n)
    lo = np.clip(t - half, 0, n)
    hi = np.clip(t + half, 0, n)
    return (c[hi] - c[lo]) / np.maximum(hi - lo, 1)


def _runs(mask):
    m = np.concatenate(([False], np.asarray(mask, dtype=bool), [False]))
    d = np.flatnonzero(m[1:] != m[:-1])
    return [(int(a), int(b) - 1) for a, b in zip(d[0::2], d[1::2])]


def _truth_events(clean, episodes, objects, n, window, th):
    half = window.half
    events = []
    names = sorted(objects)
    for ep in episodes:
        hand, obj = clean[ep.hand], clean[ep.obj]
        # the scripted attachment starts when the hand closes on the object
        cs, ce = ep.lift_start - ep.action.grasp + 1, ep.place
        # contact after the placement lasts while the windowed distance stays under the HO radius
        rbar = _windowed_mean_all(np.linalg.norm(hand - obj, axis=1), half)
        de = ce
        while de + 1 < n and rbar[de + 1] < th.r_th_ho and de + 1 <= ep.retreat_end:
            de += 1
        if ce - cs + 1 >= 2:
            events.append(InteractionEvent(COUPLED, ep.hand, ep.obj, cs, ce))
        if de - ce >= 2:
            events.append(InteractionEvent(DOCKED, ep.hand, ep.obj, ce + 1, de))
        # object-object relations while the hand is engaged; a block picked
        # off a neighbour separates from it right at the start of the carry
        others = [o for o in names if o != ep.obj]
        if not others:
            continue
        lo, hi = cs, de
        span = np.arange(lo, hi + 1)
        dist = np.stack([_windowed_mean_all(np.linalg.norm(obj - clean[o], axis=1), half)[span]
                         for o in others])
        gated = dist < th.r_th_oo
        masked = np.where(gated, dist, np.inf)
        best = np.argmin(masked, axis=0)  # ties resolve to the smaller id
        partner = np.where(gated.any(axis=0), best, -1)
        k = 0
        while k < span.size:
            if partner[k] < 0:
                k += 1
                continue
            j = k
            while j + 1 < span.size and partner[j + 1] == partner[k]:
                j += 1
            a, b = int(span[k]), int(span[j])
            kind = EOO if b >= ce else TOO
            if b - a + 1 >= 2:
                events.append(InteractionEvent(kind, ep.obj, others[partner[k]], a, b))
            k = j + 1
    return events


def _jitter(rng, shape, sigma):
    if sigma == 0:
        return np.zeros(shape)
    return np.clip(rng.normal(0.0, sigma / 2, shape), -sigma, sigma)


def render(cfg: ScenarioConfig, objects: dict, script, n_frames=None, window=WindowConfig(),
           th=Thresholds(), task_name="demo", tail=40):
    """Render ``script`` over the initial ``objects`` layout.

    Returns ``(Demonstration, GroundTruth, episodes)``; the number of frames
    defaults to the end of the last episode plus ``tail``.
    """
    fr = float(cfg.frame_rate)
    paths, episodes = _compile(script, {k: np.asarray(v, dtype=float) for k, v in objects.items()}, fr)
    end = max((p.end_frame() for p in paths.values()), default=0) + tail
    n = end if n_frames is None else int(n_frames)
    if n < end - tail + 1:
        raise InvalidConfig(f"script needs {end - tail + 1} frames, only {n} requested")
    n = max(n, window.phi)
    clean = {k: p.render(n, cfg.profile) for k, p in paths.items()}
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
    order = [LEFT_HAND, RIGHT_HAND] + sorted(objects)
    classes = {LEFT_HAND: HAND_LEFT, RIGHT_HAND: HAND_RIGHT}
    tracks = []
    for ident in order:
        pos = clean[ident] + _jitter(rng, (n, 3), cfg.noise_sigma)
        poses = np.concatenate([pos, np.zeros((n, 3))], axis=1)
        tracks.append(EntityTrack(ident, classes.get(ident, OBJECT), poses))
    # a carried object follows the hand exactly, up to the independent jitter
    demo = Demonstration(tracks, fr)
    timeline = InteractionTimeline(tuple(_truth_events(clean, episodes, objects, n, window, th)), n)
    segs = segment(timeline, demo, lead=window.phi)
    plan = emit_plan(segs, demo, selector=None, task_name=task_name)
    labels = []
    for ep in episodes:
        if not ep.action.label:
            continue
        s = selector_state(clean[LEFT_HAND][ep.reach_start], clean[RIGHT_HAND][ep.reach_start],
                           ep.source, ep.final)
        labels.append((s, LEFT if ep.hand == LEFT_HAND else RIGHT))
    gt = GroundTruth(timeline, segs, graph_sequence(demo, timeline, window), plan, labels)
    return demo, gt, episodes


def hand_for(target, source=None):
    """Hand chosen by the contralateral prior with both hands at rest."""
    src = target if source is None else source
    s = selector_state(REST[LEFT_HAND], REST[RIGHT_HAND], src, target)
    return LEFT_HAND if prior_policy(s) == LEFT else RIGHT_HAND


# ---------------------------------------------------------------------------
# scenarios


def gen_canonical_move(cfg: ScenarioConfig = ScenarioConfig(), window=WindowConfig(), th=Thresholds(),
                       distance=0.3, duration=None):
    """One object slid across the table by one hand: rest, carry, rest.

    The carry is a single minimum-jerk leg along +x (no lift) lasting
    ``duration`` frames (default 2 * phi).
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    x0 = rng.uniform(-0.3, 0.3 - distance) if distance < 0.6 else -0.3
    start = table_point(x0, rng.uniform(0.25, 0.45))
    final = start + np.array([snap(distance + 0.005) - 0.005, 0.0, 0.0])
    hand = hand_for(final)
    steps = 2 * window.phi if duration is None else int(duration)
    speed = np.linalg.norm(final - start) * cfg.frame_rate / steps
    act = ScriptedAction(hand, "block_0", (tuple(final),), lift=0.0, carry_speed=speed, start=30,
                         dwell=int(rng.integers(20, 31)))
    objects = {"block_0": start}
    objects.update(_far_blocks(rng, cfg.n_objects - 1, [start, final]))
    demo, gt, _ = render(cfg, objects, (act,), window=window, th=th, task_name="canonical_move")
    return demo, gt


def _far_blocks(rng, k, avoid, min_gap=0.2):
    out = {}
    pts = list(avoid)
    i = 1
    tries = 0
    while len(out) < k:
        tries += 1
        p = table_point(rng.uniform(-0.3, 0.3), rng.uniform(0.2, 0.5))
        if all(np.linalg.norm(p - q) >= min_gap for q in pts) or tries > 2000:
            out[f"block_{i}"] = p
            pts.append(p)
            i += 1
    return out


def gen_pick_place(cfg: ScenarioConfig = ScenarioConfig(), window=WindowConfig(), th=Thresholds(),
                   fly_by=False, detour=None):
    """Pick ``block_0`` on one side and place it against the static ``block_1``.

    With ``detour`` the carry runs at table height: it sweeps a short arc
    around a point on the way and then slides past it. With ``fly_by``
    (which implies the detour) ``block_2`` sits at that point, so the carried
    block skims past it; otherwise any third block is put far away and the
    motion, and with it the timing, is unchanged.
    """
    if cfg.n_objects < 2 or (fly_by and cfg.n_objects < 3):
        raise InvalidConfig("pick-and-place needs two objects, three with a fly-by")
    detour = fly_by if detour is None else detour
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
    side = float(rng.choice([-1.0, 1.0]))
    ref = table_point(rng.uniform(-0.05, 0.05), rng.uniform(0.40, 0.46))
    offset = np.array([0.0, -0.04, 0.0]) if rng.random() < 0.5 else np.array([side * 0.04, 0.0, 0.0])
    final = ref + offset
    start = table_point(side * rng.uniform(0.24, 0.3), rng.uniform(0.2, 0.26))
    hand = hand_for(final)
    dwell, t0, grasp = int(rng.integers(20, 31)), int(rng.integers(20, 40)), int(rng.integers(5, 8))
    objects = {"block_0": start, "block_1": ref}
    via = ()
    legs = ()
    if detour:
        c = table_point(*(start + 0.45 * (final - start))[:2])
        via, legs = _fly_route(c, final - start)
        if fly_by:
            objects["block_2"] = c
    avoid = list(objects.values()) + [np.asarray(w[:3]) for w in via] + [final]
    extra = _far_blocks(rng, cfg.n_objects - len(objects), avoid, 0.15)
    objects.update({f"block_{len(objects) + i}": p for i, p in enumerate(extra.values())})
    act = ScriptedAction(hand, "block_0", via + (tuple(final),), dwell=dwell, start=t0, grasp=grasp,
                         leg_frames=legs)
    demo, gt, _ = render(cfg, objects, (act,), window=window, th=th, task_name="pick_place")
    return demo, gt


FLY_RADIUS = 0.055
FLY_CLEARANCE = 0.02


def _fly_route(c, heading, radius=FLY_RADIUS, clearance=FLY_CLEARANCE):
    """Via points of a table-height skim past the point ``c``.

    The object arrives beside ``c``, sweeps a quarter arc at constant
    distance ``radius`` until it is behind ``c`` (relative to ``heading``),
    then accelerates past ``c`` with closest approach ``clearance``. Because
    the distance is constant before the pass and only spreads out during it,
    the windowed entropy of the distance rises while the object is close.
    """
    u = np.array([heading[0], heading[1], 0.0])
    u /= np.linalg.norm(u)
    n = np.array([u[1], -u[0], 0.0])
    a = c - radius * n
    b = c - radius * u
    th = np.arcsin(clearance / radius)
    d = b + 0.2 * (u * np.cos(th) + n * np.sin(th))
    via = (tuple(a), tuple(b) + (c[0], c[1]), tuple(d))
    return via, (None, 30, 30)


def _letter_layout(letter, origin):
    cells = LETTERS[letter]
    return [origin + np.array([cx * 0.04, cy * 0.04, 0.0]) for cx, cy in cells]


def gen_letter_task(cfg: ScenarioConfig = ScenarioConfig(), letter="R", window=WindowConfig(),
                    th=Thresholds(), mirror=False):
    """Build a letter from five blocks next to an anchor block.

    The blocks start in a left and a right pile; each placement is made by
    the hand the contralateral prior picks, using a block from that hand's
    own pile, so the demonstrator crosses over to the far side of the letter.
    """
    if letter not in LETTERS:
        raise UnsupportedLetter(f"letter {letter!r} is not one of {sorted(LETTERS)}")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 3, ord(letter)]))
    origin = table_point(rng.uniform(-0.04, 0.0), rng.uniform(0.33, 0.37))
    cells = _letter_layout(letter, origin)
    if mirror:
        cells = [np.array([-c[0], c[1], c[2]]) for c in cells]
    piles = {LEFT_HAND: [], RIGHT_HAND: []}
    pile_base = {LEFT_HAND: table_point(-0.3, 0.22), RIGHT_HAND: table_point(0.3, 0.22)}
    if mirror:
        pile_base = {LEFT_HAND: table_point(-0.3, 0.22), RIGHT_HAND: table_point(0.3, 0.22)}
    hands = [hand_for(c) for c in cells[1:]]
    objects = {"block_0": cells[0]}
    for k, h in enumerate(hands):
        i = len(piles[h])
        sx = -1.0 if h == LEFT_HAND else 1.0
        p = pile_base[h] + np.array([sx * 0.08 * (i % 2), 0.08 * (i // 2), 0.0])
        piles[h].append(p)
        objects[f"block_{k + 1}"] = p
    centroid = {h: np.mean(ps, axis=0) for h, ps in piles.items() if ps}
    script = []
    t = int(rng.integers(20, 40))
    for k, (h, c) in enumerate(zip(hands, cells[1:])):
        act = ScriptedAction(h, f"block_{k + 1}", (tuple(c),), dwell=int(rng.integers(20, 31)), start=t,
                             grasp=int(rng.integers(5, 8)), source=tuple(centroid[h]))
        script.append(act)
        t = 0  # subsequent episodes follow as soon as the previous one ends, after an idle gap below
    script = _sequence(script, rng, objects, float(cfg.frame_rate))
    demo, gt, _ = render(cfg, objects, tuple(script), window=window, th=th, task_name=f"letter_{letter}")
    return demo, gt


def _sequence(script, rng, objects, frame_rate, gap=(25, 60)):
    """Give each action a start frame after the previous action's retreat."""
    out = []
    t = script[0].start if script else 0
    for a in script:
        out.append(replace(a, start=t))
        _, eps = _compile(out, objects, frame_rate)
        t = eps[-1].retreat_end + int(rng.integers(*gap))
    return out


def gen_selector_dataset(n, flip_rate=0.0, seed=0, workspace=DEFAULT_WORKSPACE):
    """States from uniformly drawn hand, source and target positions; prior labels with flips."""
    if not (0 <= flip_rate < 0.5):
        raise InvalidRate(f"flip_rate must lie in [0, 0.5), got {flip_rate!r}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    ws = np.asarray(workspace, dtype=float)
    pts = rng.uniform(ws[:, 0], ws[:, 1], size=(int(n), 4, 3))
    flips = rng.random(int(n)) < flip_rate
    out = []
    for k in range(int(n)):
        s = selector_state(*pts[k])
        a = prior_policy(s)
        if flips[k]:
            a = RIGHT if a == LEFT else LEFT
        out.append((s, a))
    return out


# ---------------------------------------------------------------------------
# long rearrangement sessions


def _neighbors(blocks, p, exclude=(), radius=0.065):
    return [k for k, q in blocks.items() if k not in exclude and np.linalg.norm(q - p) < radius]


# placement offsets against a reference block: grid steps whose length
# (0.0447 m) sits mid-bin, so the static block-block distance never
# straddles a histogram edge under jitter
SLOTS = tuple(np.array([sx * a, sy * b, 0.0]) for a, b in ((0.04, 0.02), (0.02, 0.04))
              for sx in (1, -1) for sy in (1, -1))


def _choose_move(rng, blocks, region):
    names = sorted(blocks)
    for _ in range(500):
        b = names[rng.integers(len(names))]
        r = names[rng.integers(len(names))]
        if r == b:
            continue
        for k in rng.permutation(len(SLOTS)):
            slot = blocks[r] + SLOTS[k]
            if not (region[0][0] <= slot[0] <= region[0][1] and region[1][0] <= slot[1] <= region[1][1]):
                continue
            if np.linalg.norm(slot - blocks[b]) < 0.15:
                continue
            if _neighbors(blocks, slot, exclude=(b, r)):
                continue
            if _neighbors(blocks, blocks[r], exclude=(b, r)):
                continue
            return b, r, np.array([*snap(slot[:2]), TABLE_Z])
    return None


def gen_session(cfg: ScenarioConfig = ScenarioConfig(n_objects=5), n_frames=10000, window=WindowConfig(),
                th=Thresholds(), task_name="session"):
    """A long rearrangement session: blocks are repeatedly picked and placed against others."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 5]))
    region = ((-0.25, 0.25), (0.2, 0.5))
    blocks = {}
    while len(blocks) < cfg.n_objects:
        p = table_point(rng.uniform(*region[0]), rng.uniform(*region[1]))
        if all(np.linalg.norm(p - q) >= 0.09 for q in blocks.values()):
            blocks[f"block_{len(blocks)}"] = p
    initial = dict(blocks)
    script = []
    t = int(rng.integers(20, 60))
    while True:
        mv = _choose_move(rng, blocks, region)
        if mv is None:
            break
        b, r, slot = mv
        hand = hand_for(slot)
        act = ScriptedAction(hand, b, (tuple(slot),), dwell=int(rng.integers(20, 31)), start=t,
                             grasp=int(rng.integers(5, 8)))
        trial = script + [act]
        _, eps = _compile(trial, {k: v for k, v in initial.items()}, float(cfg.frame_rate))
        if eps[-1].retreat_end + 40 > n_frames:
            break
        script = trial
        blocks[b] = slot
        t = eps[-1].retreat_end + int(rng.integers(25, 90))
    demo, gt, _ = render(cfg, initial, tuple(script), n_frames=n_frames, window=window, th=th,
                         task_name=task_name)
    return demo, gt


def demo_seed(seed, index):
    return int(np.random.SeedSequence([seed, 6, index]).generate_state(1)[0])


def gen_suite(n_demos=100, n_frames=10000, n_objects=5, seed=0, noise_sigma=0.001, window=WindowConfig(),
              th=Thresholds()):
    """``[(demo_id, Demonstration, GroundTruth), ...]`` of rearrangement sessions."""
    out = []
    for i in range(n_demos):
        cfg = ScenarioConfig(seed=demo_seed(seed, i), n_objects=n_objects, noise_sigma=noise_sigma)
        ident = f"demo_{i:03d}"
        demo, gt = gen_session(cfg, n_frames, window, th, task_name=ident)
        out.append((ident, demo, gt))
    return out
