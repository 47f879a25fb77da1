"""Behavior-tree plan emission from primitive segments.

Per hand, a coupling onset (a Transport or Place segment not continuing a
carry of the same object, together with the Reach that precedes it) yields a
pick; the last Place segment of a carry yields a place against its EOO
partner. Picks (resp. places) of the two hands that overlap in time merge
into one dual node. The hand of a pick comes from the fused selector at the
pick onset; a place keeps the hand of its pick, since the carried object is
docked against its partner when it is released.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import InconsistentSegments, ValidationError
from .handselect import decide_with_persistence, from_wire, fused_decision, prior_policy, selector_state, to_wire
from .segmentation import HOLD, PLACE, REACH, RETREAT, TRANSPORT
from .trajectory import HAND_LEFT, HAND_RIGHT, Pose6D

PICK = "PickObj"
PLACE_OBJ = "PlaceObj"
PICK_DUAL = "PickObjDual"
PLACE_DUAL = "PlaceObjDual"
MOVE_ARM = "MoveArm"
ACTIONS = (PICK, PLACE_OBJ, PICK_DUAL, PLACE_DUAL, MOVE_ARM)
DEFAULT_POSE_TOLERANCE = 0.02


@dataclass(frozen=True)
class Verification:
    expected_gripper: str
    pose_tolerance: float = DEFAULT_POSE_TOLERANCE
    reference_id: object = None

    def to_dict(self):
        return {"expected_gripper": self.expected_gripper, "pose_tolerance": self.pose_tolerance}


@dataclass(frozen=True)
class PlanNode:
    """One plan step. For dual nodes ``object_id``, ``target_pose`` and
    ``reference_id`` are tuples ordered left hand first."""

    action: str
    hand: str
    object_id: object
    target_pose: object = None
    rationale: str = ""
    verification: Verification = Verification("closed")

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValidationError(f"unknown action {self.action!r}")
        if self.hand not in ("left", "right", "both"):
            raise ValidationError(f"hand must be left, right or both, got {self.hand!r}")
        if self.action in (PLACE_OBJ, PLACE_DUAL) and self.target_pose is None:
            raise ValidationError("place nodes need a target_pose")
        if self.action in (PICK_DUAL, PLACE_DUAL) and self.hand != "both":
            raise ValidationError("dual nodes use hand 'both'")

    @property
    def reference_id(self):
        return self.verification.reference_id

    def signature(self):
        return (self.action, self.hand, self.object_id)

    def to_dict(self):
        d = {"action": self.action, "hand": self.hand, "object": _plain(self.object_id)}
        if self.target_pose is not None:
            tp = self.target_pose
            d["target_pose"] = [p.as_list() for p in tp] if isinstance(tp, tuple) else tp.as_list()
        if self.reference_id is not None:
            d["reference"] = _plain(self.reference_id)
        d["rationale"] = self.rationale
        d["verification"] = self.verification.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            obj = _tuple(d["object"])
            tp = d.get("target_pose")
            if tp is not None:
                tp = tuple(Pose6D.from_array(p) for p in tp) if isinstance(tp[0], list) else Pose6D.from_array(tp)
            v = d["verification"]
            ver = Verification(v["expected_gripper"], float(v["pose_tolerance"]), _tuple(d.get("reference")))
            return cls(d["action"], d["hand"], obj, tp, d["rationale"], ver)
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"malformed plan node: {exc}") from None


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def _tuple(v):
    return tuple(v) if isinstance(v, list) else v


@dataclass(frozen=True)
class BehaviorTree:
    task_name: str
    nodes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def signature(self):
        return [n.signature() for n in self.nodes]

    def to_dict(self):
        return {"task_name": self.task_name, "nodes": [n.to_dict() for n in self.nodes]}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["task_name"], tuple(PlanNode.from_dict(n) for n in d["nodes"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed plan: {exc}") from None


def serialize_plan(bt: BehaviorTree) -> str:
    return json.dumps(bt.to_dict(), indent=1, ensure_ascii=True, allow_nan=False) + "\n"


def parse_plan(text: str) -> BehaviorTree:
    try:
        return BehaviorTree.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"plan is not valid JSON: {exc.msg}") from None


def check_pick_before_place(bt: BehaviorTree) -> bool:
    held = set()
    for n in bt.nodes:
        objs = n.object_id if isinstance(n.object_id, tuple) else (n.object_id,)
        if n.action in (PICK, PICK_DUAL):
            held.update(objs)
        elif n.action in (PLACE_OBJ, PLACE_DUAL):
            if not all(o in held for o in objs):
                return False
    return True


@dataclass(frozen=True)
class _Item:
    kind: str  # "pick" | "place" | "move"
    hand_id: str
    object_id: str
    start: int
    end: int
    target_id: str | None = None
    place_end: int | None = None


def _items(segments):
    by_hand = {}
    for s in segments:
        by_hand.setdefault(s.hand_id, []).append(s)
    items = []
    for hand_id, segs in sorted(by_hand.items(), key=lambda kv: str(kv[0])):
        segs = sorted(segs, key=lambda s: s.start_frame)
        carrying = None
        last_place = None
        for k, s in enumerate(segs):
            prev = segs[k - 1] if k else None
            if s.primitive in (TRANSPORT, PLACE):
                continuing = (prev is not None and prev.primitive in (TRANSPORT, PLACE, HOLD)
                              and prev.object_id == s.object_id)
                if not continuing:
                    if last_place is not None:
                        items.append(last_place)
                        last_place = None
                    start = prev.start_frame if (prev is not None and prev.primitive == REACH
                                                 and prev.object_id == s.object_id) else s.start_frame
                    items.append(_Item("pick", hand_id, s.object_id, start, s.end_frame))
                    carrying = s.object_id
                if s.primitive == PLACE:
                    if carrying != s.object_id:
                        raise InconsistentSegments(f"place of {s.object_id!r} without a prior pick")
                    if last_place is not None and last_place.object_id == s.object_id:
                        start = last_place.start
                    else:
                        start = s.start_frame
                    last_place = _Item("place", hand_id, s.object_id, start, s.end_frame,
                                       s.target_id, s.end_frame)
            elif s.primitive == HOLD:
                continue
            else:
                if last_place is not None:
                    items.append(last_place)
                    last_place = None
                carrying = None
                if s.primitive == RETREAT:
                    items.append(_Item("move", hand_id, s.object_id, s.start_frame, s.end_frame))
        if last_place is not None:
            items.append(last_place)
    return items


def _hand_tracks(demo):
    left = next((t for t in demo.hands if t.cls == HAND_LEFT), None)
    right = next((t for t in demo.hands if t.cls == HAND_RIGHT), None)
    return left, right


def _decide_pick_hand(demo, item, selector, target_frame):
    left, right = _hand_tracks(demo)
    if left is None or right is None:
        return "left" if demo.track(item.hand_id).cls == HAND_LEFT else "right"
    obj = demo.track(item.object_id).positions
    s = selector_state(left.positions[item.start], right.positions[item.start],
                       obj[item.start], obj[target_frame])
    if selector is None:
        return to_wire(prior_policy(s))
    model, kappa = selector
    return to_wire(fused_decision(model, s, kappa)[0])


def _rationale(action, objs, hands, refs):
    if action == PICK:
        return f"grasp {objs[0]} with the {hands[0]} hand, the hand opposite the placement side"
    if action == PLACE_OBJ:
        return f"place {objs[0]} against {refs[0]} to extend structure"
    if action == PICK_DUAL:
        return f"grasp {objs[0]} and {objs[1]} at the same time with both hands"
    if action == PLACE_DUAL:
        return f"place {objs[0]} against {refs[0]} and {objs[1]} against {refs[1]} together"
    return f"move the {hands[0]} arm clear of the workspace"


def emit_plan(segments, demo, selector=None, task_name="demo", move_arm_after=None,
              pose_tolerance=DEFAULT_POSE_TOLERANCE) -> BehaviorTree:
    """Behavior tree for ``segments`` of ``demo``.

    Parameters
    ----------
    selector : (SelectorModel, kappa) or None
        Fused hand selector evaluated at each pick onset; ``None`` uses the
        contralateral prior alone.
    move_arm_after : int or None
        Emit a MoveArm node for every Retreat segment longer than this many
        frames. ``None`` disables MoveArm nodes.
    """
    items = _items(segments)
    picks = [i for i in items if i.kind == "pick"]
    places = [i for i in items if i.kind == "place"]
    moves = [i for i in items if i.kind == "move" and move_arm_after is not None
             and i.end - i.start + 1 > move_arm_after]

    # the target of a pick is where its object comes to rest at the end of the carry
    def carry_end(pick):
        cands = [p for p in places if p.hand_id == pick.hand_id and p.object_id == pick.object_id
                 and p.start >= pick.start]
        return min(cands, key=lambda p: p.start).place_end if cands else pick.end

    hand_of = {}
    for p in picks:
        hand_of[(p.hand_id, p.object_id, p.start)] = _decide_pick_hand(demo, p, selector, carry_end(p))

    def pick_hand(place):
        cands = [p for p in picks if p.hand_id == place.hand_id and p.object_id == place.object_id
                 and p.start <= place.start]
        if not cands:
            raise InconsistentSegments(f"place of {place.object_id!r} without a prior pick")
        p = max(cands, key=lambda q: q.start)
        return hand_of[(p.hand_id, p.object_id, p.start)]

    entries = []  # (start, order, node)
    for group in _merge(picks):
        entries.append(_pick_node(demo, group, hand_of, pose_tolerance))
    for group in _merge(places):
        entries.append(_place_node(demo, group, pick_hand, pose_tolerance))
    for m in moves:
        hand = "left" if demo.track(m.hand_id).cls == HAND_LEFT else "right"
        entries.append((m.start, 2, m.hand_id, PlanNode(MOVE_ARM, hand, m.object_id, None,
                                                        _rationale(MOVE_ARM, [m.object_id], [hand], [None]),
                                                        Verification("open", pose_tolerance))))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    bt = BehaviorTree(task_name, tuple(e[3] for e in entries))
    if not check_pick_before_place(bt):
        raise InconsistentSegments("a place precedes the pick of its object")
    return bt


def _merge(items):
    """Group items of different hands whose frame spans overlap."""
    items = sorted(items, key=lambda i: (i.start, str(i.hand_id)))
    used = [False] * len(items)
    groups = []
    for a, ia in enumerate(items):
        if used[a]:
            continue
        used[a] = True
        group = [ia]
        for b in range(a + 1, len(items)):
            ib = items[b]
            if used[b] or ib.hand_id == ia.hand_id:
                continue
            if ib.start > ia.end:
                break
            if min(ia.end, ib.end) >= max(ia.start, ib.start):
                used[b] = True
                group.append(ib)
                break
        groups.append(group)
    return groups


def _order_by_hand(demo, group):
    return sorted(group, key=lambda i: (0 if demo.track(i.hand_id).cls == HAND_LEFT else 1, str(i.hand_id)))


def _pick_node(demo, group, hand_of, tol):
    start = min(i.start for i in group)
    if len(group) == 1:
        it = group[0]
        hand = hand_of[(it.hand_id, it.object_id, it.start)]
        node = PlanNode(PICK, hand, it.object_id, None, _rationale(PICK, [it.object_id], [hand], [None]),
                        Verification("closed", tol))
        return (start, 0, it.hand_id, node)
    g = _order_by_hand(demo, group)
    objs = tuple(i.object_id for i in g)
    node = PlanNode(PICK_DUAL, "both", objs, None, _rationale(PICK_DUAL, objs, ["both"], [None, None]),
                    Verification("closed", tol))
    return (start, 0, g[0].hand_id, node)


def _place_node(demo, group, pick_hand, tol):
    start = min(i.start for i in group)
    poses = [Pose6D.from_array(demo.track(i.object_id).poses[i.place_end]) for i in group]
    if len(group) == 1:
        it = group[0]
        # the object is docked against its partner at release, so the pick's hand persists
        hand = to_wire(decide_with_persistence(from_wire(pick_hand(it)), True, None, None, 0.0))
        node = PlanNode(PLACE_OBJ, hand, it.object_id, poses[0],
                        _rationale(PLACE_OBJ, [it.object_id], [hand], [it.target_id]),
                        Verification("open", tol, it.target_id))
        return (start, 1, it.hand_id, node)
    g = _order_by_hand(demo, group)
    for it in g:
        pick_hand(it)
    objs = tuple(i.object_id for i in g)
    refs = tuple(i.target_id for i in g)
    poses = tuple(Pose6D.from_array(demo.track(i.object_id).poses[i.place_end]) for i in g)
    node = PlanNode(PLACE_DUAL, "both", objs, poses, _rationale(PLACE_DUAL, objs, ["both"], refs),
                    Verification("open", tol, refs))
    return (start, 1, g[0].hand_id, node)
