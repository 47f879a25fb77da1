"""Keyframe scene graphs built from an interaction timeline.

At a frame, the graph holds one directed edge per active event (hand ->
object for HO relations, manipulated object -> partner for OO relations) and
exactly the entities those edges touch. Graphs are produced on the window
center grid; because the edge sets only change at event boundaries, the
sequence stores one shared edge tuple per constant stretch and materialises
nodes (with poses) on demand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import WindowConfig
from .errors import FrameOutOfBounds, GridMismatch, ValidationError
from .trajectory import Pose6D
from .interactions import event_sort_key

__all__ = [
    "GraphNode",
    "GraphEdge",
    "Keyframe",
    "SceneGraphSequence",
    "build_graph",
    "graph_sequence",
    "graph_accuracy",
]


@dataclass(frozen=True)
class GraphNode:
    id: str
    label: str
    pose: Pose6D | None = field(default=None, compare=False)

    def to_dict(self):
        return {"id": self.id, "label": self.label,
                "pose": None if self.pose is None else self.pose.as_list()}


@dataclass(frozen=True)
class GraphEdge:
    from_id: str
    to_id: str
    relation: str
    annotation: float | None = field(default=None, compare=False)

    @property
    def key(self):
        return (self.from_id, self.to_id, self.relation)

    def to_dict(self):
        d = {"from": self.from_id, "to": self.to_id, "relation": self.relation}
        if self.annotation is not None:
            d["annotation"] = self.annotation
        return d


@dataclass(frozen=True)
class Keyframe:
    frame: int
    nodes: tuple
    edges: tuple
    topology_change: bool = False

    def to_dict(self):
        return {
            "frame": int(self.frame),
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [e.to_dict() for e in self.edges],
            "topology_change": bool(self.topology_change),
        }


def _annotation(event, frame):
    trace = event.mi_trace
    if trace is None or not event.is_ho:
        return None
    try:
        return trace.at(frame)
    except KeyError:
        return None


def _nodes_for(demo, edges, frame):
    ids = sorted({e.from_id for e in edges} | {e.to_id for e in edges})
    out = []
    for i in ids:
        if demo is not None and i in demo:
            t = demo.track(i)
            out.append(GraphNode(i, t.cls, Pose6D.from_array(t.poses[frame])))
        else:
            out.append(GraphNode(i, "Unknown"))
    return tuple(out)


def _edges_for(events, frame):
    return tuple(sorted((GraphEdge(e.subject_id, e.object_id, e.kind, _annotation(e, frame)) for e in events),
                        key=lambda g: g.key))


def build_graph(demo, timeline, frame):
    """``(nodes, edges)`` of the scene graph at ``frame``."""
    if not 0 <= frame < demo.frame_count:
        raise FrameOutOfBounds(f"frame {frame} outside [0, {demo.frame_count})")
    edges = _edges_for(timeline.active(frame), frame)
    return _nodes_for(demo, edges, frame), edges


class SceneGraphSequence:
    """Scene graphs on a strictly increasing keyframe grid.

    ``edge_keys[i]`` is the sorted tuple of ``(from, to, relation)`` triples at
    keyframe ``i``; consecutive keyframes with the same relations share one
    tuple object. Full :class:`Keyframe` records are built lazily.
    """

    def __init__(self, frames, edge_keys, topology_changes=None, demo=None, events=None, active=None,
                 explicit=None):
        self.frames = np.asarray(frames, dtype=np.int64)
        if self.frames.size > 1 and np.any(np.diff(self.frames) <= 0):
            raise ValidationError("keyframes must be strictly increasing")
        self.edge_keys = list(edge_keys)
        if len(self.edge_keys) != self.frames.size:
            raise ValidationError("one edge set per keyframe required")
        if topology_changes is None:
            topology_changes = frozenset(int(self.frames[i]) for i in range(1, len(self.edge_keys))
                                         if self.edge_keys[i] != self.edge_keys[i - 1])
        self.topology_changes = frozenset(topology_changes)
        self._demo = demo
        self._events = events
        self._active = active
        self._explicit = explicit

    def __len__(self):
        return int(self.frames.size)

    def keyframe(self, i) -> Keyframe:
        frame = int(self.frames[i])
        change = frame in self.topology_changes
        if self._explicit is not None:
            kf = self._explicit[i]
            return Keyframe(frame, kf.nodes, kf.edges, change)
        if self._active is not None:
            edges = _edges_for([self._events[j] for j in self._active[i]], frame)
        else:
            edges = tuple(GraphEdge(*k) for k in self.edge_keys[i])
        return Keyframe(frame, _nodes_for(self._demo, edges, frame), edges, change)

    def __iter__(self):
        return (self.keyframe(i) for i in range(len(self)))

    def node_ids(self, i):
        if self._explicit is not None:
            return frozenset(n.id for n in self._explicit[i].nodes)
        k = self.edge_keys[i]
        return frozenset(a for a, _, _ in k) | frozenset(b for _, b, _ in k)

    def __eq__(self, other):
        if not isinstance(other, SceneGraphSequence):
            return NotImplemented
        return (np.array_equal(self.frames, other.frames) and self.edge_keys == other.edge_keys
                and self.topology_changes == other.topology_changes)

    def to_list(self):
        return [kf.to_dict() for kf in self]

    def to_json(self):
        return json.dumps(self.to_list()) + "\n"

    @classmethod
    def from_list(cls, items):
        kfs = []
        for d in items:
            try:
                nodes = tuple(GraphNode(n["id"], n["label"],
                                        None if n.get("pose") is None else Pose6D.from_array(n["pose"]))
                              for n in d["nodes"])
                edges = tuple(GraphEdge(e["from"], e["to"], e["relation"], e.get("annotation"))
                              for e in d["edges"])
                kfs.append(Keyframe(int(d["frame"]), nodes, edges, bool(d.get("topology_change", False))))
            except (KeyError, TypeError) as exc:
                raise ValidationError(f"malformed keyframe record: {exc}") from None
        frames = [k.frame for k in kfs]
        keys = [tuple(sorted(e.key for e in k.edges)) for k in kfs]
        changes = [k.frame for k in kfs if k.topology_change]
        return cls(frames, keys, changes, explicit=kfs)


def graph_sequence(demo, timeline, cfg: WindowConfig = WindowConfig()) -> SceneGraphSequence:
    """One keyframe per window center of ``cfg``."""
    centers = cfg.centers(demo.frame_count)
    events = sorted(timeline.events, key=event_sort_key)
    W = centers.size
    # event j is active on keyframes [a_j, b_j)
    bounds = []
    for e in events:
        a = int(np.searchsorted(centers, e.start_frame, side="left"))
        b = int(np.searchsorted(centers, e.end_frame, side="right"))
        bounds.append((a, b))
    cuts = sorted({0, W} | {a for a, _ in bounds} | {b for _, b in bounds})
    edge_keys = [None] * W
    active = [None] * W
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if lo >= hi or lo >= W:
            continue
        act = tuple(j for j, (a, b) in enumerate(bounds) if a <= lo < b)
        keys = tuple(sorted((events[j].subject_id, events[j].object_id, events[j].kind) for j in act))
        for i in range(lo, hi):
            edge_keys[i] = keys
            active[i] = act
    return SceneGraphSequence(centers, edge_keys, demo=demo, events=events, active=active)


def graph_accuracy(predicted: SceneGraphSequence, truth: SceneGraphSequence) -> float:
    """Fraction of keyframes whose nodes, directed edges and relation types all match."""
    if not np.array_equal(predicted.frames, truth.frames):
        raise GridMismatch("predicted and truth sequences use different keyframe grids")
    n = len(truth)
    if n == 0:
        return 1.0
    hits = 0
    for i in range(n):
        a, b = predicted.edge_keys[i], truth.edge_keys[i]
        if a is b or (a == b and predicted.node_ids(i) == truth.node_ids(i)):
            hits += 1
    return hits / n
