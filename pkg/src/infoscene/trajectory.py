"""Demonstration data model and the JSONL trajectory format.

A demonstration is a set of equally long, uniformly sampled 6-DoF pose
tracks, one per hand or object. Time is implicit: frame ``k`` happens at
``k / frame_rate`` seconds.

File layout::

    {"frame_rate": 30.0, "entities": [{"id": "hand_left", "class": "HandLeft"}, ...]}
    {"k": 0, "poses": {"hand_left": [x, y, z, roll, pitch, yaw], ...}}
    {"k": 1, "poses": {...}}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ._io import atomic_write_text, dumps
from .errors import (
    InvalidDemonstration,
    IoFailure,
    MissingFile,
    SchemaViolation,
    UnequalTrackLength,
    UnknownEntity,
)

HAND_LEFT = "HandLeft"
HAND_RIGHT = "HandRight"
OBJECT = "Object"
ENTITY_CLASSES = (HAND_LEFT, HAND_RIGHT, OBJECT)
HAND_CLASSES = (HAND_LEFT, HAND_RIGHT)


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


@dataclass(frozen=True)
class Pose6D:
    position: tuple[float, float, float]
    orientation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        vals = tuple(self.position) + tuple(self.orientation)
        if len(self.position) != 3 or len(self.orientation) != 3:
            raise InvalidDemonstration("Pose6D needs 3 position and 3 orientation components")
        if not all(math.isfinite(v) for v in vals):
            raise InvalidDemonstration("Pose6D components must be finite")
        if not all(-math.pi < v <= math.pi for v in self.orientation):
            raise InvalidDemonstration("orientation components must lie in (-pi, pi]")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "orientation", tuple(float(v) for v in self.orientation))

    @classmethod
    def from_array(cls, row) -> Pose6D:
        row = [float(v) for v in row]
        return cls(tuple(row[:3]), tuple(row[3:6]))

    def as_list(self) -> list[float]:
        return list(self.position) + list(self.orientation)


def _check_pose_array(poses, ident):
    if poses.ndim != 2 or poses.shape[1] != 6:
        raise InvalidDemonstration(f"track {ident!r}: poses must have shape (n, 6)")
    if poses.shape[0] == 0:
        raise InvalidDemonstration(f"track {ident!r}: poses must be non-empty")
    if not np.all(np.isfinite(poses)):
        raise InvalidDemonstration(f"track {ident!r}: non-finite pose component")
    ori = poses[:, 3:]
    if np.any(ori <= -np.pi) or np.any(ori > np.pi):
        raise InvalidDemonstration(f"track {ident!r}: orientation outside (-pi, pi]")


class EntityTrack:
    """Pose samples of one hand or object, stored as a read-only ``(n, 6)`` array."""

    __slots__ = ("id", "cls", "poses")

    def __init__(self, id: str, cls: str, poses):
        if not isinstance(id, str) or not id:
            raise InvalidDemonstration("entity id must be a non-empty string")
        if cls not in ENTITY_CLASSES:
            raise InvalidDemonstration(f"entity {id!r}: unknown class {cls!r}")
        arr = np.array(poses, dtype=float)
        _check_pose_array(arr, id)
        arr.setflags(write=False)
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "cls", cls)
        object.__setattr__(self, "poses", arr)

    def __setattr__(self, name, value):
        raise AttributeError("EntityTrack is immutable")

    @property
    def positions(self) -> np.ndarray:
        return self.poses[:, :3]

    @property
    def is_hand(self) -> bool:
        return self.cls in HAND_CLASSES

    def __len__(self):
        return self.poses.shape[0]

    def pose(self, frame) -> Pose6D:
        return Pose6D.from_array(self.poses[frame])

    def __eq__(self, other):
        if not isinstance(other, EntityTrack):
            return NotImplemented
        return (self.id == other.id and self.cls == other.cls
                and self.poses.shape == other.poses.shape
                and bool(np.array_equal(self.poses, other.poses)))

    def __hash__(self):
        return hash((self.id, self.cls, self.poses.shape))

    def __repr__(self):
        return f"EntityTrack(id={self.id!r}, cls={self.cls!r}, frames={len(self)})"


class Demonstration:
    """Equal-length tracks sampled at ``frame_rate`` Hz. Track order is preserved."""

    __slots__ = ("tracks", "frame_rate", "_by_id")

    def __init__(self, tracks: Iterable[EntityTrack], frame_rate: float):
        tracks = tuple(tracks)
        if not tracks:
            raise InvalidDemonstration("a demonstration needs at least one track")
        frame_rate = float(frame_rate)
        if not (math.isfinite(frame_rate) and frame_rate > 0):
            raise InvalidDemonstration("frame_rate must be positive")
        ids = [t.id for t in tracks]
        if len(set(ids)) != len(ids):
            raise InvalidDemonstration("duplicate entity id")
        if not any(t.is_hand for t in tracks):
            raise InvalidDemonstration("a demonstration needs at least one hand track")
        lengths = [len(t) for t in tracks]
        if len(set(lengths)) != 1:
            # majority length; ties go to the first track
            n = max(lengths, key=lambda m: (lengths.count(m), m == lengths[0]))
            raise UnequalTrackLength([t.id for t in tracks if len(t) != n], n)
        object.__setattr__(self, "tracks", tracks)
        object.__setattr__(self, "frame_rate", frame_rate)
        object.__setattr__(self, "_by_id", {t.id: t for t in tracks})

    def __setattr__(self, name, value):
        raise AttributeError("Demonstration is immutable")

    @property
    def frame_count(self) -> int:
        return len(self.tracks[0])

    @property
    def hands(self) -> tuple[EntityTrack, ...]:
        return tuple(t for t in self.tracks if t.is_hand)

    @property
    def objects(self) -> tuple[EntityTrack, ...]:
        return tuple(t for t in self.tracks if not t.is_hand)

    def track(self, ident) -> EntityTrack:
        try:
            return self._by_id[ident]
        except KeyError:
            raise UnknownEntity(f"no entity {ident!r} in demonstration") from None

    def __contains__(self, ident):
        return ident in self._by_id

    def __eq__(self, other):
        if not isinstance(other, Demonstration):
            return NotImplemented
        return self.frame_rate == other.frame_rate and self.tracks == other.tracks

    def __hash__(self):
        return hash((self.frame_rate, tuple(t.id for t in self.tracks)))

    def __repr__(self):
        return (f"Demonstration({len(self.tracks)} tracks, {self.frame_count} frames "
                f"@ {self.frame_rate:g} Hz)")


def dumps_demonstration(demo: Demonstration) -> str:
    header = {
        "frame_rate": demo.frame_rate,
        "entities": [{"id": t.id, "class": t.cls} for t in demo.tracks],
    }
    lines = [dumps(header)]
    # float repr round-trips exactly, so load(save(d)) == d bit for bit
    cols = [t.poses.tolist() for t in demo.tracks]
    ids = [t.id for t in demo.tracks]
    for k in range(demo.frame_count):
        poses = {ident: col[k] for ident, col in zip(ids, cols)}
        lines.append(dumps({"k": k, "poses": poses}))
    return "\n".join(lines) + "\n"


def save_demonstration(demo: Demonstration, path) -> None:
    if not isinstance(demo, Demonstration):
        raise InvalidDemonstration("save_demonstration expects a Demonstration")
    atomic_write_text(path, dumps_demonstration(demo))


def _parse_header(obj):
    if not isinstance(obj, dict):
        raise SchemaViolation(1, "header", "expected an object")
    if "frame_rate" not in obj:
        raise SchemaViolation(1, "frame_rate", "missing")
    fr = obj["frame_rate"]
    if isinstance(fr, bool) or not isinstance(fr, (int, float)) or not fr > 0:
        raise SchemaViolation(1, "frame_rate", "must be a positive number")
    ents = obj.get("entities")
    if not isinstance(ents, list) or not ents:
        raise SchemaViolation(1, "entities", "must be a non-empty array")
    out = []
    for e in ents:
        if not isinstance(e, dict) or not isinstance(e.get("id"), str) or not e["id"]:
            raise SchemaViolation(1, "entities.id", "each entity needs a string id")
        if e.get("class") not in ENTITY_CLASSES:
            raise SchemaViolation(1, "entities.class", f"unknown class {e.get('class')!r}")
        out.append((e["id"], e["class"]))
    if len({i for i, _ in out}) != len(out):
        raise SchemaViolation(1, "entities.id", "duplicate id")
    return float(fr), out


def loads_demonstration(text: str) -> Demonstration:
    lines = [ln for ln in text.splitlines()]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise SchemaViolation(1, "header", "empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaViolation(1, "header", f"invalid JSON: {exc.msg}") from None
    frame_rate, entities = _parse_header(header)
    rows = {ident: [] for ident, _ in entities}
    for lineno, raw in enumerate(lines[1:], start=2):
        k_expected = lineno - 2
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(lineno, "record", f"invalid JSON: {exc.msg}") from None
        if not isinstance(rec, dict):
            raise SchemaViolation(lineno, "record", "expected an object")
        k = rec.get("k")
        if isinstance(k, bool) or not isinstance(k, int):
            raise SchemaViolation(lineno, "k", "must be an integer")
        if k != k_expected:
            raise SchemaViolation(lineno, "k", f"expected {k_expected}, got {k}")
        poses = rec.get("poses")
        if not isinstance(poses, dict):
            raise SchemaViolation(lineno, "poses", "must be an object")
        for ident, vec in poses.items():
            if ident not in rows:
                raise SchemaViolation(lineno, f"poses.{ident}", "undeclared entity")
            if (not isinstance(vec, list) or len(vec) != 6
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vec)):
                raise SchemaViolation(lineno, f"poses.{ident}", "expected 6 numbers")
            if not all(math.isfinite(v) for v in vec):
                raise SchemaViolation(lineno, f"poses.{ident}", "non-finite value")
            if not all(-math.pi < v <= math.pi for v in vec[3:]):
                raise SchemaViolation(lineno, f"poses.{ident}", "angle outside (-pi, pi]")
            rows[ident].append(vec)
    n_frames = len(lines) - 1
    short = [ident for ident, _ in entities if len(rows[ident]) != n_frames]
    if short:
        raise UnequalTrackLength(short, n_frames)
    if n_frames == 0:
        raise SchemaViolation(2, "poses", "no frames")
    tracks = [EntityTrack(ident, cls, np.array(rows[ident], dtype=float)) for ident, cls in entities]
    return Demonstration(tracks, frame_rate)


def load_demonstration(path) -> Demonstration:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such trajectory file: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return loads_demonstration(text)
