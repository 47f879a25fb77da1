import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from infoscene import synth
from infoscene.trajectory import HAND_LEFT, HAND_RIGHT, OBJECT, Demonstration, EntityTrack

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_demo(positions, frame_rate=30.0):
    """Demonstration from ``{id: (n, 3) positions}``; ids starting with ``hand_left``/``hand_right`` are hands."""
    tracks = []
    for ident, pos in positions.items():
        pos = np.asarray(pos, dtype=float)
        cls = HAND_LEFT if ident.startswith("hand_left") else HAND_RIGHT if ident.startswith("hand_right") else OBJECT
        tracks.append(EntityTrack(ident, cls, np.concatenate([pos, np.zeros((len(pos), 3))], axis=1)))
    return Demonstration(tracks, frame_rate)


def static(point, n):
    return np.tile(np.asarray(point, dtype=float), (n, 1))


@pytest.fixture(scope="session")
def canonical():
    return synth.gen_canonical_move(synth.ScenarioConfig(seed=0))


@pytest.fixture(scope="session")
def pick_place():
    return synth.gen_pick_place(synth.ScenarioConfig(seed=1))


@pytest.fixture(scope="session")
def fly_pair():
    """The same pick-and-place detour with and without a block beside the route."""
    cfg = synth.ScenarioConfig(seed=2, n_objects=3)
    return synth.gen_pick_place(cfg, fly_by=True), synth.gen_pick_place(cfg, detour=True)


@pytest.fixture(scope="session")
def letter_r():
    return synth.gen_letter_task(synth.ScenarioConfig(seed=0), "R")


@pytest.fixture(scope="session")
def short_session():
    cfg = synth.ScenarioConfig(seed=11, n_objects=5)
    return synth.gen_session(cfg, n_frames=2000)
