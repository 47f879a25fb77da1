"""
Entropy of a moving object
==========================

A block slides across the table, carried by one hand. Windowed entropy of
its x coordinate is zero while it rests, rises as the window starts to
cover the motion, peaks when the window is centred on it and falls again:
a bell. Mutual information between the hand and the block is large only
while they move together.
"""

import numpy as np

from infoscene.config import WindowConfig
from infoscene.infotheory import entropy_series, mi_3d
from infoscene.interactions import interaction_timeline
from infoscene.synth import ScenarioConfig, gen_canonical_move

cfg = WindowConfig()  # 20-frame windows, 1 cm bins
demo, truth = gen_canonical_move(ScenarioConfig(seed=0))
print(demo)

# entropy of the block's x coordinate, one value per window center
h = entropy_series(demo.track("block_0").positions[:, 0], cfg)

# a text sparkline of the bump: one row per 2 frames where it is non-zero
support = np.flatnonzero(h.values > 0)
for i in range(support[0], support[-1] + 1, 2):
    c, v = h.centers[i], h.values[i]
    print(f"frame {c:4d}  H = {v:5.2f} nats  " + "#" * int(round(v * 15)))

peak = h.centers[np.argmax(h.values)]
print(f"\npeak entropy at frame {peak}")

# hand-block mutual information (summed over x, y, z): windows lying wholly
# inside the scripted carry against windows that do not touch it
coupled = next(e for e in truth.timeline.events if e.kind == "CoupledMotion")
hand = demo.track(coupled.subject_id)
mi = mi_3d(hand.positions, demo.track("block_0").positions, cfg)
half = cfg.phi // 2
inside = (mi.centers - half >= coupled.start_frame) & (mi.centers + half - 1 <= coupled.end_frame)
apart = (mi.centers + half - 1 < coupled.start_frame) | (mi.centers - half > coupled.end_frame)
print(f"MI inside the carry: min {mi.values[inside].min():.2f} nats; away from it: max {mi.values[apart].max():.2f}")

# the detector recovers the carry as CoupledMotion followed by a short Docked rest
for e in interaction_timeline(demo, cfg).events:
    print(f"detected {e.kind:13s} {e.subject_id} -> {e.object_id}  frames {e.start_frame}-{e.end_frame}")
print(f"scripted CoupledMotion    frames {coupled.start_frame}-{coupled.end_frame}")
