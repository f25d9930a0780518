"""Decay-weighted pooling of a word's frames.

The pooled vector is a weighted average whose weights tilt toward the
start of the word (forward decay) or its end (backward decay); with both
rates at zero it is the plain mean. This walkthrough prints the weight
profiles and pools a tiny example sequence.

Run:  python demos/01_decay_weighted_pooling.py
"""

import numpy as np

from tune_probe.features import DecayConfig, decay_weights, pool_frames

n_last = 9  # ten frames, indices 0..9

print("weight profiles over a 10-frame word")
for name, cfg in [
    ("plain average          ", DecayConfig(0.0, 0.0)),
    ("forward decay 0.5      ", DecayConfig(0.5, 0.0)),
    ("backward decay 0.5     ", DecayConfig(0.0, 0.5)),
    ("strong backward decay 3", DecayConfig(0.0, 3.0)),
]:
    w = decay_weights(n_last, cfg)
    bars = " ".join(f"{x:.3f}" for x in w)
    print(f"  {name}: {bars}")

# Pool a toy 1-d "contour": low for 5 frames then high for 5 frames.
frames = np.array([[0.0]] * 5 + [[1.0]] * 5)
print("\npooled value of a low->high step contour")
for name, cfg in [
    ("plain    ", DecayConfig(0.0, 0.0)),
    ("backward ", DecayConfig(0.0, 1.0)),
    ("forward  ", DecayConfig(1.0, 0.0)),
]:
    print(f"  {name}: {pool_frames(frames, cfg)[0]:.3f}")

print("\nbackward decay pulls the summary toward the word's end,")
print("where phrase accent and boundary tone live.")
