"""
Feature channels
================

Extracts the low-level channels for one synthetic stimulus and shows how
the per-group scale selection changes which channels reach the learner.
"""

from agegaze.data import GROUPS
from agegaze.features import ScaleSelection, assemble_features, extract_channels
from agegaze.synth import generate_stimulus

stim = generate_stimulus(160, 120, n_blobs=4, seed=3)
channels = extract_channels(stim.image, stim.depth, working_size=160)
for c in channels.channels:
    print("%-22s family=%-16s scale=%s" % (c.name, c.family, c.scale))

sel = ScaleSelection.default()
for g in GROUPS:
    tensor = assemble_features(channels, sel, g)
    print("%s: %d channels" % (g.value, tensor.n_channels))
