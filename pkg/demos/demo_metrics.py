"""
Group comparison metrics
========================

Generates a small synthetic cohort and reports, per age group, the
explorativeness entropy, the center-bias distance and the 3x3 similarity
matrix.
"""

import numpy as np

from agegaze.data import GROUPS
from agegaze.maps import sigma_for_width
from agegaze.metrics import center_bias, explorativeness_entropy, group_saliency_map, similarity_matrix
from agegaze.synth import generate_cohort

width, height = 160, 120
sigma = sigma_for_width(width)
ds = generate_cohort(n_images=9, width=width, height=height, seed=1).dataset

for g in GROUPS:
    ent = np.mean([explorativeness_entropy(group_saliency_map(ds, i, g, sigma)) for i in ds.image_ids])
    dist, cauc, _ = center_bias(ds, g, sigma_px=sigma)
    print("%-9s entropy %.1f bits  center distance %.1f px  center AUC %.3f" % (g.value, ent, dist, cauc))

sim = similarity_matrix(ds, sigma_px=sigma)
print("similarity (rows: source group, columns: target group)")
print("          " + " ".join("%9s" % g.value for g in GROUPS))
for g, row in zip(GROUPS, sim.values):
    print("%-9s " % g.value + " ".join("%9.3f" % v for v in row))
