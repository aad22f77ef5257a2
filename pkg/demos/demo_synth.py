"""
Synthetic cohorts
=================

Plants a foreground preference in children and a background preference in
the elderly, then checks where each group's fixations land.
"""

import numpy as np

from agegaze.data import AgeGroup
from agegaze.synth import ObserverProfile, generate_cohort

C, E = AgeGroup.CHILDREN, AgeGroup.ELDERLY
profiles = {C: ObserverProfile(foreground_pref=0.8), E: ObserverProfile(foreground_pref=-0.8)}
cohort = generate_cohort(n_images=6, width=160, height=120, group_sizes={C: 10, E: 10},
                         profiles=profiles, seed=4)

for g in (C, E):
    labels = []
    for i, stim in cohort.stimuli.items():
        for f in cohort.dataset.fixations_for(i, g):
            labels.append(stim.mask[int(f.y), int(f.x)])
    labels = np.array(labels)
    print("%-9s foreground %.0f%%  background %.0f%%  unlabeled %.0f%%"
          % (g.value, 100 * np.mean(labels == 1), 100 * np.mean(labels == 2), 100 * np.mean(labels == 0)))
