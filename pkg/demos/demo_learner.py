"""
Age-adapted linear model
========================

Trains a children model on synthetic training images and scores it, and
the center prior alone, on held-out images.
"""

import numpy as np

from agegaze.data import AgeGroup
from agegaze.features import ScaleSelection, center_prior_channel, extract_channels
from agegaze.learner import predict_saliency, train_age_model
from agegaze.maps import sigma_for_width
from agegaze.metrics import group_saliency_map
from agegaze.roc import auc_score
from agegaze.synth import generate_cohort

C = AgeGroup.CHILDREN
width, height = 96, 72
sigma = sigma_for_width(width)
cohort = generate_cohort(n_images=16, width=width, height=height, group_sizes={C: 12}, seed=2)
ds = cohort.dataset
channels = {i: extract_channels(s.image, s.depth, working_size=width) for i, s in cohort.stimuli.items()}
train_ids, test_ids = ds.image_ids[:10], ds.image_ids[10:]

items = [(i, channels[i], group_saliency_map(ds, i, C, sigma)) for i in train_ids]
model = train_age_model(C, items, ScaleSelection.default(), n_pos=20, n_neg=20)
d = model.diagnostics
print("training: %d samples, accuracy %.3f, loss %.4f -> %.4f"
      % (d["n_samples"], d["accuracy"], d["losses"][0], d["losses"][-1]))

center = center_prior_channel(width, height).values
model_auc = [auc_score(predict_saliency(model, channels[i]), ds.fixations_for(i, C)).value for i in test_ids]
prior_auc = [auc_score(center, ds.fixations_for(i, C)).value for i in test_ids]
print("held-out AUC: model %.3f, center prior %.3f" % (np.mean(model_auc), np.mean(prior_auc)))
