"""
Fixation maps to saliency maps
==============================

Builds a fixation map from a handful of gaze points, smooths it and checks
that smoothing keeps the total fixation mass.
"""

import numpy as np

from agegaze.maps import build_fixation_map, gaussian_smooth, max_normalize, sigma_for_width

width, height = 320, 240
points = [(40, 30), (41, 30), (160, 120), (318, 238)]   # the last one sits on the border
fixmap = build_fixation_map(points, width, height)
print("fixation count:", fixmap.sum())

# sigma is given at a 1280 px reference width and scaled to this image
sigma = sigma_for_width(width)
print("sigma at %d px: %.2f px" % (width, sigma))

smooth = gaussian_smooth(fixmap, sigma)
print("mass after smoothing: %.12f" % smooth.sum())

saliency = max_normalize(smooth)
y, x = np.unravel_index(np.argmax(saliency), saliency.shape)
print("peak at (x=%d, y=%d), value %.3f" % (x, y, saliency[y, x]))
