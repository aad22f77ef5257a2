"""
ROC area for a saliency map
===========================

Scores a map against fixated pixels, first with every other pixel as a
negative and then with an explicit negative list, and compares each with
the quadratic pairwise count.
"""

import numpy as np

from agegaze.roc import auc_bruteforce, auc_score

rng = np.random.default_rng(0)
saliency = rng.random((16, 16))
fixated = [(int(x), int(y)) for x, y in rng.integers(0, 16, size=(8, 2))]

fast = auc_score(saliency, fixated)
print("AUC vs all pixels: %.6f  (%d positives, %d negatives)" % (fast.value, fast.n_positives, fast.n_negatives))

others = [(x, y) for y in range(16) for x in range(16) if (x, y) not in set(fixated)]
slow = auc_bruteforce(saliency, fixated, others)
print("pairwise count:    %.6f" % slow.value)

# a tie counts one half
m = np.array([[1.0, 0.5, 0.5]])
print("one win, one tie:", auc_score(m, [(0, 0), (1, 0)], [(2, 0)]).value)
