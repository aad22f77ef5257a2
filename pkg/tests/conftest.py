import sys

import numpy as np
import pytest

from agegaze.data import AgeGroup, FixationRecord, GazeDataset, ImageInfo, StimulusCategory


def make_dataset(n_images=3, width=32, height=24, observers=None, fixations=()):
    cats = list(StimulusCategory)
    images = [ImageInfo(f"im{k}", cats[k % 3], width, height) for k in range(n_images)]
    if observers is None:
        observers = [("c0", AgeGroup.CHILDREN), ("a0", AgeGroup.ADULTS), ("e0", AgeGroup.ELDERLY)]
    return GazeDataset(images=images, fixations=list(fixations), observers=observers)


def fix(obs, group, image_id, x, y, index=0, duration=0.0):
    return FixationRecord(obs, group, image_id, x, y, index, duration)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
