import numpy as np
import pytest
from scipy import ndimage

from agegaze.data import AgeGroup, StimulusCategory, load_manifest
from agegaze.io import MASK_FOREGROUND
from agegaze.maps import saliency_from_fixations
from agegaze.metrics import explorativeness_entropy
from agegaze.synth import (ObserverProfile, attention_surface, generate_cohort, generate_stimulus,
                           sample_fixations, write_cohort)


def test_single_blob_single_region():
    s = generate_stimulus(64, 48, 1, seed=3)
    _, n = ndimage.label(s.mask > 0)
    assert n == 1 and len(s.blobs) == 1


def test_stimulus_deterministic():
    a = generate_stimulus(80, 60, 4, seed=9, category=StimulusCategory.FRACTALS)
    b = generate_stimulus(80, 60, 4, seed=9, category=StimulusCategory.FRACTALS)
    for x, y in ((a.image, b.image), (a.depth, b.depth), (a.mask, b.mask), (a.surface, b.surface)):
        assert np.array_equal(x, y)
    assert a.blobs == b.blobs


@pytest.mark.parametrize("cat", list(StimulusCategory))
def test_surface_sums_to_one(cat):
    s = generate_stimulus(96, 72, 5, seed=1, category=cat)
    assert abs(s.surface.sum() - 1.0) < 1e-6
    assert s.image.dtype == np.uint8 and s.image.shape == (72, 96, 3)
    assert s.depth.min() >= 0 and s.depth.max() <= 1


def test_blobs_must_fit():
    with pytest.raises(ValueError):
        generate_stimulus(12, 10, 40, seed=0)
    with pytest.raises(ValueError):
        generate_stimulus(64, 48, 0, seed=0)


def test_profile_validation():
    for kw in ({"center_strength": 1.5}, {"foreground_pref": -2}, {"explorativeness_temp": 0},
               {"n_fixations": 0}):
        with pytest.raises(ValueError):
            ObserverProfile(**kw)


def test_degenerate_density():
    with pytest.raises(ValueError):
        sample_fixations(ObserverProfile(), np.zeros((10, 10)), np.ones((10, 10)), 10, 10)
    with pytest.raises(ValueError):
        sample_fixations(ObserverProfile(), np.ones((10, 10)), np.ones((10, 12)), 10, 10)


def test_center_strength_pulls_to_center():
    wins = 0
    for seed in range(20):
        s = generate_stimulus(96, 72, 4, seed)
        d = {}
        for alpha in (0.0, 1.0):
            prof = ObserverProfile(alpha, 0.0, float("inf"), n_fixations=60, seed=seed)
            pts = np.array([(f.x, f.y) for f in sample_fixations(prof, s.surface, s.depth, 96, 72)])
            d[alpha] = np.hypot(pts[:, 0] - 47.5, pts[:, 1] - 35.5).mean()
        wins += d[1.0] < d[0.0]
    assert wins >= 15


def test_foreground_preference_lands_on_f():
    on_f = total = 0
    for seed in range(20):
        s = generate_stimulus(96, 72, 2, seed)
        prof = ObserverProfile(0.0, 1.0, 1.0, n_fixations=30, seed=seed)
        for f in sample_fixations(prof, s.surface, s.depth, 96, 72):
            on_f += s.mask[f.y, f.x] == MASK_FOREGROUND
            total += 1
    assert on_f / total >= 0.8


def test_temperature_raises_entropy():
    wins = 0
    for seed in range(20):
        s = generate_stimulus(96, 72, 4, seed)
        ent = {}
        for tau in (0.3, 3.0):
            fix = []
            for k in range(10):
                prof = ObserverProfile(0.0, 0.0, tau, n_fixations=15, seed=seed * 50 + k)
                fix += sample_fixations(prof, s.surface, s.depth, 96, 72, observer_id=f"o{k}")
            ent[tau] = explorativeness_entropy(saliency_from_fixations(fix, 96, 72, 2.8))
        wins += ent[3.0] > ent[0.3]
    assert wins >= 15


def test_reweighted_surface_normalised():
    s = generate_stimulus(64, 48, 3, seed=2)
    surf = attention_surface(s, [0.0, 0.0, 1.0])
    assert abs(surf.sum() - 1) < 1e-9 and surf.min() > 0


def test_cohort_roundtrip(tmp_path):
    c = generate_cohort(n_images=6, width=64, height=48,
                        group_sizes={AgeGroup.CHILDREN: 2, AgeGroup.ADULTS: 3, AgeGroup.ELDERLY: 0}, seed=5)
    ds = c.dataset
    assert len(ds.images) == 6 and len(ds.fixations) == 5 * 6 * 15
    assert [ds.image(i).category for i in ds.image_ids[:3]] == list(StimulusCategory)
    write_cohort(c, tmp_path)
    back = load_manifest(tmp_path / "manifest.json")
    assert back.fixations == ds.fixations
    assert back.image("img000").mask_path.exists()
    again = generate_cohort(n_images=6, width=64, height=48,
                            group_sizes={AgeGroup.CHILDREN: 2, AgeGroup.ADULTS: 3, AgeGroup.ELDERLY: 0}, seed=5)
    assert again.dataset.fixations == ds.fixations
