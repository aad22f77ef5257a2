import numpy as np
import pytest

from agegaze.data import AgeGroup
from agegaze.features import FeatureChannel, FeatureChannelSet, FeatureTensor, ScaleSelection, center_prior_channel
from agegaze.learner import (AgeModel, ModelMismatchError, TrainConfig, TrainingSamples, blend_center,
                             fit_linear_svm, minmax_normalize, predict, predict_raw, predict_saliency,
                             sample_pixels, train, train_age_model)
from agegaze.maps import max_normalize


def tensor(values, group=AgeGroup.ADULTS):
    values = np.asarray(values, dtype=np.float64)
    return FeatureTensor(values, tuple(f"c{i}" for i in range(values.shape[0])), group)


def samples(x, y):
    return TrainingSamples(np.asarray(x, float), np.asarray(y, float), np.zeros((len(y), 2), int))


# -- sampling --------------------------------------------------------------------

def test_plateau_positives():
    sal = np.zeros((10, 10))
    sal[0, :5] = 1.0                     # exactly 5% of pixels on the plateau
    sal[5:] = np.linspace(0.01, 0.5, 50).reshape(5, 10)
    s = sample_pixels(sal, tensor(np.zeros((2, 10, 10))), n_pos=5, n_neg=5, seed=1)
    pos = s.pixels[s.labels > 0]
    assert sorted(map(tuple, pos)) == [(x, 0) for x in range(5)]


def test_sampling_deterministic_and_percentiles(rng):
    for _ in range(10):
        sal = rng.random((30, 40)) ** 2
        t = tensor(rng.random((3, 30, 40)))
        a = sample_pixels(sal, t, seed=4, image_id="x")
        b = sample_pixels(sal, t, seed=4, image_id="x")
        assert np.array_equal(a.pixels, b.pixels) and np.array_equal(a.features, b.features)
        vals = sal[a.pixels[:, 1], a.pixels[:, 0]]
        assert np.all(vals[a.labels > 0] >= np.percentile(sal, 95))
        assert np.all(vals[a.labels < 0] <= np.percentile(sal, 20))
        assert (a.labels > 0).sum() == 10 and (a.labels < 0).sum() == 10
        # features are the tensor values at the sampled pixels
        assert np.array_equal(a.features[0], t.values[:, a.pixels[0, 1], a.pixels[0, 0]])


def test_sampling_too_few_candidates_takes_all():
    sal = np.zeros((4, 5))
    sal[0, 0] = 1.0
    s = sample_pixels(sal, tensor(np.zeros((1, 4, 5))), n_pos=10, n_neg=3, seed=0)
    assert (s.labels > 0).sum() == 1 and (s.labels < 0).sum() == 3
    with pytest.raises(ValueError):
        sample_pixels(sal, tensor(np.zeros((1, 4, 5))), n_pos=0)


# -- training --------------------------------------------------------------------

def test_separable_accuracy(rng):
    x = rng.normal(size=(400, 2))
    y = np.where(x[:, 0] + 0.5 * x[:, 1] > 0, 1.0, -1.0)
    x += 0.3 * y[:, None] * np.array([1.0, 0.5])      # open a margin
    m = train(samples(x, y))
    assert m.diagnostics["accuracy"] >= 0.99


def test_planted_weight_recovery(rng):
    w_true = rng.normal(size=8)
    x = rng.normal(size=(2000, 8))
    y = np.sign(x @ w_true)
    m = train(samples(x, y))
    w = m.weights / m.std                  # back to raw-feature coordinates
    cos = w @ w_true / np.linalg.norm(w) / np.linalg.norm(w_true)
    assert cos >= 0.95


def test_duplication_invariance(rng):
    x = rng.normal(size=(60, 3))
    y = np.where(x[:, 0] - x[:, 2] + 0.2 * rng.normal(size=60) > 0, 1.0, -1.0)
    a = train(samples(x, y))
    b = train(samples(np.vstack([x, x]), np.concatenate([y, y])))
    probe = rng.normal(size=(50, 3))
    fa = ((probe - a.mean) / a.std) @ a.weights + a.bias
    fb = ((probe - b.mean) / b.std) @ b.weights + b.bias
    assert np.max(np.abs(fa - fb)) < 1e-6


def test_loss_is_monotone(rng):
    x = rng.normal(size=(100, 4))
    y = np.where(rng.random(100) < 0.5, 1.0, -1.0)    # noisy labels
    _, _, losses = fit_linear_svm(x, y, TrainConfig())
    assert len(losses) == 201
    assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))


def test_training_errors():
    with pytest.raises(ValueError):
        train(samples(np.ones((3, 2)), [1, 1, 1]))
    with pytest.raises(ValueError):
        train(samples([[np.nan, 1.0], [0.0, 1.0]], [1, -1]))


def test_determinism(rng):
    x = rng.normal(size=(80, 3))
    y = np.where(x[:, 1] > 0, 1.0, -1.0)
    a, b = train(samples(x, y)), train(samples(x, y))
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


# -- prediction -------------------------------------------------------------------

def model_for(t, w, b=0.0):
    n = t.n_channels
    return AgeModel(AgeGroup.ADULTS, np.asarray(w, float), b, t.names, np.zeros(n), np.ones(n))


def test_zero_weights_constant(rng):
    t = tensor(rng.random((3, 6, 7)))
    m = model_for(t, np.zeros(3), 0.7)
    assert np.all(predict_raw(m, t) == 0.7)
    assert not predict(m, t).any()


def test_single_channel_passthrough():
    cp = center_prior_channel(21, 15).values
    t = tensor(np.stack([np.zeros_like(cp), cp]))
    out = predict(model_for(t, [0.0, 1.0]), t)
    assert np.allclose(out, minmax_normalize(cp))


def test_raw_linearity(rng):
    t = tensor(rng.random((4, 9, 11)))
    w1, w2 = rng.normal(size=4), rng.normal(size=4)
    m = AgeModel(AgeGroup.ADULTS, w1, 0.0, t.names, rng.random(4), rng.random(4) + 0.5)
    r1 = predict_raw(m, t)
    m.weights = w2
    r2 = predict_raw(m, t)
    m.weights = w1 + w2
    assert np.max(np.abs(predict_raw(m, t) - (r1 + r2))) <= 1e-9


def test_affine_invariance_of_auc(rng):
    from agegaze.roc import auc_score
    t = tensor(rng.random((3, 12, 12)))
    w = rng.normal(size=3)
    pts = [tuple(p) for p in rng.integers(0, 12, (6, 2))]
    a = auc_score(predict_raw(model_for(t, w, 0.1), t), pts).value
    b = auc_score(predict_raw(model_for(t, 3.0 * w, 5.0), t), pts).value
    assert a == pytest.approx(b, abs=1e-12)


def test_mismatch_rejected(rng):
    t = tensor(rng.random((3, 4, 4)))
    with pytest.raises(ModelMismatchError):
        predict(model_for(tensor(rng.random((2, 4, 4))), [1.0, 1.0]), t)


def test_blend_center(rng):
    p, c = max_normalize(rng.random((5, 5))), max_normalize(rng.random((5, 5)))
    assert np.allclose(blend_center(p, c, 0.0), p)
    assert np.allclose(blend_center(p, c, 1.0), c)
    mean = (p + c) / 2
    assert np.allclose(blend_center(p, c, 0.5), mean / mean.max())
    with pytest.raises(ValueError):
        blend_center(p, c, 1.5)
    with pytest.raises(ValueError):
        blend_center(p, np.zeros((4, 5)), 0.5)


def test_model_json_roundtrip(tmp_path, rng):
    t = tensor(rng.random((3, 4, 4)))
    m = model_for(t, rng.normal(size=3), 0.25)
    m.save(tmp_path / "m.json")
    back = AgeModel.load(tmp_path / "m.json")
    assert np.array_equal(back.weights, m.weights) and back.bias == m.bias
    assert np.array_equal(predict_raw(back, t), predict_raw(m, t))
    import json
    doc = json.loads((tmp_path / "m.json").read_text())
    doc["channels"] = ["other", "names", "here"]
    with pytest.raises(ModelMismatchError):
        AgeModel.from_json(doc)


def test_train_age_model_end_to_end(rng):
    h, w = 24, 32
    bright = np.zeros((h, w))
    bright[5:12, 8:20] = 1.0
    noise = rng.random((h, w))
    items = []
    for k in range(4):
        chans = FeatureChannelSet([
            FeatureChannel("good", "external", bright),
            FeatureChannel("noise", "external", rng.random((h, w))),
            center_prior_channel(w, h),
        ])
        items.append((f"i{k}", chans, max_normalize(bright + 0.01 * noise)))
    m = train_age_model(AgeGroup.CHILDREN, items, ScaleSelection.default(), seed=1)
    assert m.channel_names == ("good", "noise", "center_prior")
    assert m.weights[0] > abs(m.weights[1])
    assert m.alpha == 0.3 and m.scales == (3,)
    pred = predict_saliency(m, items[0][1])
    assert pred.shape == (h, w) and pred.max() == pytest.approx(1.0)
    assert pred[8, 14] > pred[20, 2]
