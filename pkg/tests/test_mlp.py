import numpy as np
import pytest

from oracles import numeric_grads
from roadm_rinn.errors import ConfigError, DimensionMismatch, Untraversed
from roadm_rinn.mlp import (
    FeatureIndex,
    MlpModel,
    TrainConfig,
    bce,
    classify,
    extract_features,
    forward,
    load_model,
    loss_and_grads,
    save_model,
    train,
)
from roadm_rinn.monitoring import Deployment, MonitorSnapshot
from roadm_rinn.provisioning import Lightpath


def zero_model(inputs, l_max=1):
    m = MlpModel.init(inputs, l_max, TrainConfig(hidden=4, input_transform="none"))
    m.w1[:] = 0
    m.b1[:] = 0
    m.w2[:] = 0
    m.b2 = 0.0
    return m


def test_zero_weights_give_half():
    m = zero_model(6)
    assert forward(m, np.ones(6))[0] == pytest.approx(0.5)
    loss, _ = loss_and_grads(m, np.ones((3, 6)), np.array([1.0, 0.0, 1.0]))
    assert loss == pytest.approx(np.log(2))


def test_bce_clamps_extreme_logits():
    assert np.isfinite(bce(np.array([1e6, -1e6]), np.array([0.0, 1.0]))).all()


@pytest.mark.parametrize("transform", ["none", "delta"])
def test_gradient_check(transform):
    rng = np.random.default_rng(0)
    worst = 0.0
    for trial in range(100 if transform == "none" else 20):
        l_max = int(rng.integers(1, 3))
        cfg = TrainConfig(hidden=int(rng.integers(2, 6)), input_transform=transform)
        m = MlpModel.init(6 * l_max, l_max, cfg, seed=trial)
        x = rng.normal(0, 2, (int(rng.integers(1, 5)), 6 * l_max))
        y = rng.integers(0, 2, x.shape[0]).astype(float)
        _, grads = loss_and_grads(m, x, y)
        params = [m.w1, m.b1, m.w2, np.array([m.b2])]

        def f():
            m.b2 = float(params[3][0])
            return loss_and_grads(m, x, y)[0]

        num = numeric_grads(f, params)
        a = np.concatenate([g.ravel() for g in grads])
        b = np.concatenate([g.ravel() for g in num])
        worst = max(worst, np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))
    assert worst < 1e-4


def test_learns_separable_toy():
    rng = np.random.default_rng(3)
    x = rng.normal(0, 1, (200, 6))
    y = (x[:, 0] + x[:, 3] > 0).astype(float)
    m = MlpModel.init(6, 1, TrainConfig(hidden=16, input_transform="none"), seed=1)
    _, report = train(m, x, y, TrainConfig(learning_rate=0.05, epochs=300, hidden=16, batch_size=0, input_transform="none"))
    assert report.final_loss < 0.05
    assert (classify(m, x) == y.astype(bool)).mean() > 0.99


def test_training_is_seeded():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(50, 12)), rng.integers(0, 2, 50).astype(float)
    cfg = TrainConfig(hidden=8, epochs=5, learning_rate=1e-2)
    a, ra = train(MlpModel.init(12, 2, cfg, seed=7), x, y, seed=3)
    b, rb = train(MlpModel.init(12, 2, cfg, seed=7), x, y, seed=3)
    assert ra.epoch_losses == rb.epoch_losses
    assert np.array_equal(a.w1, b.w1)


def test_loss_decreases_on_average():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(300, 6))
    y = (x[:, 1] > 0.3).astype(float)
    m = MlpModel.init(6, 1, TrainConfig(hidden=8, input_transform="none"), seed=0)
    _, rep = train(m, x, y, TrainConfig(hidden=8, learning_rate=1e-2, epochs=100, input_transform="none"))
    assert np.mean(rep.epoch_losses[-10:]) < 0.5 * np.mean(rep.epoch_losses[:10])


def test_dimension_mismatch():
    m = MlpModel.init(12, 2)
    with pytest.raises(DimensionMismatch):
        forward(m, np.zeros(6))


def test_unknown_transform():
    with pytest.raises(ConfigError):
        TrainConfig(input_transform="zscore")


def test_model_roundtrip(tmp_path):
    m = MlpModel.init(12, 2, TrainConfig(hidden=5), seed=2)
    m.meta = {"engine": "rinn"}
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    x = np.random.default_rng(0).normal(size=(4, 12))
    assert np.allclose(forward(back, x), forward(m, x))
    assert back.meta == m.meta and back.config == m.config


def _lp(lid, components, slots):
    return Lightpath(lid, None, 0, [0, 1], [0], components, slots)


def test_feature_tuple_positions():
    # components 10..14; readings after positions 0..3 sit in slots 0..3
    lp = _lp(0, [10, 11, 12, 13, 14], [0, 1, 2, 3])
    pre = MonitorSnapshot([np.array([1.0, 2.0, 3.0, 4.0, 1.0])])
    post = MonitorSnapshot([np.array([1.0, 2.0, -7.0, -8.0, 0.0])])
    dep = Deployment(4, frozenset({0, 3}), 0)
    # component 12 (position 2): nearest reading before is position 0, at/after is position 3
    f = extract_features(12, [lp], dep, pre, post, l_max=1)
    assert f.tolist() == [2.0, 1.0, 1.0, 2.0, 4.0, -8.0]
    # the source transponder has no reading before it
    f0 = extract_features(10, [lp], dep, pre, post, l_max=1)
    assert f0.tolist() == [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
    # the receiver has no reading at or after it
    f4 = extract_features(14, [lp], dep, pre, post, l_max=1)
    assert f4.tolist() == [1.0, 4.0, -8.0, 0.0, 0.0, 0.0]


def test_features_ordered_by_lightpath_id_and_padded():
    a = _lp(5, [1, 2], [0])
    b = _lp(3, [1, 3], [1])
    dep = Deployment(2, frozenset({0, 1}), 1)
    pre = MonitorSnapshot([np.array([10.0, 1.0]), np.array([20.0, 1.0])])
    idx = FeatureIndex([a, b], dep, l_max=3)
    f = idx.features([1], pre, pre)[0].reshape(3, 6)
    assert f[0].tolist() == [0, 0, 0, 1, 20.0, 20.0]  # lightpath 3 first
    assert f[1].tolist() == [0, 0, 0, 1, 10.0, 10.0]
    assert not f[2].any()


def test_too_many_lightpaths_for_l_max():
    lps = [_lp(i, [1, 2 + i], [i]) for i in range(3)]
    with pytest.raises(DimensionMismatch):
        FeatureIndex(lps, Deployment(3, frozenset(), 0), l_max=2)


def test_untraversed_component():
    idx = FeatureIndex([_lp(0, [1, 2], [0])], Deployment(1, frozenset({0}), 1), l_max=1)
    with pytest.raises(Untraversed):
        idx.plan([99])
