import numpy as np
import pytest

from roadm_rinn.errors import LengthMismatch, Untraversed
from roadm_rinn.mlp import MlpModel, TrainConfig
from roadm_rinn.monitoring import deploy_uniform, with_deployment
from roadm_rinn.pipeline import (
    LocalizationResult,
    Localizer,
    calibrate,
    evaluate,
    format_rows,
    measure_inference,
    report_rows,
    score,
    structural_l_max,
    train_ann,
    train_rinn,
)
from roadm_rinn.rules import SuspectPartition


def res(*c):
    return LocalizationResult(frozenset(c), "x")


def test_score_perfect():
    r = score([res(1), res(2, 3)], [frozenset({1}), frozenset({2, 3})])
    assert (r.complete, r.partial, r.total) == (1.0, 0.0, 1.0)


def test_score_subset_is_partial():
    r = score([res(1)], [frozenset({1, 2, 3})])
    assert (r.complete, r.partial) == (0.0, 1.0)


def test_score_miss():
    r = score([res(2)], [frozenset({1})])
    assert r.total == 0.0


def test_score_superset_is_partial_only_for_multiple_failures():
    assert score([res(1, 2, 9)], [frozenset({1, 2})]).partial == 1.0
    # a single failure found alongside a false alarm is not partial
    assert score([res(1, 9)], [frozenset({1})]).total == 0.0


def test_score_length_mismatch():
    with pytest.raises(LengthMismatch):
        score([res(1)], [])


def test_score_components_add_up():
    rng = np.random.default_rng(0)
    truths = [frozenset(rng.choice(8, rng.integers(1, 4), replace=False).tolist()) for _ in range(200)]
    preds = [res(*rng.choice(8, rng.integers(0, 4), replace=False).tolist()) for _ in range(200)]
    r = score(preds, truths)
    assert r.complete + r.partial == pytest.approx(r.total, abs=1e-15)


@pytest.fixture(scope="module")
def localizer(small_dataset):
    return Localizer(small_dataset, calibrate(small_dataset))


def test_rules_benchmark_is_binomial(localizer, monkeypatch):
    ten = frozenset(localizer.all[:10])
    fixed = SuspectPartition(frozenset(localizer.all), frozenset(), frozenset(), ten)
    monkeypatch.setattr(localizer, "partition", lambda sample: fixed)
    rng = np.random.default_rng(0)
    sample = localizer.dataset.samples[0]
    counts = [len(localizer.rules(sample, rng).predicted) for _ in range(10000)]
    assert abs(np.mean(counts) - 5.0) < 0.2
    assert all(localizer.rules(sample, rng, p=1.0).predicted == ten for _ in range(5))


def test_zero_weight_ann_predicts_everything(small_dataset):
    loc = Localizer(small_dataset, calibrate(small_dataset))
    l_max = structural_l_max(small_dataset)
    m = MlpModel.init(6 * l_max, l_max, TrainConfig(hidden=4))
    m.w1[:] = 0
    m.b1[:] = 0
    m.w2[:] = 0
    m.b2 = 0.0
    loc.ann_model = m
    assert loc.ann(small_dataset.samples[0]).predicted == frozenset(loc.all)


def test_full_monitoring_single_failures_are_exact(small_dataset, localizer):
    singles = [s for s in small_dataset.samples if len(s.truth) == 1]
    assert singles
    for s in singles:
        part = localizer.partition(s)
        assert part.faulty <= s.truth


def test_rinn_contains_rules_verdicts(small_dataset):
    sparse = with_deployment(small_dataset, deploy_uniform(small_dataset.deployment.total, fraction=0.4))
    loc = Localizer(sparse, calibrate(sparse))
    cfg = TrainConfig(epochs=3, hidden=8)
    loc.rinn_model, _ = train_rinn(loc, sparse.samples[:30], cfg, seed=0, rng=0)
    for s in sparse.samples[30:]:
        assert loc.partition(s).faulty <= loc.rinn(s).predicted


def test_predictions_stay_inside_traversed_set(small_dataset):
    sparse = with_deployment(small_dataset, deploy_uniform(small_dataset.deployment.total, fraction=0.4))
    loc = Localizer(sparse, calibrate(sparse))
    cfg = TrainConfig(epochs=2, hidden=4)
    loc.ann_model, _ = train_ann(loc, sparse.samples[:20], cfg, seed=0, rng=0)
    loc.rinn_model, _ = train_rinn(loc, sparse.samples[:20], cfg, seed=0, rng=0)
    allowed = set(loc.all)
    for s in sparse.samples[20:]:
        assert loc.ann(s).predicted <= allowed
        assert loc.rinn(s).predicted <= allowed
    untouched = set(c.id for c in sparse.graph.components) - allowed
    if untouched:
        with pytest.raises(Untraversed):
            loc.index.plan([min(untouched)])


def test_training_is_deterministic(localizer, small_dataset):
    cfg = TrainConfig(epochs=2, hidden=4)
    a, ra = train_ann(localizer, small_dataset.samples[:20], cfg, seed=1, rng=2)
    b, rb = train_ann(localizer, small_dataset.samples[:20], cfg, seed=1, rng=2)
    assert ra.epoch_losses == rb.epoch_losses and np.array_equal(a.w1, b.w1)


def test_evaluate_and_report(localizer, small_dataset):
    cfg = TrainConfig(epochs=2, hidden=4)
    localizer.ann_model, _ = train_ann(localizer, small_dataset.samples[:20], cfg, rng=0)
    localizer.rinn_model, _ = train_rinn(localizer, small_dataset.samples[:20], cfg, rng=0)
    key = {"opm_pct": 100, "failures": "1-2-3", "failure_type": "mixed", "lps": 12}
    ev = evaluate(localizer, small_dataset.samples[20:], key=key)
    assert set(ev.reports) == {"rules", "ann", "rinn"}
    assert ev.suspect_ratio == 0.0
    text = format_rows(report_rows(ev, key))
    lines = text.strip().splitlines()
    assert lines[0].split("\t")[0] == "engine" and len(lines) == 4


def test_measure_inference_single_sample(localizer, small_dataset):
    t = measure_inference(localizer.partition, small_dataset.samples[:1])
    assert t >= 0.0
