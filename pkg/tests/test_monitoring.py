import json

import numpy as np
import pytest

from conftest import ring
from roadm_rinn.errors import MissingArtifact, OutOfRange
from roadm_rinn.monitoring import (
    ALPHA,
    DatasetConfig,
    deploy_uniform,
    generate_dataset,
    load_dataset,
    masks,
    save_dataset,
    with_deployment,
)
from roadm_rinn.physical import PowerModel, ledger


def test_uniform_example_ten_slots_three_opms():
    dep = deploy_uniform(10, count=3)
    assert dep.interval == 3
    assert {s + 1 for s in dep.deployed} == {3, 6, 9}
    assert list(dep.psi) == [0, 0, 1, 0, 0, 1, 0, 0, 1, 0]


@pytest.mark.parametrize("total, count", [(10, 10), (1398, 699), (1398, 140), (7, 2), (5, 1)])
def test_uniform_spacing(total, count):
    dep = deploy_uniform(total, count=count)
    ids = sorted(dep.deployed)
    assert len(ids) == count
    assert all(b - a == total // count for a, b in zip(ids, ids[1:]))
    assert ids[-1] < total


def test_deployment_bounds():
    with pytest.raises(OutOfRange):
        deploy_uniform(10, count=11)
    with pytest.raises(OutOfRange):
        deploy_uniform(10, fraction=0.0)


def test_sentinel_marks_unmonitored_positions(small_dataset):
    dep = deploy_uniform(small_dataset.deployment.total, fraction=0.4)
    sparse = with_deployment(small_dataset, dep)
    for lp, mask, row in zip(sparse.lightpaths, masks(sparse.lightpaths, dep), sparse.pre.readings):
        assert len(row) == lp.length
        assert np.all((row[:-1] == ALPHA) == ~mask)
        assert row[-1] in (0.0, 1.0)


def test_full_monitoring_matches_ledger(small_dataset):
    ds = small_dataset
    for sample in ds.samples[:10]:
        for lp, row in zip(ds.lightpaths, sample.post.readings):
            values, flag = ledger(lp, ds.graph, sample.scenario, ds.config.power_model)
            assert np.allclose(row[:-1], values)
            assert row[-1] == flag


def test_generation_is_deterministic(tmp_path):
    cfg = DatasetConfig(lp_count=8, samples=15, opm_fraction=0.5, power_model=PowerModel(0.1), seed=3)
    a = generate_dataset(ring(4), cfg)
    b = generate_dataset(ring(4), cfg)
    save_dataset(a, tmp_path / "a.json.gz")
    save_dataset(b, tmp_path / "b.json.gz")
    assert (tmp_path / "a.json.gz").read_bytes() == (tmp_path / "b.json.gz").read_bytes()


def test_parallel_generation_matches_serial():
    cfg = DatasetConfig(lp_count=8, samples=40, power_model=PowerModel(0.1), seed=5)
    a = generate_dataset(ring(4), cfg, jobs=1)
    b = generate_dataset(ring(4), cfg, jobs=2)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_save_load_roundtrip(tmp_path, small_dataset):
    path = tmp_path / "d.json"
    save_dataset(small_dataset, path)
    back = load_dataset(path)
    assert back.deployment == small_dataset.deployment
    assert [lp.components for lp in back.lightpaths] == [lp.components for lp in small_dataset.lightpaths]
    for s, t in zip(back.samples, small_dataset.samples):
        assert [(f.component, f.type, f.wavelength) for f in s.scenario.failures] == [
            (f.component, f.type, f.wavelength) for f in t.scenario.failures
        ]
        assert np.allclose([f.magnitude for f in s.scenario.failures], [f.magnitude for f in t.scenario.failures], atol=5e-5)
        for r, q in zip(s.post.readings, t.post.readings):
            assert np.allclose(r, q, atol=5e-5)


def test_missing_dataset(tmp_path):
    with pytest.raises(MissingArtifact):
        load_dataset(tmp_path / "nope.json")
