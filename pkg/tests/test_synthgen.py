import json

import numpy as np
import pytest

from reject_inference.data import load_csv
from reject_inference.metrics import auc
from reject_inference.synthgen import (
    CalibrationError,
    GeneratorConfig,
    calibrate_intercept,
    export,
    generate,
    generate_population,
)

SMALL = GeneratorConfig(n_population=1500, n_legacy_train=800)


def test_single_noiseless_feature_ranks_like_true_pd():
    cfg = GeneratorConfig(n_population=2000, n_features=3, n_informative=1, legacy_feature_subset=1,
                          noise_scale=0.0, seed=4)
    pop = generate_population(cfg)
    x = pop.dataset.features[:, 0]
    # true PD is a strictly monotone function of the one informative feature
    order = np.argsort(x)
    d = np.diff(pop.true_pd[order])
    assert np.all(d > 0) or np.all(d < 0)
    y = pop.dataset.labels
    signed = x if d[0] > 0 else -x
    assert auc(y, signed) == pytest.approx(auc(y, pop.true_pd), abs=1e-12)


def test_bad_rate_calibration():
    pop = generate_population(GeneratorConfig(n_population=10_000, target_bad_rate=0.5, seed=1))
    assert 0.47 <= pop.dataset.bad_rate <= 0.53
    assert pop.true_pd.mean() == pytest.approx(0.5, abs=1e-8)


def test_calibration_failure_is_reported():
    with pytest.raises(CalibrationError):
        calibrate_intercept(np.linspace(-3, 3, 50), 0.3, max_iter=3)


def test_determinism():
    a, b = generate(SMALL), generate(SMALL)
    np.testing.assert_array_equal(a.partition.accepts.features, b.partition.accepts.features)
    np.testing.assert_array_equal(a.partition.reject_oracle.reveal(), b.partition.reject_oracle.reveal())
    c = generate(GeneratorConfig(n_population=1500, n_legacy_train=800, seed=1))
    assert not np.array_equal(a.population.dataset.features, c.population.dataset.features)


def test_partition_is_exhaustive_and_disjoint():
    sim = generate(SMALL)
    p = sim.partition
    parts = [set(p.accepts.ids), set(p.rejects.ids), set(p.unbiased.ids)]
    assert sum(map(len, parts)) == sim.population.dataset.n
    assert set.union(*parts) == set(sim.population.dataset.ids)
    assert p.rejects.labels is None
    assert p.unbiased.n == round(0.05 * SMALL.n_population)


def test_selection_is_informative_but_imperfect():
    for seed in range(3):
        sim = generate(GeneratorConfig(seed=seed))
        s = sim.stats()
        assert s["rejects_bad_rate"] > s["accepts_bad_rate"]
        assert 0.5 < sim.legacy_auc_unbiased < sim.true_pd_auc_unbiased


def test_full_acceptance_leaves_no_rejects():
    sim = generate(GeneratorConfig(n_population=1000, n_legacy_train=500, acceptance_rate=1.0))
    assert sim.partition.rejects.n == 0


def test_config_checks():
    with pytest.raises(ValueError):
        GeneratorConfig(n_informative=40)
    with pytest.raises(ValueError):
        GeneratorConfig(legacy_feature_subset=13)
    with pytest.raises(ValueError):
        GeneratorConfig(unbiased_fraction=0)


def test_export_roundtrips_through_loader(tmp_path):
    sim = generate(SMALL)
    manifest = export(sim, tmp_path, SMALL)
    acc = load_csv(tmp_path / "accepts.csv", label_column="bad", id_column="id")
    np.testing.assert_array_equal(acc.features, sim.partition.accepts.features)
    rej = load_csv(tmp_path / "rejects.csv", id_column="id")
    assert rej.n == sim.partition.rejects.n and rej.labels is None
    sealed = load_csv(tmp_path / "rejects_labels_oracle.csv", label_column="bad", id_column="id")
    np.testing.assert_array_equal(sealed.labels, sim.partition.reject_oracle.reveal())
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == json.loads(json.dumps(manifest))
    assert on_disk["realized"]["n_accepts"] == acc.n
