import csv
import json
import math
from collections import defaultdict
from dataclasses import replace

import numpy as np
import pytest

import reject_inference.harness as harness
from reject_inference.harness import (
    CsvSource,
    ExperimentConfig,
    child_seed,
    export_diagnostics,
    run_experiment1,
    run_experiment2,
)
from reject_inference.kickout import KickoutProtocolConfig
from reject_inference.learners import GbtParams
from reject_inference.strategies import StrategySpec
from reject_inference.synthgen import GeneratorConfig, export, generate

S = StrategySpec.make
SMALL_DATA = GeneratorConfig(n_population=1200, n_features=6, n_informative=4, legacy_feature_subset=2,
                             n_legacy_train=400, unbiased_fraction=0.1, seed=5)
FAST = GbtParams(max_trees=20, early_stopping_rounds=5, max_depth=2)
THREE = (S("ignore_rejects"), S("label_all_bad"), S("hard_cutoff", threshold=0.5))


def small_cfg(out, **kw):
    base = dict(data=SMALL_DATA, scorer=FAST, k_folds=2, n_bootstraps=3, out_dir=str(out),
                strategies=THREE, selection_grid=(S("shallow_self_learning", percentage=0.02),),
                scorer_variants=(FAST, FAST.replace(max_depth=1), FAST.replace(learning_rate=0.3)))
    base.update(kw)
    return ExperimentConfig(**base)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_child_seed_is_pure_and_separates_coordinates():
    assert child_seed(7, 2, "ignore_rejects", 4) == child_seed(7, 2, "ignore_rejects", 4)
    seeds = {child_seed(m, f, k, b) for m in (0, 1) for f in (-1, 0, 1) for k in ("a", "b") for b in (-1, 0, 1)}
    assert len(seeds) == 2 * 3 * 2 * 3
    assert child_seed(2**64 - 1, 0, "x") >= 0


def test_config_invariants():
    with pytest.raises(ValueError, match="k_folds"):
        ExperimentConfig(k_folds=1)
    with pytest.raises(ValueError, match="empty"):
        ExperimentConfig(strategies=())
    with pytest.raises(ValueError, match="empty"):
        ExperimentConfig(selection_grid=())
    with pytest.raises(ValueError, match="twice"):
        ExperimentConfig(strategies=(S("ignore_rejects"), S("ignore_rejects")))
    cfg = ExperimentConfig().with_seed(9)
    assert cfg.seed == 9 and cfg.data.seed == 9
    assert len(ExperimentConfig().strategies) == 26


def test_minimal_grid_gives_one_row(tmp_path):
    cfg = small_cfg(tmp_path, strategies=(S("ignore_rejects"),))
    rep = run_experiment1(cfg)
    assert len(rep.summary) == 1 and rep.failures == []
    summary = read_csv(tmp_path / "summary_table.csv")
    assert len(summary) == 1 and summary[0]["strategy"] == "ignore_rejects"
    for m in ("accepts_auc", "accepts_brier", "accepts_rp", "unbiased_auc", "unbiased_brier", "unbiased_rp"):
        assert m in summary[0] and m + "_se" in summary[0]
    raw = read_csv(tmp_path / "raw_metrics.csv")
    assert list(raw[0]) == ["strategy", "fold", "bootstrap", "metric", "value"]
    acc = [r for r in raw if r["metric"].startswith("accepts")]
    unb = [r for r in raw if r["metric"].startswith("unbiased")]
    assert len(acc) == 2 * 3 and all(r["bootstrap"] == "" for r in acc)
    assert len(unb) == 2 * 3 * 3 and {r["bootstrap"] for r in unb} == {"0", "1", "2"}
    # fewer than three strategies: no rank test
    assert rep.friedman == [] and read_csv(tmp_path / "friedman.csv") == []
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["k_folds"] == 2 and "seed_recipe" in manifest
    assert manifest["bench"]["realized_data"]["n_unbiased"] == 120
    ko = read_csv(tmp_path / "kickout.csv")
    assert len(ko) == 1 and ko[0]["value"] != ""


def test_aggregates_recompute_exactly_from_raw_rows(tmp_path):
    run_experiment1(small_cfg(tmp_path, bench_kickout=False))
    groups = defaultdict(list)
    for r in read_csv(tmp_path / "raw_metrics.csv"):
        groups[(r["strategy"], r["metric"])].append(float(r["value"]))
    summary = read_csv(tmp_path / "summary_table.csv")
    assert len(summary) == 3
    for row in summary:
        for metric in harness.REPORT_METRICS:
            vals = groups[(row["strategy"], metric)]
            assert float(row[metric]) == math.fsum(vals) / len(vals)
            assert float(row[metric + "_se"]) == pytest.approx(np.std(vals, ddof=1) / np.sqrt(len(vals)), rel=1e-12)


def test_rank_tests_and_mean_ranks(tmp_path):
    rep = run_experiment1(small_cfg(tmp_path, bench_kickout=False))
    assert [f["metric"] for f in rep.friedman] == list(harness.REPORT_METRICS)
    for f in rep.friedman:
        assert f["k"] == 3 and f["statistic"] >= 0 and 0 <= f["pvalue"] <= 1
        assert f["n_blocks"] in (2, 2 * 3)  # folds for accepts metrics, fold x bootstrap for unbiased
        ranks = [r for m, _, r in rep.mean_ranks if m == f["metric"]]
        assert sum(ranks) == pytest.approx(6.0)
    assert len(read_csv(tmp_path / "mean_ranks.csv")) == 6 * 3


def test_representatives_pick_best_accepts_auc_per_kind():
    summary = [{"strategy": f"k{k}-{i}", "kind": f"k{k}", "folds_ok": 4, "accepts_auc": 0.5 + 0.01 * i}
               for k in range(3) for i in range(4)]
    summary[0]["folds_ok"] = 0
    assert harness._representatives(summary) == ["k0-3", "k1-3", "k2-3"]
    assert harness._representatives(summary[:10]) == [s["strategy"] for s in summary[1:10]]


def test_byte_identical_reruns_and_worker_independence(tmp_path):
    outs = []
    for name, jobs in (("a", 1), ("b", 1), ("c", 2)):
        run_experiment1(small_cfg(tmp_path / name), jobs=jobs)
        outs.append({f: (tmp_path / name / f).read_bytes()
                     for f in ("raw_metrics.csv", "summary_table.csv", "kickout.csv", "friedman.csv")})
    assert outs[0] == outs[1] == outs[2]
    run_experiment1(small_cfg(tmp_path / "d").with_seed(6))
    assert (tmp_path / "d" / "raw_metrics.csv").read_bytes() != outs[0]["raw_metrics.csv"]


def test_strategy_failure_is_recorded_and_excluded(tmp_path, monkeypatch):
    clean = run_experiment1(small_cfg(tmp_path / "clean", bench_kickout=False))
    real = harness.apply_strategy
    calls = {"n": 0}  # units run in (strategy, fold) order with jobs=1

    def fail_second_fold(spec, accepts, rejects, *args, **kw):
        if spec.kind == "label_all_bad":
            calls["n"] += 1
            if calls["n"] == 2:
                raise RuntimeError("boom")
        return real(spec, accepts, rejects, *args, **kw)

    monkeypatch.setattr(harness, "apply_strategy", fail_second_fold)
    rep = run_experiment1(small_cfg(tmp_path / "fail", bench_kickout=False))
    assert rep.failures == [("label_all_bad", 1, "RuntimeError: boom")]
    assert read_csv(tmp_path / "fail" / "failures.csv") == [
        {"strategy": "label_all_bad", "fold": "1", "error": "RuntimeError: boom"}]
    row = {e["strategy"]: e for e in rep.summary}
    assert row["label_all_bad"]["folds_ok"] == 1
    assert row["label_all_bad"]["accepts_auc_n"] == 1 and row["label_all_bad"]["unbiased_auc_n"] == 3
    assert not any(r[0] == "label_all_bad" and r[1] == 1 for r in rep.rows)
    # other strategies are untouched
    assert rep.metric_values("ignore_rejects", "unbiased_auc") == clean.metric_values("ignore_rejects", "unbiased_auc")
    # the failed fold leaves no complete block for that strategy in the rank tests
    fr = {f["metric"]: f for f in rep.friedman}
    assert fr["unbiased_auc"]["n_blocks"] == 3


def test_experiment2_identical_variants_tie_and_matrix_shape(tmp_path):
    a = S("shallow_self_learning", percentage=0.02, multiplier=2.0)
    b = S("shallow_self_learning", percentage=0.03, multiplier=1.0)
    rep = run_experiment2(small_cfg(tmp_path, selection_grid=(a, b, a)))
    p0, _, p2 = rep.points
    for key in ("accepts_auc", "unbiased_auc", "unbiased_brier", "unbiased_rp", "kickout"):
        assert p0[key] == p2[key]
    for x in harness.SELECTION_CRITERIA:
        assert rep.correlation(x, x) == 1.0
        for y in harness.SELECTION_CRITERIA:
            assert rep.correlations[(x, y)] == rep.correlations[(y, x)] or math.isnan(rep.correlation(x, y))
    corr = read_csv(tmp_path / "correlations.csv")
    assert len(corr) == 9
    points = read_csv(tmp_path / "selection_points.csv")
    assert [p["variant_id"] for p in points] == ["0", "1", "2"]
    sel = read_csv(tmp_path / "selection.csv")
    assert [s["criterion"] for s in sel] == ["accepts_auc", "kickout"]
    boot = read_csv(tmp_path / "selection_bootstrap.csv")
    assert len(boot) == 2 * 3 * 2 * 3  # criteria x metrics x folds x bootstraps


def test_pairwise_exclusion_of_missing_kickout():
    pts = [{"accepts_auc": 0.1 * i, "unbiased_auc": 0.2 * i, "kickout": None if i == 1 else -i} for i in range(5)]
    c = harness._pairwise_spearman(pts)
    assert c[("kickout", "unbiased_auc")] == (pytest.approx(-1.0), 4)
    assert c[("accepts_auc", "unbiased_auc")] == (pytest.approx(1.0), 5)


def test_diagnostics_conservation(tmp_path):
    cfg = small_cfg(tmp_path, histogram_bins=7)
    rep = export_diagnostics(cfg)
    n = generate(SMALL_DATA).partition.unbiased.n
    hist = read_csv(tmp_path / "diagnostics" / "score_histogram.csv")
    for model in ("l1_logistic", "gbt"):
        counts = [int(r["count"]) for r in hist if r["model"] == model]
        assert len(counts) == 7 and sum(counts) == n
        s = rep.spread[model]
        assert s["interdecile"] == pytest.approx(s["p90"] - s["p10"]) and s["n"] == n
    variants = read_csv(tmp_path / "diagnostics" / "scorer_variants.csv")
    assert len(variants) == len(cfg.scorer_variants)
    rho = read_csv(tmp_path / "diagnostics" / "scorer_variants_rank_correlation.csv")
    assert float(rho[0]["spearman"]) == pytest.approx(rep.variant_rank_correlation)
    assert "diag" in json.loads((tmp_path / "manifest.json").read_text())


def test_interdecile_range():
    assert harness.interdecile_range(np.arange(101) / 100) == pytest.approx(0.8)


def test_csv_source_reproduces_in_memory_run(tmp_path):
    export(generate(SMALL_DATA), tmp_path / "data", SMALL_DATA)
    src = CsvSource(str(tmp_path / "data" / "accepts.csv"), str(tmp_path / "data" / "rejects.csv"),
                    str(tmp_path / "data" / "unbiased.csv"))
    part = src.load()
    assert part.reject_oracle is None and part.rejects.n > 0
    mem = run_experiment1(small_cfg(tmp_path / "mem", bench_kickout=False))
    disk = run_experiment1(small_cfg(tmp_path / "disk", bench_kickout=False, data=src))
    assert mem.rows == disk.rows


def test_plots_are_written_when_requested(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = small_cfg(tmp_path, plots=True, scorer_variants=(FAST, FAST.replace(max_depth=1)))
    export_diagnostics(cfg)
    for name in ("score_densities.svg", "auc_scatter.svg"):
        assert (tmp_path / "diagnostics" / name).read_text().lstrip().startswith("<?xml")
