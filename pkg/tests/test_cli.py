import json
import subprocess
import sys

import pytest

from reject_inference.cli import main

TINY = """\
seed: 2
k_folds: 2
n_bootstraps: 2
data: {n_population: 1200, n_features: 6, n_informative: 4, legacy_feature_subset: 3,
       unbiased_fraction: 0.1, n_legacy_train: 600}
scorer: {max_trees: 20, early_stopping_rounds: 5, max_depth: 2}
strategies:
  - kind: ignore_rejects
  - kind: label_all_bad
selection_grid:
  - {kind: shallow_self_learning, lam: 0.01}
  - {kind: shallow_self_learning, lam: 0.01, percentage: 0.05}
  - {kind: shallow_self_learning, lam: 0.1}
scorer_variants:
  - {max_trees: 20, max_depth: 1}
  - {max_trees: 20, max_depth: 2}
  - {max_trees: 20, max_depth: 3}
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY)
    return path


def test_synth_writes_partition(tiny, tmp_path, capsys):
    out = tmp_path / "data"
    assert main(["synth", "--config", str(tiny), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"accepts.csv", "rejects.csv", "unbiased.csv"} <= names
    assert "wrote" in capsys.readouterr().out


def test_bench_is_deterministic_and_seed_overrides(tiny, tmp_path, capsys):
    a, b, c = (tmp_path / x for x in "abc")
    assert main(["bench", "--config", str(tiny), "--out", str(a)]) == 0
    assert main(["bench", "--config", str(tiny), "--out", str(b), "--jobs", "2"]) == 0
    assert main(["bench", "--config", str(tiny), "--out", str(c), "--seed", "3"]) == 0
    assert "label_all_bad" in capsys.readouterr().out
    for name in ("raw_metrics.csv", "summary_table.csv", "kickout.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "raw_metrics.csv").read_bytes() != (c / "raw_metrics.csv").read_bytes()
    manifest = json.loads((c / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3


def test_select_and_diag(tiny, tmp_path, capsys):
    assert main(["select", "--config", str(tiny), "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "spearman(kickout, unbiased_auc)" in text and "selected by kickout" in text
    assert main(["diag", "--config", str(tiny), "--out", str(tmp_path)]) == 0
    assert "interdecile" in capsys.readouterr().out
    assert (tmp_path / "diagnostics" / "score_spread.csv").exists()


def test_config_prints_loadable_yaml(tiny, tmp_path, capsys):
    assert main(["config", "--config", str(tiny), "--seed", "9"]) == 0
    printed = capsys.readouterr().out
    again = tmp_path / "again.yaml"
    again.write_text(printed)
    assert main(["config", "--config", str(again)]) == 0
    assert capsys.readouterr().out == printed
    assert "seed: 9" in printed


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("k_folds: 4\nscorer:\n  max_depth: two\n")
    assert main(["bench", "--config", str(bad)]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: ") and err.endswith("bad.yaml:3: scorer.max_depth must be int, got 'two'")
    assert main(["bench", "--config", str(tmp_path / "nope.yaml")]) == 2


@pytest.mark.parametrize("argv", [["bench", "--seed", "-1"], ["bench", "--seed", str(2**64)],
                                  ["bench", "--jobs", "0"], ["frobnicate"]])
def test_argument_errors(argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "reject_inference", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("synth", "bench", "select", "diag"):
        assert cmd in res.stdout
    sub = subprocess.run([sys.executable, "-m", "reject_inference", "bench", "--help"], capture_output=True, text=True)
    for flag in ("--config", "--seed", "--out", "--jobs"):
        assert flag in sub.stdout
