"""Benchmark, model-selection and diagnostic experiments.

Every experiment writes plain CSV files and a ``manifest.json`` into the
output directory. Random choices draw from :func:`child_seed`, a pure
function of the master seed, the fold index, a string key and the
bootstrap index. Work is split into self-contained units that may run in
worker processes; results are sorted before writing, so the CSVs are
byte-identical for a given configuration whatever ``jobs`` is.

Output layout::

    manifest.json          config, seed recipe, realized data stats, timings
    raw_metrics.csv        strategy, fold, bootstrap, metric, value (long format)
    summary_table.csv/.txt means and standard errors per strategy
    friedman.csv           Friedman statistic and Nemenyi CD per metric
    mean_ranks.csv         mean rank of each compared strategy per metric
    kickout.csv            kickout protocol result per strategy
    strategy_runs.csv      inferred-label counts per (strategy, fold)
    failures.csv           strategy runs that raised, excluded from aggregates
    selection_points.csv   per-variant accepts AUC, unbiased metrics, kickout
    correlations.csv       rank correlations between the selection criteria
    selection.csv          unbiased metrics of the variant each criterion picks
    selection_bootstrap.csv  bootstrap values behind selection.csv
    diagnostics/           score histograms and scorer-variant AUC pairs
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

import numpy as np

from .data import (
    CreditDataset,
    PartitionedData,
    SealedLabels,
    bootstrap_indices,
    load_csv,
    stratified_kfold,
)
from .kickout import KickoutProtocolConfig, kickout_protocol
from .learners import GbtParams, fit_l1_logistic
from .metrics import auc, brier, friedman_test, nemenyi_cd, r_precision, spearman
from .strategies import (
    ShallowConfig,
    StrategySpec,
    apply_strategy,
    fit_scorer,
    shallow_grid,
    table3_grid,
    tune_lambda,
)
from .synthgen import GeneratorConfig, generate

METRICS = ("auc", "brier", "rp")
SAMPLES = ("accepts", "unbiased")
REPORT_METRICS = tuple(f"{s}_{m}" for s in SAMPLES for m in METRICS)
LOWER_IS_BETTER = {"accepts_brier", "unbiased_brier"}
SELECTION_CRITERIA = ("accepts_auc", "unbiased_auc", "kickout")
KICKOUT_COUNTS = ("k_bad", "k_good", "s_bad", "a1_size", "a2_size", "rejects_in_a2")


def child_seed(master: int, fold: int, key: str, bootstrap: int = -1) -> int:
    """Seed for one random choice, derived only from its coordinates.

    ``fold`` and ``bootstrap`` use -1 for "not applicable".
    """
    ss = np.random.SeedSequence([int(master), fold + 1, zlib.crc32(key.encode()), bootstrap + 1])
    return int(ss.generate_state(1)[0])


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class CsvSource:
    """Partition stored as CSV files in the format written by ``synth``."""

    accepts: str
    rejects: str
    unbiased: str
    label_column: str = "bad"
    id_column: str | None = "id"
    reject_labels: str | None = None

    def load(self) -> PartitionedData:
        acc = load_csv(self.accepts, label_column=self.label_column, id_column=self.id_column)
        rej = load_csv(self.rejects, id_column=self.id_column)
        unb = load_csv(self.unbiased, label_column=self.label_column, id_column=self.id_column)
        oracle = None
        if self.reject_labels:
            lab = load_csv(self.reject_labels, label_column=self.label_column, id_column=self.id_column)
            oracle = SealedLabels(lab.ids, lab.labels)
        return PartitionedData(acc, rej, unb, oracle)


def default_scorer_variants() -> tuple:
    """Boosting meta-parameter grid for the accepts-vs-unbiased AUC diagnostic."""
    return tuple(GbtParams(max_depth=d, learning_rate=lr) for d in (1, 2, 3, 5) for lr in (0.05, 0.1, 0.3))


@dataclass(frozen=True)
class ExperimentConfig:
    data: GeneratorConfig | CsvSource = GeneratorConfig()
    strategies: tuple = field(default_factory=lambda: tuple(table3_grid()))
    selection_grid: tuple = field(default_factory=lambda: tuple(shallow_grid()))
    k_folds: int = 4
    n_bootstraps: int = 50
    scorer: GbtParams = GbtParams()
    kickout: KickoutProtocolConfig = KickoutProtocolConfig()
    bench_kickout: bool = True
    rp_accept_fraction: float = 0.3
    histogram_bins: int = 20
    scorer_variants: tuple = field(default_factory=default_scorer_variants)
    plots: bool = False
    seed: int = 0
    out_dir: str = "results"

    def __post_init__(self):
        if not self.strategies:
            raise ValueError("strategies grid is empty")
        if not self.selection_grid:
            raise ValueError("selection_grid is empty")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if self.n_bootstraps < 0:
            raise ValueError("n_bootstraps must be >= 0")
        if not 0 < self.rp_accept_fraction <= 1:
            raise ValueError("rp_accept_fraction must be in (0, 1]")
        if self.histogram_bins < 1:
            raise ValueError("histogram_bins must be >= 1")
        labels = [s.label for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise ValueError("strategies lists the same strategy twice")

    def with_seed(self, seed: int) -> ExperimentConfig:
        """Same experiment under another master seed; synthetic data is redrawn too."""
        data = replace(self.data, seed=seed) if isinstance(self.data, GeneratorConfig) else self.data
        return replace(self, seed=seed, data=data)

    def to_dict(self) -> dict:
        return _plain(self)


def _plain(obj):
    if isinstance(obj, StrategySpec):
        return {"kind": obj.kind, **{k: v for k, v in obj.params if v is not None}}
    if isinstance(obj, KickoutProtocolConfig):
        # the harness supplies the scorer and a derived seed
        return {k: getattr(obj, k) for k in ("mu", "accept_split", "reject_split", "a2_size")}
    if is_dataclass(obj):
        out = {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
        if isinstance(obj, (GeneratorConfig, CsvSource)):
            out = {"source": "synthetic" if isinstance(obj, GeneratorConfig) else "csv", **out}
        return out
    if isinstance(obj, (tuple, list)):
        return [_plain(x) for x in obj]
    return obj


def load_partition(cfg: ExperimentConfig) -> tuple[PartitionedData, dict]:
    if isinstance(cfg.data, GeneratorConfig):
        sim = generate(cfg.data)
        return sim.partition, sim.stats()
    p = cfg.data.load()
    stats = {"n_accepts": p.accepts.n, "n_rejects": p.rejects.n, "n_unbiased": p.unbiased.n,
             "n_features": p.accepts.d, "accepts_bad_rate": p.accepts.bad_rate,
             "unbiased_bad_rate": p.unbiased.bad_rate}
    return p, stats


# ---------------------------------------------------------------- work units


@dataclass
class _Context:
    partition: PartitionedData
    cfg: ExperimentConfig
    fold_of: np.ndarray
    lam_cache: dict = field(default_factory=dict)


_CTX: _Context | None = None


def _init_worker(ctx: _Context):
    global _CTX
    _CTX = ctx


def _fold_data(ctx: _Context, fold: int) -> tuple[CreditDataset, CreditDataset]:
    acc = ctx.partition.accepts
    return acc.subset(ctx.fold_of != fold), acc.subset(ctx.fold_of == fold)


def _fold_lambda(ctx: _Context, fold: int, train: CreditDataset) -> float:
    if fold not in ctx.lam_cache:
        ctx.lam_cache[fold] = tune_lambda(train, ShallowConfig().lam_grid, child_seed(ctx.cfg.seed, fold, "lambda"))
    return ctx.lam_cache[fold]


def _metric_values(y, p, rp_fraction) -> dict:
    return {"auc": auc(y, p), "brier": brier(y, p), "rp": r_precision(y, p, rp_fraction)}


def _cv_unit(ctx: _Context, index: int, spec: StrategySpec, fold: int, n_boot: int, full_unbiased: bool) -> dict:
    cfg = ctx.cfg
    master = cfg.seed
    label = spec.label
    train, test = _fold_data(ctx, fold)
    out = {"index": index, "strategy": label, "fold": fold, "rows": [], "failure": None, "run": None}
    try:
        lam = _fold_lambda(ctx, fold, train) if spec.kind == "shallow_self_learning" else None
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            aug = apply_strategy(spec, train, ctx.partition.rejects, cfg.scorer,
                                 child_seed(master, fold, "strategy:" + label), tuned_lam=lam)
        model = fit_scorer(aug.dataset, cfg.scorer, child_seed(master, fold, "scorer"))
    except Exception as exc:  # recorded and excluded, never imputed
        out["failure"] = f"{type(exc).__name__}: {exc}"
        return out
    prov = aug.provenance
    out["run"] = {"n_inferred_good": int((prov == 1).sum()), "n_inferred_bad": int((prov == 2).sum()),
                  "iterations": aug.iterations_used,
                  "note": "; ".join(sorted({str(w.message).split(";")[0] for w in caught}))}
    rows = out["rows"]
    for m, v in _metric_values(test.labels, model.predict_proba(test.features), cfg.rp_accept_fraction).items():
        rows.append((label, fold, -1, f"accepts_{m}", v))
    unb = ctx.partition.unbiased
    p_unb = model.predict_proba(unb.features)
    if full_unbiased:
        for m, v in _metric_values(unb.labels, p_unb, cfg.rp_accept_fraction).items():
            rows.append((label, fold, -1, f"unbiased_{m}", v))
    for b in range(n_boot):
        idx = bootstrap_indices(unb.n, child_seed(master, fold, "bootstrap", b))
        y = unb.labels[idx]
        if y.min() == y.max():
            continue  # a one-class resample has no AUC; the block is dropped
        for m, v in _metric_values(y, p_unb[idx], cfg.rp_accept_fraction).items():
            rows.append((label, fold, b, f"unbiased_{m}", v))
    return out


def _kickout_unit(ctx: _Context, index: int, spec: StrategySpec) -> dict:
    cfg = ctx.cfg
    kcfg = replace(cfg.kickout, scorer=cfg.scorer, seed=child_seed(cfg.seed, -1, "kickout"))

    def run(a_train, r_train, seed):
        # every variant sees the same accepts split, so lambda is tuned once per protocol
        lam = None
        if spec.kind == "shallow_self_learning":
            if "kickout" not in ctx.lam_cache:
                ctx.lam_cache["kickout"] = tune_lambda(a_train, ShallowConfig().lam_grid,
                                                       child_seed(cfg.seed, -1, "kickout-lambda"))
            lam = ctx.lam_cache["kickout"]
        return apply_strategy(spec, a_train, r_train, cfg.scorer, seed, tuned_lam=lam)

    out = {"index": index, "strategy": spec.label, "result": None, "failure": None}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = kickout_protocol(ctx.partition, run, kcfg,
                                   strategy_seed=child_seed(cfg.seed, -1, "kickout:" + spec.label))
        out["result"] = asdict(res)
    except Exception as exc:
        out["failure"] = f"{type(exc).__name__}: {exc}"
    return out


def _variant_unit(ctx: _Context, index: int, params: GbtParams, fold: int) -> dict:
    train, test = _fold_data(ctx, fold)
    model = fit_scorer(train, params, child_seed(ctx.cfg.seed, fold, f"variant:{index}"))
    unb = ctx.partition.unbiased
    return {"variant": index, "fold": fold,
            "accepts_auc": auc(test.labels, model.predict_proba(test.features)),
            "unbiased_auc": auc(unb.labels, model.predict_proba(unb.features))}


def _run_task(task):
    kind, *args = task
    if kind == "cv":
        return _cv_unit(_CTX, *args)
    if kind == "kickout":
        return _kickout_unit(_CTX, *args)
    return _variant_unit(_CTX, *args)


def _execute(ctx: _Context, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        _init_worker(ctx)
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as pool:
        return list(pool.map(_run_task, tasks, chunksize=1))


def _context(cfg: ExperimentConfig, partition: PartitionedData) -> _Context:
    folds = stratified_kfold(partition.accepts, cfg.k_folds, child_seed(cfg.seed, -1, "folds"))
    return _Context(partition, cfg, folds.fold)


# ---------------------------------------------------------------- output helpers


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _mean_se(values) -> tuple[float, float]:
    """Exactly rounded mean (order-independent) and standard error."""
    n = len(values)
    if n == 0:
        return float("nan"), float("nan")
    mean = math.fsum(values) / n
    se = statistics.stdev(values) / math.sqrt(n) if n > 1 else float("nan")
    return mean, se


def _update_manifest(out: Path, cfg: ExperimentConfig, section: str, info: dict):
    path = out / "manifest.json"
    manifest = json.loads(path.read_text()) if path.exists() else {}
    manifest["config"] = cfg.to_dict()
    manifest["seed_recipe"] = ("SeedSequence([master, fold + 1, crc32(key), bootstrap + 1]); "
                               "fold/bootstrap -1 when not applicable")
    manifest[section] = info
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _aligned(header, rows) -> str:
    cells = [list(header)] + [[_fmt(v) if not isinstance(v, float) else f"{v:.4f}" for v in r] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    lines = ["  ".join(c[i].ljust(widths[i]) if i == 0 else c[i].rjust(widths[i]) for i in range(len(c)))
             for c in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- experiment I


@dataclass
class EvaluationReport:
    rows: list            # (strategy, fold, bootstrap, metric, value); bootstrap -1 = held-out fold / full sample
    summary: list         # dicts, one per strategy, grid order
    friedman: list        # dicts, one per metric
    mean_ranks: list      # (metric, strategy, mean rank)
    kickout: dict         # strategy label -> kickout value or None
    runs: list            # (strategy, fold, n_good, n_bad, iterations, note)
    failures: list        # (strategy, fold, message)
    stats: dict

    def metric_values(self, strategy: str, metric: str) -> list:
        return [r[4] for r in self.rows if r[0] == strategy and r[3] == metric]


def _collect(results: list) -> tuple[list, dict]:
    """CV units sorted by (grid index, fold) and kickout units keyed by grid index."""
    cv = sorted((r for r in results if "rows" in r), key=lambda u: (u["index"], u["fold"]))
    for u in cv:
        u["rows"].sort(key=lambda r: (r[2], REPORT_METRICS.index(r[3])))
    return cv, {r["index"]: r for r in results if "result" in r}


def _failures(cv: list, ko: dict) -> list:
    out = [(u["strategy"], u["fold"], u["failure"]) for u in cv if u["failure"]]
    return out + [(ko[i]["strategy"], -1, ko[i]["failure"]) for i in sorted(ko) if ko[i]["failure"]]


def _representatives(summary: list) -> list:
    """Strategies entering the rank tests: all of them when at most ten,
    otherwise the variant of each kind with the best mean accepts AUC."""
    ok = [s for s in summary if s["folds_ok"] > 0]
    if len(ok) <= 10:
        return [s["strategy"] for s in ok]
    best = {}
    for s in ok:
        cur = best.get(s["kind"])
        if cur is None or s["accepts_auc"] > cur["accepts_auc"]:
            best[s["kind"]] = s
    return [s["strategy"] for s in ok if best.get(s["kind"]) is s]


def _rank_tests(rows: list, reps: list) -> tuple[list, list]:
    results, ranks = [], []
    if len(reps) < 3:
        return results, ranks
    for metric in REPORT_METRICS:
        blocks: dict = {}
        for strat, fold, boot, m, v in rows:
            if m == metric and strat in reps:
                blocks.setdefault((fold, boot), {})[strat] = v
        complete = sorted(k for k, d in blocks.items() if len(d) == len(reps))
        if len(complete) < 2:
            continue
        mat = np.array([[blocks[k][s] for k in complete] for s in reps])
        fr = friedman_test(mat, higher_is_better=metric not in LOWER_IS_BETTER)
        k = len(reps)
        cd = nemenyi_cd(k, len(complete)) if k <= 10 else float("nan")
        results.append({"metric": metric, "k": k, "n_blocks": len(complete), "statistic": fr.statistic,
                        "pvalue": fr.pvalue, "critical_difference": cd})
        ranks += [(metric, s, float(r)) for s, r in zip(reps, fr.mean_ranks)]
    return results, ranks


def run_experiment1(cfg: ExperimentConfig, jobs: int = 1, partition: PartitionedData | None = None,
                    write: bool = True) -> EvaluationReport:
    """Benchmark every strategy of ``cfg.strategies`` under k-fold CV on the accepts.

    Each (strategy, fold) run labels rejects from the training folds,
    fits the scorer on the augmented set and is scored on the held-out
    fold and on ``n_bootstraps`` resamples of the unbiased sample.
    """
    t0 = time.perf_counter()
    stats = None
    if partition is None:
        partition, stats = load_partition(cfg)
    ctx = _context(cfg, partition)
    specs = list(cfg.strategies)
    tasks = [("cv", i, s, f, cfg.n_bootstraps, False) for i, s in enumerate(specs) for f in range(cfg.k_folds)]
    if cfg.bench_kickout:
        tasks += [("kickout", i, s) for i, s in enumerate(specs)]
    cv, ko = _collect(_execute(ctx, tasks, jobs))

    rows = [r for u in cv for r in u["rows"]]
    failures = _failures(cv, ko)
    runs = [(u["strategy"], u["fold"], u["run"]["n_inferred_good"], u["run"]["n_inferred_bad"],
             u["run"]["iterations"], u["run"]["note"]) for u in cv if u["run"]]
    kick = {s.label: (ko[i]["result"] or {}).get("value") if i in ko else None for i, s in enumerate(specs)}

    summary = []
    for i, s in enumerate(specs):
        mine = [u for u in cv if u["index"] == i]
        entry = {"strategy": s.label, "kind": s.kind, "folds_ok": sum(1 for u in mine if not u["failure"])}
        for metric in REPORT_METRICS:
            vals = [r[4] for u in mine for r in u["rows"] if r[3] == metric]
            entry[metric], entry[metric + "_se"] = _mean_se(vals)
            entry[metric + "_n"] = len(vals)
        entry["kickout"] = kick[s.label]
        summary.append(entry)
    friedman, ranks = _rank_tests(rows, _representatives(summary))
    report = EvaluationReport(rows, summary, friedman, ranks, kick, runs, failures, stats or {})

    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "raw_metrics.csv", ["strategy", "fold", "bootstrap", "metric", "value"],
                   [(a, b, "" if c < 0 else c, d, e) for a, b, c, d, e in rows])
        cols = ["strategy", "kind", "folds_ok"] + [c for m in REPORT_METRICS for c in (m, m + "_se")] + ["kickout"]
        _write_csv(out / "summary_table.csv", cols, [[e[c] for c in cols] for e in summary])
        short = ["strategy"] + list(REPORT_METRICS) + ["kickout"]
        text = _aligned(short, [[e[c] for c in short] for e in summary])
        if friedman:
            text += "\n" + _aligned(["metric", "k", "n_blocks", "statistic", "pvalue", "critical_difference"],
                                    [[f[c] for c in ("metric", "k", "n_blocks", "statistic", "pvalue",
                                                     "critical_difference")] for f in friedman])
        (out / "summary_table.txt").write_text(text, encoding="utf-8")
        _write_csv(out / "friedman.csv", ["metric", "k", "n_blocks", "statistic", "pvalue", "critical_difference"],
                   [[f[c] for c in ("metric", "k", "n_blocks", "statistic", "pvalue", "critical_difference")]
                    for f in friedman])
        _write_csv(out / "mean_ranks.csv", ["metric", "strategy", "mean_rank"], ranks)
        kcols = ["value", *KICKOUT_COUNTS]
        _write_csv(out / "kickout.csv", ["strategy"] + kcols,
                   [[s.label] + [(ko[i]["result"] or {}).get(c) if i in ko else None for c in kcols]
                    for i, s in enumerate(specs)])
        _write_csv(out / "strategy_runs.csv",
                   ["strategy", "fold", "n_inferred_good", "n_inferred_bad", "iterations", "note"], runs)
        _write_csv(out / "failures.csv", ["strategy", "fold", "error"], failures)
        _update_manifest(out, cfg, "bench", {
            "n_strategies": len(specs), "n_units": len(tasks), "n_failures": len(failures),
            "compared_in_rank_tests": _representatives(summary), "realized_data": stats,
            "seconds": round(time.perf_counter() - t0, 3)})
    return report


# ---------------------------------------------------------------- experiment II


@dataclass
class SelectionReport:
    points: list          # dicts per variant: accepts_auc, unbiased_auc/brier/rp, kickout
    correlations: dict    # (criterion_a, criterion_b) -> (spearman, n)
    selection: list       # dicts per selecting criterion
    bootstrap: list       # (criterion, variant, bootstrap, metric, value)
    failures: list
    stats: dict

    def correlation(self, a: str, b: str) -> float:
        return self.correlations[(a, b)][0]


def _pairwise_spearman(points: list) -> dict:
    out = {}
    for a in SELECTION_CRITERIA:
        for b in SELECTION_CRITERIA:
            pairs = [(p[a], p[b]) for p in points if p[a] is not None and p[b] is not None
                     and not (isinstance(p[a], float) and math.isnan(p[a]))
                     and not (isinstance(p[b], float) and math.isnan(p[b]))]
            if len(pairs) < 2:
                out[(a, b)] = (float("nan"), len(pairs))
                continue
            x, y = np.array(pairs).T
            out[(a, b)] = (1.0 if a == b else spearman(x, y), len(pairs))
    return out


def run_experiment2(cfg: ExperimentConfig, jobs: int = 1, partition: PartitionedData | None = None,
                    write: bool = True) -> SelectionReport:
    """Compare accepts AUC, unbiased AUC and kickout as model-selection criteria.

    Every variant of ``cfg.selection_grid`` is cross-validated on the
    accepts (accepts AUC and full-sample unbiased metrics, averaged over
    folds) and run through the kickout protocol. The variants picked by
    accepts AUC and by kickout are then compared on the unbiased sample.
    """
    t0 = time.perf_counter()
    stats = None
    if partition is None:
        partition, stats = load_partition(cfg)
    ctx = _context(cfg, partition)
    specs = list(cfg.selection_grid)
    tasks = [("cv", i, s, f, cfg.n_bootstraps, True) for i, s in enumerate(specs) for f in range(cfg.k_folds)]
    tasks += [("kickout", i, s) for i, s in enumerate(specs)]
    cv, ko = _collect(_execute(ctx, tasks, jobs))
    failures = _failures(cv, ko)

    points = []
    for i, s in enumerate(specs):
        units = [u for u in cv if u["index"] == i and not u["failure"]]
        p = {"variant_id": i, "variant": s.label, "folds_ok": len(units)}
        for metric in ("accepts_auc", "unbiased_auc", "unbiased_brier", "unbiased_rp"):
            vals = [r[4] for u in units for r in u["rows"] if r[3] == metric and r[2] == -1]
            p[metric] = _mean_se(vals)[0] if vals else None
        res = (ko[i]["result"] if i in ko else None) or {}
        p["kickout"] = res.get("value")
        for c in KICKOUT_COUNTS:
            p["kickout_" + c] = res.get(c)
        points.append(p)

    corr = _pairwise_spearman(points)
    selection, boot_rows = [], []
    for criterion in ("accepts_auc", "kickout"):
        cands = [p for p in points if p[criterion] is not None]
        if not cands:
            selection.append({"criterion": criterion, "variant": None})
            continue
        best = max(cands, key=lambda p: p[criterion])  # first in grid order on ties
        entry = {"criterion": criterion, "variant_id": best["variant_id"], "variant": best["variant"],
                 "criterion_value": best[criterion]}
        units = [u for u in cv if u["index"] == best["variant_id"] and not u["failure"]]
        for metric in ("unbiased_auc", "unbiased_brier", "unbiased_rp"):
            vals = [r[4] for u in units for r in u["rows"] if r[3] == metric and r[2] >= 0]
            entry[metric], entry[metric + "_se"] = _mean_se(vals)
            boot_rows += [(criterion, best["variant"], u["fold"], r[2], metric, r[4])
                          for u in units for r in u["rows"] if r[3] == metric and r[2] >= 0]
        selection.append(entry)
    boot_rows.sort(key=lambda r: (r[0], r[2], r[3], r[4]))
    report = SelectionReport(points, corr, selection, boot_rows, failures, stats or {})

    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        pcols = ["variant_id", "variant", "folds_ok", "accepts_auc", "unbiased_auc", "unbiased_brier", "unbiased_rp",
                 "kickout"] + ["kickout_" + c for c in KICKOUT_COUNTS]
        _write_csv(out / "selection_points.csv", pcols, [[p[c] for c in pcols] for p in points])
        _write_csv(out / "correlations.csv", ["criterion_a", "criterion_b", "spearman", "n"],
                   [(a, b, *corr[(a, b)]) for a in SELECTION_CRITERIA for b in SELECTION_CRITERIA])
        scols = ["criterion", "variant_id", "variant", "criterion_value", "unbiased_auc", "unbiased_auc_se",
                 "unbiased_brier", "unbiased_brier_se", "unbiased_rp", "unbiased_rp_se"]
        _write_csv(out / "selection.csv", scols, [[e.get(c) for c in scols] for e in selection])
        _write_csv(out / "selection_bootstrap.csv", ["criterion", "variant", "fold", "bootstrap", "metric", "value"],
                   boot_rows)
        _write_csv(out / "selection_failures.csv", ["variant", "fold", "error"], failures)
        if cfg.plots:
            from . import plots
            plots.selection_figure(boot_rows, out / "selection.svg")
        _update_manifest(out, cfg, "select", {
            "n_variants": len(specs), "n_units": len(tasks), "n_failures": len(failures),
            "realized_data": stats, "seconds": round(time.perf_counter() - t0, 3)})
    return report


# ---------------------------------------------------------------- diagnostics


def interdecile_range(scores) -> float:
    p10, p90 = np.percentile(scores, [10, 90])
    return float(p90 - p10)


@dataclass
class DiagnosticsReport:
    histograms: list      # (model, bin_lo, bin_hi, count)
    spread: dict          # model -> {"p10", "p50", "p90", "interdecile", "n"}
    variants: list        # dicts: variant params + accepts_auc + unbiased_auc
    variant_rank_correlation: float


def export_diagnostics(cfg: ExperimentConfig, jobs: int = 1, partition: PartitionedData | None = None,
                       write: bool = True) -> DiagnosticsReport:
    """Score-spread and AUC-disagreement diagnostics.

    Both learners are fitted on the same accepts and score the unbiased
    sample. Then each boosting variant of ``cfg.scorer_variants`` is
    cross-validated on the accepts and also scored on the unbiased sample.
    """
    t0 = time.perf_counter()
    stats = None
    if partition is None:
        partition, stats = load_partition(cfg)
    acc, unb = partition.accepts, partition.unbiased
    master = cfg.seed
    lam = tune_lambda(acc, ShallowConfig().lam_grid, child_seed(master, -1, "diag-lambda"))
    scores = {
        "l1_logistic": fit_l1_logistic(acc.features, acc.labels, lam).predict_proba(unb.features),
        "gbt": fit_scorer(acc, cfg.scorer, child_seed(master, -1, "diag-scorer")).predict_proba(unb.features),
    }
    edges = np.linspace(0.0, 1.0, cfg.histogram_bins + 1)
    hist, spread = [], {}
    for name, s in scores.items():
        counts, _ = np.histogram(s, bins=edges)
        hist += [(name, float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
        p10, p50, p90 = (float(v) for v in np.percentile(s, [10, 50, 90]))
        spread[name] = {"n": len(s), "p10": p10, "p50": p50, "p90": p90, "interdecile": p90 - p10}

    ctx = _context(cfg, partition)
    tasks = [("variant", i, v, f) for i, v in enumerate(cfg.scorer_variants) for f in range(cfg.k_folds)]
    units = _execute(ctx, tasks, jobs)
    variants = []
    for i, v in enumerate(cfg.scorer_variants):
        mine = sorted((u for u in units if u["variant"] == i), key=lambda u: u["fold"])
        variants.append({"variant": i, **asdict(v),
                         "accepts_auc": _mean_se([u["accepts_auc"] for u in mine])[0],
                         "unbiased_auc": _mean_se([u["unbiased_auc"] for u in mine])[0]})
    rho = (spearman([v["accepts_auc"] for v in variants], [v["unbiased_auc"] for v in variants])
           if len(variants) > 1 else float("nan"))
    report = DiagnosticsReport(hist, spread, variants, rho)

    if write:
        out = Path(cfg.out_dir) / "diagnostics"
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "score_histogram.csv", ["model", "bin_lo", "bin_hi", "count"], hist)
        _write_csv(out / "score_spread.csv", ["model", "n", "p10", "p50", "p90", "interdecile"],
                   [[m] + [d[c] for c in ("n", "p10", "p50", "p90", "interdecile")] for m, d in spread.items()])
        vcols = list(variants[0]) if variants else ["variant"]
        _write_csv(out / "scorer_variants.csv", vcols, [[v[c] for c in vcols] for v in variants])
        _write_csv(out / "scorer_variants_rank_correlation.csv", ["spearman", "n_variants"], [(rho, len(variants))])
        if cfg.plots:
            from . import plots
            plots.score_densities(scores, edges, out / "score_densities.svg")
            plots.auc_scatter(variants, rho, out / "auc_scatter.svg")
        _update_manifest(Path(cfg.out_dir), cfg, "diag", {
            "l1_lambda": lam, "n_variants": len(variants), "realized_data": stats,
            "seconds": round(time.perf_counter() - t0, 3)})
    return report
