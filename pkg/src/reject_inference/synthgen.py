"""Synthetic through-the-door population with a biased legacy acceptance policy.

The population is drawn from a mixture of correlated Gaussians. Default
risk is a logistic function of the informative features, a few pairwise
interactions and idiosyncratic noise. A legacy scorecard that only sees
part of the informative features decides who was accepted, so the accepts
are a biased sample while the rejects still carry learnable signal.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .data import CreditDataset, PartitionedData, SealedLabels, write_csv
from .learners.logistic import fit_l1_logistic
from .metrics import auc


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n_population: int = 6000
    n_features: int = 30
    n_informative: int = 12
    noise_scale: float = 0.5
    legacy_feature_subset: int = 6
    acceptance_rate: float = 0.66
    unbiased_fraction: float = 0.05
    target_bad_rate: float = 0.525  # population rate; selection pushes the accepts below it
    signal_scale: float = 2.5
    n_interactions: int = 3
    n_components: int = 2
    n_legacy_train: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_informative <= self.n_features:
            raise ValueError("need 1 <= n_informative <= n_features")
        if not 1 <= self.legacy_feature_subset <= self.n_informative:
            raise ValueError("need 1 <= legacy_feature_subset <= n_informative")
        for name in ("acceptance_rate", "unbiased_fraction", "target_bad_rate"):
            v = getattr(self, name)
            if not 0 < v <= 1 if name == "acceptance_rate" else not 0 < v < 1:
                raise ValueError(f"{name} out of range: {v}")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if self.n_population < 10:
            raise ValueError("n_population too small")


@dataclass(frozen=True)
class _Truth:
    """Parameters shared by every draw from one configuration."""

    means: np.ndarray        # (n_components, d)
    loadings: np.ndarray     # (d, d) mixing matrix
    weights: np.ndarray      # mixture weights
    beta: np.ndarray         # (n_informative,)
    pairs: np.ndarray        # (n_interactions, 2) feature indices
    gamma: np.ndarray        # (n_interactions,)
    legacy_features: np.ndarray


def _truth(cfg: GeneratorConfig) -> _Truth:
    rng = np.random.default_rng([cfg.seed, 0])
    d, k = cfg.n_features, cfg.n_informative
    means = rng.normal(scale=0.75, size=(cfg.n_components, d))
    # low-rank plus diagonal correlation structure
    factors = rng.normal(scale=0.5, size=(d, 3))
    cov = factors @ factors.T + np.eye(d)
    sd = np.sqrt(np.diag(cov))
    cov = cov / np.outer(sd, sd)
    loadings = np.linalg.cholesky(cov)
    weights = rng.dirichlet(np.full(cfg.n_components, 4.0))
    mag = np.linspace(1.0, 0.3, k)
    beta = mag * rng.choice([-1.0, 1.0], size=k)
    n_inter = cfg.n_interactions if k >= 2 else 0
    pairs = np.array([rng.choice(k, size=2, replace=False) for _ in range(n_inter)], dtype=int).reshape(-1, 2)
    gamma = rng.normal(scale=0.3, size=n_inter)
    legacy = np.arange(cfg.legacy_feature_subset)
    return _Truth(means, loadings, weights, beta, pairs, gamma, legacy)


def _draw(truth: _Truth, n: int, cfg: GeneratorConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """Features and the risk index without intercept."""
    comp = rng.choice(len(truth.weights), size=n, p=truth.weights)
    X = truth.means[comp] + rng.standard_normal((n, cfg.n_features)) @ truth.loadings.T
    Xi = X[:, : cfg.n_informative]
    lin = Xi @ truth.beta
    inter = (Xi[:, truth.pairs[:, 0]] * Xi[:, truth.pairs[:, 1]]) @ truth.gamma if len(truth.gamma) else 0.0
    return X, lin + inter


def _index_scale(truth: _Truth, cfg: GeneratorConfig) -> tuple[float, float]:
    rng = np.random.default_rng([cfg.seed, 1])
    _, idx = _draw(truth, 20000, cfg, rng)
    return float(idx.mean()), float(idx.std())


def calibrate_intercept(index: np.ndarray, target: float, max_iter: int = 200, tol: float = 1e-10) -> float:
    """Intercept ``b`` with ``mean(sigmoid(index + b)) == target``, by bisection."""
    lo, hi = -50.0, 50.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        rate = float(expit(index + mid).mean())
        if abs(rate - target) < tol:
            return mid
        if rate < target:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"bisection did not reach bad rate {target} (last {rate:.6f})")


@dataclass(frozen=True, eq=False)
class Population:
    dataset: CreditDataset   # labeled
    true_pd: np.ndarray
    intercept: float


def generate_population(cfg: GeneratorConfig) -> Population:
    truth = _truth(cfg)
    center, spread = _index_scale(truth, cfg)
    rng = np.random.default_rng([cfg.seed, 2])
    X, idx = _draw(truth, cfg.n_population, cfg, rng)
    idx = cfg.signal_scale * (idx - center) / spread
    idx = idx + cfg.noise_scale * rng.standard_normal(cfg.n_population)
    b = calibrate_intercept(idx, cfg.target_bad_rate)
    pd_true = expit(idx + b)
    y = (rng.random(cfg.n_population) < pd_true).astype(np.int8)
    ids = np.char.add("c", np.char.zfill(np.arange(cfg.n_population).astype(str), 6))
    return Population(CreditDataset(ids, X, y), pd_true, b)


@dataclass(frozen=True, eq=False)
class SimulatedLending:
    partition: PartitionedData
    population: Population
    legacy_auc_unbiased: float
    true_pd_auc_unbiased: float

    def stats(self) -> dict:
        p = self.partition
        rej_bad = float(p.reject_oracle.reveal().mean()) if p.rejects.n else float("nan")
        return {
            "n_accepts": p.accepts.n,
            "n_rejects": p.rejects.n,
            "n_unbiased": p.unbiased.n,
            "n_features": p.accepts.d,
            "population_bad_rate": self.population.dataset.bad_rate,
            "accepts_bad_rate": p.accepts.bad_rate,
            "rejects_bad_rate": rej_bad,
            "unbiased_bad_rate": p.unbiased.bad_rate,
            "unbiased_to_accepts_ratio": p.unbiased.bad_rate / p.accepts.bad_rate,
            "legacy_auc_unbiased": self.legacy_auc_unbiased,
            "true_pd_auc_unbiased": self.true_pd_auc_unbiased,
        }


def simulate_acceptance(population: Population, cfg: GeneratorConfig) -> SimulatedLending:
    """Split a population into accepts, rejects and an unbiased sample.

    The unbiased sample is a uniform draw that bypasses scoring. The rest
    is scored by a legacy L1-logistic scorecard restricted to
    ``legacy_feature_subset`` features and trained on a separate draw; the
    ``acceptance_rate`` lowest-PD applicants become accepts.
    """
    pop = population.dataset
    rng = np.random.default_rng([cfg.seed, 3])
    n = pop.n
    perm = rng.permutation(n)
    n_unb = int(round(cfg.unbiased_fraction * n))
    unb_idx, rest_idx = np.sort(perm[:n_unb]), np.sort(perm[n_unb:])

    truth = _truth(cfg)
    center, spread = _index_scale(truth, cfg)
    X_leg, idx_leg = _draw(truth, cfg.n_legacy_train, cfg, rng)
    idx_leg = cfg.signal_scale * (idx_leg - center) / spread
    idx_leg += cfg.noise_scale * rng.standard_normal(cfg.n_legacy_train)
    y_leg = (rng.random(cfg.n_legacy_train) < expit(idx_leg + population.intercept)).astype(np.int8)
    cols = truth.legacy_features
    legacy = fit_l1_logistic(X_leg[:, cols], y_leg, lam=0.001)

    pd_rest = legacy.predict_proba(pop.features[rest_idx][:, cols])
    n_acc = int(round(cfg.acceptance_rate * len(rest_idx)))
    order = np.argsort(pd_rest, kind="stable")
    acc_idx = np.sort(rest_idx[order[:n_acc]])
    rej_idx = np.sort(rest_idx[order[n_acc:]])
    if min(len(acc_idx), n_unb) == 0:
        raise ValueError("configuration leaves accepts or unbiased sample empty")

    rejects = pop.subset(rej_idx)
    partition = PartitionedData(
        accepts=pop.subset(acc_idx),
        rejects=rejects.without_labels(),
        unbiased=pop.subset(unb_idx),
        reject_oracle=SealedLabels(rejects.ids, rejects.labels),
    )
    unb = pop.subset(unb_idx)
    return SimulatedLending(
        partition=partition,
        population=population,
        legacy_auc_unbiased=auc(unb.labels, legacy.predict_proba(unb.features[:, cols])),
        true_pd_auc_unbiased=auc(unb.labels, population.true_pd[unb_idx]),
    )


def generate(cfg: GeneratorConfig = GeneratorConfig()) -> SimulatedLending:
    return simulate_acceptance(generate_population(cfg), cfg)


def export(sim: SimulatedLending, out_dir, cfg: GeneratorConfig) -> dict:
    """Write accepts/rejects/unbiased CSVs, the sealed reject labels and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = sim.partition
    write_csv(p.accepts, out / "accepts.csv")
    write_csv(p.rejects, out / "rejects.csv")
    write_csv(p.unbiased, out / "unbiased.csv")
    with (out / "rejects_labels_oracle.csv").open("w", encoding="utf-8") as fh:
        fh.write("id,bad\n")
        for i, y in zip(p.rejects.ids, p.reject_oracle.reveal()):
            fh.write(f"{i},{int(y)}\n")
    manifest = {"generator_config": asdict(cfg), "realized": sim.stats(),
                "files": ["accepts.csv", "rejects.csv", "unbiased.csv", "rejects_labels_oracle.csv"]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
