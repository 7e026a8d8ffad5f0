"""Synthetic benchmarks, hold-out cross-validation, metrics, and experiment runs.

The synthetic protocol: inputs x uniform on [-pi, pi], outputs on the circle
(cos x, sin x) or the lemniscate (sin x, sin 2x) plus isotropic Gaussian
noise of standard deviation ``noise_sigma``.  Hyperparameters (Gaussian
bandwidth, ridge lambda) come from a hold-out grid search -- by default 30
log-spaced bandwidths in [0.01, 100] times 30 log-spaced lambdas in
[1e-9, 1], scored by validation MSE of the unconstrained ridge predictor
b(x) on 30% of the training set.

``run_experiment`` repeats the protocol over seeded trials, fitting the
constrained estimator and the unconstrained single-task baseline with the
selected hyperparameters and reporting test MSE against the noiseless
ground truth.  Result JSON is byte-identical across runs with the same
seed; wall-clock runtimes therefore live only in the CSV output.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    CIRCLE,
    LEMNISCATE,
    ConstraintSpec,
    curve_points,
    gamma_residual,
    project_weighted,
)
from .estimator import LossSpec, MultitaskData, NlMtlModel, fit, predict_many
from .kernels import GAUSSIAN, KernelSpec, as_points, gram, cross_gram_matrix
from .scores import alpha_at

# Per-trial stream offsets: trial seeds are seed + trial_index; the test set
# and the CV split draw from independent, deterministically derived streams.
TEST_STREAM = 1_000_003
CV_STREAM = 2_000_003

METHOD_NLMTL = "nlmtl"
METHOD_STL = "stl"


@dataclass(frozen=True)
class CvConfig:
    """Hold-out grid-search configuration."""

    fraction: float = 0.3
    n_bandwidths: int = 30
    n_lambdas: int = 30
    bandwidth_range: tuple = (0.01, 100.0)
    lambda_range: tuple = (1e-9, 1.0)
    score_constrained: bool = False  # score the projected predictor instead of b(x)

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise ValueError("validation fraction must be in (0, 1)")
        for lo, hi in (self.bandwidth_range, self.lambda_range):
            if lo <= 0 or hi <= 0 or hi < lo:
                raise ValueError("grid ranges must be positive and ordered")
        if self.n_bandwidths < 1 or self.n_lambdas < 1:
            raise ValueError("grid sizes must be >= 1")

    def bandwidth_grid(self) -> np.ndarray:
        lo, hi = self.bandwidth_range
        return np.logspace(np.log10(lo), np.log10(hi), self.n_bandwidths)

    def lambda_grid(self) -> np.ndarray:
        lo, hi = self.lambda_range
        return np.logspace(np.log10(lo), np.log10(hi), self.n_lambdas)

    def to_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "n_bandwidths": self.n_bandwidths,
            "n_lambdas": self.n_lambdas,
            "bandwidth_range": list(self.bandwidth_range),
            "lambda_range": list(self.lambda_range),
            "score_constrained": self.score_constrained,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CvConfig":
        return cls(
            fraction=float(d.get("fraction", 0.3)),
            n_bandwidths=int(d.get("n_bandwidths", 30)),
            n_lambdas=int(d.get("n_lambdas", 30)),
            bandwidth_range=tuple(d.get("bandwidth_range", (0.01, 100.0))),
            lambda_range=tuple(d.get("lambda_range", (1e-9, 1.0))),
            score_constrained=bool(d.get("score_constrained", False)),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    curve: str
    n_train: int = 100
    n_test: int = 1000
    noise_sigma: float = 0.05
    trials: int = 10
    seed: int = 0
    cv: CvConfig = field(default_factory=CvConfig)
    grid_size: int = 4096  # curve discretization for prediction

    def __post_init__(self):
        if self.curve not in (CIRCLE, LEMNISCATE):
            raise ValueError(f"unknown curve {self.curve!r}")
        if self.n_train < 2:
            raise ValueError("n_train must be >= 2")
        if self.n_test < 1 or self.trials < 1:
            raise ValueError("n_test and trials must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def to_dict(self) -> dict:
        return {
            "curve": self.curve,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "noise_sigma": self.noise_sigma,
            "trials": self.trials,
            "seed": self.seed,
            "cv": self.cv.to_dict(),
            "grid_size": self.grid_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            curve=d["curve"],
            n_train=int(d.get("n_train", 100)),
            n_test=int(d.get("n_test", 1000)),
            noise_sigma=float(d.get("noise_sigma", 0.05)),
            trials=int(d.get("trials", 10)),
            seed=int(d.get("seed", 0)),
            cv=CvConfig.from_dict(d.get("cv", {})),
            grid_size=int(d.get("grid_size", 4096)),
        )


@dataclass
class SyntheticDataset:
    """Shared-input two-task dataset on a plane curve."""

    x: np.ndarray      # (n, 1)
    y: np.ndarray      # (n, 2) noisy outputs
    truth: np.ndarray  # (n, 2) noiseless curve points
    curve: str


def gen_synthetic(curve: str, n: int, sigma: float, seed: int) -> SyntheticDataset:
    """Sample n points of the curve with isotropic Gaussian noise (std sigma).

    Reproducible across platforms: all draws come from numpy's seeded PCG64
    generator (uniform inputs first, then the noise matrix).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if curve not in (CIRCLE, LEMNISCATE):
        raise ValueError(f"unknown curve {curve!r}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-np.pi, np.pi, size=n)
    truth = curve_points(curve, x)
    y = truth + sigma * rng.standard_normal((n, 2))
    return SyntheticDataset(x=x[:, None], y=y, truth=truth, curve=curve)


@dataclass(frozen=True)
class CvSelection:
    bandwidth: float
    lam: float
    val_mse: float


def holdout_cv(x, Y, cv: CvConfig, seed: int,
               constraint: ConstraintSpec | None = None) -> CvSelection:
    """Grid-search (bandwidth, lambda) on a seeded hold-out split.

    Scores validation MSE of the unconstrained ridge predictor b(x); pass a
    constraint together with ``cv.score_constrained`` to score the projected
    predictor instead (slower).  For each bandwidth one eigendecomposition
    of the training Gram matrix is reused across the whole lambda grid.
    Deterministic given the seed; ties keep the earliest grid point.
    """
    x = as_points(x)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = x.shape[0]
    if n < 4:
        raise ValueError("hold-out CV needs at least 4 samples")
    n_val = int(round(cv.fraction * n))
    if n_val < 1 or n_val >= n:
        raise ValueError("degenerate hold-out split: empty training or validation part")
    perm = np.random.default_rng(seed).permutation(n)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    x_tr, y_tr = x[tr_idx], Y[tr_idx]
    x_val, y_val = x[val_idx], Y[val_idx]
    n_tr = x_tr.shape[0]

    if cv.score_constrained and constraint is None:
        raise ValueError("score_constrained requires a constraint")

    best = None
    for bw in cv.bandwidth_grid():
        spec = KernelSpec(GAUSSIAN, float(bw))
        K = gram(spec, x_tr)
        evals, Q = np.linalg.eigh(K)
        P = cross_gram_matrix(spec, x_tr, x_val).T @ Q   # (n_val, n_tr)
        W = Q.T @ y_tr                                    # (n_tr, T)
        ones_proj = Q.T @ np.ones(n_tr)
        for lam in cv.lambda_grid():
            coef = 1.0 / (evals + n_tr * float(lam))
            preds = (P * coef) @ W
            if cv.score_constrained:
                a_val = (P * coef) @ ones_proj
                out = np.empty_like(preds)
                for j in range(preds.shape[0]):
                    w_j = np.where(abs(a_val[j]) < 1e-10, 0.0,
                                   preds[j] / (a_val[j] if a_val[j] != 0.0 else 1.0))
                    wt = np.full(preds.shape[1], a_val[j])
                    wt[np.abs(wt) < 1e-10] = 0.0
                    try:
                        out[j] = project_weighted(constraint, w_j, wt)
                    except ValueError:
                        out[j] = preds[j]
                preds = out
            m = float(np.mean((preds - y_val) ** 2))
            if best is None or m < best.val_mse:
                best = CvSelection(bandwidth=float(bw), lam=float(lam), val_mse=m)
    return best


def mse(pred, truth) -> float:
    """Mean squared error over all entries."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean((pred - truth) ** 2))


def explained_variance(pred, truth) -> float:
    """100 * (1 - mse / var(truth)); errors out on constant truth."""
    truth = np.asarray(truth, dtype=float)
    var = float(np.var(truth))
    if var == 0.0:
        raise ValueError("explained variance is undefined for zero-variance truth")
    return 100.0 * (1.0 - mse(pred, truth) / var)


def stl_baseline(model: NlMtlModel, x) -> np.ndarray:
    """Unconstrained per-task ridge prediction b(x): no normalization, no projection."""
    return np.array([float(sm.y @ alpha_at(sm, x)) for sm in model.tasks])


def stl_baseline_many(model: NlMtlModel, X) -> np.ndarray:
    from .scores import alpha_matrix

    X = as_points(X)
    cols = [sm.y @ alpha_matrix(sm, X) for sm in model.tasks]
    return np.column_stack(cols)


@dataclass
class TrialResult:
    trial: int
    method: str  # "nlmtl" | "stl"
    mse: float
    bandwidth: float
    lam: float
    max_abs_gamma_residual: float
    runtime_s: float

    def __post_init__(self):
        if self.mse < 0:
            raise ValueError("mse must be >= 0")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trials: list

    def summary(self) -> dict:
        out = {}
        for method in (METHOD_NLMTL, METHOD_STL):
            vals = np.array([t.mse for t in self.trials if t.method == method])
            if vals.size:
                out[method] = {
                    "median_mse": float(np.median(vals)),
                    "q1_mse": float(np.percentile(vals, 25)),
                    "q3_mse": float(np.percentile(vals, 75)),
                }
        return out

    def to_json(self) -> str:
        # runtimes are excluded: the JSON must be byte-identical across runs
        payload = {
            "config": self.config.to_dict(),
            "trials": [
                {
                    "trial": t.trial,
                    "method": t.method,
                    "mse": t.mse,
                    "bandwidth": t.bandwidth,
                    "lambda": t.lam,
                    "max_abs_gamma_residual": t.max_abs_gamma_residual,
                }
                for t in self.trials
            ],
            "summary": self.summary(),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["trial,method,mse,bandwidth,lambda,max_abs_gamma_residual,runtime_s"]
        for t in self.trials:
            lines.append(
                f"{t.trial},{t.method},{t.mse!r},{t.bandwidth!r},{t.lam!r},"
                f"{t.max_abs_gamma_residual!r},{t.runtime_s!r}"
            )
        return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the synthetic protocol: per trial, draw data, select hyperparameters,
    fit the constrained estimator and the unconstrained baseline, and score
    both on a fresh test set against the noiseless truth."""
    constraint = ConstraintSpec.curve(config.curve, grid_size=config.grid_size)
    results = []
    for trial in range(config.trials):
        tseed = config.seed + trial
        train = gen_synthetic(config.curve, config.n_train, config.noise_sigma, tseed)
        test = gen_synthetic(config.curve, config.n_test, config.noise_sigma,
                             tseed + TEST_STREAM)
        sel = holdout_cv(train.x, train.y, config.cv, tseed + CV_STREAM,
                         constraint=constraint)
        kernel = KernelSpec(GAUSSIAN, sel.bandwidth)
        data = MultitaskData.from_vvr(train.x, train.y)

        t0 = time.perf_counter()
        model = fit(data, kernel, sel.lam, constraint, LossSpec("square"))
        preds = predict_many(model, test.x)
        dt_nlmtl = time.perf_counter() - t0
        resid = max(gamma_residual(constraint, preds[j]) for j in range(preds.shape[0]))
        results.append(TrialResult(
            trial=trial, method=METHOD_NLMTL, mse=mse(preds, test.truth),
            bandwidth=sel.bandwidth, lam=sel.lam,
            max_abs_gamma_residual=float(resid), runtime_s=dt_nlmtl,
        ))

        t0 = time.perf_counter()
        spreds = stl_baseline_many(model, test.x)
        dt_stl = time.perf_counter() - t0
        sresid = max(gamma_residual(constraint, spreds[j]) for j in range(spreds.shape[0]))
        results.append(TrialResult(
            trial=trial, method=METHOD_STL, mse=mse(spreds, test.truth),
            bandwidth=sel.bandwidth, lam=sel.lam,
            max_abs_gamma_residual=float(sresid), runtime_s=dt_stl,
        ))
    return ExperimentResult(config=config, trials=results)


def rate_sweep(curve: str, n_list, trials: int, seed: int, noise_sigma: float = 0.05,
               n_test: int = 1000, cv: CvConfig | None = None) -> list:
    """Median test MSE as a function of the training-set size.

    Trial seeds are shared across sizes (paired comparisons).  Returns one
    dict per n: {"n_train", "median_mse_nlmtl", "median_mse_stl"}.
    """
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    cv = cv or CvConfig()
    rows = []
    for n in n_list:
        cfg = ExperimentConfig(curve=curve, n_train=n, n_test=n_test,
                               noise_sigma=noise_sigma, trials=trials, seed=seed, cv=cv)
        res = run_experiment(cfg)
        s = res.summary()
        rows.append({
            "n_train": n,
            "median_mse_nlmtl": s[METHOD_NLMTL]["median_mse"],
            "median_mse_stl": s[METHOD_STL]["median_mse"],
        })
    return rows
