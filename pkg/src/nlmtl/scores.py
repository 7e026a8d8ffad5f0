"""Per-task kernel ridge regression and score-function evaluation.

Each task t stores its training pairs and a Cholesky factorization of
``K_t + n_t * lambda_t * I``.  The score vector at a query x is

    alpha(x) = (K_t + n_t lambda_t I)^{-1} K_{tx}

and the square-loss sufficient statistics are a(x) = sum_i alpha_i(x) and
b(x) = sum_i alpha_i(x) y_i.  Models are immutable after fitting and safe to
share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky

from .kernels import KernelSpec, as_point, as_points, cross_gram, cross_gram_matrix, gram

# Ridge parameters below this are rejected: the hyperparameter grids bottom
# out at 1e-9 and anything smaller than 1e-12 buys nothing but conditioning
# trouble.
MIN_LAMBDA = 1e-12

LAMBDA_PRESETS = ("n^-1/4", "n^-1/2")


@dataclass
class TaskData:
    """Training pairs (x_i, y_i) for one task; tasks may differ in size."""

    x: np.ndarray  # (n, d)
    y: np.ndarray  # (n,)

    def __post_init__(self):
        self.x = as_points(self.x)
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.y.shape[0] != self.x.shape[0]:
            raise ValueError(f"{self.x.shape[0]} inputs but {self.y.shape[0]} outputs")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("task outputs contain non-finite entries")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass
class ScoreModel:
    """Fitted ridge system for one task.

    ``chol`` is the lower Cholesky factor of K + n*lam*I, computed once at
    fit time and reused for every query.
    """

    kernel: KernelSpec
    x: np.ndarray
    y: np.ndarray
    lam: float
    chol: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "lambda": float(self.lam),
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "chol": self.chol.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreModel":
        return cls(
            kernel=KernelSpec.from_dict(d["kernel"]),
            x=np.asarray(d["x"], dtype=float),
            y=np.asarray(d["y"], dtype=float),
            lam=float(d["lambda"]),
            chol=np.asarray(d["chol"], dtype=float),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "ScoreModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def lambda_preset(name: str, n: int) -> float:
    """Named ridge schedules: "n^-1/4" -> n**-0.25, "n^-1/2" -> n**-0.5."""
    if name == "n^-1/4":
        return float(n) ** -0.25
    if name == "n^-1/2":
        return float(n) ** -0.5
    raise ValueError(f"unknown lambda preset {name!r}; available: {LAMBDA_PRESETS}")


def fit_scores(kernel: KernelSpec, data: TaskData, lam: float) -> ScoreModel:
    """Factorize K + n*lam*I for one task.

    Raises ValueError if lam < 1e-12 or if the (theoretically SPD) system
    fails to factorize; the failure message reports the smallest diagonal
    pivot of the matrix.
    """
    lam = float(lam)
    if not np.isfinite(lam) or lam < MIN_LAMBDA:
        raise ValueError(f"ridge parameter {lam!r} below the accepted minimum {MIN_LAMBDA}")
    K = gram(kernel, data.x)
    M = K + data.n * lam * np.eye(data.n)
    try:
        factor = cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        pivot = float(np.min(np.diag(M)))
        raise ValueError(
            f"factorization of K + n*lambda*I failed (smallest diagonal pivot {pivot:.6e})"
        ) from exc
    return ScoreModel(kernel=kernel, x=data.x, y=data.y, lam=lam, chol=factor)


def alpha_at(model: ScoreModel, x) -> np.ndarray:
    """Score vector alpha(x) for a single query point."""
    x = as_point(x)
    if x.shape[0] != model.d:
        raise ValueError(f"query has dimension {x.shape[0]}, model expects {model.d}")
    k = cross_gram(model.kernel, model.x, x)
    return cho_solve((model.chol, True), k)


def alpha_matrix(model: ScoreModel, Q) -> np.ndarray:
    """Score vectors for a batch of queries, one column per query: shape (n, m)."""
    Kq = cross_gram_matrix(model.kernel, model.x, Q)
    return cho_solve((model.chol, True), Kq)


def square_stats(model: ScoreModel, x) -> tuple[float, float]:
    """Square-loss statistics (a, b) = (sum_i alpha_i(x), sum_i alpha_i(x) y_i)."""
    alpha = alpha_at(model, x)
    return float(alpha.sum()), float(alpha @ model.y)


def square_stats_matrix(model: ScoreModel, Q) -> tuple[np.ndarray, np.ndarray]:
    """Batched (a, b) statistics: two arrays of length m."""
    A = alpha_matrix(model, Q)
    return A.sum(axis=0), model.y @ A
