"""Kernel evaluation and Gram-matrix construction on the input space.

Two kernels are supported: the Gaussian kernel

    k(x, x') = exp(-||x - x'||^2 / bandwidth^2)

(note the ``bandwidth^2`` denominator, with no factor 1/2) and the plain
linear kernel ``k(x, x') = <x, x'>``.  All functions are pure and operate on
float64 arrays; the Gram matrix is built one unordered pair at a time in the
arithmetic sense, so ``gram(spec, X)`` is exactly (bitwise) symmetric and the
Gaussian diagonal is exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAUSSIAN = "gaussian"
LINEAR = "linear"

# Row-block size for pairwise squared distances; bounds peak memory at
# roughly _BLOCK * n * d doubles without changing the result.
_BLOCK = 128


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice plus its (single) hyperparameter.

    kind      -- "gaussian" or "linear"
    bandwidth -- the sigma in exp(-||x-x'||^2 / sigma^2); Gaussian only
    """

    kind: str
    bandwidth: float | None = None

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, LINEAR):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == GAUSSIAN:
            if self.bandwidth is None or not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
                raise ValueError("gaussian kernel requires a finite bandwidth > 0")
        elif self.bandwidth is not None:
            raise ValueError("linear kernel takes no bandwidth")

    def to_dict(self) -> dict:
        if self.kind == GAUSSIAN:
            return {"kind": GAUSSIAN, "bandwidth": float(self.bandwidth)}
        return {"kind": LINEAR}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        kind = d.get("kind")
        if kind == GAUSSIAN:
            return cls(GAUSSIAN, float(d["bandwidth"]))
        if kind == LINEAR:
            return cls(LINEAR)
        raise ValueError(f"unknown kernel kind {kind!r}")


def as_points(values) -> np.ndarray:
    """Validate an (n, d) matrix of input points.

    A 1-D array is treated as n points in one dimension.  Entries must be
    finite and n, d >= 1.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"expected an (n, d) matrix of points, got shape {np.shape(values)}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input points contain non-finite entries")
    return x


def as_point(value) -> np.ndarray:
    """Validate a single point as a 1-D float array."""
    x = np.asarray(value, dtype=float).ravel()
    if x.size < 1:
        raise ValueError("empty point")
    if not np.all(np.isfinite(x)):
        raise ValueError("point contains non-finite entries")
    return x


def kernel_eval(spec: KernelSpec, x, xp) -> float:
    """Evaluate k(x, x') for two single points of equal dimension."""
    x = as_point(x)
    xp = as_point(xp)
    if x.shape != xp.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {xp.shape[0]}")
    if spec.kind == LINEAR:
        return float(x @ xp)
    diff = x - xp
    return float(np.exp(-(diff @ diff) / spec.bandwidth**2))


def gram(spec: KernelSpec, X) -> np.ndarray:
    """Dense n x n kernel matrix K with K[i, j] = k(X[i], X[j]).

    Exactly symmetric; for the Gaussian kernel the diagonal is exactly 1 and
    the matrix is positive semidefinite up to numerical tolerance.
    """
    X = as_points(X)
    if spec.kind == LINEAR:
        G = X @ X.T
        # one value per unordered pair: mirror the upper triangle
        G = np.triu(G) + np.triu(G, 1).T
        return G
    n = X.shape[0]
    D = np.empty((n, n))
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        diff = X[start:stop, None, :] - X[None, :, :]
        D[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(D, 0.0)
    return np.exp(-D / spec.bandwidth**2)


def cross_gram(spec: KernelSpec, X, x) -> np.ndarray:
    """Vector of kernel values (k(x, X[0]), ..., k(x, X[n-1]))."""
    X = as_points(X)
    x = as_point(x)
    if x.shape[0] != X.shape[1]:
        raise ValueError(f"dimension mismatch: point has {x.shape[0]}, matrix has {X.shape[1]}")
    if spec.kind == LINEAR:
        return X @ x
    diff = X - x[None, :]
    d2 = np.einsum("ij,ij->i", diff, diff)
    return np.exp(-d2 / spec.bandwidth**2)


def cross_gram_matrix(spec: KernelSpec, X, Q) -> np.ndarray:
    """n x m matrix with entry (i, j) = k(Q[j], X[i]) for a batch of queries."""
    X = as_points(X)
    Q = as_points(Q)
    if Q.shape[1] != X.shape[1]:
        raise ValueError(f"dimension mismatch: queries have {Q.shape[1]}, matrix has {X.shape[1]}")
    if spec.kind == LINEAR:
        return X @ Q.T
    out = np.empty((X.shape[0], Q.shape[0]))
    for start in range(0, X.shape[0], _BLOCK):
        stop = min(start + _BLOCK, X.shape[0])
        diff = X[start:stop, None, :] - Q[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    if spec.kind == GAUSSIAN:
        out = np.exp(-out / spec.bandwidth**2)
    return out
