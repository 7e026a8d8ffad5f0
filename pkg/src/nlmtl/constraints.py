"""Constraint sets over the joint task-output space.

A ConstraintSpec describes a subset C of R^T as one of: a solid box
[-B, B]^T, the sphere of radius B, a parametric plane curve (circle or
lemniscate), a finite point cloud, or the acyclic pairwise-comparison set
over D documents (``dag``).  The module provides the residual of the
defining equations, candidate enumeration, Euclidean projection, and the
weighted projection  argmin_{c in C} sum_t a_t (c_t - w_t)^2  used by the
square-loss predictor.

Curve projections run a coarse parametric grid followed by golden-section
refinement of the 1-D objective; refined points sit exactly on the
parametrization, so their residual is zero up to float error.  Weighted
objectives with negative weights can be non-convex, so they are never
solved in closed form: the best enumerated candidate is refined locally and
the returned point is guaranteed to score no worse than every candidate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

BOX = "box"
SPHERE = "sphere"
CURVE = "curve"
POINT_CLOUD = "point_cloud"
DAG = "dag"

CIRCLE = "circle"
LEMNISCATE = "lemniscate"

DEFAULT_GRID = 4096
MIN_GRID = 16
GOLDEN_TOL = 1e-10
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """One constraint set C in R^dim; immutable, operations are pure.

    Use the classmethod constructors (box, sphere, curve, point_cloud, dag)
    rather than filling fields by hand.
    """

    kind: str
    dim: int
    half_width: float | None = None       # box
    radius: float | None = None           # sphere
    curve_name: str | None = None         # curve
    grid_size: int = DEFAULT_GRID         # curve enumeration / refinement grid
    points: np.ndarray | None = None      # point cloud, (m, dim)
    n_docs: int | None = None             # dag
    sample_size: int = DEFAULT_GRID       # box/sphere candidate sample
    seed: int = 0                         # seed for the box/sphere sample

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("ambient dimension must be >= 1")
        if self.kind == BOX:
            if self.half_width is None or not np.isfinite(self.half_width) or self.half_width <= 0:
                raise ValueError("box half_width must be finite and > 0")
        elif self.kind == SPHERE:
            if self.radius is None or not np.isfinite(self.radius) or self.radius <= 0:
                raise ValueError("sphere radius must be finite and > 0")
        elif self.kind == CURVE:
            if self.curve_name not in (CIRCLE, LEMNISCATE):
                raise ValueError(f"unknown curve {self.curve_name!r}")
            if self.dim != 2:
                raise ValueError("plane curves live in dimension 2")
            if self.grid_size < MIN_GRID:
                raise ValueError(f"curve grid_size must be >= {MIN_GRID}")
        elif self.kind == POINT_CLOUD:
            pts = as_cloud(self.points, self.dim)
            object.__setattr__(self, "points", pts)
        elif self.kind == DAG:
            if self.n_docs is None or self.n_docs < 2:
                raise ValueError("dag constraint needs at least 2 documents")
            expect = self.n_docs * (self.n_docs - 1) // 2
            if self.dim != expect:
                raise ValueError(f"dag over {self.n_docs} documents lives in dimension {expect}")
        else:
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def box(cls, half_width: float, dim: int) -> "ConstraintSpec":
        return cls(kind=BOX, dim=dim, half_width=float(half_width))

    @classmethod
    def sphere(cls, radius: float, dim: int) -> "ConstraintSpec":
        return cls(kind=SPHERE, dim=dim, radius=float(radius))

    @classmethod
    def curve(cls, name: str, grid_size: int = DEFAULT_GRID) -> "ConstraintSpec":
        return cls(kind=CURVE, dim=2, curve_name=name, grid_size=int(grid_size))

    @classmethod
    def point_cloud(cls, points) -> "ConstraintSpec":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("point cloud must be an (m, T) matrix")
        return cls(kind=POINT_CLOUD, dim=pts.shape[1], points=pts)

    @classmethod
    def dag(cls, n_docs: int) -> "ConstraintSpec":
        n_docs = int(n_docs)
        return cls(kind=DAG, dim=n_docs * (n_docs - 1) // 2, n_docs=n_docs)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == BOX:
            return {"type": BOX, "half_width": float(self.half_width), "T": self.dim}
        if self.kind == SPHERE:
            return {"type": SPHERE, "radius": float(self.radius), "T": self.dim}
        if self.kind == CURVE:
            return {"type": CURVE, "name": self.curve_name, "grid": int(self.grid_size)}
        if self.kind == POINT_CLOUD:
            return {"type": POINT_CLOUD, "points": self.points.tolist()}
        return {"type": DAG, "D": int(self.n_docs)}

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | None = None) -> "ConstraintSpec":
        """Parse the JSON form; point clouds accept inline "points" or a CSV "path"."""
        typ = d.get("type")
        if typ == BOX:
            return cls.box(d["half_width"], int(d["T"]))
        if typ == SPHERE:
            return cls.sphere(d["radius"], int(d["T"]))
        if typ == CURVE:
            return cls.curve(d["name"], int(d.get("grid", DEFAULT_GRID)))
        if typ == POINT_CLOUD:
            if "points" in d:
                return cls.point_cloud(d["points"])
            import os

            path = d["path"]
            if base_dir is not None and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            pts = np.loadtxt(path, delimiter=",", ndmin=2)
            return cls.point_cloud(pts)
        if typ == DAG:
            return cls.dag(int(d["D"]))
        raise ValueError(f"unknown constraint type {typ!r}")


def as_cloud(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != dim or pts.shape[0] < 1:
        raise ValueError(f"point cloud must be a non-empty (m, {dim}) matrix")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point cloud contains non-finite entries")
    return pts


def curve_points(name: str, thetas) -> np.ndarray:
    """Points of the parametric curve at the given angles, one row per angle.

    circle:      (cos t, sin t)
    lemniscate:  (sin t, sin 2t)   -- figure-eight Lissajous curve
    """
    t = np.atleast_1d(np.asarray(thetas, dtype=float))
    if name == CIRCLE:
        return np.column_stack([np.cos(t), np.sin(t)])
    if name == LEMNISCATE:
        return np.column_stack([np.sin(t), np.sin(2.0 * t)])
    raise ValueError(f"unknown curve {name!r}")


def _check_vector(spec: ConstraintSpec, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != spec.dim:
        raise ValueError(f"vector has length {y.shape[0]}, constraint expects {spec.dim}")
    if not np.all(np.isfinite(y)):
        raise ValueError("vector contains non-finite entries")
    return y


def gamma_residual(spec: ConstraintSpec, y) -> float:
    """Scalar violation of the defining equations; 0 on the set.

    box:        max(0, ||y||_inf - B)
    sphere:     | ||y||_2 - B |
    circle:     | y1^2 + y2^2 - 1 |
    lemniscate: | y1^4 - y1^2 + y2^2/4 |   (zero set of (sin t, sin 2t))
    cloud:      distance to the nearest cloud point
    dag:        0 if the induced digraph is acyclic, else 1
    """
    y = _check_vector(spec, y)
    if spec.kind == BOX:
        return max(0.0, float(np.max(np.abs(y))) - spec.half_width)
    if spec.kind == SPHERE:
        return abs(float(np.linalg.norm(y)) - spec.radius)
    if spec.kind == CURVE:
        if spec.curve_name == CIRCLE:
            return abs(y[0] ** 2 + y[1] ** 2 - 1.0)
        return abs(y[0] ** 4 - y[0] ** 2 + y[1] ** 2 / 4.0)
    if spec.kind == POINT_CLOUD:
        return float(np.min(np.linalg.norm(spec.points - y[None, :], axis=1)))
    # dag: local import, ranking sits above this module
    from .ranking import labels_acyclic

    return 0.0 if labels_acyclic(spec.n_docs, np.sign(y)) else 1.0


def candidates(spec: ConstraintSpec, resolution: int | None = None) -> np.ndarray:
    """Finite subset of C used for enumeration-based search, one row per point.

    Curves return grid_size points of the parametrization on a uniform angle
    grid over [-pi, pi); point clouds return the cloud itself; box and
    sphere return a seeded uniform sample of ``resolution`` points.  Not
    defined for the dag variant (the ranking decoder owns that search).
    """
    if spec.kind == DAG:
        raise ValueError("candidate enumeration is not defined for the dag constraint; "
                         "use the ranking decoder")
    if spec.kind == CURVE:
        m = spec.grid_size if resolution is None else int(resolution)
        if m < MIN_GRID:
            raise ValueError(f"curve resolution must be >= {MIN_GRID}")
        thetas = -np.pi + 2.0 * np.pi * np.arange(m) / m
        return curve_points(spec.curve_name, thetas)
    if spec.kind == POINT_CLOUD:
        return spec.points
    m = spec.sample_size if resolution is None else int(resolution)
    rng = np.random.default_rng(spec.seed)
    if spec.kind == BOX:
        return rng.uniform(-spec.half_width, spec.half_width, size=(m, spec.dim))
    # sphere: normalized gaussians
    g = rng.standard_normal((m, spec.dim))
    norms = np.linalg.norm(g, axis=1)
    bad = norms == 0.0
    if np.any(bad):
        g[bad] = 0.0
        g[bad, 0] = 1.0
        norms[bad] = 1.0
    return spec.radius * g / norms[:, None]


def _golden_refine(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Golden-section search on [lo, hi]; returns the midpoint of the final bracket."""
    a, b = lo, hi
    h = b - a
    c = b - _INV_PHI * h
    d = a + _INV_PHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - _INV_PHI * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INV_PHI * h
            fd = f(d)
    return 0.5 * (a + b)


def _curve_objective(spec, w, weights):
    if weights is None:
        def f(theta):
            c = curve_points(spec.curve_name, theta)[0]
            return float(np.sum((c - w) ** 2))
    else:
        def f(theta):
            c = curve_points(spec.curve_name, theta)[0]
            return float(np.sum(weights * (c - w) ** 2))
    return f


def _project_curve(spec: ConstraintSpec, w: np.ndarray, weights=None) -> np.ndarray:
    m = spec.grid_size
    thetas = -np.pi + 2.0 * np.pi * np.arange(m) / m
    pts = curve_points(spec.curve_name, thetas)
    diff2 = (pts - w[None, :]) ** 2
    obj = diff2.sum(axis=1) if weights is None else diff2 @ weights
    j = int(np.argmin(obj))  # ties -> smallest theta
    step = 2.0 * np.pi / m
    f = _curve_objective(spec, w, weights)
    theta_ref = _golden_refine(f, thetas[j] - step, thetas[j] + step)
    # the golden bracket assumes local unimodality; never return anything
    # worse than the best grid point
    if f(theta_ref) <= obj[j]:
        return curve_points(spec.curve_name, theta_ref)[0]
    return pts[j].copy()


def project(spec: ConstraintSpec, w) -> np.ndarray:
    """Euclidean projection of w onto C: argmin_{c in C} ||c - w||^2.

    Box and sphere are closed-form (clamp, radial); curves refine the best
    grid candidate; clouds take the nearest point (lowest index on ties).
    The sphere projection of the exact origin is non-unique; the first axis
    point is returned deterministically and the tie-break is logged.
    """
    w = _check_vector(spec, w)
    if spec.kind == BOX:
        return np.clip(w, -spec.half_width, spec.half_width)
    if spec.kind == SPHERE:
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            logger.info("sphere projection of the origin is non-unique; "
                        "returning radius * e1 deterministically")
            out = np.zeros(spec.dim)
            out[0] = spec.radius
            return out
        return spec.radius * w / nrm
    if spec.kind == CURVE:
        return _project_curve(spec, w)
    if spec.kind == POINT_CLOUD:
        d2 = np.sum((spec.points - w[None, :]) ** 2, axis=1)
        return spec.points[int(np.argmin(d2))].copy()
    raise ValueError("projection is not defined for the dag constraint")


def project_weighted(spec: ConstraintSpec, w, a) -> np.ndarray:
    """Weighted projection: a minimizer of sum_t a_t (c_t - w_t)^2 over C.

    Weights may be zero or negative (the objective can then be non-convex),
    so closed forms are used only where they stay exact: uniform positive
    weights reduce to the Euclidean projection, and the box with
    non-negative weights is solved coordinate-wise by clamping.  Everything
    else is candidate enumeration, with golden-section refinement of the
    parametric objective on curves; the result never scores worse than any
    enumerated candidate.
    """
    w = _check_vector(spec, w)
    a = np.asarray(a, dtype=float).ravel()
    if a.shape[0] != spec.dim:
        raise ValueError(f"weight vector has length {a.shape[0]}, constraint expects {spec.dim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("weight vector contains non-finite entries")
    if np.all(a == 0.0):
        raise ValueError("degenerate weights: all-zero weight vector")
    if a[0] > 0.0 and np.all(a == a[0]):
        return project(spec, w)
    if spec.kind == BOX and np.all(a >= 0.0):
        return np.clip(w, -spec.half_width, spec.half_width)
    if spec.kind == CURVE:
        return _project_curve(spec, w, weights=a)
    if spec.kind == DAG:
        raise ValueError("projection is not defined for the dag constraint")
    cand = candidates(spec)
    obj = ((cand - w[None, :]) ** 2) @ a
    return cand[int(np.argmin(obj))].copy()


def distance_to_set(spec: ConstraintSpec, y) -> float:
    """Euclidean distance ||y - project(spec, y)||_2."""
    y = _check_vector(spec, y)
    return float(np.linalg.norm(y - project(spec, y)))
