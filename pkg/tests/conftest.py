"""Shared oracle helpers: brute-force searches kept independent of the
library's own optimization paths (grids + scipy, never golden-section)."""

import numpy as np
from scipy.optimize import minimize_scalar

from nlmtl.constraints import ConstraintSpec, curve_points
from nlmtl.estimator import MultitaskData, fit
from nlmtl.kernels import KernelSpec
from nlmtl.scores import TaskData, alpha_at

CIRCLE_SPEC = ConstraintSpec.curve("circle")


def circle_grid(m):
    """m points on the unit circle, uniform in angle over [-pi, pi)."""
    theta = -np.pi + 2.0 * np.pi * np.arange(m) / m
    return np.column_stack([np.cos(theta), np.sin(theta)]), theta


def circle_grid_argmin(w, weights=None, m=100_000):
    """Grid-search projection oracle on the unit circle."""
    pts, _ = circle_grid(m)
    d2 = (pts - np.asarray(w)[None, :]) ** 2
    obj = d2.sum(axis=1) if weights is None else d2 @ np.asarray(weights)
    return pts[np.argmin(obj)]


def box_boundary_grid(half_width, m):
    """m points on the boundary of [-B, B]^2, uniform along the perimeter."""
    B = half_width
    per_side = m // 4
    s = np.linspace(-B, B, per_side, endpoint=False)
    sides = [
        np.column_stack([s, np.full(per_side, -B)]),
        np.column_stack([np.full(per_side, B), s]),
        np.column_stack([-s, np.full(per_side, B)]),
        np.column_stack([np.full(per_side, -B), -s]),
    ]
    return np.vstack(sides)


# ---------------------------------------------------------------------------
# seeded instances on the unit circle
# ---------------------------------------------------------------------------

def make_vvr_instance(seed):
    """Shared-input two-task model on the circle plus one query point."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 20))
    x = rng.uniform(-np.pi, np.pi, n)
    Y = curve_points("circle", x) + 0.1 * rng.standard_normal((n, 2))
    bw = rng.uniform(0.5, 2.0)
    lam = 10.0 ** rng.uniform(-6, -1)
    model = fit(MultitaskData.from_vvr(x[:, None], Y), KernelSpec("gaussian", bw),
                lam, CIRCLE_SPEC)
    xq = np.array([rng.uniform(-np.pi, np.pi)])
    return model, xq


def make_mtl_instance(seed):
    """Two tasks with their own inputs and sizes, distinct ridge parameters."""
    rng = np.random.default_rng(seed)
    tasks = []
    for t in range(2):
        n = int(rng.integers(6, 16))
        x = rng.uniform(-np.pi, np.pi, n)
        y = curve_points("circle", x)[:, t] + 0.1 * rng.standard_normal(n)
        tasks.append(TaskData(x=x[:, None], y=y))
    bw = rng.uniform(0.5, 2.0)
    lam = 10.0 ** rng.uniform(-6, -1)
    model = fit(MultitaskData(tasks), KernelSpec("gaussian", bw),
                lam * np.array([1.0, 1.3]), CIRCLE_SPEC)
    xq = np.array([rng.uniform(-np.pi, np.pi)])
    return model, xq


# ---------------------------------------------------------------------------
# two-level numerical minimization oracles (outer scan + scipy refinement
# over the circle angle, inner exact step per candidate)
# ---------------------------------------------------------------------------

def _scan_refine(F, m=4001):
    thetas = np.linspace(-np.pi, np.pi, m)
    vals = np.array([F(t)[0] for t in thetas])
    j = int(np.argmin(vals))
    step = thetas[1] - thetas[0]
    res = minimize_scalar(lambda t: F(t)[0], bounds=(thetas[j] - step, thetas[j] + step),
                          method="bounded", options={"xatol": 1e-12})
    theta = res.x if F(res.x)[0] <= vals[j] else thetas[j]
    return F(theta)[1]


def oracle_robust_circle(model, xq, delta):
    """argmin over c on the circle, ||r|| <= delta of sum_i alpha_i ||c+r-y_i||^2;
    the inner step projects onto the delta-ball."""
    alpha = alpha_at(model.tasks[0], xq)
    Y = np.column_stack([sm.y for sm in model.tasks])
    a = float(alpha.sum())
    b = alpha @ Y
    assert a > 0

    def F(theta):
        c = curve_points("circle", theta)[0]
        v = b / a - c
        nv = np.linalg.norm(v)
        r = v if nv <= delta else (v * (delta / nv) if nv > 0 else v)
        return float(np.sum(alpha * np.sum((c + r - Y) ** 2, axis=1))), c + r

    return _scan_refine(F)


def oracle_perturbed_circle(model, xq, mu):
    """argmin over c on the circle, r free, of
    sum_i alpha_i (||c+r-y_i||^2 + ||r||^2/mu); inner 1-D quadratic vertices."""
    alpha = alpha_at(model.tasks[0], xq)
    Y = np.column_stack([sm.y for sm in model.tasks])
    a = float(alpha.sum())
    b = alpha @ Y
    assert a > 0
    pen = a / mu

    def F(theta):
        c = curve_points("circle", theta)[0]
        r = (b - a * c) / (a + pen)
        val = float(np.sum(alpha * np.sum((c + r - Y) ** 2, axis=1)) + pen * np.sum(r ** 2))
        return val, c + r

    return _scan_refine(F)


def oracle_perturbed_mtl_circle(model, xq, mu):
    """Multitask version: sum_t sum_i alpha_it ((c+r)_t - y_it)^2 + (abar/mu)||r||^2."""
    alphas = [alpha_at(sm, xq) for sm in model.tasks]
    a = np.array([al.sum() for al in alphas])
    b = np.array([al @ sm.y for al, sm in zip(alphas, model.tasks)])
    pen = float(a.sum()) / mu

    def F(theta):
        c = curve_points("circle", theta)[0]
        r = (b - a * c) / (a + pen)
        z = c + r
        val = sum(float(al @ (z[t] - sm.y) ** 2)
                  for t, (al, sm) in enumerate(zip(alphas, model.tasks)))
        val += pen * float(np.sum(r ** 2))
        return val, z

    return _scan_refine(F)
