"""Scalar Chebyshev and Bernstein approximation workbench.

Quantifies the Gibbs phenomenon: coefficients by Gauss-Chebyshev quadrature,
damped partial sums by Clenshaw evaluation, and dense-grid measurements of
sup-norm error away from jumps plus the overshoot next to each jump.

Two coefficient regimes matter.  Quadrature over exactly K+1 nodes makes the
partial sum the degree-K interpolant; its overshoot constant for a unit step
is about 0.28 of the jump.  Quadrature over many more nodes converges to the
true series coefficients, whose truncation shows the classical overshoot of
about 0.0895 of the jump.  `cheb_coefficients` defaults to the K+1-node
rule; the measurement routines default to converged quadrature so reported
overshoots are properties of the truncated series, not of aliasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .poly_filters import damping_vector

__all__ = [
    "TargetFunction",
    "ApproxReport",
    "builtin_target",
    "BUILTIN_TARGETS",
    "cheb_nodes",
    "cheb_coefficients",
    "cheb_eval",
    "bernstein_eval",
    "measure_gibbs",
    "convergence_curve",
]

DEFAULT_GRID = 100_000
DEFAULT_EXCLUSION = 0.05
DEFAULT_CLAMP = 1e6
MIN_GRID = 10_000


@dataclass(frozen=True)
class TargetFunction:
    """Scalar target on [-1, 1] with its known jump or singularity locations.

    The evaluator must accept ndarray input.  Points listed in
    `discontinuities` get an exclusion window during error measurement.
    """

    evaluator: object
    discontinuities: tuple = ()
    name: str = ""


@dataclass(frozen=True)
class ApproxReport:
    """Dense-grid measurement of one damped partial sum.

    `sup_error_away` is max |f - p| outside every exclusion window;
    `overshoot` is the largest excess of p over the local sup of f inside a
    window (0 when the target has no jumps); `peak` is the global maximum
    of p on the grid.
    """

    K: int
    damping: str
    sup_error_away: float
    overshoot: float
    peak: float
    grid_size: int


def _make_target(f) -> TargetFunction:
    if isinstance(f, TargetFunction):
        return f
    return TargetFunction(evaluator=f)


def _eval_target(f: TargetFunction, x: np.ndarray, clamp: float) -> np.ndarray:
    vals = np.asarray(f.evaluator(x), dtype=np.float64)
    bad = ~np.isfinite(vals)
    if bad.any():
        where = np.atleast_1d(x)[np.atleast_1d(bad)][0]
        name = f.name or "target"
        raise ValueError(f"{name} undefined at x={where!r}")
    return np.clip(vals, -clamp, clamp)


def builtin_target(name: str) -> TargetFunction:
    """Named targets used by the report command."""
    try:
        return BUILTIN_TARGETS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_TARGETS))
        raise ValueError(f"unknown target {name!r}; known targets: {known}") from None


BUILTIN_TARGETS = {
    "step": TargetFunction(np.sign, (0.0,), "step"),
    "abs": TargetFunction(np.abs, (), "abs"),
    "ramp": TargetFunction(lambda x: np.maximum(x, 0.0), (), "ramp"),
    "inverse-singularity": TargetFunction(
        lambda x: 1.0 / (x - 0.25), (0.25,), "inverse-singularity"
    ),
}


def cheb_nodes(count: int) -> np.ndarray:
    """Chebyshev nodes cos((2j+1) pi / (2N)), strictly decreasing in j."""
    if count < 1:
        raise ValueError(f"node count must be >= 1, got {count}")
    j = np.arange(count)
    return np.cos((2 * j + 1) * np.pi / (2 * count))


def cheb_coefficients(f, K: int, quad_nodes: int | None = None,
                      clamp: float = DEFAULT_CLAMP) -> np.ndarray:
    """Chebyshev coefficients mu_0..mu_K by Gauss-Chebyshev quadrature.

    With the default quad_nodes = K + 1 this is the discrete rule
    mu_k = 2/(K+1) * sum_j f(x_j) T_k(x_j); larger node counts converge to
    the weighted-integral coefficients.  mu_0 carries the factor-2
    convention; the half is applied at evaluation time.
    """
    if K < 0:
        raise ValueError(f"order K must be >= 0, got {K}")
    n = K + 1 if quad_nodes is None else int(quad_nodes)
    if n < K + 1:
        raise ValueError(f"need at least K+1={K + 1} quadrature nodes, got {n}")
    target = _make_target(f)
    theta = (2 * np.arange(n) + 1) * np.pi / (2 * n)
    fx = _eval_target(target, np.cos(theta), clamp)
    # T_k(cos theta) = cos(k theta), exact on the nodes
    ks = np.arange(K + 1)[:, None]
    return (2.0 / n) * (np.cos(ks * theta[None, :]) @ fx)


def cheb_eval(mu: np.ndarray, damping: str, x, m: int = 1):
    """Damped partial sum mu_0/2 + sum_k g_k mu_k T_k(x), Clenshaw form."""
    mu = np.asarray(mu, dtype=np.float64)
    K = mu.size - 1
    xs = np.asarray(x, dtype=np.float64)
    scalar_in = xs.ndim == 0
    xs = np.atleast_1d(xs)
    if np.any(np.abs(xs) > 1.0 + 1e-12):
        raise ValueError("evaluation point outside [-1, 1]")
    c = mu * damping_vector(damping, K, m)
    b1 = np.zeros_like(xs)
    b2 = np.zeros_like(xs)
    two_x = 2.0 * xs
    for k in range(K, 0, -1):
        b1, b2 = c[k] + two_x * b1 - b2, b1
    p = 0.5 * c[0] + xs * b1 - b2
    return float(p[0]) if scalar_in else p


def bernstein_eval(f, K: int, x):
    """Bernstein approximant of a target on [0, 1] at x.

    B_K(f, x) = sum_k f(k/K) C(K, k) x^k (1-x)^(K-k); interpolates f at
    both endpoints and reproduces linear functions exactly.
    """
    if K < 1:
        raise ValueError(f"Bernstein order must be >= 1, got {K}")
    target = _make_target(f)
    xs = np.asarray(x, dtype=np.float64)
    scalar_in = xs.ndim == 0
    xs = np.atleast_1d(xs)
    if np.any((xs < -1e-12) | (xs > 1.0 + 1e-12)):
        raise ValueError("evaluation point outside [0, 1]")
    xs = np.clip(xs, 0.0, 1.0)
    ks = np.arange(K + 1)
    fvals = _eval_target(target, ks / K, DEFAULT_CLAMP)
    weights = np.array([math.comb(K, int(k)) for k in ks], dtype=np.float64)
    basis = weights * xs[:, None] ** ks * (1.0 - xs[:, None]) ** (K - ks)
    p = basis @ fvals
    return float(p[0]) if scalar_in else p


def _window_masks(xs: np.ndarray, jumps, exclusion: float) -> np.ndarray:
    inside = np.zeros(xs.size, dtype=bool)
    for j in jumps:
        inside |= np.abs(xs - j) <= exclusion
    return inside


def measure_gibbs(f, K: int, damping: str = "none", grid: int = DEFAULT_GRID,
                  exclusion: float = DEFAULT_EXCLUSION, m: int = 1,
                  quad_nodes: int | None = None,
                  clamp: float = DEFAULT_CLAMP) -> ApproxReport:
    """Measure a damped partial sum against its target on a uniform grid.

    quad_nodes=None uses converged quadrature (max(2048, 16(K+1)) nodes) so
    the measured object is the truncated series; pass K + 1 to measure the
    interpolant instead.
    """
    target = _make_target(f)
    if grid < MIN_GRID:
        raise ValueError(f"grid must be >= {MIN_GRID}, got {grid}")
    if target.discontinuities and not exclusion > 0:
        raise ValueError("exclusion radius must be positive for targets with jumps")
    if quad_nodes is None:
        quad_nodes = max(2048, 16 * (K + 1))
    mu = cheb_coefficients(target, K, quad_nodes=quad_nodes, clamp=clamp)
    xs = np.linspace(-1.0, 1.0, grid)
    p = cheb_eval(mu, damping, xs, m)
    fvals = _eval_target(target, xs, clamp)

    inside = _window_masks(xs, target.discontinuities, exclusion)
    away = ~inside
    sup_away = float(np.max(np.abs(p[away] - fvals[away]))) if away.any() else 0.0

    overshoot = 0.0
    if target.discontinuities:
        per_window = []
        for j in target.discontinuities:
            win = np.abs(xs - j) <= exclusion
            if win.any():
                per_window.append(float(p[win].max() - fvals[win].max()))
        if per_window:
            overshoot = max(per_window)

    return ApproxReport(
        K=K,
        damping=damping,
        sup_error_away=sup_away,
        overshoot=overshoot,
        peak=float(p.max()),
        grid_size=grid,
    )


def convergence_curve(f, basis: str, orders, grid: int = DEFAULT_GRID,
                      exclusion: float = DEFAULT_EXCLUSION,
                      quad_nodes: int | None = None) -> list[tuple[int, float]]:
    """Sup-norm error (away from jumps) versus order for one basis.

    The target lives on [-1, 1]; for the Bernstein basis it is remapped
    affinely onto [0, 1] and evaluated there, so errors are comparable
    point for point.
    """
    target = _make_target(f)
    orders = [int(k) for k in orders]
    if not orders:
        raise ValueError("orders list must be nonempty")
    if any(orders[i] > orders[i + 1] for i in range(len(orders) - 1)):
        raise ValueError("orders must be ascending")
    if basis not in ("chebyshev", "bernstein"):
        raise ValueError(f"unsupported basis {basis!r} for scalar convergence")

    xs = np.linspace(-1.0, 1.0, grid)
    fvals = _eval_target(target, xs, DEFAULT_CLAMP)
    away = ~_window_masks(xs, target.discontinuities, exclusion)

    out = []
    for K in orders:
        if basis == "chebyshev":
            nq = quad_nodes if quad_nodes is not None else max(2048, 16 * (K + 1))
            mu = cheb_coefficients(target, K, quad_nodes=nq)
            p = cheb_eval(mu, "none", xs)
        else:
            remapped = TargetFunction(
                evaluator=lambda u: target.evaluator(2.0 * u - 1.0),
                discontinuities=tuple((d + 1.0) / 2.0 for d in target.discontinuities),
                name=target.name,
            )
            p = bernstein_eval(remapped, K, (xs + 1.0) / 2.0)
        out.append((K, float(np.max(np.abs(p[away] - fvals[away])))))
    return out
