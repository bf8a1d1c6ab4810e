"""Parameter profiles: fix one parameter, refit the rest, classify the curve.

A profile fixes parameter i on a grid and minimizes the squared-residual
cost over the remaining parameters at each grid value with a bounded
Nelder-Mead search. Flat profiles flag structural trouble, troughs are
identifiable, and the refitted values of the other parameters trace out
the functional form of identifiable combinations. Profiling is
ill-conditioned when several parameters share a combination, so each
sweep warm-starts from the neighboring grid point's argmin, moving
outward from the reference point in both directions.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ParametricModel, evaluate
from .errors import (
    InsufficientTraceError,
    NonFiniteError,
    NonFiniteStateError,
    StepSizeUnderflowError,
)
from .reports import Table

_COST_FAILURES = (NonFiniteError, NonFiniteStateError, StepSizeUnderflowError)


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray
    fun: float
    iterations: int
    nfev: int
    converged: bool


@dataclass(frozen=True)
class ProfileTrace:
    """Minimized cost and refitted parameters along one profile grid."""

    parameter_index: int
    grid: np.ndarray
    cost_min: np.ndarray
    argmin_others: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    failed: np.ndarray
    theta_hat: np.ndarray
    flatness_scale: float

    @property
    def n_success(self) -> int:
        return int(np.sum(~self.failed))


@dataclass(frozen=True)
class ConfidenceInterval:
    """Sub-threshold set of a profile and its identifiability class.

    ``kind`` is one of ``empty``, ``finite``, ``half_infinite_left``,
    ``half_infinite_right`` (the side names the unbounded direction), or
    ``infinite``. ``classification`` is ``identifiable`` for a finite
    interval, ``structurally_suspect`` for a flat-within-tolerance
    profile, and ``practically_unidentifiable`` otherwise.
    """

    threshold: float
    kind: str
    lo: float
    hi: float
    classification: str


def nelder_mead(cost, x0, bounds=None, max_iter: Optional[int] = None,
                xtol: float = 1e-6, ftol: float = 1e-10) -> NelderMeadResult:
    """Minimize ``cost`` with an adaptive Nelder-Mead simplex.

    Reflection/expansion/contraction/shrink coefficients follow the
    dimension-adaptive choice (1, 1+2/k, 0.75-1/(2k), 1-1/k) for k >= 2
    and the classic (1, 2, 0.5, 0.5) in one dimension. Candidate points
    are clipped coordinatewise into ``bounds`` when given. Convergence
    requires both the simplex coordinate spread below ``xtol`` (relative,
    with a small absolute floor) and the function spread below ``ftol``.
    On budget exhaustion the best vertex so far is returned with
    ``converged=False``.
    """
    x0 = np.asarray(x0, dtype=float)
    k = x0.size
    if max_iter is None:
        max_iter = 600 * max(k, 1)
    if bounds is not None:
        lo = np.asarray(bounds[0], dtype=float)
        hi = np.asarray(bounds[1], dtype=float)
    else:
        lo = hi = None

    def clip(x):
        return np.clip(x, lo, hi) if lo is not None else x

    if k >= 2:
        alpha, gamma, rho, sigma = 1.0, 1.0 + 2.0 / k, 0.75 - 0.5 / k, 1.0 - 1.0 / k
    else:
        alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5

    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        v = cost(x)
        return float(v) if np.isfinite(v) else np.inf

    x0 = clip(x0)
    sim = [x0]
    for i in range(k):
        step = 0.05 * abs(x0[i]) if x0[i] != 0.0 else 0.00025
        v = x0.copy()
        v[i] += step
        v = clip(v)
        if np.array_equal(v, x0):  # clipped back onto the start: step inward
            v = x0.copy()
            v[i] -= step
            v = clip(v)
        sim.append(v)
    sim = np.asarray(sim)
    fx = np.asarray([f(v) for v in sim])
    if not np.isfinite(fx[0]):
        raise NonFiniteError("cost not finite at the starting point")

    def converged_now():
        best = sim[0]
        spread = np.max(np.abs(sim[1:] - best), axis=0)
        x_ok = np.all(spread <= xtol * np.maximum(np.abs(best), 1e-8))
        f_ok = (fx[-1] - fx[0]) <= ftol * max(abs(fx[0]), 1.0)
        return x_ok and f_ok

    it = 0
    while it < max_iter:
        order = np.argsort(fx, kind="stable")
        sim = sim[order]
        fx = fx[order]
        if converged_now():
            return NelderMeadResult(x=sim[0].copy(), fun=fx[0], iterations=it,
                                    nfev=nfev, converged=True)
        it += 1
        centroid = np.mean(sim[:-1], axis=0)
        xr = clip(centroid + alpha * (centroid - sim[-1]))
        fr = f(xr)
        if fx[0] <= fr < fx[-2]:
            sim[-1], fx[-1] = xr, fr
            continue
        if fr < fx[0]:
            xe = clip(centroid + gamma * (xr - centroid))
            fe = f(xe)
            if fe < fr:
                sim[-1], fx[-1] = xe, fe
            else:
                sim[-1], fx[-1] = xr, fr
            continue
        if fr < fx[-1]:  # outside contraction
            xc = clip(centroid + rho * (xr - centroid))
            fc = f(xc)
            if fc <= fr:
                sim[-1], fx[-1] = xc, fc
                continue
        else:  # inside contraction
            xc = clip(centroid - rho * (centroid - sim[-1]))
            fc = f(xc)
            if fc < fx[-1]:
                sim[-1], fx[-1] = xc, fc
                continue
        for i in range(1, k + 1):  # shrink
            sim[i] = clip(sim[0] + sigma * (sim[i] - sim[0]))
            fx[i] = f(sim[i])

    order = np.argsort(fx, kind="stable")
    sim = sim[order]
    fx = fx[order]
    return NelderMeadResult(x=sim[0].copy(), fun=fx[0], iterations=it,
                            nfev=nfev, converged=False)


# --- chi-square threshold via regularized incomplete gamma ---------------

_LANCZOS = (76.18009172947146, -86.50532032941677, 24.01409824083091,
            -1.231739572450155, 0.1208650973866179e-2, -0.5395239384953e-5)


def _gammln(x: float) -> float:
    y = x
    tmp = x + 5.5
    tmp -= (x + 0.5) * math.log(tmp)
    ser = 1.000000000190015
    for c in _LANCZOS:
        y += 1.0
        ser += c / y
    return -tmp + math.log(2.5066282746310005 * ser / x)


def _gammp_series(a: float, x: float) -> float:
    ap = a
    total = 1.0 / a
    delt = total
    for _ in range(1000):
        ap += 1.0
        delt *= x / ap
        total += delt
        if abs(delt) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - _gammln(a))


def _gammq_contfrac(a: float, x: float) -> float:
    fpmin = 1e-300
    b = x + 1.0 - a
    c = 1.0 / fpmin
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < fpmin:
            d = fpmin
        c = b + an / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delt = d * c
        h *= delt
        if abs(delt - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - _gammln(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0 or x < 0:
        raise ValueError("need a > 0 and x >= 0")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gammp_series(a, x)
    return 1.0 - _gammq_contfrac(a, x)


def chi2_quantile(p: float, dof: int) -> float:
    """Quantile of the chi-squared distribution by bisection to 1e-10."""
    if not 0.0 <= p < 1.0:
        raise ValueError("need 0 <= p < 1")
    if dof < 1:
        raise ValueError("need dof >= 1")
    if p == 0.0:
        return 0.0
    a = 0.5 * dof
    lo, hi = 0.0, max(2.0 * dof, 10.0)
    while regularized_gamma_p(a, 0.5 * hi) < p:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        if regularized_gamma_p(a, 0.5 * mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def chi2_threshold(alpha: float, dof: int) -> float:
    """Profile cost threshold: half the chi-squared (1-alpha, dof) quantile."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("need 0 < alpha < 1")
    return 0.5 * chi2_quantile(1.0 - alpha, dof)


# --- profiling ------------------------------------------------------------


def profile_parameter(model: ParametricModel, theta_hat, i: int, grid,
                      restarts: int = 0, bounds=None, seed: int = 0,
                      xtol: float = 1e-6, ftol: float = 1e-12,
                      max_iter: Optional[int] = None) -> ProfileTrace:
    """Profile parameter ``i``: fix it on ``grid``, refit the rest.

    At each grid value the squared-residual cost against the reference
    output at ``theta_hat`` is minimized over the remaining parameters.
    The two halves of the grid are swept outward from the point nearest
    ``theta_hat[i]``, warm-starting each point from its neighbor's
    argmin; ``restarts`` extra seeded random starts per point keep the
    best result. Grid points where the model fails are marked failed and
    the trace continues. ``bounds``, when given, constrains the refitted
    parameters only (as ``(lower, upper)`` arrays over all n entries).
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    n = model.n
    if not 0 <= i < n:
        raise ValueError(f"parameter index {i} outside 0..{n - 1}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with >= 2 points")
    y_ref = evaluate(model, theta_hat)
    flatness_scale = float(y_ref @ y_ref)

    others = [j for j in range(n) if j != i]
    if bounds is not None:
        lo_full = np.asarray(bounds[0], dtype=float)
        hi_full = np.asarray(bounds[1], dtype=float)
        nm_bounds = (lo_full[others], hi_full[others])
    else:
        nm_bounds = None

    def make_cost(gval):
        def cost(x_others):
            full = np.empty(n)
            full[i] = gval
            full[others] = x_others
            try:
                y = evaluate(model, full)
            except _COST_FAILURES:
                return np.inf
            r = y - y_ref
            return float(r @ r)
        return cost

    # all restart starting points drawn up front, in grid order, so results
    # do not depend on the sweep schedule
    rng = np.random.default_rng(seed)
    starts = {}
    for j in range(grid.size):
        for r in range(restarts):
            if nm_bounds is not None and np.all(np.isfinite(nm_bounds[0])) \
                    and np.all(np.isfinite(nm_bounds[1])):
                starts[(j, r)] = rng.uniform(nm_bounds[0], nm_bounds[1])
            else:
                starts[(j, r)] = theta_hat[others] * (1.0 + 0.5 * rng.standard_normal(n - 1))

    n_grid = grid.size
    cost_min = np.full(n_grid, np.nan)
    argmin = np.full((n_grid, n - 1), np.nan)
    iters = np.zeros(n_grid, dtype=int)
    conv = np.zeros(n_grid, dtype=bool)
    failed = np.ones(n_grid, dtype=bool)

    def solve_point(j, warm):
        cost = make_cost(grid[j])
        candidates = [np.asarray(warm, dtype=float)]
        candidates += [starts[(j, r)] for r in range(restarts)]
        best = None
        total_iters = 0
        for x_start in candidates:
            if not np.isfinite(cost(x_start)):
                continue
            res = nelder_mead(cost, x_start, bounds=nm_bounds,
                              xtol=xtol, ftol=ftol, max_iter=max_iter)
            total_iters += res.iterations
            if best is None or res.fun < best.fun:
                best = res
        return best, total_iters

    center = int(np.argmin(np.abs(grid - theta_hat[i])))
    for sweep in (range(center, n_grid), range(center - 1, -1, -1)):
        warm = theta_hat[others].copy()
        for j in sweep:
            best, total_iters = solve_point(j, warm)
            iters[j] = total_iters
            if best is None or not np.isfinite(best.fun):
                continue  # marked failed; next point reuses the last good warm start
            cost_min[j] = best.fun
            argmin[j] = best.x
            conv[j] = best.converged
            failed[j] = False
            warm = best.x.copy()

    return ProfileTrace(parameter_index=i, grid=grid, cost_min=cost_min,
                        argmin_others=argmin, iterations=iters, converged=conv,
                        failed=failed, theta_hat=theta_hat.copy(),
                        flatness_scale=flatness_scale)


def _interp_crossing(g0, c0, g1, c1, delta):
    # linear interpolation of the cost between grid neighbors
    if c1 == c0:
        return g0
    return g0 + (delta - c0) * (g1 - g0) / (c1 - c0)


def classify_profile(trace: ProfileTrace, delta: float,
                     flatness_tol: Optional[float] = None) -> ConfidenceInterval:
    """Classify the sub-threshold set ``{theta_i* : cost < delta}``.

    The cost curve is linearly interpolated across the grid. Profiles
    flat within ``flatness_tol`` (default ``1e-6`` times the squared norm
    of the reference output) are structurally suspect; sub-threshold sets
    reaching a grid end are treated as unbounded on that side. Finite
    intervals mean the parameter is practically identifiable at this
    threshold. Disconnected sub-threshold sets are reported by their
    hull.
    """
    ok = ~trace.failed
    if int(np.sum(ok)) < 5:
        raise InsufficientTraceError(
            f"only {int(np.sum(ok))} successful grid points, need >= 5")
    g = trace.grid[ok]
    c = trace.cost_min[ok]
    if flatness_tol is None:
        flatness_tol = 1e-6 * trace.flatness_scale

    if float(np.max(c)) < flatness_tol:
        return ConfidenceInterval(threshold=delta, kind="infinite",
                                  lo=-np.inf, hi=np.inf,
                                  classification="structurally_suspect")

    below = c < delta
    if not bool(np.any(below)):
        return ConfidenceInterval(threshold=delta, kind="empty",
                                  lo=np.nan, hi=np.nan,
                                  classification="practically_unidentifiable")

    first = int(np.argmax(below))
    last = len(below) - 1 - int(np.argmax(below[::-1]))
    left_open = bool(below[0])
    right_open = bool(below[-1])
    lo = -np.inf if left_open else _interp_crossing(
        g[first - 1], c[first - 1], g[first], c[first], delta)
    hi = np.inf if right_open else _interp_crossing(
        g[last], c[last], g[last + 1], c[last + 1], delta)

    if left_open and right_open:
        kind, cls = "infinite", "practically_unidentifiable"
    elif left_open:
        kind, cls = "half_infinite_left", "practically_unidentifiable"
    elif right_open:
        kind, cls = "half_infinite_right", "practically_unidentifiable"
    else:
        kind, cls = "finite", "identifiable"
    return ConfidenceInterval(threshold=delta, kind=kind, lo=float(lo), hi=float(hi),
                              classification=cls)


def relationship_table(trace: ProfileTrace, names=None) -> Table:
    """Tabulate refitted parameters against the profiled one, with log columns.

    A straight line in the raw columns reveals a sum-type identifiable
    combination; a straight line in the log columns reveals a product
    (slope -1 for a two-parameter product). Non-positive values get NaN
    in the log columns. Failed grid points are omitted.
    """
    n = trace.theta_hat.size
    i = trace.parameter_index
    others = [j for j in range(n) if j != i]
    if names is None:
        names = [f"p{j}" for j in range(n)]
    headers = ([f"{names[i]}_star"] + [names[j] for j in others]
               + [f"log_{names[i]}_star"] + [f"log_{names[j]}" for j in others])
    rows = []
    with np.errstate(invalid="ignore", divide="ignore"):
        for k in range(trace.grid.size):
            if trace.failed[k]:
                continue
            vals = [trace.grid[k]] + list(trace.argmin_others[k])
            logs = [np.log(v) if v > 0 else np.nan for v in vals]
            rows.append([float(v) for v in vals] + [float(v) for v in logs])
    return Table(headers=headers, rows=rows)
