"""Finite-difference Jacobians, local sensitivity FIMs, and eigenanalysis.

The sensitivity Fisher information matrix at a point is the Gram matrix
of output sensitivities, ``F = J^T J`` for the m-by-n output Jacobian J.
Its rank counts locally identifiable parameter combinations and its
eigenvalue spread measures sloppiness. The eigensolver is cyclic Jacobi
rotation (robustly orthogonal eigenvectors, no external dependency),
compiled with numba when enabled.
"""

from dataclasses import dataclass

import numpy as np

from .accel import njit
from .core import ParametricModel, analytic_jacobian_at, evaluate
from .errors import ConvergenceFailureError, DimensionMismatchError, NonFiniteError

#: default relative step: cube root of machine epsilon, the standard
#: central-difference optimum for roundoff/truncation balance
DEFAULT_RELATIVE_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)
DEFAULT_ABSOLUTE_FLOOR = 1e-8
DEFAULT_RANK_TOLERANCE = 1e-8

_JACOBI_MAX_SWEEPS = 50


@dataclass(frozen=True)
class Jacobian:
    """Output Jacobian at one parameter point."""

    matrix: np.ndarray
    theta: np.ndarray
    step_sizes: np.ndarray
    method: str


@dataclass(frozen=True)
class Sfim:
    """Local sensitivity FIM ``J^T J``, symmetrized against roundoff."""

    matrix: np.ndarray
    theta: np.ndarray


@dataclass(frozen=True)
class EigenAnalysis:
    """Descending eigenpairs of a symmetric matrix with rank diagnostics.

    Eigenvector columns match the eigenvalue order and carry a fixed sign
    convention (largest-magnitude component positive) so the
    decomposition is deterministic across runs. ``sloppiness_ratio`` is
    ``lambda_max / lambda_min``, infinite when the smallest eigenvalue
    sits below the rank tolerance.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    numerical_rank: int
    sloppiness_ratio: float
    rank_tolerance: float


@dataclass(frozen=True)
class Verdict:
    """Local identifiability verdict derived from an eigenanalysis."""

    kind: str  # locally_identifiable | rank_deficient | nearly_deficient
    rank: int
    n: int
    ratio: float


def _fd_column(model, theta, i, h, base_cache):
    # central difference with a single one-sided fallback per direction
    tp = theta.copy()
    tm = theta.copy()
    tp[i] = theta[i] + h
    tm[i] = theta[i] - h
    h_plus = tp[i] - theta[i]
    h_minus = theta[i] - tm[i]
    try:
        fp = evaluate(model, tp)
    except NonFiniteError:
        fp = None
    try:
        fm = evaluate(model, tm)
    except NonFiniteError:
        fm = None
    if fp is not None and fm is not None:
        return (fp - fm) / (h_plus + h_minus), 0.5 * (h_plus + h_minus)
    if base_cache[0] is None:
        base_cache[0] = evaluate(model, theta)
    f0 = base_cache[0]
    if fp is not None:
        return (fp - f0) / h_plus, h_plus
    if fm is not None:
        return (f0 - fm) / h_minus, h_minus
    raise NonFiniteError(
        f"model {model.name!r} non-finite on both sides of theta[{i}] (step {h:.3g})")


def jacobian_fd(model: ParametricModel, theta, relative_step=DEFAULT_RELATIVE_STEP,
                method: str = "central",
                absolute_floor: float = DEFAULT_ABSOLUTE_FLOOR) -> Jacobian:
    """Output Jacobian at ``theta`` by finite differences (or analytically).

    Central differences column by column with per-parameter step
    ``h_i = relative_step * max(|theta_i|, absolute_floor)``; if one side
    fails to evaluate, that column falls back to a one-sided difference
    once, and errors if both sides fail. ``method="analytic"`` uses the
    model's analytic Jacobian; ``method="forward"`` uses one-sided
    differences throughout.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n,):
        raise DimensionMismatchError(f"expected {model.n} parameters, got {theta.shape}")
    if method == "analytic":
        mat = analytic_jacobian_at(model, theta)
        return Jacobian(matrix=mat, theta=theta.copy(),
                        step_sizes=np.zeros(model.n), method="analytic")
    if method not in ("central", "forward"):
        raise ValueError(f"unknown method {method!r}")

    steps = relative_step * np.maximum(np.abs(theta), absolute_floor)
    mat = np.empty((model.m, model.n))
    base_cache = [None]
    if method == "forward":
        base_cache[0] = evaluate(model, theta)
    used = np.empty(model.n)
    for i in range(model.n):
        if method == "forward":
            tp = theta.copy()
            tp[i] = theta[i] + steps[i]
            h = tp[i] - theta[i]
            mat[:, i] = (evaluate(model, tp) - base_cache[0]) / h
            used[i] = h
        else:
            col, h = _fd_column(model, theta, i, steps[i], base_cache)
            mat[:, i] = col
            used[i] = h
    if not np.all(np.isfinite(mat)):
        raise NonFiniteError("non-finite entries in finite-difference Jacobian")
    return Jacobian(matrix=mat, theta=theta.copy(), step_sizes=used, method=method)


def local_sfim(jac: Jacobian) -> Sfim:
    """Assemble ``F = J^T J``, symmetrized as ``(F + F^T)/2``."""
    m = jac.matrix
    f = m.T @ m
    f = 0.5 * (f + f.T)
    return Sfim(matrix=f, theta=jac.theta.copy())


def _jacobi_eigh_core(a_in, max_sweeps):
    # cyclic Jacobi rotations with the classic small-rotation threshold
    n = a_in.shape[0]
    a = a_in.copy()
    v = np.eye(n)
    d = np.empty(n)
    b = np.empty(n)
    z = np.zeros(n)
    for i in range(n):
        b[i] = a[i, i]
        d[i] = a[i, i]
    for sweep in range(max_sweeps):
        sm = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                sm += abs(a[p, q])
        if sm == 0.0:
            return d, v, True
        if sweep < 3:
            tresh = 0.2 * sm / (n * n)
        else:
            tresh = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = 100.0 * abs(a[p, q])
                if sweep > 3 and abs(d[p]) + g == abs(d[p]) and abs(d[q]) + g == abs(d[q]):
                    a[p, q] = 0.0
                elif abs(a[p, q]) > tresh:
                    h = d[q] - d[p]
                    if abs(h) + g == abs(h):
                        t = a[p, q] / h
                    else:
                        th = 0.5 * h / a[p, q]
                        t = 1.0 / (abs(th) + np.sqrt(1.0 + th * th))
                        if th < 0.0:
                            t = -t
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    tau = s / (1.0 + c)
                    h = t * a[p, q]
                    z[p] -= h
                    z[q] += h
                    d[p] -= h
                    d[q] += h
                    a[p, q] = 0.0
                    for j in range(p):
                        g1 = a[j, p]
                        h1 = a[j, q]
                        a[j, p] = g1 - s * (h1 + g1 * tau)
                        a[j, q] = h1 + s * (g1 - h1 * tau)
                    for j in range(p + 1, q):
                        g1 = a[p, j]
                        h1 = a[j, q]
                        a[p, j] = g1 - s * (h1 + g1 * tau)
                        a[j, q] = h1 + s * (g1 - h1 * tau)
                    for j in range(q + 1, n):
                        g1 = a[p, j]
                        h1 = a[q, j]
                        a[p, j] = g1 - s * (h1 + g1 * tau)
                        a[q, j] = h1 + s * (g1 - h1 * tau)
                    for j in range(n):
                        g1 = v[j, p]
                        h1 = v[j, q]
                        v[j, p] = g1 - s * (h1 + g1 * tau)
                        v[j, q] = h1 + s * (g1 - h1 * tau)
        for p in range(n):
            b[p] += z[p]
            d[p] = b[p]
            z[p] = 0.0
    return d, v, False


_jacobi_eigh = njit(cache=True)(_jacobi_eigh_core)


def eigendecompose(matrix, rank_tolerance: float = DEFAULT_RANK_TOLERANCE) -> EigenAnalysis:
    """Full eigenpairs of a symmetric matrix, descending, with numerical rank.

    ``numerical_rank`` counts eigenvalues above ``rank_tolerance`` times
    the largest one (rank 0 when the largest is not positive). What
    counts as a "small" eigenvalue is intrinsically a modeling choice, so
    the tolerance is an explicit argument and is recorded in the result.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got {a.shape}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale > 0 and float(np.max(np.abs(a - a.T))) > 1e-8 * scale:
        raise ValueError("matrix is not symmetric within tolerance")

    d, v, converged = _jacobi_eigh(np.ascontiguousarray(a), _JACOBI_MAX_SWEEPS)
    if not converged:
        raise ConvergenceFailureError(
            f"Jacobi eigensolver did not converge in {_JACOBI_MAX_SWEEPS} sweeps")

    order = np.argsort(d)[::-1]
    lam = d[order]
    q = v[:, order]
    for j in range(q.shape[1]):
        k = int(np.argmax(np.abs(q[:, j])))
        if q[k, j] < 0:
            q[:, j] = -q[:, j]

    lam_max = lam[0] if lam.size else 0.0
    if lam_max <= 0:
        rank = 0
    else:
        rank = int(np.sum(lam > rank_tolerance * lam_max))
    if lam.size and lam_max > 0 and lam[-1] > rank_tolerance * lam_max:
        ratio = float(lam_max / lam[-1])
    else:
        ratio = float("inf")
    return EigenAnalysis(eigenvalues=lam, eigenvectors=q, numerical_rank=rank,
                         sloppiness_ratio=ratio, rank_tolerance=float(rank_tolerance))


def identifiability_verdict(eig: EigenAnalysis, n: int,
                            near_deficiency_ratio: float = 1e3) -> Verdict:
    """Classify local identifiability from an n-by-n FIM eigenanalysis.

    Full numerical rank means locally identifiable; a rank drop carries
    the rank; a full-rank matrix whose eigenvalue spread exceeds
    ``near_deficiency_ratio`` is flagged nearly deficient (the threshold
    is deliberately explicit configuration, never hidden).
    """
    if eig.eigenvalues.size != n:
        raise DimensionMismatchError(
            f"eigenanalysis has {eig.eigenvalues.size} eigenvalues, expected {n}")
    if eig.numerical_rank < n:
        return Verdict(kind="rank_deficient", rank=eig.numerical_rank, n=n,
                       ratio=eig.sloppiness_ratio)
    if eig.sloppiness_ratio > near_deficiency_ratio:
        return Verdict(kind="nearly_deficient", rank=n, n=n, ratio=eig.sloppiness_ratio)
    return Verdict(kind="locally_identifiable", rank=n, n=n, ratio=eig.sloppiness_ratio)
