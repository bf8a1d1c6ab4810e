"""Parametric-model abstraction and parameter-space descriptions.

A :class:`ParametricModel` is a named deterministic map from a parameter
vector to an output vector (or scalar), possibly realized through an ODE
solve plus an observation function. A :class:`ParameterSpace` carries the
box bounds, the sampling density, and the coordinate-scaling convention
consumed by the sampling and summary machinery.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, NonFiniteError, OutOfBoundsError


@dataclass(frozen=True)
class ParameterSpace:
    """Box-bounded parameter domain with a sampling density.

    Parameters
    ----------
    names : sequence of str
        Unique, non-empty parameter identifiers, length n.
    lower, upper : array_like, shape (n,)
        Componentwise bounds with ``lower < upper``.
    density : {"uniform", "gaussian"}
        Sampling density on the box. Gaussian densities are truncated to
        the box by rejection.
    gaussian_mean, gaussian_stdev : array_like, shape (n,), optional
        Per-dimension mean and standard deviation, required when
        ``density == "gaussian"``; ``gaussian_stdev > 0``.
    scaling : {"raw", "centered-unit"}
        Coordinate convention for sampling/summary consumers.
        ``centered-unit`` maps each component affinely onto [-1, 1].
    """

    names: tuple
    lower: np.ndarray
    upper: np.ndarray
    density: str = "uniform"
    gaussian_mean: Optional[np.ndarray] = None
    gaussian_stdev: Optional[np.ndarray] = None
    scaling: str = "raw"

    def __init__(self, names, lower, upper, density="uniform",
                 gaussian_mean=None, gaussian_stdev=None, scaling="raw"):
        names = tuple(str(s) for s in names)
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if len(names) != lower.size or lower.size != upper.size:
            raise DimensionMismatchError(
                f"names/lower/upper lengths disagree: {len(names)}, {lower.size}, {upper.size}")
        if len(set(names)) != len(names) or any(not s for s in names):
            raise ValueError("parameter names must be unique and non-empty")
        if not np.all(lower < upper):
            raise ValueError("lower bound must be strictly below upper bound componentwise")
        if density not in ("uniform", "gaussian"):
            raise ValueError(f"unknown density {density!r}")
        if density == "gaussian":
            if gaussian_mean is None or gaussian_stdev is None:
                raise ValueError("gaussian density requires gaussian_mean and gaussian_stdev")
            gaussian_mean = np.asarray(gaussian_mean, dtype=float)
            gaussian_stdev = np.asarray(gaussian_stdev, dtype=float)
            if gaussian_mean.size != lower.size or gaussian_stdev.size != lower.size:
                raise DimensionMismatchError("gaussian mean/stdev length mismatch")
            if not np.all(gaussian_stdev > 0):
                raise ValueError("gaussian stdev must be positive")
        if scaling not in ("raw", "centered-unit"):
            raise ValueError(f"unknown scaling {scaling!r}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "density", density)
        object.__setattr__(self, "gaussian_mean", gaussian_mean)
        object.__setattr__(self, "gaussian_stdev", gaussian_stdev)
        object.__setattr__(self, "scaling", scaling)

    @property
    def n(self) -> int:
        return len(self.names)

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))


@dataclass(frozen=True)
class ModelOutputSpec:
    """Shape and labeling of a model's output.

    ``kind`` is ``"vector"`` (length m >= 1) or ``"scalar"`` (m == 1);
    ``observation_times``, when present, must be strictly increasing.
    """

    kind: str
    m: int
    observation_times: Optional[np.ndarray] = None
    labels: tuple = ()

    def __post_init__(self):
        if self.kind not in ("vector", "scalar"):
            raise ValueError(f"unknown output kind {self.kind!r}")
        if self.m < 1:
            raise ValueError("output length m must be >= 1")
        if self.kind == "scalar" and self.m != 1:
            raise ValueError("scalar output requires m == 1")
        if self.observation_times is not None:
            t = np.asarray(self.observation_times, dtype=float)
            if t.ndim != 1 or (t.size > 1 and not np.all(np.diff(t) > 0)):
                raise ValueError("observation_times must be strictly increasing")
            object.__setattr__(self, "observation_times", t)
        if self.labels:
            object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True)
class ParametricModel:
    """Deterministic map from parameters to outputs.

    The evaluator must be pure: identical inputs give bitwise-identical
    outputs within one process, and instances are safe to share across
    concurrent read-only evaluations. ``analytic_jacobian``, when given,
    returns the m-by-n Jacobian at a point.
    """

    name: str
    n: int
    output_spec: ModelOutputSpec
    evaluator: Callable[[np.ndarray], np.ndarray]
    analytic_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def m(self) -> int:
        return self.output_spec.m

    def evaluate(self, theta) -> np.ndarray:
        return evaluate(self, theta)


def evaluate(model: ParametricModel, theta) -> np.ndarray:
    """Evaluate ``model`` at ``theta``, returning a length-m vector.

    Raises
    ------
    DimensionMismatchError
        If ``theta`` does not have length n.
    NonFiniteError
        If ``theta`` or the model output contains NaN/Inf (e.g. an ODE
        blow-up inside the evaluator).
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n,):
        raise DimensionMismatchError(
            f"model {model.name!r} expects {model.n} parameters, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise NonFiniteError(f"non-finite parameter vector passed to {model.name!r}")
    out = np.atleast_1d(np.asarray(model.evaluator(theta), dtype=float))
    if out.shape != (model.m,):
        raise DimensionMismatchError(
            f"model {model.name!r} returned shape {out.shape}, expected ({model.m},)")
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"model {model.name!r} produced non-finite output at theta={theta!r}")
    return out


def analytic_jacobian_at(model: ParametricModel, theta) -> np.ndarray:
    """Evaluate the analytic Jacobian, validating its m-by-n shape."""
    if model.analytic_jacobian is None:
        raise ValueError(f"model {model.name!r} has no analytic Jacobian")
    theta = np.asarray(theta, dtype=float)
    jac = np.atleast_2d(np.asarray(model.analytic_jacobian(theta), dtype=float))
    if jac.shape != (model.m, model.n):
        raise DimensionMismatchError(
            f"analytic Jacobian of {model.name!r} has shape {jac.shape}, "
            f"expected ({model.m}, {model.n})")
    return jac


def scalar_cost_qoi(model: ParametricModel, theta_hat) -> ParametricModel:
    """Wrap a vector model into the squared-residual scalar cost against y(theta_hat).

    The reference output is evaluated once here and cached, so the wrapper
    is deterministic and cheap; the metric is the squared L2 norm of the
    residual (the natural extension point for other metrics).
    """
    if model.output_spec.kind != "vector":
        raise ValueError("scalar_cost_qoi requires a vector-output model")
    theta_hat = np.asarray(theta_hat, dtype=float)
    y_ref = evaluate(model, theta_hat)

    def cost(theta):
        y = evaluate(model, theta)
        r = y - y_ref
        return np.array([float(r @ r)])

    jac_fn = None
    if model.analytic_jacobian is not None:
        def jac_fn(theta):
            y = evaluate(model, theta)
            chi = analytic_jacobian_at(model, theta)
            return (2.0 * (y - y_ref)) @ chi

    return ParametricModel(
        name=f"{model.name}:cost",
        n=model.n,
        output_spec=ModelOutputSpec(kind="scalar", m=1, labels=("cost",)),
        evaluator=cost,
        analytic_jacobian=jac_fn,
    )


def scale_to_unit(space: ParameterSpace, theta) -> np.ndarray:
    """Affinely map an in-bounds point onto [-1, 1]^n."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (space.n,):
        raise DimensionMismatchError(f"expected length {space.n}, got shape {theta.shape}")
    if not space.contains(theta):
        raise OutOfBoundsError(f"theta {theta!r} outside bounds")
    mid = 0.5 * (space.lower + space.upper)
    half = 0.5 * (space.upper - space.lower)
    return (theta - mid) / half


def unscale_from_unit(space: ParameterSpace, u) -> np.ndarray:
    """Inverse of :func:`scale_to_unit`."""
    u = np.asarray(u, dtype=float)
    if u.shape != (space.n,):
        raise DimensionMismatchError(f"expected length {space.n}, got shape {u.shape}")
    if np.any(u < -1.0 - 1e-12) or np.any(u > 1.0 + 1e-12):
        raise OutOfBoundsError(f"unit coordinates {u!r} outside [-1, 1]")
    mid = 0.5 * (space.lower + space.upper)
    half = 0.5 * (space.upper - space.lower)
    return mid + half * u


def scaled_view(model: ParametricModel, space: ParameterSpace):
    """Re-express ``model`` over the centered-unit coordinates of ``space``.

    Returns ``(model', space')`` where ``model'`` consumes points in
    [-1, 1]^n and ``space'`` is the matching unit box. Used when
    ``space.scaling == "centered-unit"``; sensitivity results then refer
    to the scaled coordinates.
    """
    half = 0.5 * (space.upper - space.lower)

    def ev(u):
        return evaluate(model, unscale_from_unit(space, np.clip(u, -1.0, 1.0)))

    jac_fn = None
    if model.analytic_jacobian is not None:
        def jac_fn(u):
            theta = unscale_from_unit(space, np.clip(u, -1.0, 1.0))
            return analytic_jacobian_at(model, theta) * half

    unit_space = ParameterSpace(
        names=space.names,
        lower=-np.ones(space.n),
        upper=np.ones(space.n),
        density=space.density,
        gaussian_mean=None if space.gaussian_mean is None
        else scale_to_unit(space, space.gaussian_mean),
        gaussian_stdev=None if space.gaussian_stdev is None
        else space.gaussian_stdev / half,
        scaling="raw",
    )
    scaled = ParametricModel(
        name=f"{model.name}:unit",
        n=model.n,
        output_spec=model.output_spec,
        evaluator=ev,
        analytic_jacobian=jac_fn,
    )
    return scaled, unit_space
