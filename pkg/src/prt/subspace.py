"""Parameter-space sampling, averaged sensitivity FIMs, and subspace splits.

The averaged FIM over a sampling density is the central object of active
subspace analysis: directions spanned by its large-eigenvalue
eigenvectors materially change the quantity of interest, the rest do
not. It is estimated by an equal-weight Monte Carlo mean of local FIMs
over the sample; points whose evaluation or gradient fails (e.g.
non-oscillatory parameter sets for a period QOI) are excluded and
recorded rather than aborting the run.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ParameterSpace, ParametricModel, evaluate
from .errors import (
    AlignmentMismatchError,
    DegenerateGapError,
    DimensionMismatchError,
    NonFiniteError,
    NonFiniteStateError,
    NotPeriodicError,
    ProjectionOutOfDomainError,
    StepSizeUnderflowError,
    TooManyFailuresError,
)
from .reports import Table
from .sensitivity import (
    DEFAULT_RANK_TOLERANCE,
    DEFAULT_RELATIVE_STEP,
    EigenAnalysis,
    eigendecompose,
    jacobian_fd,
    local_sfim,
)

#: failure classes that exclude a sample instead of aborting the average
_EXCLUDABLE = (NonFiniteError, NotPeriodicError, StepSizeUnderflowError, NonFiniteStateError)

SCHEMES = ("lhs", "uniform-iid", "gaussian-iid")


@dataclass(frozen=True)
class SampleSet:
    """Deterministic sample of parameter space.

    ``points`` is N-by-n in raw coordinates; ``excluded`` collects
    ``(index, reason)`` pairs appended by downstream evaluation passes.
    The random source is numpy's PCG64 generator seeded with ``seed``,
    drawn dimension-major, so sample sets are reproducible from
    (scheme, N, seed) alone.
    """

    points: np.ndarray
    scheme: str
    seed: int
    space: ParameterSpace
    excluded: list = field(default_factory=list)
    acceptance_rate: float = 1.0

    @property
    def n_samples(self) -> int:
        return self.points.shape[0]

    def used_mask(self) -> np.ndarray:
        mask = np.ones(self.n_samples, dtype=bool)
        for idx, _ in self.excluded:
            mask[idx] = False
        return mask


@dataclass(frozen=True)
class AverageSfim:
    """Monte Carlo estimate of the averaged sensitivity FIM."""

    matrix: np.ndarray
    eig: EigenAnalysis
    n_samples_used: int
    sample_meta: dict


@dataclass(frozen=True)
class FixedR:
    """Split after a caller-chosen number of active directions."""

    r: int

    def describe(self) -> str:
        return f"fixed_r({self.r})"


@dataclass(frozen=True)
class GapAfterLargestRatio:
    """Split at the largest consecutive eigenvalue ratio, if large enough.

    Requires the best ratio to reach ``min_ratio``; otherwise the gap is
    degenerate and the caller must supply an explicit rank.
    """

    min_ratio: float = 10.0

    def describe(self) -> str:
        return f"gap_after_largest_ratio(min_ratio={self.min_ratio:g})"


@dataclass(frozen=True)
class Threshold:
    """Keep directions with eigenvalues above a relative cutoff."""

    cutoff: float

    def describe(self) -> str:
        return f"threshold(cutoff={self.cutoff:g})"


@dataclass(frozen=True)
class SubspacePartition:
    """Active/inactive split of an orthogonal eigenbasis."""

    q_active: np.ndarray
    q_inactive: np.ndarray
    r: int
    criterion: str

    @property
    def n(self) -> int:
        return self.q_active.shape[0]


def sample(space: ParameterSpace, scheme: str, n_samples: int, seed: int) -> SampleSet:
    """Draw a deterministic sample of ``space``.

    ``lhs`` stratifies every one-dimensional projection into exactly one
    point per of N equal strata; ``uniform-iid`` draws independently on
    the box; ``gaussian-iid`` draws from the space's per-dimension
    Gaussian, rejection-truncated to the box (the acceptance rate is
    recorded on the result).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown sampling scheme {scheme!r}")
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    n_dim = space.n
    lo, hi = space.lower, space.upper
    acceptance = 1.0

    if scheme == "uniform-iid":
        pts = np.empty((n_samples, n_dim))
        for j in range(n_dim):
            pts[:, j] = rng.uniform(lo[j], hi[j], n_samples)
    elif scheme == "lhs":
        pts = np.empty((n_samples, n_dim))
        for j in range(n_dim):
            perm = rng.permutation(n_samples)
            offsets = rng.random(n_samples)
            u = (perm + offsets) / n_samples
            pts[:, j] = lo[j] + (hi[j] - lo[j]) * u
    else:  # gaussian-iid
        if space.density != "gaussian":
            raise ValueError("gaussian-iid sampling requires a gaussian-density space")
        mean, stdev = space.gaussian_mean, space.gaussian_stdev
        pts = np.empty((n_samples, n_dim))
        filled = 0
        drawn = 0
        while filled < n_samples:
            batch = max(n_samples - filled, 64)
            cand = rng.normal(mean, stdev, size=(batch, n_dim))
            drawn += batch
            keep = np.all((cand >= lo) & (cand <= hi), axis=1)
            kept = cand[keep]
            take = min(kept.shape[0], n_samples - filled)
            pts[filled:filled + take] = kept[:take]
            filled += take
            if drawn > 10000 * n_samples:
                raise TooManyFailuresError(
                    "gaussian rejection sampling acceptance rate below 1e-4")
        acceptance = n_samples / drawn

    return SampleSet(points=pts, scheme=scheme, seed=int(seed), space=space,
                     excluded=[], acceptance_rate=acceptance)


def _sample_fim(model, theta, fd_step, method):
    jac = jacobian_fd(model, theta, relative_step=fd_step, method=method)
    return local_sfim(jac).matrix


def average_sfim(model: ParametricModel, samples: SampleSet,
                 fd_step: float = DEFAULT_RELATIVE_STEP, method: str = "central",
                 rank_tolerance: float = DEFAULT_RANK_TOLERANCE,
                 workers: int = 1) -> AverageSfim:
    """Equal-weight Monte Carlo mean of local FIMs over a sample set.

    Per-sample Jacobians are independent and may run on ``workers``
    threads; results are collected in sample order and reduced with
    numpy's fixed pairwise summation, so the estimate is bit-identical
    for a given seed regardless of worker count. Samples that fail to
    evaluate are appended to ``samples.excluded`` with the failure class;
    more than 50% exclusions aborts.
    """
    n = model.n
    pts = samples.points
    if pts.shape[1] != n:
        raise DimensionMismatchError(
            f"sample dimension {pts.shape[1]} != model parameters {n}")
    total = pts.shape[0]
    mask = samples.used_mask()
    candidates = [i for i in range(total) if mask[i]]

    def one(i):
        try:
            return i, _sample_fim(model, pts[i], fd_step, method), None
        except _EXCLUDABLE as exc:
            return i, None, type(exc).__name__

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, candidates))
    else:
        results = [one(i) for i in candidates]

    fims = []
    for i, fim, reason in results:
        if fim is None:
            samples.excluded.append((i, reason))
        else:
            fims.append(fim)
    if len(fims) < total - total // 2:
        raise TooManyFailuresError(
            f"{total - len(fims)} of {total} samples failed to evaluate")

    stack = np.asarray(fims)
    c = stack.mean(axis=0)
    c = 0.5 * (c + c.T)
    eig = eigendecompose(c, rank_tolerance=rank_tolerance)
    meta = {
        "scheme": samples.scheme,
        "seed": samples.seed,
        "n_samples": total,
        "n_excluded": total - len(fims),
        "fd_step": fd_step,
        "method": method,
        "acceptance_rate": samples.acceptance_rate,
    }
    return AverageSfim(matrix=c, eig=eig, n_samples_used=len(fims), sample_meta=meta)


def partition(eig: EigenAnalysis, criterion) -> SubspacePartition:
    """Split an eigenbasis into active and inactive blocks.

    The criterion is recorded verbatim in the result. The gap criterion
    picks the split after the largest consecutive eigenvalue ratio and
    raises :class:`DegenerateGapError` when no ratio reaches its
    ``min_ratio`` -- the caller must then choose a rank explicitly.
    """
    lam = eig.eigenvalues
    q = eig.eigenvectors
    n = lam.size
    if isinstance(criterion, FixedR):
        r = criterion.r
        if not 1 <= r <= n:
            raise ValueError(f"fixed rank {r} outside 1..{n}")
    elif isinstance(criterion, GapAfterLargestRatio):
        if n < 2:
            raise DegenerateGapError("cannot find a gap with a single eigenvalue")
        floor = np.finfo(float).tiny
        ratios = np.empty(n - 1)
        for i in range(n - 1):
            denom = max(abs(lam[i + 1]), floor)
            ratios[i] = np.inf if lam[i + 1] <= 0 < lam[i] else lam[i] / denom
        best = int(np.argmax(ratios))
        if not ratios[best] >= criterion.min_ratio:
            raise DegenerateGapError(
                f"largest consecutive eigenvalue ratio {ratios[best]:.3g} "
                f"below min_ratio {criterion.min_ratio:g}")
        r = best + 1
    elif isinstance(criterion, Threshold):
        lam_max = lam[0] if n else 0.0
        if lam_max <= 0:
            raise DegenerateGapError("no positive eigenvalues to threshold")
        r = int(np.sum(lam > criterion.cutoff * lam_max))
        if r == 0:
            raise DegenerateGapError("threshold excludes every direction")
    else:
        raise TypeError(f"unknown partition criterion {criterion!r}")

    return SubspacePartition(q_active=q[:, :r].copy(), q_inactive=q[:, r:].copy(),
                             r=r, criterion=criterion.describe())


def low_rank_eval(model: ParametricModel, part: SubspacePartition, theta) -> np.ndarray:
    """Evaluate the low-rank surrogate: the model at the active-subspace projection.

    The projected point may leave the sampling box; if the model cannot
    be evaluated there the failure is reported as
    :class:`ProjectionOutOfDomainError`.
    """
    theta = np.asarray(theta, dtype=float)
    qa = part.q_active
    projected = qa @ (qa.T @ theta)
    try:
        return evaluate(model, projected)
    except (NonFiniteError, NonFiniteStateError, StepSizeUnderflowError) as exc:
        raise ProjectionOutOfDomainError(
            f"model {model.name!r} not evaluable at projected point {projected!r}") from exc


def summary_table(samples: SampleSet, q_values, part: SubspacePartition,
                  rows: int) -> Table:
    """Per-sample active coordinates alongside the scalar QOI.

    Emits one row per non-excluded sample, in sample order, with columns
    ``w1..w<rows>`` (the first ``rows`` active coordinates) and ``q``,
    ready for external sufficient-summary plotting.
    """
    if rows < 1:
        raise ValueError("need at least one active coordinate row")
    if rows > part.r:
        raise ValueError(f"rows {rows} exceeds active dimension {part.r}")
    q_values = np.asarray(q_values, dtype=float)
    used = samples.points[samples.used_mask()]
    if q_values.shape != (used.shape[0],):
        raise AlignmentMismatchError(
            f"{q_values.shape[0]} QOI values for {used.shape[0]} usable samples")
    w = used @ part.q_active[:, :rows]
    headers = [f"w{i + 1}" for i in range(rows)] + ["q"]
    body = [list(w[i]) + [float(q_values[i])] for i in range(used.shape[0])]
    return Table(headers=headers, rows=body)
