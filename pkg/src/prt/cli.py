"""Command-line front end: sfim, active, profile, and approx pipelines.

Each subcommand reads one config file, runs its analysis, and writes a
report directory of CSV artifacts plus metadata and a checksum manifest.
Identical config and seed reproduce byte-identical reports regardless of
the worker count. Exit codes: 0 success, 2 configuration/usage errors,
1 runtime failures; failures print a machine-readable class on stderr.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .accel import backend_name
from .config import RunConfig, load_run_config
from .core import (
    ParameterSpace,
    ParametricModel,
    evaluate,
    scalar_cost_qoi,
    scale_to_unit,
    scaled_view,
)
from .errors import (
    ConfigError,
    DegenerateGapError,
    NonFiniteError,
    NonFiniteStateError,
    NotPeriodicError,
    PrtError,
    ProjectionOutOfDomainError,
    StepSizeUnderflowError,
)
from .models import get_model_entry, relative_box
from .profiling import chi2_threshold, classify_profile, profile_parameter, relationship_table
from .reports import AnalysisArtifact, Provenance, Table, write_report
from .sensitivity import (
    DEFAULT_RELATIVE_STEP,
    eigendecompose,
    identifiability_verdict,
    jacobian_fd,
    local_sfim,
)
from .subspace import (
    FixedR,
    GapAfterLargestRatio,
    average_sfim,
    low_rank_eval,
    partition,
    sample,
    summary_table,
)

_EVAL_FAILURES = (NonFiniteError, NotPeriodicError, StepSizeUnderflowError, NonFiniteStateError)


class _Run:
    """Resolved analysis context shared by the subcommands."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        try:
            entry = get_model_entry(cfg.model)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        self.names = entry.default_space.names
        n = len(self.names)

        theta_hat = cfg.theta_hat if cfg.theta_hat is not None else entry.default_theta_hat
        theta_hat = np.asarray(theta_hat, dtype=float)
        if theta_hat.shape != (n,):
            raise ConfigError(
                f"theta_hat has {theta_hat.size} entries, model {cfg.model!r} needs {n}")

        base = entry.factory(theta_hat=theta_hat)

        if cfg.bounds_spec == "default":
            space = entry.default_space
        elif cfg.bounds_spec == "absolute":
            if cfg.bounds_lower.size != n or cfg.bounds_upper.size != n:
                raise ConfigError("absolute bounds length mismatch")
            space = ParameterSpace(self.names, cfg.bounds_lower, cfg.bounds_upper)
        else:
            from .config import _parse_relative_bounds
            lo_frac, hi_frac = _parse_relative_bounds(cfg.bounds_spec)
            space = relative_box(self.names, theta_hat, lo_frac, hi_frac)
        if not space.contains(theta_hat):
            raise ConfigError("theta_hat lies outside the configured bounds")

        # QOI wrapping: 'vector' analyzes the native output; 'cost' wraps the
        # squared-residual scalar against y(theta_hat); 'period' requires a
        # model whose native output already is the period.
        if cfg.qoi == "cost":
            if base.output_spec.kind != "vector":
                raise ConfigError(f"qoi=cost requires a vector-output model, "
                                  f"{cfg.model!r} is {base.output_spec.kind}")
            analysis = scalar_cost_qoi(base, theta_hat)
        elif cfg.qoi == "period":
            if base.output_spec.labels != ("period",):
                raise ConfigError(f"qoi=period is only valid for period-QOI models")
            analysis = base
        else:
            analysis = base

        self.base = base
        self.analysis = analysis
        self.space = space
        self.theta_hat = theta_hat

        if cfg.scaling == "centered-unit":
            self.analysis_scaled, self.space_scaled = scaled_view(analysis, space)
            self.theta_scaled = scale_to_unit(space, theta_hat)
        else:
            self.analysis_scaled, self.space_scaled = analysis, space
            self.theta_scaled = theta_hat

        self.fd_step = cfg.fd_step if cfg.fd_step is not None else DEFAULT_RELATIVE_STEP

    def provenance(self, command: str) -> Provenance:
        return Provenance(model=self.cfg.model, command=command,
                          config_hash=self.cfg.config_hash(), seed=self.cfg.seed)

    def metadata(self, command: str, extra=None) -> dict:
        cfg = self.cfg
        md = {
            "model": cfg.model,
            "command": command,
            "seed": cfg.seed,
            "n_samples": cfg.n_samples,
            "fd_step": f"{self.fd_step:.16e}",
            "rank_tolerance": f"{cfg.rank_tolerance:.16e}",
            "gap_ratio": f"{cfg.gap_ratio:g}",
            "bounds_lo": ",".join(f"{v:.16e}" for v in self.space.lower),
            "bounds_hi": ",".join(f"{v:.16e}" for v in self.space.upper),
            "scaling": cfg.scaling,
            "qoi": cfg.qoi,
            "backend": backend_name(),
            "config_hash": cfg.config_hash(),
            "theta_hat": ",".join(f"{v:.16e}" for v in self.theta_hat),
            "parameters": ",".join(self.names),
        }
        if extra:
            md.update(extra)
        return md

    def scalar_summary_model(self) -> ParametricModel:
        """Scalar QOI used in summary tables and sample exports.

        The analysis QOI itself when scalar; otherwise the squared-residual
        cost against y(theta_hat) as the scalar stand-in for a vector QOI.
        """
        if self.analysis.output_spec.m == 1:
            return self.analysis
        return scalar_cost_qoi(self.base, self.theta_hat)


def _eig_artifacts(run, eig, command):
    prov = run.provenance(command)
    eig_rows = [[i + 1, float(v)] for i, v in enumerate(eig.eigenvalues)]
    eigenvalues = AnalysisArtifact(
        kind="eigenvalues", provenance=prov,
        payload=Table(["index", "eigenvalue"], eig_rows))
    headers = ["parameter"] + [f"v{i + 1}" for i in range(eig.eigenvalues.size)]
    vec_rows = [[run.names[i]] + [float(x) for x in eig.eigenvectors[i]]
                for i in range(len(run.names))]
    eigenvectors = AnalysisArtifact(
        kind="eigenvectors", provenance=prov,
        payload=Table(headers, vec_rows))
    return [eigenvalues, eigenvectors]


def cmd_sfim(cfg: RunConfig) -> str:
    """Local FIM at theta_hat: eigenpairs and identifiability verdict."""
    run = _Run(cfg)
    jac = jacobian_fd(run.analysis_scaled, run.theta_scaled,
                      relative_step=run.fd_step, method=cfg.fd_method)
    fim = local_sfim(jac)
    eig = eigendecompose(fim.matrix, rank_tolerance=cfg.rank_tolerance)
    verdict = identifiability_verdict(eig, len(run.names),
                                      near_deficiency_ratio=cfg.near_ratio)
    artifacts = _eig_artifacts(run, eig, "sfim")
    artifacts.append(AnalysisArtifact(
        kind="metadata", provenance=run.provenance("sfim"),
        payload=run.metadata("sfim", {
            "numerical_rank": eig.numerical_rank,
            "sloppiness_ratio": f"{eig.sloppiness_ratio:.6e}",
            "verdict": verdict.kind,
            "fd_method": cfg.fd_method,
        })))
    write_report(artifacts, cfg.output_dir)
    print(f"sfim: rank {eig.numerical_rank}/{len(run.names)} verdict {verdict.kind} "
          f"-> {cfg.output_dir}")
    return cfg.output_dir


def cmd_active(cfg: RunConfig) -> str:
    """Sampled average FIM: eigenpairs, partition, and summary tables."""
    run = _Run(cfg)
    ss = sample(run.space_scaled, cfg.scheme, cfg.n_samples, cfg.seed)

    qmodel = run.scalar_summary_model()
    if cfg.scaling == "centered-unit":
        qmodel, _ = scaled_view(qmodel, run.space)
    q_values = np.full(ss.n_samples, np.nan)
    for i in range(ss.n_samples):
        try:
            q_values[i] = evaluate(qmodel, ss.points[i])[0]
        except _EVAL_FAILURES as exc:
            ss.excluded.append((i, type(exc).__name__))

    avg = average_sfim(run.analysis_scaled, ss, fd_step=run.fd_step,
                       method=cfg.fd_method, rank_tolerance=cfg.rank_tolerance,
                       workers=cfg.workers)

    criterion = FixedR(cfg.subspace_r) if cfg.subspace_r > 0 \
        else GapAfterLargestRatio(cfg.gap_ratio)
    try:
        part = partition(avg.eig, criterion)
        degenerate = False
    except DegenerateGapError:
        # no usable gap (e.g. an eigenvalue ladder without steps): keep just
        # enough directions for the requested summary tables and flag it
        fallback = min(max(cfg.summary_rows, 1), len(run.names))
        part = partition(avg.eig, FixedR(fallback))
        degenerate = True

    rows = max(1, min(cfg.summary_rows, part.r))
    used = ss.used_mask()
    summary = summary_table(ss, q_values[used], part, rows)

    prov = run.provenance("active")
    artifacts = _eig_artifacts(run, avg.eig, "active")
    artifacts.append(AnalysisArtifact(kind="summary", provenance=prov, payload=summary))
    sample_rows = []
    for i in np.nonzero(used)[0]:
        sample_rows.append([int(i)] + [float(v) for v in ss.points[i]] + [float(q_values[i])])
    artifacts.append(AnalysisArtifact(
        kind="samples", provenance=prov,
        payload=Table(["index"] + list(run.names) + ["q"], sample_rows)))
    exclusions = ";".join(f"{i}:{reason}" for i, reason in sorted(ss.excluded)) or "none"
    artifacts.append(AnalysisArtifact(
        kind="metadata", provenance=prov,
        payload=run.metadata("active", {
            "scheme": cfg.scheme,
            "n_samples_used": avg.n_samples_used,
            "n_excluded": len(ss.excluded),
            "exclusions": exclusions,
            "acceptance_rate": f"{ss.acceptance_rate:.6g}",
            "active_r": part.r,
            "partition_criterion": part.criterion,
            "partition_degenerate_gap": int(degenerate),
            "summary_rows": rows,
        })))
    write_report(artifacts, cfg.output_dir)
    print(f"active: {avg.n_samples_used}/{cfg.n_samples} samples, r={part.r} "
          f"-> {cfg.output_dir}")
    return cfg.output_dir


def _resolve_profile_bounds(run):
    cfg = run.cfg
    if cfg.profile_bounds_spec == "space":
        return run.space.lower.copy(), run.space.upper.copy()
    if cfg.profile_bounds_spec == "absolute":
        n = len(run.names)
        if cfg.profile_bounds_lower.size != n or cfg.profile_bounds_upper.size != n:
            raise ConfigError("profile.bounds length mismatch")
        return cfg.profile_bounds_lower.copy(), cfg.profile_bounds_upper.copy()
    from .config import _parse_relative_bounds
    lo_frac, hi_frac = _parse_relative_bounds(cfg.profile_bounds_spec)
    if np.any(run.theta_hat <= 0):
        raise ConfigError("relative profile bounds need a positive theta_hat")
    return lo_frac * run.theta_hat, hi_frac * run.theta_hat


def _profile_grid(run, index, lo, hi):
    cfg = run.cfg
    n_pts = cfg.profile_grid_points
    if cfg.profile_grid == "auto":
        center = run.theta_hat[index]
        g_lo, g_hi = 0.5 * center, 1.5 * center
        g_lo, g_hi = max(g_lo, lo[index]), min(g_hi, hi[index])
    else:
        parts = cfg.profile_grid.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"malformed profile.grid {cfg.profile_grid!r}")
        try:
            g_lo, g_hi, n_pts = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"malformed profile.grid {cfg.profile_grid!r}") from exc
        if len(parts) == 4 and parts[3] == "log":
            if g_lo <= 0:
                raise ConfigError("log-spaced grid needs positive endpoints")
            return np.geomspace(g_lo, g_hi, n_pts)
    if not (g_lo < g_hi):
        raise ConfigError("empty profile grid")
    if g_lo < lo[index] - 1e-12 or g_hi > hi[index] + 1e-12:
        raise ConfigError(
            f"profile grid [{g_lo:g}, {g_hi:g}] outside bounds "
            f"[{lo[index]:g}, {hi[index]:g}] for {run.names[index]!r}")
    if g_lo > 0 and g_hi / g_lo > 10.0:
        return np.geomspace(g_lo, g_hi, n_pts)
    return np.linspace(g_lo, g_hi, n_pts)


def cmd_profile(cfg: RunConfig) -> str:
    """Profile each listed parameter and classify its confidence interval."""
    run = _Run(cfg)
    if not cfg.profile_parameters:
        raise ConfigError("profile.parameters is empty")
    if cfg.profile_alpha is None and cfg.profile_delta is None:
        raise ConfigError("profiling needs profile.alpha or an explicit profile.delta")
    if cfg.profile_alpha is not None:
        delta = chi2_threshold(cfg.profile_alpha, len(run.names))
    else:
        delta = cfg.profile_delta

    wanted = list(cfg.profile_parameters)
    if wanted == ["all"]:
        wanted = list(run.names)
    for name in wanted:
        if name not in run.names:
            raise ConfigError(f"unknown profile parameter {name!r}")

    lo, hi = _resolve_profile_bounds(run)
    prov = run.provenance("profile")
    artifacts = []
    extra = {"delta": f"{delta:.16e}",
             "alpha": "" if cfg.profile_alpha is None else f"{cfg.profile_alpha:g}",
             "profiled": ",".join(wanted)}
    for name in wanted:
        index = run.names.index(name)
        grid = _profile_grid(run, index, lo, hi)
        trace = profile_parameter(run.analysis, run.theta_hat, index, grid,
                                  restarts=cfg.profile_restarts, bounds=(lo, hi),
                                  seed=cfg.seed + index)
        interval = classify_profile(trace, delta)
        rows = []
        for j in range(grid.size):
            rows.append([float(grid[j]), float(trace.cost_min[j]),
                         int(trace.converged[j]), int(trace.failed[j]),
                         int(trace.iterations[j])])
        artifacts.append(AnalysisArtifact(
            kind="profile", suffix=name, provenance=prov,
            payload=Table([f"{name}_star", "cost_min", "converged", "failed",
                           "iterations"], rows)))
        artifacts.append(AnalysisArtifact(
            kind="relationship", suffix=name, provenance=prov,
            payload=relationship_table(trace, names=list(run.names))))
        extra[f"classification_{name}"] = interval.classification
        extra[f"interval_{name}"] = f"{interval.kind}:{interval.lo:.6g}:{interval.hi:.6g}"
        print(f"profile {name}: {interval.classification} ({interval.kind})")
    artifacts.append(AnalysisArtifact(
        kind="metadata", provenance=prov, payload=run.metadata("profile", extra)))
    write_report(artifacts, cfg.output_dir)
    return cfg.output_dir


def cmd_approx(cfg: RunConfig) -> str:
    """Compare the low-rank surrogate against the full model on fresh samples."""
    run = _Run(cfg)
    ss = sample(run.space_scaled, cfg.scheme, cfg.n_samples, cfg.seed)
    avg = average_sfim(run.analysis_scaled, ss, fd_step=run.fd_step,
                       method=cfg.fd_method, rank_tolerance=cfg.rank_tolerance,
                       workers=cfg.workers)
    criterion = FixedR(cfg.subspace_r) if cfg.subspace_r > 0 \
        else GapAfterLargestRatio(cfg.gap_ratio)
    part = partition(avg.eig, criterion)

    fresh = sample(run.space_scaled, cfg.scheme, cfg.approx_n, cfg.seed + 1)
    rows = []
    devs = []
    n_failed = 0
    for i in range(fresh.n_samples):
        theta = fresh.points[i]
        try:
            f_val = evaluate(run.analysis_scaled, theta)
            g_val = low_rank_eval(run.analysis_scaled, part, theta)
        except (_EVAL_FAILURES + (ProjectionOutOfDomainError,)):
            n_failed += 1
            continue
        f_norm = float(np.linalg.norm(f_val))
        rel = float(np.linalg.norm(g_val - f_val) / max(f_norm, 1e-300))
        devs.append(rel)
        rows.append([int(i)] + [float(v) for v in theta]
                    + [f_norm, float(np.linalg.norm(g_val)), rel])
    if not devs:
        raise PrtError("no sample evaluable for surrogate comparison")
    prov = run.provenance("approx")
    artifacts = [AnalysisArtifact(
        kind="samples", provenance=prov,
        payload=Table(["index"] + list(run.names) + ["f_norm", "g_norm", "rel_dev"], rows))]
    artifacts.extend(_eig_artifacts(run, avg.eig, "approx"))
    artifacts.append(AnalysisArtifact(
        kind="metadata", provenance=prov,
        payload=run.metadata("approx", {
            "active_r": part.r,
            "partition_criterion": part.criterion,
            "approx_n": cfg.approx_n,
            "approx_failed": n_failed,
            "max_rel_deviation": f"{max(devs):.16e}",
            "mean_rel_deviation": f"{float(np.mean(devs)):.16e}",
        })))
    write_report(artifacts, cfg.output_dir)
    print(f"approx: r={part.r} max rel deviation {max(devs):.3e} -> {cfg.output_dir}")
    return cfg.output_dir


_COMMANDS = {
    "sfim": cmd_sfim,
    "active": cmd_active,
    "profile": cmd_profile,
    "approx": cmd_approx,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="prt",
        description="Parameter-reduction toolkit: local/averaged sensitivity FIMs, "
                    "active subspaces, and parameter profiles.")
    parser.add_argument("--version", action="version", version=f"prt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override sampling.seed")
        p.add_argument("--workers", type=int,
                       default=int(os.environ.get("PRT_WORKERS", "0")) or None,
                       help="override worker count (default env PRT_WORKERS)")
        p.add_argument("--out", default=None, help="override output directory")
    args = parser.parse_args(argv)
    try:
        cfg = load_run_config(args.config, seed=args.seed, workers=args.workers,
                              out=args.out)
        _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return 2
    except PrtError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
