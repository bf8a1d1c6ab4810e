"""Run configuration: a flat key-value file, hashed into artifact provenance.

Grammar: one ``key = value`` per line, ``#`` comments, dotted keys for
grouping. Lists are comma-separated. A relative bounds spec such as
``50:150%`` scales the reference point; absolute bounds use
``bounds.lower`` / ``bounds.upper``. Command-line flags (``--seed``,
``--workers``, ``--out``) override file keys. The resolved configuration
is canonicalized and hashed so identical runs are identifiable from
artifacts alone.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError

_DEFAULTS = {
    "qoi": "vector",
    "bounds": "default",
    "scaling": "raw",
    "sampling.scheme": "lhs",
    "sampling.n": "500",
    "sampling.seed": "0",
    "workers": "1",
    "fd_step": "",          # empty = package default (cube root of epsilon)
    "fd_method": "central",
    "rank_tolerance": "1e-8",
    "gap_ratio": "10",
    "near_ratio": "1e3",
    "subspace.r": "0",      # 0 = gap criterion
    "summary.rows": "2",
    "profile.parameters": "",
    "profile.grid": "auto",
    "profile.grid_points": "21",
    "profile.alpha": "",
    "profile.delta": "",
    "profile.restarts": "0",
    "profile.bounds": "space",
    "approx.n": "200",
    "output_dir": "prt-report",
}

_KNOWN_KEYS = set(_DEFAULTS) | {
    "model", "theta_hat", "bounds.lower", "bounds.upper",
    "profile.bounds.lower", "profile.bounds.upper",
}


def parse_config_file(path) -> dict:
    """Parse ``key = value`` lines into a string-to-string dict."""
    entries = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, val = stripped.partition("=")
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        entries[key] = val.strip()
    return entries


def _floats(text, what):
    try:
        return np.array([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError as exc:
        raise ConfigError(f"malformed float list for {what}: {text!r}") from exc


def _float(entries, key, default=None):
    raw = entries.get(key, "")
    if raw == "":
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"malformed float for {key}: {raw!r}") from exc


def _int(entries, key):
    raw = entries[key]
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"malformed integer for {key}: {raw!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Validated, resolved run configuration."""

    model: str
    qoi: str
    theta_hat: Optional[np.ndarray]
    bounds_spec: str
    bounds_lower: Optional[np.ndarray]
    bounds_upper: Optional[np.ndarray]
    scaling: str
    scheme: str
    n_samples: int
    seed: int
    workers: int
    fd_step: Optional[float]
    fd_method: str
    rank_tolerance: float
    gap_ratio: float
    near_ratio: float
    subspace_r: int
    summary_rows: int
    profile_parameters: tuple
    profile_grid: str
    profile_grid_points: int
    profile_alpha: Optional[float]
    profile_delta: Optional[float]
    profile_restarts: int
    profile_bounds_spec: str
    profile_bounds_lower: Optional[np.ndarray]
    profile_bounds_upper: Optional[np.ndarray]
    approx_n: int
    output_dir: str
    resolved: dict = field(repr=False)

    def config_hash(self) -> str:
        # workers and output_dir are execution details: reports must be
        # byte-identical regardless of either, so they stay out of the hash
        skip = {"workers", "output_dir"}
        canon = "\n".join(f"{k} = {self.resolved[k]}"
                          for k in sorted(self.resolved) if k not in skip)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _parse_relative_bounds(spec):
    # "50:150%" -> (0.5, 1.5)
    body = spec[:-1] if spec.endswith("%") else spec
    lo, _, hi = body.partition(":")
    try:
        lo_frac, hi_frac = float(lo) / 100.0, float(hi) / 100.0
    except ValueError as exc:
        raise ConfigError(f"malformed relative bounds {spec!r}; expected e.g. 50:150%") from exc
    if not 0 <= lo_frac < hi_frac:
        raise ConfigError(f"relative bounds {spec!r} must satisfy 0 <= lo < hi")
    return lo_frac, hi_frac


def load_run_config(path, seed=None, workers=None, out=None) -> RunConfig:
    """Read, override, validate, and resolve a configuration file."""
    entries = dict(_DEFAULTS)
    entries.update(parse_config_file(path))
    if seed is not None:
        entries["sampling.seed"] = str(int(seed))
    if workers is not None:
        entries["workers"] = str(int(workers))
    if out is not None:
        entries["output_dir"] = str(out)

    if "model" not in entries or not entries["model"]:
        raise ConfigError("missing model name (key 'model')")
    qoi = entries["qoi"]
    if qoi not in ("vector", "cost", "period"):
        raise ConfigError(f"qoi must be vector, cost, or period, got {qoi!r}")
    scaling = entries["scaling"]
    if scaling not in ("raw", "centered-unit"):
        raise ConfigError(f"scaling must be raw or centered-unit, got {scaling!r}")
    scheme = entries["sampling.scheme"]
    if scheme not in ("lhs", "uniform-iid", "gaussian-iid"):
        raise ConfigError(f"unknown sampling scheme {scheme!r}")
    n_samples = _int(entries, "sampling.n")
    if n_samples < 2:
        raise ConfigError(f"sampling.n must be >= 2, got {n_samples}")
    fd_method = entries["fd_method"]
    if fd_method not in ("central", "forward", "analytic"):
        raise ConfigError(f"unknown fd_method {fd_method!r}")

    theta_hat = None
    if entries.get("theta_hat", ""):
        theta_hat = _floats(entries["theta_hat"], "theta_hat")

    bounds_spec = entries["bounds"]
    bounds_lower = bounds_upper = None
    if "bounds.lower" in entries or "bounds.upper" in entries:
        if not ("bounds.lower" in entries and "bounds.upper" in entries):
            raise ConfigError("bounds.lower and bounds.upper must be given together")
        bounds_spec = "absolute"
        bounds_lower = _floats(entries["bounds.lower"], "bounds.lower")
        bounds_upper = _floats(entries["bounds.upper"], "bounds.upper")
    elif bounds_spec != "default":
        _parse_relative_bounds(bounds_spec)  # validate early

    profile_bounds_spec = entries["profile.bounds"]
    profile_bounds_lower = profile_bounds_upper = None
    if "profile.bounds.lower" in entries or "profile.bounds.upper" in entries:
        if not ("profile.bounds.lower" in entries and "profile.bounds.upper" in entries):
            raise ConfigError("profile.bounds.lower/upper must be given together")
        profile_bounds_spec = "absolute"
        profile_bounds_lower = _floats(entries["profile.bounds.lower"], "profile.bounds.lower")
        profile_bounds_upper = _floats(entries["profile.bounds.upper"], "profile.bounds.upper")
    elif profile_bounds_spec not in ("space",) and not profile_bounds_spec.endswith("%"):
        raise ConfigError(f"profile.bounds must be 'space', a percent range, or absolute lists")

    alpha = _float(entries, "profile.alpha")
    delta = _float(entries, "profile.delta")
    if alpha is not None and delta is not None:
        raise ConfigError("give either profile.alpha or profile.delta, not both")
    if alpha is not None and not 0.0 < alpha < 1.0:
        raise ConfigError(f"profile.alpha must be in (0, 1), got {alpha}")

    params = tuple(p.strip() for p in entries["profile.parameters"].split(",") if p.strip())

    resolved = dict(entries)
    cfg = RunConfig(
        model=entries["model"],
        qoi=qoi,
        theta_hat=theta_hat,
        bounds_spec=bounds_spec,
        bounds_lower=bounds_lower,
        bounds_upper=bounds_upper,
        scaling=scaling,
        scheme=scheme,
        n_samples=n_samples,
        seed=_int(entries, "sampling.seed"),
        workers=max(1, _int(entries, "workers")),
        fd_step=_float(entries, "fd_step"),
        fd_method=fd_method,
        rank_tolerance=_float(entries, "rank_tolerance", 1e-8),
        gap_ratio=_float(entries, "gap_ratio", 10.0),
        near_ratio=_float(entries, "near_ratio", 1e3),
        subspace_r=_int(entries, "subspace.r"),
        summary_rows=_int(entries, "summary.rows"),
        profile_parameters=params,
        profile_grid=entries["profile.grid"],
        profile_grid_points=_int(entries, "profile.grid_points"),
        profile_alpha=alpha,
        profile_delta=delta,
        profile_restarts=_int(entries, "profile.restarts"),
        profile_bounds_spec=profile_bounds_spec,
        profile_bounds_lower=profile_bounds_lower,
        profile_bounds_upper=profile_bounds_upper,
        approx_n=_int(entries, "approx.n"),
        output_dir=entries["output_dir"],
        resolved=resolved,
    )
    return cfg
