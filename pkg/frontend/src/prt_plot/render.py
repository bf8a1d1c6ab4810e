"""Render the standard figure set from prt report artifacts.

Seven plot kinds: eigenvalue ladders, eigenvector loading bars, profile
curves with threshold lines, parameter-relationship plots (with an
automatic log-log toggle), 1D/2D sufficient-summary scatters, and binned
QOI heat maps. Every image embeds the sha256 of each artifact file it
consumed, making it checkable that figures are pure functions of the
report: this package never recomputes analysis numerics.
"""

import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reader import ArtifactError, read_metadata, read_table, sha256_of

KINDS = ("ladder", "loadings", "profile", "relationship", "summary1d",
         "summary2d", "heatmap")

#: span ratio beyond which positive-valued relationship axes flip to log-log
LOGLOG_SPAN_RATIO = 10.0

_FIGSIZE = (6.4, 4.8)
_DPI = 110


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: artifact paths, kind, axis options, output path."""

    kind: str
    table_path: str
    out_path: str
    metadata_path: Optional[str] = None
    log_x: Optional[bool] = None  # None = automatic
    log_y: Optional[bool] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArtifactError(f"unknown plot kind {self.kind!r}")


def _finite(values):
    arr = np.asarray([v for v in values if isinstance(v, float)], dtype=float)
    return arr[np.isfinite(arr)]


def _numeric_column(table, name):
    col = table.column(name)
    out = np.full(len(col), np.nan)
    for i, v in enumerate(col):
        if isinstance(v, float):
            out[i] = v
    return out


def build_ladder(table):
    lam = _numeric_column(table, "eigenvalue")
    idx = np.arange(1, lam.size + 1)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(idx, lam, "o", markersize=7)
    positive = lam[lam > 0]
    if positive.size >= 2 and positive.max() / positive.min() > 100.0 \
            and np.all(lam > 0):
        ax.set_yscale("log")
    ax.set_xticks(idx)
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title("eigenvalue ladder")
    ax.grid(True, alpha=0.3)
    return fig


def build_loadings(table):
    params = [str(v) for v in table.column("parameter")]
    vec_names = [h for h in table.headers if h.startswith("v")]
    if not vec_names:
        raise ArtifactError(f"{table.path}: no eigenvector columns")
    n = len(vec_names)
    n_show = min(n, 4)
    fig, axes = plt.subplots(1, n_show, figsize=(3.0 * n_show, 3.6), sharey=True)
    if n_show == 1:
        axes = [axes]
    x = np.arange(len(params))
    for j in range(n_show):
        vals = np.abs(_numeric_column(table, vec_names[j]))
        axes[j].bar(x, vals)
        axes[j].set_title(vec_names[j])
        axes[j].set_xticks(x)
        axes[j].set_xticklabels(params, rotation=60, ha="right", fontsize=7)
    axes[0].set_ylabel("|component|")
    fig.suptitle("eigenvector loadings")
    fig.tight_layout()
    return fig


def build_profile(table, metadata=None):
    name = table.headers[0]
    grid = _numeric_column(table, name)
    cost = _numeric_column(table, "cost_min")
    if "failed" in table.headers:
        ok = _numeric_column(table, "failed") == 0.0
        grid, cost = grid[ok], cost[ok]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(grid, cost, "o-", label="minimized cost")
    if metadata and "delta" in metadata:
        try:
            delta = float(metadata["delta"])
        except ValueError:
            delta = None
        if delta is not None:
            ax.axhline(delta, color="tab:red", linestyle=":",
                       label=f"threshold {delta:.4g}")
    ax.set_xlabel(name)
    ax.set_ylabel("cost")
    ax.set_title(f"parameter profile: {name}")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return fig


def _loglog_auto(x, ys):
    vals = np.concatenate([x] + ys)
    vals = vals[np.isfinite(vals)]
    if vals.size == 0 or np.any(vals <= 0):
        return False
    for arr in [x] + ys:
        arr = arr[np.isfinite(arr)]
        if arr.size and arr.min() > 0 and arr.max() / arr.min() > LOGLOG_SPAN_RATIO:
            return True
    return False


def build_relationship(table, log_x=None, log_y=None):
    star = table.headers[0]
    others = [h for h in table.headers[1:] if not h.startswith("log_")]
    if not others:
        raise ArtifactError(f"{table.path}: no companion parameter columns")
    x = _numeric_column(table, star)
    ys = [_numeric_column(table, h) for h in others]
    auto = _loglog_auto(x, ys)
    use_log_x = auto if log_x is None else log_x
    use_log_y = auto if log_y is None else log_y
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for h, y in zip(others, ys):
        ax.plot(x, y, "o-", label=h)
    if use_log_x:
        ax.set_xscale("log")
    if use_log_y:
        ax.set_yscale("log")
    ax.set_xlabel(star)
    ax.set_ylabel("refitted value")
    ax.set_title("parameter relationships" + (" (log-log)" if use_log_x else ""))
    ax.legend()
    ax.grid(True, alpha=0.3, which="both")
    return fig


def build_summary1d(table):
    w1 = _numeric_column(table, "w1")
    q = _numeric_column(table, "q")
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(w1, q, ".", markersize=4, alpha=0.7)
    ax.set_xlabel("first active coordinate")
    ax.set_ylabel("QOI")
    ax.set_title("sufficient summary (1 active direction)")
    ax.grid(True, alpha=0.3)
    return fig


def build_summary2d(table):
    if "w2" not in table.headers:
        raise ArtifactError(f"{table.path}: summary2d needs a second active coordinate")
    w1 = _numeric_column(table, "w1")
    w2 = _numeric_column(table, "w2")
    q = _numeric_column(table, "q")
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    sc = ax.scatter(w1, w2, c=q, s=14, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="QOI")
    ax.set_xlabel("first active coordinate")
    ax.set_ylabel("second active coordinate")
    ax.set_title("sufficient summary (2 active directions)")
    return fig


def build_heatmap(table, bins=24):
    headers = list(table.headers)
    if "q" not in headers:
        raise ArtifactError(f"{table.path}: heatmap needs a QOI column 'q'")
    params = [h for h in headers if h not in ("index", "q", "f_norm", "g_norm",
                                              "rel_dev")]
    if len(params) < 2:
        raise ArtifactError(f"{table.path}: heatmap needs two parameter columns")
    x = _numeric_column(table, params[0])
    y = _numeric_column(table, params[1])
    q = _numeric_column(table, "q")
    counts, xe, ye = np.histogram2d(x, y, bins=bins)
    sums, _, _ = np.histogram2d(x, y, bins=[xe, ye], weights=q)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / counts, np.nan)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    im = ax.pcolormesh(xe, ye, means.T, cmap="viridis")
    fig.colorbar(im, ax=ax, label="mean QOI")
    ax.set_xlabel(params[0])
    ax.set_ylabel(params[1])
    ax.set_title("QOI heat map")
    return fig


def render(spec: PlotSpec) -> str:
    """Render one figure; returns the written image path.

    The PNG embeds ``prt-inputs``: a ``file=sha256`` list of every
    artifact file consumed, so consumers can verify the image matches
    its inputs without recomputation.
    """
    table = read_table(spec.table_path)
    consumed = {os.path.basename(spec.table_path): sha256_of(spec.table_path)}
    metadata = None
    if spec.metadata_path and os.path.exists(spec.metadata_path):
        metadata = read_metadata(spec.metadata_path)
        consumed[os.path.basename(spec.metadata_path)] = sha256_of(spec.metadata_path)

    if spec.kind == "ladder":
        fig = build_ladder(table)
    elif spec.kind == "loadings":
        fig = build_loadings(table)
    elif spec.kind == "profile":
        fig = build_profile(table, metadata=metadata)
    elif spec.kind == "relationship":
        fig = build_relationship(table, log_x=spec.log_x, log_y=spec.log_y)
    elif spec.kind == "summary1d":
        fig = build_summary1d(table)
    elif spec.kind == "summary2d":
        fig = build_summary2d(table)
    else:
        fig = build_heatmap(table)

    os.makedirs(os.path.dirname(os.path.abspath(spec.out_path)), exist_ok=True)
    stamp = ";".join(f"{name}={digest}" for name, digest in sorted(consumed.items()))
    fig.savefig(spec.out_path, dpi=_DPI, metadata={"prt-inputs": stamp})
    plt.close(fig)
    return spec.out_path


def plan_report(report_dir, out_dir):
    """Map a report directory's artifacts onto figure specs."""
    from .reader import read_manifest

    specs = []
    md_path = os.path.join(report_dir, "metadata.kv")
    md_path = md_path if os.path.exists(md_path) else None
    for _, fname in read_manifest(report_dir):
        path = os.path.join(report_dir, fname)
        base = fname.rsplit(".", 1)[0]
        if fname == "eigenvalues.csv":
            specs.append(PlotSpec("ladder", path, os.path.join(out_dir, "ladder.png"),
                                  metadata_path=md_path))
        elif fname == "eigenvectors.csv":
            specs.append(PlotSpec("loadings", path,
                                  os.path.join(out_dir, "loadings.png"),
                                  metadata_path=md_path))
        elif fname.startswith("profile_") and fname.endswith(".csv"):
            specs.append(PlotSpec("profile", path,
                                  os.path.join(out_dir, f"{base}.png"),
                                  metadata_path=md_path))
        elif fname.startswith("relationship_") and fname.endswith(".csv"):
            specs.append(PlotSpec("relationship", path,
                                  os.path.join(out_dir, f"{base}.png"),
                                  metadata_path=md_path))
        elif fname == "summary.csv":
            specs.append(PlotSpec("summary1d", path,
                                  os.path.join(out_dir, "summary1d.png"),
                                  metadata_path=md_path))
            table = read_table(path)
            if "w2" in table.headers:
                specs.append(PlotSpec("summary2d", path,
                                      os.path.join(out_dir, "summary2d.png"),
                                      metadata_path=md_path))
        elif fname == "samples.csv":
            table = read_table(path)
            if "q" in table.headers:
                specs.append(PlotSpec("heatmap", path,
                                      os.path.join(out_dir, "heatmap.png"),
                                      metadata_path=md_path))
        elif fname in ("metadata.kv",):
            continue
        else:
            warnings.warn(f"skipping unrecognized artifact {fname}", stacklevel=2)
    return specs


def render_manifest(report_dir, out_dir):
    """Render one image per recognized artifact; returns written paths."""
    written = []
    for spec in plan_report(report_dir, out_dir):
        written.append(render(spec))
    return written
