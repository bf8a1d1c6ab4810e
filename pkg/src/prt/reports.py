"""Stable on-disk artifact formats: CSV tables, key-value metadata, manifests.

Artifacts are plain CSV plus a flat key-value metadata file so that
external consumers (the plotting front end, test oracles in any
language) can parse them trivially. Every artifact embeds a provenance
comment block; identical (config, seed) runs reproduce byte-identical
files. Floats are printed in scientific notation with 17 significant
digits -- beyond the spec'd 12 so that reading a file back recovers the
exact binary values.
"""

import csv
import hashlib
import io
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import MalformedCsvError

#: exact round-trip for IEEE doubles, and headroom over published 6-digit values
FLOAT_FORMAT = "{:.16e}"

ARTIFACT_KINDS = ("eigenvalues", "eigenvectors", "summary", "profile",
                  "relationship", "samples", "metadata")


@dataclass(frozen=True)
class Table:
    """Rectangular table: a header row of identifiers plus data rows."""

    headers: tuple
    rows: tuple

    def __init__(self, headers, rows):
        headers = tuple(str(h) for h in headers)
        rows = tuple(tuple(r) for r in rows)
        for r in rows:
            if len(r) != len(headers):
                raise ValueError(f"row of length {len(r)} under {len(headers)} headers")
        object.__setattr__(self, "headers", headers)
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name):
        i = self.headers.index(name)
        return [r[i] for r in self.rows]


@dataclass(frozen=True)
class Provenance:
    """Reproducibility stamp embedded in every artifact file.

    Deliberately excludes wall-clock time: reruns with identical config
    and seed must produce byte-identical files.
    """

    model: str
    command: str
    config_hash: str
    seed: int

    def lines(self):
        return [
            f"# model: {self.model}",
            f"# command: {self.command}",
            f"# config_hash: {self.config_hash}",
            f"# seed: {self.seed}",
        ]


@dataclass(frozen=True)
class AnalysisArtifact:
    """One serializable analysis result destined for a report directory."""

    kind: str
    payload: object  # Table for tabular kinds, dict for metadata
    provenance: Provenance
    suffix: str = ""  # e.g. parameter name for profile/relationship files

    def __post_init__(self):
        if self.kind not in ARTIFACT_KINDS:
            raise ValueError(f"unknown artifact kind {self.kind!r}")

    def filename(self) -> str:
        if self.kind == "metadata":
            return "metadata.kv"
        if self.suffix:
            return f"{self.kind}_{self.suffix}.csv"
        return f"{self.kind}.csv"


def _format_cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return FLOAT_FORMAT.format(v)
    if isinstance(v, int):
        return str(v)
    try:
        import numpy as np
        if isinstance(v, np.floating):
            return FLOAT_FORMAT.format(float(v))
        if isinstance(v, np.integer):
            return str(int(v))
    except ImportError:  # pragma: no cover
        pass
    return str(v)


def write_csv(table: Table, path, provenance: Optional[Provenance] = None) -> None:
    """Write an RFC-4180-style CSV with '.' decimal separator.

    A leading '#'-comment provenance block precedes the header row when
    provenance is given; :func:`read_csv` skips and returns it.
    """
    buf = io.StringIO()
    if provenance is not None:
        for line in provenance.lines():
            buf.write(line + "\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(table.headers)
    for row in table.rows:
        writer.writerow([_format_cell(v) for v in row])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def _parse_cell(s: str):
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(path):
    """Read a CSV artifact back into a :class:`Table`.

    Returns ``(table, provenance_dict)``; numeric cells come back as
    floats, everything else as strings.
    """
    prov = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    data_lines = []
    for line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, _, val = body.partition(":")
                prov[key.strip()] = val.strip()
            continue
        data_lines.append(line)
    if not data_lines:
        raise MalformedCsvError(f"{path}: no header row")
    reader = csv.reader(data_lines)
    rows = list(reader)
    headers = rows[0]
    if not headers or any(h == "" for h in headers):
        raise MalformedCsvError(f"{path}: empty header identifier")
    parsed = []
    for r in rows[1:]:
        if len(r) != len(headers):
            raise MalformedCsvError(
                f"{path}: row with {len(r)} cells under {len(headers)} headers")
        parsed.append([_parse_cell(c) for c in r])
    return Table(headers=headers, rows=parsed), prov


def write_metadata(entries: dict, path, provenance: Optional[Provenance] = None) -> None:
    """Write a flat ``key = value`` metadata file."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if provenance is not None:
            for line in provenance.lines():
                fh.write(line + "\n")
        for key in entries:
            fh.write(f"{key} = {entries[key]}\n")


def read_metadata(path):
    """Parse a ``key = value`` metadata file into a dict of strings."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise MalformedCsvError(f"{path}: malformed metadata line {line!r}")
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _is_contract_file(name: str) -> bool:
    if name == "metadata.kv":
        return True
    if not name.endswith(".csv"):
        return False
    stem = name[:-4]
    return stem in ("eigenvalues", "eigenvectors", "summary", "samples") \
        or stem.startswith("profile_") or stem.startswith("relationship_")


def write_report(artifacts, out_dir) -> str:
    """Write one file per artifact plus a checksum manifest.

    Returns the manifest path. File naming is a stable contract:
    ``eigenvalues.csv``, ``eigenvectors.csv``, ``summary.csv``,
    ``profile_<param>.csv``, ``relationship_<param>.csv``,
    ``samples.csv``, ``metadata.kv``, ``manifest.txt``. The manifest
    covers every contract-named file in the directory, so commands can
    layer their artifacts into one report directory.
    """
    os.makedirs(out_dir, exist_ok=True)
    for art in artifacts:
        fname = art.filename()
        path = os.path.join(out_dir, fname)
        if art.kind == "metadata":
            write_metadata(art.payload, path, provenance=art.provenance)
        else:
            write_csv(art.payload, path, provenance=art.provenance)
    if artifacts:
        names = sorted(n for n in os.listdir(out_dir) if _is_contract_file(n))
    else:
        names = []
    manifest_path = os.path.join(out_dir, "manifest.txt")
    with open(manifest_path, "w", newline="", encoding="utf-8") as fh:
        for fname in names:
            fh.write(f"{_sha256_file(os.path.join(out_dir, fname))}  {fname}\n")
    return manifest_path


def read_manifest(path):
    """Parse ``manifest.txt`` into a list of (checksum, filename) pairs."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            checksum, _, fname = line.partition("  ")
            if not checksum or not fname:
                raise MalformedCsvError(f"{path}: malformed manifest line {line!r}")
            out.append((checksum, fname))
    return out
