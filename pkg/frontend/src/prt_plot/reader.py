"""Independent parser for prt report directories.

Implements only the on-disk contract (RFC-4180-style CSV with a leading
'#' provenance comment block, flat ``key = value`` metadata, and a
``sha256  filename`` manifest). Deliberately free of any dependency on
the analysis package: plots must be pure functions of the artifact
files.
"""

import csv
import hashlib
import os
from dataclasses import dataclass


class ArtifactError(Exception):
    """An artifact file is missing, malformed, or of the wrong schema."""


@dataclass(frozen=True)
class ArtifactTable:
    path: str
    headers: tuple
    columns: dict
    provenance: dict

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def column(self, name):
        if name not in self.columns:
            raise ArtifactError(f"{self.path}: missing column {name!r}")
        return self.columns[name]


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def read_table(path) -> ArtifactTable:
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    provenance = {}
    data_lines = []
    for line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            key, sep, val = body.partition(":")
            if sep:
                provenance[key.strip()] = val.strip()
            continue
        data_lines.append(line)
    if not data_lines:
        raise ArtifactError(f"{path}: no header row")
    rows = list(csv.reader(data_lines))
    headers = tuple(rows[0])
    if not headers or any(h == "" for h in headers):
        raise ArtifactError(f"{path}: empty header identifier")
    columns = {h: [] for h in headers}
    for row in rows[1:]:
        if len(row) != len(headers):
            raise ArtifactError(f"{path}: ragged row with {len(row)} cells")
        for h, cell in zip(headers, row):
            try:
                columns[h].append(float(cell))
            except ValueError:
                columns[h].append(cell)
    return ArtifactTable(path=str(path), headers=headers, columns=columns,
                         provenance=provenance)


def read_metadata(path) -> dict:
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ArtifactError(f"{path}: malformed metadata line {line!r}")
                key, _, val = line.partition("=")
                out[key.strip()] = val.strip()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    return out


def read_manifest(report_dir):
    path = os.path.join(report_dir, "manifest.txt")
    entries = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                checksum, sep, fname = line.partition("  ")
                if not sep:
                    raise ArtifactError(f"{path}: malformed manifest line {line!r}")
                entries.append((checksum, fname))
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    return entries
