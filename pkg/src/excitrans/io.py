"""On-disk formats.

Structures are JSON lines ``{"id", "n", "eps", "coords"}`` with every float
written with 17 significant digits, so records parse back bit-identically.
Tables are plain CSV with a header row.  Each output directory carries a
``manifest.json`` whose ``schema_version`` downstream stages check.
"""

import csv
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .dynamics import Structure
from .errors import MissingInputError, SchemaVersionError

SCHEMA_VERSION = 1
MANIFEST = "manifest.json"


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def structure_line(s, eps=None, extra=None):
    coords = ",".join("[" + ",".join(fmt(v) for v in row) + "]" for row in s.coords)
    parts = [f'"id": {int(s.id)}', f'"n": {s.n}',
             f'"eps": {fmt(eps) if eps is not None else "null"}',
             f'"coords": [{coords}]']
    for k, v in (extra or {}).items():
        parts.append(f'{json.dumps(k)}: {fmt(v) if not isinstance(v, str) else json.dumps(v)}')
    return "{" + ", ".join(parts) + "}"


def parse_structure(line):
    rec = json.loads(line)
    s = Structure(int(rec["id"]), np.array(rec["coords"], dtype=float))
    if s.n != rec["n"]:
        raise ValueError(f"record {rec['id']}: n={rec['n']} but {s.n} coordinates")
    return s, rec


def write_structures(path, records):
    """``records`` yields ``(structure, eps)`` or ``(structure, eps, extra)``."""
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="\n") as f:
        for rec in records:
            f.write(structure_line(*rec) + "\n")
    os.replace(tmp, path)


def read_structures(path):
    """List of ``(structure, record dict)``."""
    path = require(path)
    with open(path) as f:
        return [parse_structure(line) for line in f if line.strip()]


def write_csv(path, header, rows):
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    os.replace(tmp, path)


def read_csv(path):
    path = require(path)
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def require(path):
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"missing input: {path}")
    return path


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_manifest(out_dir):
    path = Path(out_dir) / MANIFEST
    if not path.exists():
        return None
    with open(path) as f:
        m = json.load(f)
    if m.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{path}: schema version {m.get('schema_version')} != {SCHEMA_VERSION}")
    return m


def save_manifest(out_dir, manifest):
    path = Path(out_dir) / MANIFEST
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)
