"""CSV, schema, JSON and config readers/writers shared by the CLI."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .elcm import MixedDataset

TYPES = ("continuous", "binary")


def _fmt(v: float) -> str:
    v = float(v)
    return repr(0.0 if v == 0 else v)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_config(path) -> dict:
    """Read a JSON or YAML mapping."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() in (".yaml", ".yml"):
        import yaml

        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ValueError(f"{path}: {exc}") from None
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return raw


def write_adjacency(path, B: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(B, dtype=float):
            w.writerow([_fmt(v) for v in row])


def read_adjacency(path) -> np.ndarray:
    B = np.loadtxt(path, delimiter=",", ndmin=2)
    if B.shape[0] != B.shape[1]:
        raise ValueError(f"{path}: adjacency must be square, got {B.shape}")
    return B


def write_edges(path, edges: Iterable[tuple[int, int]], names: Sequence[str] | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "target"])
        for i, j in sorted(edges):
            w.writerow([names[i], names[j]] if names is not None else [i, j])


def read_edges(path) -> list[tuple[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["source", "target"]:
        raise ValueError(f"{path}: edge list must start with the header 'source,target'")
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2 or not row[0].strip() or not row[1].strip():
            raise ValueError(f"{path}:{lineno}: expected 'source,target'")
        edges.append((row[0].strip(), row[1].strip()))
    return edges


def write_dataset(path, data: MixedDataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.names)
        for i, row in enumerate(data.values):
            w.writerow([str(int(v)) if b else _fmt(v) for v, b in zip(row, data.binary)])


def write_schema(path, data: MixedDataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for name, b in zip(data.names, data.binary):
            fh.write(f"{name},{'binary' if b else 'continuous'}\n")


def read_schema(path) -> dict[str, str]:
    types: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 or parts[1] not in TYPES:
            raise ValueError(f"{path}:{lineno}: expected 'name,continuous|binary', got {line!r}")
        if parts[0] in types:
            raise ValueError(f"{path}:{lineno}: duplicate variable {parts[0]!r}")
        types[parts[0]] = parts[1]
    return types


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header plus float matrix; any row with a missing or non-numeric field is rejected."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header) or any(not c.strip() for c in row):
            raise ValueError(f"{path}:{lineno}: row has missing fields")
        try:
            values.append([float(c) for c in row])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric field") from None
    if not values:
        raise ValueError(f"{path}: no data rows")
    return header, np.asarray(values, dtype=float)


def read_dataset(data_path, schema_path) -> MixedDataset:
    header, X = read_table(data_path)
    types = read_schema(schema_path)
    missing = [n for n in header if n not in types]
    if missing:
        raise ValueError(f"{schema_path}: no type given for {missing}")
    extra = [n for n in types if n not in header]
    if extra:
        raise ValueError(f"{schema_path}: variables {extra} not in {data_path}")
    binary = np.array([types[n] == "binary" for n in header])
    return MixedDataset(X, binary, header)
