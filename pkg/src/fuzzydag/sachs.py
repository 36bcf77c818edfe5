"""Loader for the 11-protein signalling dataset and its bundled reference network."""

from __future__ import annotations

import logging
import re
from importlib import resources

import numpy as np

from . import io
from .elcm import MixedDataset
from .graph import BinaryGraph

log = logging.getLogger(__name__)

VARIABLES = ("Raf", "Mek", "Plcg", "PIP2", "PIP3", "Erk", "Akt", "PKA", "PKC", "P38", "Jnk")
BINARIZED = ("PKA", "PKC")

ALIASES = {
    "Raf": {"raf", "praf", "craf"},
    "Mek": {"mek", "pmek", "mek12"},
    "Plcg": {"plcg", "plcr", "pplcg", "plcgamma"},
    "PIP2": {"pip2"},
    "PIP3": {"pip3"},
    "Erk": {"erk", "perk", "erk12", "p4442"},
    "Akt": {"akt", "pakt", "akts473", "pakts473"},
    "PKA": {"pka"},
    "PKC": {"pkc"},
    "P38": {"p38", "pp38"},
    "Jnk": {"jnk", "pjnk"},
}


def _key(name: str) -> str:
    return re.sub(r"[^0-9a-z]", "", name.lower())


def match_columns(header) -> dict[str, int]:
    """Map each canonical variable to its column index; raises on missing or ambiguous columns."""
    found: dict[str, int] = {}
    for idx, col in enumerate(header):
        k = _key(col)
        hits = [v for v, aliases in ALIASES.items() if k in aliases]
        if not hits:
            log.info("ignoring unrecognised column %r", col)
            continue
        var = hits[0]
        if var in found:
            raise ValueError(f"columns {header[found[var]]!r} and {col!r} both map to {var}")
        found[var] = idx
    missing = [v for v in VARIABLES if v not in found]
    if missing:
        raise ValueError(f"dataset is missing expected column(s): {', '.join(missing)}")
    return found


def binarize_at_mean(column: np.ndarray) -> np.ndarray:
    """1 where the value is at or above the column mean, else 0."""
    column = np.asarray(column, dtype=float)
    return (column >= column.mean()).astype(float)


def load(path, standardize: bool = True) -> MixedDataset:
    header, X = io.read_table(path)
    cols = match_columns(header)
    values = np.column_stack([X[:, cols[v]] for v in VARIABLES])
    binary = np.array([v in BINARIZED for v in VARIABLES])
    for j in np.flatnonzero(binary):
        values[:, j] = binarize_at_mean(values[:, j])
    data = MixedDataset(values, binary, list(VARIABLES))
    return data.standardized() if standardize else data


def _data_file(name: str):
    return resources.files("fuzzydag").joinpath("data", name)


def consensus_path():
    return _data_file("sachs_consensus.csv")


def default_knowledge_path():
    return _data_file("sachs_cce.txt")


def edges_to_graph(edges, names) -> BinaryGraph:
    index = {n: i for i, n in enumerate(names)}
    unknown = sorted({n for e in edges for n in e if n not in index})
    if unknown:
        raise ValueError(f"edge list names unknown variable(s): {', '.join(unknown)}")
    return BinaryGraph.from_edges(len(names), [(index[a], index[b]) for a, b in edges])


def consensus_graph() -> BinaryGraph:
    with resources.as_file(consensus_path()) as p:
        return edges_to_graph(io.read_edges(p), VARIABLES)
