"""Structure-recovery scores and local-interpretability proportions."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .graph import BinaryGraph, has_path


@dataclass(frozen=True)
class StructureScore:
    tpr: float
    fdr: float
    shd: int
    nnz: int

    def to_dict(self) -> dict:
        return asdict(self)


def _check_dims(a: BinaryGraph, b: BinaryGraph):
    if a.dim != b.dim:
        raise ValueError(f"graph dimensions differ: {a.dim} vs {b.dim}")


def shd(estimated: BinaryGraph, truth: BinaryGraph) -> int:
    """Missing + extra + reversed edges, a reversal counted once."""
    _check_dims(estimated, truth)
    est, true = estimated.edges, truth.edges
    reversed_ = {(i, j) for i, j in true if (j, i) in est and (i, j) not in est}
    missing = true - est - reversed_
    extra = est - true - {(j, i) for i, j in reversed_}
    return len(missing) + len(extra) + len(reversed_)


def score(estimated: BinaryGraph, truth: BinaryGraph) -> StructureScore:
    """Directed TPR/FDR (a reversed edge is both a miss and a false discovery), SHD and NNZ."""
    _check_dims(estimated, truth)
    est, true = estimated.edges, truth.edges
    hits = len(est & true)
    tpr = hits / len(true) if true else 0.0
    fdr = (len(est) - hits) / len(est) if est else 0.0
    return StructureScore(tpr=tpr, fdr=fdr, shd=shd(estimated, truth), nnz=len(est))


def _true_only(estimated: BinaryGraph, truth: BinaryGraph) -> BinaryGraph:
    return BinaryGraph(truth.dim, estimated.edges & truth.edges)


def missed_paths(baseline: BinaryGraph, truth: BinaryGraph, pairs: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Pairs for which ``baseline`` lacks an all-true directed path."""
    ok = _true_only(baseline, truth)
    return [p for p in pairs if not has_path(ok, *p)]


def missed_directions(baseline: BinaryGraph, truth: BinaryGraph, pairs: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Adjacent pairs that ``baseline`` does not orient exactly as ``truth``."""
    return [p for p in pairs if not _oriented_as_truth(baseline, truth, p)]


def _true_direction(truth: BinaryGraph, pair: tuple[int, int]) -> tuple[int, int]:
    x, y = pair
    if (x, y) in truth.edges:
        return (x, y)
    if (y, x) in truth.edges:
        return (y, x)
    raise ValueError(f"pair {pair} is not adjacent in the true graph")


def _oriented_as_truth(est: BinaryGraph, truth: BinaryGraph, pair) -> bool:
    a, b = _true_direction(truth, pair)
    return (a, b) in est.edges and (b, a) not in est.edges


Run = tuple[BinaryGraph, BinaryGraph, Sequence[tuple[int, int]], Sequence[tuple[int, int]]]


def cp_prop(runs: Iterable[Run]) -> float:
    """Fraction of (run, missed pair) instances recovered as a complete all-true directed path.

    Each run is ``(estimated, truth, ete_pairs, missed_pairs)``; only missed
    pairs that are also ETE pairs count. Returns NaN when there are no
    instances.
    """
    hits = total = 0
    for est, truth, pairs, missed in runs:
        _check_dims(est, truth)
        ok = _true_only(est, truth)
        wanted = set(map(tuple, pairs))
        for x, y in missed:
            if (x, y) not in wanted:
                continue
            if not has_path(truth, x, y):
                raise ValueError(f"pair ({x}, {y}) has no directed path in the true graph")
            total += 1
            hits += has_path(ok, x, y)
    return hits / total if total else math.nan


def cd_prop(runs: Iterable[Run]) -> float:
    """Fraction of (run, missed pair) instances whose edge is estimated in the true direction only."""
    hits = total = 0
    for est, truth, pairs, missed in runs:
        _check_dims(est, truth)
        wanted = {frozenset(p) for p in pairs}
        for pair in missed:
            if frozenset(pair) not in wanted:
                continue
            total += 1
            hits += _oriented_as_truth(est, truth, pair)
    return hits / total if total else math.nan


def summarize(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation, ignoring NaNs."""
    arr = np.asarray([v for v in values if v is not None and not math.isnan(v)], dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    return float(arr.mean()), float(arr.std())
