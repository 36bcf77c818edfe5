"""Adjacency matrices, the acyclicity functional and exact graph oracles.

Weighted adjacency matrices are plain ``(D, D)`` float arrays with the source
on the row and the target on the column: ``B[i, j]`` is the direct effect of
node ``i`` on node ``j``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg

DEFAULT_THRESHOLD = 0.3
DAG_TOLERANCE = 1e-8
# Largest |b| accepted by the acyclicity functional before overflow is signalled.
MAGNITUDE_CAP = 1e3


class CycleError(ValueError):
    """Raised when an operation needs a DAG and got a cyclic graph."""


class NumericalOverflowError(OverflowError):
    """Raised when a matrix function leaves the representable range."""


@dataclass(frozen=True)
class BinaryGraph:
    dim: int
    edges: frozenset

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"graph dimension must be positive, got {self.dim}")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.dim and 0 <= j < self.dim):
                raise ValueError(f"edge ({i}, {j}) out of range for dim {self.dim}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, dim: int, edges: Iterable[tuple[int, int]]) -> "BinaryGraph":
        return cls(dim, frozenset(edges))

    @classmethod
    def from_matrix(cls, A: np.ndarray) -> "BinaryGraph":
        A = np.asarray(A)
        rows, cols = np.nonzero(A)
        return cls(A.shape[0], frozenset(zip(rows.tolist(), cols.tolist())))

    def to_matrix(self) -> np.ndarray:
        A = np.zeros((self.dim, self.dim), dtype=np.int8)
        for i, j in self.edges:
            A[i, j] = 1
        return A

    def successors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.dim)]
        for i, j in sorted(self.edges):
            out[i].append(j)
        return out

    def __len__(self) -> int:
        return len(self.edges)


def validate_adjacency(B) -> np.ndarray:
    """Return ``B`` as a float array after checking shape, finiteness and diagonal."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] < 1:
        raise ValueError(f"adjacency must be a non-empty square matrix, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise ValueError("adjacency contains non-finite entries")
    if np.any(np.diag(B) != 0):
        raise ValueError("adjacency diagonal must be zero")
    return B


def hadamard_square(B: np.ndarray) -> np.ndarray:
    """Elementwise square, the nonnegative connectivity strength of each edge."""
    B = np.asarray(B, dtype=float)
    return B * B


def _expm_of_square(B: np.ndarray, cap: float) -> np.ndarray:
    if B.size and np.max(np.abs(B)) > cap:
        raise NumericalOverflowError(
            f"adjacency magnitude {np.max(np.abs(B)):.3g} exceeds cap {cap:.3g}")
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(B * B)
    if not np.all(np.isfinite(E)):
        raise NumericalOverflowError("matrix exponential overflowed")
    return E


def acyclicity(B: np.ndarray, cap: float = MAGNITUDE_CAP) -> float:
    """Trace-exponential acyclicity ``tr(exp(B∘B)) - D``; zero iff the support is a DAG."""
    B = np.asarray(B, dtype=float)
    E = _expm_of_square(B, cap)
    return float(np.trace(E) - B.shape[0])


def acyclicity_gradient(B: np.ndarray, cap: float = MAGNITUDE_CAP) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    E = _expm_of_square(B, cap)
    return E.T * 2.0 * B


def acyclicity_and_gradient(B: np.ndarray, cap: float = MAGNITUDE_CAP) -> tuple[float, np.ndarray]:
    """Value and gradient sharing a single matrix exponential."""
    B = np.asarray(B, dtype=float)
    E = _expm_of_square(B, cap)
    return float(np.trace(E) - B.shape[0]), E.T * 2.0 * B


# -- reachability polynomial (I + B∘B)^(D-1) ---------------------------------

def _reach_scale(W: np.ndarray) -> tuple[float, int]:
    rows = W.sum(axis=1)
    k = int(np.argmax(rows))
    return max(1.0, float(rows[k])), k


def _matpow_with_tape(P: np.ndarray, k: int):
    result = None
    base = P
    tape = []
    while k:
        if k & 1:
            tape.append(("mul", result, base))
            result = base.copy() if result is None else result @ base
        k >>= 1
        if k:
            tape.append(("sq", base))
            base = base @ base
    if result is None:
        result = np.eye(P.shape[0])
    return result, tape


def _matpow_backward(tape, G: np.ndarray) -> np.ndarray:
    g_res = G
    g_base = np.zeros_like(G)
    for op in reversed(tape):
        if op[0] == "sq":
            base = op[1]
            g_base = g_base @ base.T + base.T @ g_base
        else:
            res_old, base = op[1], op[2]
            if res_old is None:
                g_base = g_base + g_res
                g_res = np.zeros_like(g_res)
            else:
                g_base = g_base + res_old.T @ g_res
                g_res = g_res @ base.T
    return g_base


def reachability_poly(B: np.ndarray, normalize: bool = True) -> np.ndarray:
    """``(I + S)^(D-1)`` with ``S = B∘B / c``.

    ``c = max(1, largest row sum of B∘B)`` when ``normalize`` is set, which
    keeps entries bounded without changing which of them are positive.
    Entry ``(x, y)`` is positive iff ``y`` is reachable from ``x`` (paths of
    length 0 count, so the diagonal is always positive).
    """
    B = np.asarray(B, dtype=float)
    D = B.shape[0]
    W = B * B
    if normalize:
        W = W / _reach_scale(W)[0]
    with np.errstate(over="ignore", invalid="ignore"):
        R, _ = _matpow_with_tape(np.eye(D) + W, D - 1)
    if not np.all(np.isfinite(R)):
        raise NumericalOverflowError("reachability polynomial overflowed; use normalize=True")
    return R


def reachability_vjp(B: np.ndarray, G_R: np.ndarray, normalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Return ``R`` and the pullback ``sum(G_R * dR) / dB``.

    Lets several knowledge items that read different entries of ``R`` share a
    single reverse pass.
    """
    B = np.asarray(B, dtype=float)
    D = B.shape[0]
    W = B * B
    c, row = _reach_scale(W) if normalize else (1.0, 0)
    S = W / c
    R, tape = _matpow_with_tape(np.eye(D) + S, D - 1)
    if not np.all(np.isfinite(R)):
        raise NumericalOverflowError("reachability polynomial overflowed; use normalize=True")
    gS = _matpow_backward(tape, np.asarray(G_R, dtype=float))
    gW = gS / c
    if normalize and c > 1.0:
        # c depends on W through the dominant row sum
        gc = -float(np.sum(gS * W)) / (c * c)
        gW[row, :] += gc
    return R, 2.0 * B * gW


def reachability_poly_gradient(B: np.ndarray, x: int, y: int, normalize: bool = True) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    G = np.zeros_like(B)
    G[x, y] = 1.0
    return reachability_vjp(B, G, normalize)[1]


# -- thresholding and combinatorial oracles ----------------------------------

def threshold(B: np.ndarray, tau: float = DEFAULT_THRESHOLD) -> BinaryGraph:
    """Keep edges with ``|b_ij| >= tau``."""
    if tau <= 0:
        raise ValueError(f"threshold must be positive, got {tau}")
    B = np.asarray(B, dtype=float)
    mask = np.abs(B) >= tau
    np.fill_diagonal(mask, False)
    return BinaryGraph.from_matrix(mask)


def find_cycle(G: BinaryGraph) -> list[int] | None:
    """Return the nodes of one directed cycle, or None if ``G`` is acyclic.

    Iterative three-colour depth-first search.
    """
    WHITE, GREY, BLACK = 0, 1, 2
    succ = G.successors()
    color = [WHITE] * G.dim
    parent = [-1] * G.dim
    for root in range(G.dim):
        if color[root] != WHITE:
            continue
        stack = [(root, 0)]
        color[root] = GREY
        while stack:
            node, idx = stack[-1]
            if idx < len(succ[node]):
                stack[-1] = (node, idx + 1)
                nxt = succ[node][idx]
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    parent[nxt] = node
                    stack.append((nxt, 0))
                elif color[nxt] == GREY:
                    cycle = [node]
                    while cycle[-1] != nxt:
                        cycle.append(parent[cycle[-1]])
                    return cycle[::-1]
            else:
                color[node] = BLACK
                stack.pop()
    return None


def is_dag(G: BinaryGraph) -> bool:
    return find_cycle(G) is None


def topological_order(G: BinaryGraph) -> list[int]:
    """Kahn's algorithm, smallest available id first."""
    indeg = [0] * G.dim
    succ = G.successors()
    for _, j in G.edges:
        indeg[j] += 1
    heap = [i for i in range(G.dim) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        i = heapq.heappop(heap)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, j)
    if len(order) != G.dim:
        raise CycleError(f"graph has a directed cycle through {find_cycle(G)}")
    return order


def reachable_from(G: BinaryGraph, source: int) -> set[int]:
    """Nodes reachable from ``source`` by a directed path (including itself)."""
    succ = G.successors()
    seen = {source}
    stack = [source]
    while stack:
        for j in succ[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return seen


def has_path(G: BinaryGraph, x: int, y: int) -> bool:
    return y in reachable_from(G, x)


def repair_cycles(B: np.ndarray, tau: float = DEFAULT_THRESHOLD) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Zero out the largest-magnitude edge on a remaining cycle until the thresholded graph is a DAG.

    Returns the repaired matrix and the removed edges in removal order.
    """
    B = np.array(B, dtype=float)
    removed = []
    while True:
        cycle = find_cycle(threshold(B, tau))
        if cycle is None:
            return B, removed
        pairs = list(zip(cycle, cycle[1:] + cycle[:1]))
        i, j = max(pairs, key=lambda e: (abs(B[e]), e))
        B[i, j] = 0.0
        removed.append((i, j))
