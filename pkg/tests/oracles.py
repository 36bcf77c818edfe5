"""Independent reference implementations used only by the tests.

Nothing here imports the package's numerical code. Finite differences are
taken in extended precision (mpmath or numpy longdouble) so that a 1e-6
central step measures the derivative rather than double-precision roundoff.
"""

from __future__ import annotations

import itertools
from collections import deque

import mpmath
import numpy as np

FD_STEP = 1e-6
LD = np.longdouble


# -- graphs ---------------------------------------------------------------------

def dfs_reach(adj: np.ndarray) -> np.ndarray:
    """Boolean reachability (paths of length >= 0) by a DFS from every node."""
    adj = np.asarray(adj) != 0
    D = adj.shape[0]
    out = np.zeros((D, D), dtype=bool)
    for s in range(D):
        stack, seen = [s], {s}
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adj[u]):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        out[s, list(seen)] = True
    return out


def has_cycle(adj: np.ndarray) -> bool:
    """A node that reaches itself through at least one edge."""
    adj = np.asarray(adj) != 0
    R = dfs_reach(adj)
    return bool(np.any((adj.astype(int) @ R.astype(int)).diagonal() > 0))


def expm_taylor(W: np.ndarray) -> np.ndarray:
    """exp(W) by a longdouble Taylor series with scaling and squaring."""
    W = np.asarray(W, dtype=LD)
    D = W.shape[0]
    norm = float(np.abs(W).sum(axis=1).max()) if D else 0.0
    k = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    A = W / LD(2) ** k
    term = np.eye(D, dtype=LD)
    total = term.copy()
    for n in range(1, 40):
        term = term @ A / LD(n)
        total = total + term
    for _ in range(k):
        total = total @ total
    return total


def trace_exp_h(B) -> LD:
    B = np.asarray(B, dtype=LD)
    return np.trace(expm_taylor(B * B)) - LD(B.shape[0])


def reach_poly(B, normalize: bool = True) -> np.ndarray:
    """(I + S)^(D-1) by D-2 plain multiplications, S = B*B scaled by max(1, max row sum)."""
    B = np.asarray(B, dtype=LD)
    D = B.shape[0]
    S = B * B
    if normalize:
        S = S / max(LD(1), S.sum(axis=1).max())
    P = np.eye(D, dtype=LD) + S
    R = np.eye(D, dtype=LD)
    for _ in range(D - 1):
        R = R @ P
    return R


def fd_gradient(f, B, step: float = FD_STEP, dtype=LD, skip_diagonal: bool = True) -> np.ndarray:
    """Central differences of scalar ``f`` in the given precision."""
    B = np.asarray(B, dtype=dtype)
    G = np.zeros(B.shape, dtype=float)
    h = dtype(step)
    for idx in np.ndindex(B.shape):
        if skip_diagonal and len(idx) == 2 and idx[0] == idx[1]:
            continue
        P, M = B.copy(), B.copy()
        P[idx] += h
        M[idx] -= h
        G[idx] = float((f(P) - f(M)) / (2 * h))
    return G


def max_relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    """Largest elementwise relative error over entries whose analytic value exceeds ``floor``."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    mask = np.abs(analytic) > floor
    if not mask.any():
        return float(np.max(np.abs(numeric), initial=0.0))
    return float(np.max(np.abs(analytic[mask] - numeric[mask]) / np.abs(analytic[mask])))


# -- likelihood -------------------------------------------------------------------

mpmath.mp.dps = 40


def _mp_logpdf(r, family, s):
    z = r / s
    if family == "gaussian":
        return -mpmath.log(2 * mpmath.pi) / 2 - mpmath.log(s) - z * z / 2
    if family == "laplace":
        return -mpmath.log(2 * s) - abs(z)
    if family == "logistic":
        return -z - mpmath.log(s) - 2 * mpmath.log(1 + mpmath.exp(-z))
    if family == "cauchy":
        return -mpmath.log(mpmath.pi * s * (1 + z * z))
    raise ValueError(family)


def _mp_cdf(t, family, s):
    z = t / s
    if family == "gaussian":
        return mpmath.erfc(-z / mpmath.sqrt(2)) / 2
    if family == "laplace":
        return mpmath.exp(z) / 2 if z < 0 else 1 - mpmath.exp(-z) / 2
    if family == "logistic":
        return 1 / (1 + mpmath.exp(-z))
    if family == "cauchy":
        return mpmath.mpf(1) / 2 + mpmath.atan(z) / mpmath.pi
    raise ValueError(family)


def column_nll(X, binary_col: bool, column, family: str, scale: float, j: int):
    """NLL of variable ``j`` given the weight column, in mpmath.

    Binary terms use the two-sided Bernoulli form
    -[x log(1 - F(-m)) + (1 - x) log F(-m)].
    """
    s = mpmath.mpf(scale)
    total = mpmath.mpf(0)
    column = [mpmath.mpf(str(c)) if not isinstance(c, mpmath.mpf) else c for c in column]
    for row in X:
        m = mpmath.fsum(mpmath.mpf(float(x)) * c for x, c in zip(row, column))
        if binary_col:
            F = _mp_cdf(-m, family, s)
            total -= mpmath.log(1 - F) if row[j] == 1 else mpmath.log(F)
        else:
            total -= _mp_logpdf(mpmath.mpf(float(row[j])) - m, family, s)
    return total


def nll_reference(B, X, binary, family: str, scale: float = 1.0) -> float:
    D = X.shape[1]
    return float(mpmath.fsum(column_nll(X, bool(binary[j]), [mpmath.mpf(float(b)) for b in B[:, j]],
                                        family, scale, j) for j in range(D)))


def nll_fd_gradient(B, X, binary, family: str, scale: float = 1.0, step: float = FD_STEP) -> np.ndarray:
    """Central differences of the NLL in mpmath, one column at a time."""
    D = X.shape[1]
    G = np.zeros((D, D))
    h = mpmath.mpf(step)
    for j in range(D):
        base = [mpmath.mpf(float(b)) for b in B[:, j]]
        for i in range(D):
            if i == j:
                continue
            up, dn = list(base), list(base)
            up[i] += h
            dn[i] -= h
            diff = (column_nll(X, bool(binary[j]), up, family, scale, j)
                    - column_nll(X, bool(binary[j]), dn, family, scale, j))
            G[i, j] = float(diff / (2 * h))
    return G


def probit_nll(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Per-sample probit NLL via mpmath's normal CDF."""
    out = []
    for xi, mi in zip(x, m):
        p = mpmath.ncdf(mpmath.mpf(float(mi)))
        out.append(float(-mpmath.log(p if xi == 1 else 1 - p)))
    return np.array(out)


def ols(X: np.ndarray, j: int) -> np.ndarray:
    """Least-squares coefficients of column ``j`` on every other column (no intercept)."""
    others = [k for k in range(X.shape[1]) if k != j]
    coef, *_ = np.linalg.lstsq(X[:, others], X[:, j], rcond=None)
    full = np.zeros(X.shape[1])
    full[others] = coef
    return full


# -- knowledge penalties ------------------------------------------------------------

def penalty_reference(kind, B, x, y, alpha=2, s=0.1, tau=0.3):
    """Penalty formulas written out directly on a longdouble matrix."""
    B = np.asarray(B, dtype=LD)
    if kind == "EOP":
        total = LD(0)
        if x is not None:
            total += np.sum(np.abs(B[:, x]) ** alpha)
        if y is not None:
            total += np.sum(np.abs(B[y, :]) ** alpha)
        return total
    if kind == "UCD":
        a = max(LD(0), LD(tau) - abs(B[x, y])) * max(LD(0), LD(tau) - abs(B[y, x]))
        return a ** alpha
    if kind == "ETE":
        return abs(min(LD(0), reach_poly(B)[x, y] - LD(s))) ** alpha
    if kind == "BNC":
        return abs(reach_poly(B)[x, y]) ** alpha
    raise ValueError(kind)


# -- structural Hamming distance -------------------------------------------------------

def all_graphs(D: int):
    """Every graph on D nodes with at most one direction per unordered pair."""
    pairs = list(itertools.combinations(range(D), 2))
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = set()
        for (i, j), st in zip(pairs, states):
            if st == 1:
                edges.add((i, j))
            elif st == 2:
                edges.add((j, i))
        yield frozenset(edges)


def edit_distance_table(D: int) -> dict:
    """BFS distances from every graph using single insert/delete/reverse moves.

    Returns ``dist[g][h]`` for all ordered graph pairs on D nodes.
    """
    graphs = list(all_graphs(D))
    pairs = list(itertools.combinations(range(D), 2))

    def neighbours(g):
        for i, j in pairs:
            if (i, j) in g:
                yield g - {(i, j)}
                yield (g - {(i, j)}) | {(j, i)}
            elif (j, i) in g:
                yield g - {(j, i)}
                yield (g - {(j, i)}) | {(i, j)}
            else:
                yield g | {(i, j)}
                yield g | {(j, i)}

    table = {}
    for start in graphs:
        dist = {start: 0}
        queue = deque([start])
        while queue:
            g = queue.popleft()
            for n in neighbours(g):
                if n not in dist:
                    dist[n] = dist[g] + 1
                    queue.append(n)
        table[start] = dist
    return table
