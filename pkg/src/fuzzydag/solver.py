"""Augmented-Lagrangian structure learning with knowledge penalties.

The outer loop drives the acyclicity functional to zero by raising the
quadratic penalty ``rho`` and accumulating the multiplier ``alpha``. Each
inner problem is solved by L-BFGS-B over the split ``B = W+ - W-`` with
``W+, W- >= 0``, which turns the l1 term into a linear one and lets the DC/FC
knowledge act as exact box bounds.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.optimize

from . import elcm
from .graph import (DAG_TOLERANCE, DEFAULT_THRESHOLD, BinaryGraph, NumericalOverflowError,
                    acyclicity_and_gradient, is_dag, repair_cycles, threshold)
from .knowledge import KnowledgeSet, bounds as knowledge_bounds, effective_l1, items_loss

log = logging.getLogger(__name__)


class NonFiniteObjectiveError(FloatingPointError):
    def __init__(self, term: str, detail: str = ""):
        super().__init__(f"non-finite objective in term {term!r}" + (f": {detail}" if detail else ""))
        self.term = term


@dataclass
class SolverConfig:
    rho_init: float = 1.0
    rho_mult: float = 10.0
    alpha_init: float = 0.0
    h_tol: float = DAG_TOLERANCE
    progress_ratio: float = 0.25
    max_outer: int = 100
    inner_max_iter: int = 500
    inner_grad_tol: float = 1e-6
    inner_ftol: float = 1e-12
    memory: int = 10
    threshold: float = DEFAULT_THRESHOLD
    rho_max: float = 1e16
    loss_scale: str = "mean"
    init_B: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        positive = ("rho_init", "h_tol", "max_outer", "inner_max_iter", "inner_grad_tol",
                    "memory", "threshold", "rho_max")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.rho_mult > 1:
            raise ValueError(f"rho_mult must exceed 1, got {self.rho_mult}")
        if not 0 < self.progress_ratio < 1:
            raise ValueError(f"progress_ratio must lie in (0, 1), got {self.progress_ratio}")
        if self.inner_ftol < 0:
            raise ValueError("inner_ftol must be nonnegative")
        if self.loss_scale not in ("mean", "sum"):
            raise ValueError(f"loss_scale must be 'mean' or 'sum', got {self.loss_scale!r}")
        for name in ("max_outer", "inner_max_iter", "memory"):
            setattr(self, name, int(getattr(self, name)))

    @classmethod
    def from_dict(cls, raw: dict) -> "SolverConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        raw = dict(raw)
        if raw.get("init_B") is not None:
            raw["init_B"] = np.asarray(raw["init_B"], dtype=float)
        return cls(**raw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["init_B"] = None if self.init_B is None else np.asarray(self.init_B).tolist()
        return out


@dataclass
class FitResult:
    weights: np.ndarray
    graph: BinaryGraph
    objective_trace: list[dict]
    converged: bool
    wallclock: float
    repaired_edges: list[tuple[int, int]] = field(default_factory=list)
    inner_flags: list[str] = field(default_factory=list)

    def diagnostics(self) -> dict:
        return {
            "converged": self.converged,
            "wallclock_seconds": self.wallclock,
            "outer_iterations": len(self.objective_trace),
            "final_h": self.objective_trace[-1]["h"] if self.objective_trace else None,
            "n_edges": len(self.graph),
            "repaired_edges": [list(e) for e in self.repaired_edges],
            "inner_flags": self.inner_flags,
            "objective_trace": self.objective_trace,
        }


@dataclass
class InnerResult:
    x: np.ndarray
    fun: float
    n_iter: int
    status: str
    line_search_failed: bool


def inner_minimize(oracle: Callable[[np.ndarray], tuple[float, np.ndarray]],
                   bounds: tuple[np.ndarray, np.ndarray] | None,
                   start: np.ndarray,
                   cfg: SolverConfig) -> InnerResult:
    """Bound-constrained L-BFGS minimization of ``oracle`` from ``start``.

    ``oracle`` maps an array shaped like ``start`` to ``(value, gradient)``.
    ``bounds`` is a ``(lower, upper)`` pair of arrays of the same shape, with
    infinities for open sides. The returned point never has a larger value
    than the (projected) start.
    """
    shape = np.shape(start)
    x0 = np.asarray(start, dtype=float).ravel().copy()
    if bounds is None:
        lb = np.full(x0.size, -np.inf)
        ub = np.full(x0.size, np.inf)
    else:
        lb = np.asarray(bounds[0], dtype=float).ravel()
        ub = np.asarray(bounds[1], dtype=float).ravel()
    x0 = np.clip(x0, lb, ub)

    best = {"f": np.inf, "x": x0}

    def fun(z):
        f, g = oracle(z.reshape(shape))
        f = float(f)
        if f < best["f"]:
            best["f"], best["x"] = f, z.copy()
        return f, np.asarray(g, dtype=float).ravel()

    f0, g0 = fun(x0)
    if not np.isfinite(f0) or not np.all(np.isfinite(g0)):
        raise NonFiniteObjectiveError("start", "oracle is not finite at the start point")
    scipy_bounds = list(zip(np.where(np.isfinite(lb), lb, None), np.where(np.isfinite(ub), ub, None)))
    res = scipy.optimize.minimize(
        fun, x0, jac=True, method="L-BFGS-B", bounds=scipy_bounds,
        options={"maxiter": cfg.inner_max_iter, "maxcor": cfg.memory,
                 "gtol": cfg.inner_grad_tol, "ftol": cfg.inner_ftol},
    )
    message = res.message if isinstance(res.message, str) else res.message.decode()
    x = np.clip(res.x, lb, ub)
    fx = fun(x)[0] if not np.array_equal(x, res.x) else float(res.fun)
    if best["f"] < fx:
        x, fx = best["x"], best["f"]
    return InnerResult(x.reshape(shape), fx, int(res.nit), message,
                       "ABNORMAL" in message.upper())


def _split_bounds(lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Translate box bounds on B into bounds on the stacked (W+, W-)."""
    lp, up = np.zeros_like(lower), np.full_like(upper, np.inf)
    lm, um = np.zeros_like(lower), np.full_like(upper, np.inf)
    pos = lower >= 0
    neg = ~pos & (upper <= 0)
    mid = ~pos & ~neg
    lp[pos], up[pos] = lower[pos], upper[pos]
    um[pos] = 0.0
    up[neg] = 0.0
    lm[neg], um[neg] = -upper[neg], -lower[neg]
    up[mid], um[mid] = upper[mid], -lower[mid]
    return np.stack([lp, lm]), np.stack([up, um])


class _Objective:
    """Evaluates the augmented Lagrangian on the split variables."""

    def __init__(self, data: elcm.MixedDataset, noise, kset: KnowledgeSet, cfg: SolverConfig):
        self.data = data
        self.noise = noise
        self.items = [it for it in kset.items if it.kind not in ("CCE", "DC", "DC-", "FC")]
        self.lam = effective_l1(kset)
        np.fill_diagonal(self.lam, 0.0)
        self.scale = 1.0 / data.n_samples if cfg.loss_scale == "mean" else 1.0
        self.rho = cfg.rho_init
        self.alpha = cfg.alpha_init

    def terms(self, B: np.ndarray) -> dict:
        nll = self.scale * elcm.negative_log_likelihood(B, self.noise, self.data)
        know = float(np.sum(self.lam * np.abs(B))) + items_loss(self.items, B)[0]
        h = acyclicity_and_gradient(B)[0]
        return {"f": nll, "L_know": know, "h": h}

    def augmented(self, B: np.ndarray) -> float:
        t = self.terms(B)
        return t["f"] + t["L_know"] + self.alpha * t["h"] + 0.5 * self.rho * t["h"] ** 2

    def __call__(self, Z: np.ndarray) -> tuple[float, np.ndarray]:
        Wp, Wm = Z[0], Z[1]
        B = Wp - Wm
        nll, g_nll = elcm.nll_and_gradient(B, self.noise, self.data)
        if not np.isfinite(nll):
            raise NonFiniteObjectiveError("negative_log_likelihood")
        try:
            h, g_h = acyclicity_and_gradient(B)
        except NumericalOverflowError as exc:
            raise NonFiniteObjectiveError("acyclicity", str(exc)) from exc
        pen, g_pen = items_loss(self.items, B) if self.items else (0.0, 0.0)
        if not np.isfinite(pen):
            raise NonFiniteObjectiveError("knowledge_penalty")
        value = (self.scale * nll + pen + float(np.sum(self.lam * (Wp + Wm)))
                 + self.alpha * h + 0.5 * self.rho * h * h)
        g_B = self.scale * g_nll + g_pen + (self.alpha + self.rho * h) * g_h
        return value, np.stack([g_B + self.lam, -g_B + self.lam])


def fit(data: elcm.MixedDataset,
        noise: Sequence[elcm.LatentDistribution] | None = None,
        kset: KnowledgeSet | None = None,
        cfg: SolverConfig | None = None) -> FitResult:
    """Learn a weighted DAG from ``data`` under the knowledge in ``kset``."""
    cfg = cfg or SolverConfig()
    D = data.n_vars
    noise = list(noise) if noise is not None else [elcm.LatentDistribution()] * D
    kset = kset if kset is not None else KnowledgeSet.uniform(D)
    if kset.dim != D:
        raise ValueError(f"knowledge set is for {kset.dim} variables, data has {D}")
    lower, upper = knowledge_bounds(kset, D)
    zbounds = _split_bounds(lower, upper)

    t0 = time.perf_counter()
    obj = _Objective(data, noise, kset, cfg)
    B = np.zeros((D, D)) if cfg.init_B is None else np.asarray(cfg.init_B, dtype=float).copy()
    Z = np.clip(np.stack([np.maximum(B, 0.0), np.maximum(-B, 0.0)]), zbounds[0], zbounds[1])
    h_prev = np.inf
    trace: list[dict] = []
    flags: list[str] = []
    converged = False

    for k in range(cfg.max_outer):
        res = inner_minimize(obj, zbounds, Z, cfg)
        Z = res.x
        B = Z[0] - Z[1]
        terms = obj.terms(B)
        h = terms["h"]
        if res.line_search_failed:
            flags.append(f"outer {k}: {res.status}")
        rho_used, alpha_used = obj.rho, obj.alpha
        if h > cfg.progress_ratio * h_prev:
            obj.rho *= cfg.rho_mult
        obj.alpha += obj.rho * h
        trace.append({"outer": k, "f": terms["f"], "L_know": terms["L_know"], "h": h,
                      "rho": obj.rho, "alpha": obj.alpha, "rho_inner": rho_used, "alpha_inner": alpha_used,
                      "inner_iterations": res.n_iter})
        log.debug("outer %d: f=%.6g L_know=%.6g h=%.3g rho=%.3g alpha=%.3g",
                  k, terms["f"], terms["L_know"], h, obj.rho, obj.alpha)
        h_prev = h
        if h <= cfg.h_tol:
            converged = True
            break
        if obj.rho >= cfg.rho_max:
            break

    weights = B.copy()
    graph = threshold(weights, cfg.threshold)
    repaired: list[tuple[int, int]] = []
    if not is_dag(graph):
        weights, repaired = repair_cycles(weights, cfg.threshold)
        graph = threshold(weights, cfg.threshold)
        converged = False
        log.warning("thresholded graph was cyclic; pruned %d edge(s): %s", len(repaired), repaired)
    return FitResult(weights, graph, trace, converged, time.perf_counter() - t0, repaired, flags)
