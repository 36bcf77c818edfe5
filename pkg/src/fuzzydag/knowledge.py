"""Fuzzy causal knowledge compiled into penalties and box bounds.

Seven kinds of knowledge are supported:

* ``EOP`` exposure/outcome: node ``x`` has no causes and/or node ``y`` has no effects.
* ``ETE`` end-to-end: ``y`` is reachable from ``x`` through unknown intermediaries.
* ``CCE`` conditional cause/effect: the edge ``x -> y`` is plausible; its l1 weight is divided by ``gamma``.
* ``BNC`` basically non-causal: ``y`` should not be reachable from ``x``.
* ``UCD`` unknown causal direction: ``x`` and ``y`` are adjacent, orientation unknown.
* ``DC`` / ``DC-`` direct cause: ``b_xy >= tau`` (or ``<= -tau`` for a known negative effect).
* ``FC`` forbidden cause: ``b_xy == 0``.

DC and FC are hard box bounds; the others are weakened constraints added to
the objective. Reachability-based kinds read ``(I + B∘B / c)^(D-1)``, see
:func:`fuzzydag.graph.reachability_poly`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import reachability_poly, reachability_vjp

KINDS = ("EOP", "ETE", "CCE", "BNC", "UCD", "DC", "DC-", "FC")
BOUND_KINDS = ("DC", "DC-", "FC")

DEFAULT_L1 = 0.05
DEFAULT_GAMMA = 100.0
DEFAULT_SLACK = 0.1
DEFAULT_TAU = 0.3
DEFAULT_ALPHA = 2

# membership tolerance for the equalities of the classification rules
_MU_TOL = 1e-9
_MU_NEAR_ONE = 0.95

_PARAM_KEYS = {
    "EOP": {"alpha", "weight"},
    "ETE": {"alpha", "weight", "s"},
    "CCE": {"gamma"},
    "BNC": {"alpha", "weight"},
    "UCD": {"alpha", "weight", "tau"},
    "DC": {"tau"},
    "DC-": {"tau"},
    "FC": set(),
}


class KnowledgeError(ValueError):
    pass


class ClassificationError(KnowledgeError):
    def __init__(self, message: str, candidates: Sequence[str] = ()):
        super().__init__(message)
        self.candidates = list(candidates)


class BoundConflictError(KnowledgeError):
    pass


class KnowledgeParseError(KnowledgeError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class KnowledgeItem:
    """One knowledge record.

    For ``EOP`` either endpoint may be ``None``: ``x`` marks a node without
    causes (its column is penalized), ``y`` a node without effects (its row
    is penalized).
    """

    kind: str
    x: int | None
    y: int | None
    alpha: int = DEFAULT_ALPHA
    weight: float = 1.0
    s: float = DEFAULT_SLACK
    gamma: float = DEFAULT_GAMMA
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in KINDS:
            raise KnowledgeError(f"unknown knowledge kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "EOP":
            if self.x is None and self.y is None:
                raise KnowledgeError("EOP needs at least one endpoint")
        else:
            if self.x is None or self.y is None:
                raise KnowledgeError(f"{kind} needs both endpoints")
            if self.x == self.y:
                raise KnowledgeError(f"{kind} endpoints must differ, got {self.x} twice")
        if self.alpha not in (1, 2):
            raise KnowledgeError(f"alpha must be 1 or 2, got {self.alpha}")
        if self.weight < 0:
            raise KnowledgeError(f"weight must be nonnegative, got {self.weight}")
        for name in ("s", "gamma", "tau"):
            if not getattr(self, name) > 0:
                raise KnowledgeError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.x, self.y)


@dataclass
class KnowledgeSet:
    """Knowledge items plus the per-edge l1 coefficient matrix."""

    items: list[KnowledgeItem]
    base_l1: np.ndarray

    def __post_init__(self):
        self.base_l1 = np.asarray(self.base_l1, dtype=float)
        D = self.base_l1.shape[0]
        if self.base_l1.shape != (D, D):
            raise KnowledgeError("base_l1 must be square")
        if np.any(self.base_l1 < 0):
            raise KnowledgeError("l1 coefficients must be nonnegative")
        self.items = list(self.items)
        for item in self.items:
            for node in (item.x, item.y):
                if node is not None and not 0 <= node < D:
                    raise KnowledgeError(f"node {node} out of range for {D} variables")

    @classmethod
    def uniform(cls, D: int, items: Iterable[KnowledgeItem] = (), l1: float = DEFAULT_L1) -> "KnowledgeSet":
        return cls(list(items), np.full((D, D), float(l1)))

    @property
    def dim(self) -> int:
        return self.base_l1.shape[0]


@dataclass
class FuzzyCausalMechanism:
    """The (parents, children, causal function, mediators, steps) quintuple.

    Memberships are kept as dicts keyed by node id (or id pair for the causal
    function and mediation steps).
    """

    parents: dict[int, float]
    children: dict[int, float]
    causal_membership: dict[tuple[int, int], float]
    mediators: dict[int, float] = field(default_factory=dict)
    mediation_steps: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        for label, table in (("parent", self.parents), ("child", self.children),
                             ("causal", self.causal_membership), ("mediator", self.mediators),
                             ("step", self.mediation_steps)):
            for key, mu in table.items():
                if not 0.0 <= mu <= 1.0:
                    raise KnowledgeError(f"{label} membership {mu} for {key} outside [0, 1]")


# -- classification ------------------------------------------------------------

def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _MU_TOL


def _ucd_endpoints(Q: FuzzyCausalMechanism):
    if set(Q.parents) != set(Q.children) or len(Q.parents) != 2:
        return None
    if Q.mediators or Q.mediation_steps:
        return None
    x, y = sorted(Q.parents)
    ok = (_close(Q.parents[x] + Q.children[x], 1.0)
          and _close(Q.parents[y] + Q.children[y], 1.0)
          and _close(Q.parents[x] + Q.parents[y], 1.0))
    mu = Q.causal_membership.get((x, y), Q.causal_membership.get((y, x)))
    if ok and mu is not None and _close(mu, 1.0):
        return x, y
    return None


def classify(Q: FuzzyCausalMechanism, n_vars: int) -> KnowledgeItem:
    """Map a mechanism to the knowledge kind whose membership pattern it matches.

    ``n_vars`` is the size of the variable universe, needed to recognise the
    node-versus-everything patterns of EOP.
    """
    candidates: list[tuple[str, KnowledgeItem]] = []
    universe = set(range(n_vars))
    empty_ml = not Q.mediators and not Q.mediation_steps

    ucd = _ucd_endpoints(Q)
    if ucd is not None:
        candidates.append(("UCD", KnowledgeItem("UCD", *ucd)))

    if empty_ml and Q.causal_membership:
        mu_max = max(Q.causal_membership.values())
        if set(Q.parents) >= universe - set(Q.children) and len(Q.children) == 1 and mu_max < 0.5:
            (x,) = Q.children
            candidates.append(("EOP", KnowledgeItem("EOP", x, None)))
        if len(Q.parents) == 1 and set(Q.children) >= universe - set(Q.parents) and mu_max < 0.5:
            (y,) = Q.parents
            candidates.append(("EOP", KnowledgeItem("EOP", None, y)))

    if len(Q.parents) == 1 and len(Q.children) == 1:
        (x,), (y,) = Q.parents, Q.children
        mu = Q.causal_membership.get((x, y))
        if mu is not None and x != y:
            if not empty_ml:
                if mu >= _MU_NEAR_ONE:
                    candidates.append(("ETE", KnowledgeItem("ETE", x, y)))
                elif mu < 0.5:
                    candidates.append(("BNC", KnowledgeItem("BNC", x, y)))
            else:
                if _close(mu, 1.0):
                    candidates.append(("DC", KnowledgeItem("DC", x, y)))
                elif _close(mu, 0.0):
                    candidates.append(("FC", KnowledgeItem("FC", x, y)))
                elif 0.5 < mu < 1.0:
                    candidates.append(("CCE", KnowledgeItem("CCE", x, y)))

    kinds = [k for k, _ in candidates]
    if len(candidates) != 1:
        what = "ambiguous" if candidates else "no matching"
        raise ClassificationError(f"{what} knowledge pattern; candidates: {kinds or 'none'}", kinds)
    return candidates[0][1]


# -- penalties -------------------------------------------------------------------

def _power(t: float, alpha: int) -> tuple[float, float]:
    """``|t|^alpha`` and its derivative (subgradient 0 at t = 0 for alpha = 1)."""
    if alpha == 1:
        return abs(t), float(np.sign(t))
    return t * t, 2.0 * t


def _vector_power(v: np.ndarray, alpha: int) -> tuple[float, np.ndarray]:
    if alpha == 1:
        return float(np.abs(v).sum()), np.sign(v)
    return float(v @ v), 2.0 * v


def _hinge(a: float) -> float:
    return a if a > 0.0 else 0.0


def _local_penalty(item: KnowledgeItem, B: np.ndarray, G: np.ndarray) -> float:
    """Penalty for kinds that read B directly; accumulates weight * gradient into G."""
    w = item.weight
    if item.kind == "EOP":
        total = 0.0
        if item.x is not None:
            v, g = _vector_power(B[:, item.x], item.alpha)
            total += v
            G[:, item.x] += w * g
        if item.y is not None:
            v, g = _vector_power(B[item.y, :], item.alpha)
            total += v
            G[item.y, :] += w * g
        return total
    if item.kind == "UCD":
        x, y, tau = item.x, item.y, item.tau
        bxy, byx = B[x, y], B[y, x]
        a, c = _hinge(tau - abs(bxy)), _hinge(tau - abs(byx))
        val, dval = _power(a * c, item.alpha)
        if dval != 0.0:
            if a > 0.0:
                G[x, y] += w * dval * c * -np.sign(bxy)
            if c > 0.0:
                G[y, x] += w * dval * a * -np.sign(byx)
        return val
    return 0.0


def _reach_penalty(item: KnowledgeItem, r: float) -> tuple[float, float]:
    """Penalty of a reachability item given R_xy, and its derivative in R_xy."""
    if item.kind == "ETE":
        gap = r - item.s
        if gap >= 0.0:
            return 0.0, 0.0
        val, d = _power(-gap, item.alpha)
        return val, -d
    val, d = _power(r, item.alpha)  # BNC, R >= 0
    return val, d


def items_loss(items: Sequence[KnowledgeItem], B: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted sum of item penalties and its gradient, with one shared reachability pass."""
    B = np.asarray(B, dtype=float)
    G = np.zeros_like(B)
    total = 0.0
    reach_items = []
    for item in items:
        if item.kind in ("ETE", "BNC"):
            reach_items.append(item)
        elif item.weight:
            total += item.weight * _local_penalty(item, B, G)
    if reach_items:
        R = reachability_poly(B)
        G_R = np.zeros_like(B)
        for item in reach_items:
            val, d = _reach_penalty(item, R[item.x, item.y])
            total += item.weight * val
            G_R[item.x, item.y] += item.weight * d
        if np.any(G_R):
            G += reachability_vjp(B, G_R)[1]
    return total, G


def penalty(item: KnowledgeItem, B: np.ndarray) -> float:
    """Unweighted penalty of one item; zero for CCE, DC and FC."""
    B = np.asarray(B, dtype=float)
    if item.kind in ("ETE", "BNC"):
        return _reach_penalty(item, reachability_poly(B)[item.x, item.y])[0]
    return _local_penalty(item, B, np.zeros_like(B))


def penalty_gradient(item: KnowledgeItem, B: np.ndarray) -> np.ndarray:
    return items_loss([replace(item, weight=1.0)], B)[1]


def effective_l1(kset: KnowledgeSet) -> np.ndarray:
    """Per-edge l1 coefficients with CCE edges divided by their gamma.

    When several CCE items name the same edge the largest gamma (weakest
    coefficient) is used.
    """
    lam = kset.base_l1.copy()
    best: dict[tuple[int, int], float] = {}
    for item in kset.items:
        if item.kind == "CCE":
            best[item.pair] = max(best.get(item.pair, 0.0), item.gamma)
    for (x, y), gamma in best.items():
        lam[x, y] = kset.base_l1[x, y] / gamma
    return lam


def knowledge_loss(kset: KnowledgeSet, B: np.ndarray) -> tuple[float, np.ndarray]:
    """Reweighted l1 plus weighted item penalties, with gradient."""
    B = np.asarray(B, dtype=float)
    lam = effective_l1(kset)
    val, G = items_loss(kset.items, B)
    return float(np.sum(lam * np.abs(B))) + val, G + lam * np.sign(B)


def bounds(kset: KnowledgeSet, D: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Box bounds on B from DC/DC-/FC items; the diagonal is pinned to zero."""
    D = kset.dim if D is None else D
    lower = np.full((D, D), -np.inf)
    upper = np.full((D, D), np.inf)
    np.fill_diagonal(lower, 0.0)
    np.fill_diagonal(upper, 0.0)
    seen: dict[tuple[int, int], str] = {}
    for item in kset.items:
        if item.kind not in BOUND_KINDS:
            continue
        prev = seen.get(item.pair)
        if prev is not None and prev != item.kind:
            raise BoundConflictError(f"conflicting {prev} and {item.kind} on pair {item.pair}")
        seen[item.pair] = item.kind
        x, y = item.pair
        if item.kind == "FC":
            lower[x, y] = upper[x, y] = 0.0
        elif item.kind == "DC":
            lower[x, y] = max(lower[x, y], item.tau)
        else:
            upper[x, y] = min(upper[x, y], -item.tau)
    return lower, upper


def from_knowledge_graph(edges: Iterable[tuple[int, int]], gamma: float = DEFAULT_GAMMA) -> list[KnowledgeItem]:
    """One CCE item per knowledge-graph edge."""
    items = []
    for x, y in sorted(set((int(a), int(b)) for a, b in edges)):
        if x == y:
            raise KnowledgeError(f"knowledge-graph self-loop on node {x}")
        items.append(KnowledgeItem("CCE", x, y, gamma=gamma))
    return items


# -- text format -------------------------------------------------------------------

def _resolve(token: str, names: Mapping[str, int], lineno: int) -> int | None:
    token = token.strip()
    if token in ("-", ""):
        return None
    if token not in names:
        raise KnowledgeParseError(f"unknown variable name {token!r}", lineno)
    return names[token]


def parse_knowledge(text: str, names: Sequence[str]) -> list[KnowledgeItem]:
    """Parse ``KIND,x,y,key=value,...`` lines; ``#`` starts a comment line."""
    index = {n: i for i, n in enumerate(names)}
    items = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 3:
            raise KnowledgeParseError(f"expected KIND,x,y[,key=value...], got {line!r}", lineno)
        kind = parts[0].upper()
        if kind not in KINDS:
            raise KnowledgeParseError(f"unknown knowledge kind {parts[0]!r}", lineno)
        x, y = _resolve(parts[1], index, lineno), _resolve(parts[2], index, lineno)
        params: dict = {}
        for token in parts[3:]:
            key, sep, value = token.partition("=")
            key = key.strip()
            if not sep or key not in _PARAM_KEYS[kind]:
                raise KnowledgeParseError(f"unsupported parameter {token!r} for {kind}", lineno)
            try:
                params[key] = int(value) if key == "alpha" else float(value)
            except ValueError:
                raise KnowledgeParseError(f"bad value in {token!r}", lineno) from None
        try:
            items.append(KnowledgeItem(kind, x, y, **params))
        except KnowledgeError as exc:
            raise KnowledgeParseError(str(exc), lineno) from None
    return items


def load_knowledge(path, names: Sequence[str]) -> list[KnowledgeItem]:
    return parse_knowledge(Path(path).read_text(encoding="utf-8"), names)


def format_knowledge(items: Iterable[KnowledgeItem], names: Sequence[str]) -> str:
    defaults = KnowledgeItem("FC", 0, 1)
    lines = []
    for item in items:
        fields = [item.kind,
                  "-" if item.x is None else names[item.x],
                  "-" if item.y is None else names[item.y]]
        for key in sorted(_PARAM_KEYS[item.kind]):
            value = getattr(item, key)
            if value != getattr(defaults, key):
                fields.append(f"{key}={value:g}" if isinstance(value, float) else f"{key}={value}")
        lines.append(",".join(fields))
    return "\n".join(lines) + ("\n" if lines else "")
