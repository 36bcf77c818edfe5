"""Synthetic scenarios: ER DAGs, edge weights, mixed datasets and noisy knowledge."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import elcm
from .graph import BinaryGraph, is_dag, reachable_from
from .knowledge import KnowledgeItem

WEIGHT_RANGE = (0.5, 2.0)

NOISE_PRESETS = {
    "gaussian-gaussian": ("gaussian", "gaussian"),
    "laplace-logistic": ("laplace", "logistic"),
    "cauchy-gaussian": ("cauchy", "gaussian"),
}


@dataclass
class ScenarioSpec:
    n_nodes: int
    avg_degree: float
    binary_ratio: float = 0.0
    n_samples: int = 500
    continuous_noise: str = "gaussian"
    binary_noise: str = "gaussian"
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError(f"n_nodes must be positive, got {self.n_nodes}")
        if self.avg_degree < 0:
            raise ValueError(f"avg_degree must be nonnegative, got {self.avg_degree}")
        if self.n_edges > self.n_nodes * (self.n_nodes - 1) // 2:
            raise ValueError(f"avg_degree {self.avg_degree} needs {self.n_edges} edges; "
                             f"a DAG on {self.n_nodes} nodes holds at most {self.n_nodes * (self.n_nodes - 1) // 2}")
        if not 0.0 <= self.binary_ratio <= 1.0:
            raise ValueError(f"binary_ratio must lie in [0, 1], got {self.binary_ratio}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be positive, got {self.n_samples}")
        for name in ("continuous_noise", "binary_noise"):
            elcm.LatentDistribution(getattr(self, name), self.noise_scale)

    @property
    def n_edges(self) -> int:
        # average (in + out) degree
        return int(np.floor(self.avg_degree * self.n_nodes / 2 + 1e-9))

    @classmethod
    def with_preset(cls, preset: str, **kwargs) -> "ScenarioSpec":
        if preset not in NOISE_PRESETS:
            raise ValueError(f"unknown noise preset {preset!r}; choose from {', '.join(NOISE_PRESETS)}")
        cont, binary = NOISE_PRESETS[preset]
        return cls(continuous_noise=cont, binary_noise=binary, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class KnowledgeGraphSpec:
    pos_rate: float = 0.5
    noise_rate: float = 0.05
    mode: str = "random"
    seed: int = 0

    def __post_init__(self):
        for name in ("pos_rate", "noise_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        self.mode = self.mode.lower()
        if self.mode not in ("random", "apg"):
            raise ValueError(f"mode must be 'random' or 'apg', got {self.mode!r}")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def generate_er_dag(spec: ScenarioSpec, rng=None) -> BinaryGraph:
    """Sample exactly ``spec.n_edges`` edges uniformly among pairs consistent with a random order."""
    rng = _rng(spec.seed if rng is None else rng)
    D = spec.n_nodes
    order = rng.permutation(D)
    a, b = np.triu_indices(D, k=1)
    picked = rng.choice(a.size, size=spec.n_edges, replace=False)
    edges = zip(order[a[picked]].tolist(), order[b[picked]].tolist())
    return BinaryGraph.from_edges(D, edges)


def assign_weights(g: BinaryGraph, seed=None) -> np.ndarray:
    """Uniform magnitudes on [0.5, 2] with a fair random sign, in sorted edge order."""
    if not is_dag(g):
        raise ValueError("weights can only be assigned to a DAG")
    rng = _rng(seed)
    B = np.zeros((g.dim, g.dim))
    edges = sorted(g.edges)
    if not edges:
        return B
    sign = np.where(rng.random(len(edges)) < 0.5, -1.0, 1.0)
    mag = rng.uniform(*WEIGHT_RANGE, size=len(edges))
    rows, cols = zip(*edges)
    B[list(rows), list(cols)] = sign * mag
    return B


def apg_probability(weight) -> np.ndarray:
    """Inclusion probability for a true edge: sigmoid of |w| mapped affinely from [0.5, 2] to [-2.5, 2.5]."""
    t = 5.0 * (np.abs(weight) - 0.5) / 1.5 - 2.5
    return 1.0 / (1.0 + np.exp(-t))


def generate_knowledge_graph(truth: np.ndarray, kg: KnowledgeGraphSpec) -> set[tuple[int, int]]:
    truth = np.asarray(truth, dtype=float)
    rng = _rng(kg.seed)
    D = truth.shape[0]
    true_mask = truth != 0
    U = rng.random((D, D))
    if kg.mode == "apg":
        p_true = apg_probability(truth)
    else:
        p_true = np.full((D, D), kg.pos_rate)
    noise_mask = ~true_mask & ~np.eye(D, dtype=bool)
    keep = (true_mask & (U < p_true)) | (noise_mask & (U < kg.noise_rate))
    rows, cols = np.nonzero(keep)
    return set(zip(rows.tolist(), cols.tolist()))


def noise_for(spec: ScenarioSpec, binary: np.ndarray) -> list[elcm.LatentDistribution]:
    cont = elcm.LatentDistribution(spec.continuous_noise, spec.noise_scale)
    disc = elcm.LatentDistribution(spec.binary_noise, spec.noise_scale)
    return [disc if b else cont for b in binary]


def build_scenario(spec: ScenarioSpec) -> tuple[elcm.ModelSpec, elcm.MixedDataset]:
    """Graph, weights, variable types, then data, all from one seeded stream."""
    rng = np.random.default_rng(spec.seed)
    g = generate_er_dag(spec, rng)
    B = assign_weights(g, rng)
    n_binary = int(np.floor(spec.binary_ratio * spec.n_nodes + 1e-9))
    binary = np.zeros(spec.n_nodes, dtype=bool)
    binary[rng.choice(spec.n_nodes, size=n_binary, replace=False)] = True
    model = elcm.ModelSpec(B, noise_for(spec, binary), binary)
    data = elcm.sample(model, spec.n_samples, rng)
    return model, data


def sample_knowledge_items(truth: np.ndarray, kind: str, count: int, seed=None, **params) -> list[KnowledgeItem]:
    """Draw up to ``count`` knowledge items of one kind that are correct for ``truth``.

    UCD, CCE and DC use true edges; FC uses absent ordered pairs; ETE uses
    pairs joined by a directed path but no direct edge; BNC uses pairs with
    no directed path; EOP uses root (no-ancestor) or sink (no-descendant)
    nodes.
    """
    kind = kind.upper()
    rng = _rng(seed)
    truth = np.asarray(truth, dtype=float)
    D = truth.shape[0]
    g = BinaryGraph.from_matrix(truth != 0)
    edges = sorted(g.edges)

    def pick(pool):
        if not pool:
            return []
        idx = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
        return [pool[i] for i in sorted(idx)]

    if kind == "EOP":
        indeg = (truth != 0).sum(axis=0)
        outdeg = (truth != 0).sum(axis=1)
        pool = [("x", i) for i in range(D) if indeg[i] == 0] + [("y", i) for i in range(D) if outdeg[i] == 0]
        return [KnowledgeItem("EOP", i if side == "x" else None, i if side == "y" else None, **params)
                for side, i in pick(pool)]
    if kind in ("UCD", "CCE"):
        chosen = pick(edges)
        if kind == "UCD":
            # orientation is not part of the knowledge
            chosen = [(x, y) if rng.random() < 0.5 else (y, x) for x, y in chosen]
        return [KnowledgeItem(kind, x, y, **params) for x, y in chosen]
    if kind == "DC":
        return [KnowledgeItem("DC" if truth[x, y] > 0 else "DC-", x, y, **params) for x, y in pick(edges)]
    if kind == "FC":
        pool = [(i, j) for i in range(D) for j in range(D) if i != j and truth[i, j] == 0]
        return [KnowledgeItem("FC", x, y, **params) for x, y in pick(pool)]
    reach = [reachable_from(g, i) for i in range(D)]
    if kind == "ETE":
        pool = [(i, j) for i in range(D) for j in sorted(reach[i]) if j != i and truth[i, j] == 0]
    elif kind == "BNC":
        pool = [(i, j) for i in range(D) for j in range(D) if i != j and j not in reach[i]]
    else:
        raise ValueError(f"cannot sample knowledge of kind {kind!r}")
    return [KnowledgeItem(kind, x, y, **params) for x, y in pick(pool)]


__all__ = [
    "KnowledgeGraphSpec",
    "ScenarioSpec",
    "apg_probability",
    "assign_weights",
    "build_scenario",
    "generate_er_dag",
    "generate_knowledge_graph",
    "noise_for",
    "sample_knowledge_items",
]
