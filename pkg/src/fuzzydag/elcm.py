"""Extended linear causal model for mixed binary/continuous data.

Each variable is a linear function of its parents plus independent latent
noise. Continuous variables observe that sum directly; binary variables
observe whether it exceeds zero. The likelihood below is the exact
counterpart of this generator, so fitting and simulation share one model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from . import _accel, _kernels
from .graph import BinaryGraph, CycleError, topological_order, validate_adjacency

FAMILIES = {
    "gaussian": _kernels.GAUSSIAN,
    "laplace": _kernels.LAPLACE,
    "logistic": _kernels.LOGISTIC,
    "cauchy": _kernels.CAUCHY,
}


@dataclass(frozen=True)
class LatentDistribution:
    """Zero-location noise family with a positive scale."""

    family: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}; choose from {sorted(FAMILIES)}")
        if not self.scale > 0:
            raise ValueError(f"noise scale must be positive, got {self.scale}")
        object.__setattr__(self, "family", fam)

    @property
    def code(self) -> int:
        return FAMILIES[self.family]

    def log_density(self, x):
        z = np.asarray(x, dtype=float) / self.scale
        return _kernels._np_logpdf(z, self.code)[0] - np.log(self.scale)

    def cdf(self, x):
        z = np.asarray(x, dtype=float) / self.scale
        if self.family == "gaussian":
            return special.ndtr(z)
        if self.family == "laplace":
            return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
        if self.family == "logistic":
            return special.expit(z)
        return np.arctan2(1.0, -z) / np.pi

    def log_cdf(self, x):
        """Log-CDF, floored at ``log(1e-12)`` except for the Gaussian, which is evaluated stably."""
        z = np.asarray(x, dtype=float) / self.scale
        return _kernels._np_logcdf(z, self.code)[0]

    def log_survival(self, x):
        # every supported family is symmetric about zero
        return self.log_cdf(-np.asarray(x, dtype=float))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "gaussian":
            e = rng.standard_normal(n)
        elif self.family == "laplace":
            e = rng.laplace(0.0, 1.0, n)
        elif self.family == "logistic":
            e = rng.logistic(0.0, 1.0, n)
        else:
            e = rng.standard_cauchy(n)
        return self.scale * e


@dataclass
class MixedDataset:
    """``(N, D)`` observations with a binary flag per column."""

    values: np.ndarray
    binary: np.ndarray
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError(f"dataset must be a non-empty 2-D array, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("dataset contains missing or non-finite values")
        self.binary = np.asarray(self.binary, dtype=bool).reshape(-1)
        if self.binary.shape[0] != self.n_vars:
            raise ValueError(f"{self.binary.shape[0]} type flags for {self.n_vars} variables")
        if not self.names:
            self.names = [f"X{i}" for i in range(self.n_vars)]
        self.names = [str(n) for n in self.names]
        if len(self.names) != self.n_vars or len(set(self.names)) != self.n_vars:
            raise ValueError("variable names must be unique and match the column count")
        for i in np.flatnonzero(self.binary):
            col = self.values[:, i]
            if not np.all((col == 0.0) | (col == 1.0)):
                raise ValueError(f"binary column {self.names[i]!r} holds values other than 0/1")
            if col.min() == col.max():
                warnings.warn(f"binary column {self.names[i]!r} is constant", stacklevel=2)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def standardized(self) -> "MixedDataset":
        """Copy with continuous columns centred and scaled to unit variance."""
        X = self.values.copy()
        cont = ~self.binary
        mu = X[:, cont].mean(axis=0)
        sd = X[:, cont].std(axis=0)
        sd[sd == 0] = 1.0
        X[:, cont] = (X[:, cont] - mu) / sd
        return MixedDataset(X, self.binary.copy(), list(self.names))


@dataclass
class ModelSpec:
    adjacency: np.ndarray
    noise: list[LatentDistribution]
    binary: np.ndarray

    def __post_init__(self):
        self.adjacency = validate_adjacency(self.adjacency)
        D = self.adjacency.shape[0]
        self.binary = np.asarray(self.binary, dtype=bool).reshape(-1)
        if len(self.noise) != D or self.binary.shape[0] != D:
            raise ValueError("noise and type vectors must have one entry per variable")
        self.order = topological_order(BinaryGraph.from_matrix(self.adjacency != 0))


def _noise_arrays(noise: Sequence[LatentDistribution], D: int):
    if len(noise) != D:
        raise ValueError(f"{len(noise)} noise distributions for {D} variables")
    family = np.array([nd.code for nd in noise], dtype=np.int64)
    scale = np.array([nd.scale for nd in noise], dtype=float)
    return family, scale


def nll_and_score(B: np.ndarray, noise: Sequence[LatentDistribution], data: MixedDataset):
    """Total NLL and the per-sample score ``d nll / d (X @ B)``."""
    B = np.asarray(B, dtype=float)
    X = data.values
    D = data.n_vars
    if B.shape != (D, D):
        raise ValueError(f"adjacency shape {B.shape} does not match {D} variables")
    family, scale = _noise_arrays(noise, D)
    M = X @ B
    kernel = _kernels.nll_score_loop if _accel.USE_NUMBA else _kernels.nll_score_numpy
    return kernel(X, M, family, scale, data.binary)


def negative_log_likelihood(B, noise, data: MixedDataset) -> float:
    return float(nll_and_score(B, noise, data)[0])


def nll_gradient(B, noise, data: MixedDataset) -> np.ndarray:
    return nll_and_gradient(B, noise, data)[1]


def nll_and_gradient(B, noise, data: MixedDataset) -> tuple[float, np.ndarray]:
    total, G = nll_and_score(B, noise, data)
    grad = data.values.T @ G
    np.fill_diagonal(grad, 0.0)
    return float(total), grad


def sample(spec: ModelSpec, n: int, seed) -> MixedDataset:
    """Draw ``n`` rows by ancestral sampling in topological order.

    ``seed`` may be an int or an existing ``numpy.random.Generator`` (to
    continue a caller's stream).
    """
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    if not isinstance(spec, ModelSpec):
        raise TypeError("spec must be a ModelSpec")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    B = spec.adjacency
    D = B.shape[0]
    X = np.zeros((n, D))
    for j in spec.order:
        latent = X @ B[:, j] + spec.noise[j].sample(rng, n)
        X[:, j] = (latent > 0).astype(float) if spec.binary[j] else latent
    return MixedDataset(X, spec.binary.copy())


__all__ = [
    "CycleError",
    "FAMILIES",
    "LatentDistribution",
    "MixedDataset",
    "ModelSpec",
    "negative_log_likelihood",
    "nll_and_gradient",
    "nll_gradient",
    "sample",
]
