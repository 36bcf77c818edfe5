"""Knowledge-guided causal structure learning on mixed binary/continuous data."""

__version__ = "0.1.0"

from .elcm import LatentDistribution, MixedDataset, ModelSpec
from .graph import BinaryGraph, CycleError, NumericalOverflowError, acyclicity, is_dag, threshold
from .knowledge import KnowledgeItem, KnowledgeSet, parse_knowledge
from .metrics import StructureScore, score, shd
from .solver import FitResult, SolverConfig, fit
from .synth import KnowledgeGraphSpec, ScenarioSpec, build_scenario

__all__ = [
    "BinaryGraph",
    "CycleError",
    "FitResult",
    "KnowledgeGraphSpec",
    "KnowledgeItem",
    "KnowledgeSet",
    "LatentDistribution",
    "MixedDataset",
    "ModelSpec",
    "NumericalOverflowError",
    "ScenarioSpec",
    "SolverConfig",
    "StructureScore",
    "acyclicity",
    "build_scenario",
    "fit",
    "is_dag",
    "parse_knowledge",
    "score",
    "shd",
    "threshold",
]
