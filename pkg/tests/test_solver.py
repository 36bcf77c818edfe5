import numpy as np
import pytest

from fuzzydag import elcm, synth
from fuzzydag.elcm import LatentDistribution, MixedDataset, ModelSpec
from fuzzydag.graph import BinaryGraph, is_dag, threshold
from fuzzydag.knowledge import BoundConflictError, KnowledgeItem, KnowledgeSet
from fuzzydag.solver import (NonFiniteObjectiveError, SolverConfig, _Objective, _split_bounds, fit,
                             inner_minimize)


def chain_data(seed, n=5000, b=2.0):
    spec = ModelSpec(np.array([[0.0, b], [0.0, 0.0]]), [LatentDistribution()] * 2, [False, False])
    return elcm.sample(spec, n, seed)


# -- config ---------------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(rho_mult=1.0)
    with pytest.raises(ValueError):
        SolverConfig(progress_ratio=1.0)
    with pytest.raises(ValueError):
        SolverConfig(threshold=0.0)
    with pytest.raises(ValueError, match="unknown"):
        SolverConfig.from_dict({"rho": 1.0})
    cfg = SolverConfig.from_dict({"max_outer": 5, "init_B": [[0, 1], [0, 0]]})
    assert cfg.max_outer == 5 and cfg.init_B.shape == (2, 2)
    assert SolverConfig.from_dict(SolverConfig().to_dict()).to_dict() == SolverConfig().to_dict()


# -- inner solver ----------------------------------------------------------------------------

def quadratic(T):
    return lambda B: (0.5 * np.sum((B - T) ** 2), B - T)


def test_inner_quadratic_unbounded(rng):
    T = rng.normal(size=(4, 4))
    res = inner_minimize(quadratic(T), None, np.zeros((4, 4)), SolverConfig())
    assert np.allclose(res.x, T, atol=1e-6)


def test_inner_quadratic_with_lower_bound(rng):
    T = rng.normal(size=(4, 4))
    bounds = (np.zeros((4, 4)), np.full((4, 4), np.inf))
    seen = []

    def oracle(B):
        seen.append(B.copy())
        return quadratic(T)(B)

    res = inner_minimize(oracle, bounds, np.ones((4, 4)), SolverConfig())
    assert np.allclose(res.x, np.maximum(T, 0), atol=1e-6)
    assert all(np.all(B >= 0) for B in seen)


def test_inner_rosenbrock_in_a_matrix():
    def rosen(B):
        x, y = B[0, 1], B[1, 0]
        G = np.zeros_like(B)
        G[0, 1] = -2 * (1 - x) - 400 * x * (y - x * x)
        G[1, 0] = 200 * (y - x * x)
        return (1 - x) ** 2 + 100 * (y - x * x) ** 2, G

    start = np.zeros((2, 2))
    start[0, 1] = -1.2
    start[1, 0] = 1.0
    res = inner_minimize(rosen, None, start, SolverConfig(inner_max_iter=2000, inner_grad_tol=1e-10))
    assert abs(res.x[0, 1] - 1) <= 1e-4 and abs(res.x[1, 0] - 1) <= 1e-4


def test_inner_never_returns_worse_than_start(rng):
    T = rng.normal(size=(3, 3))

    def lying(B):
        f, g = quadratic(T)(B)
        return f, -g  # gradient of the wrong sign forces a line-search failure

    start = rng.normal(size=(3, 3))
    f0 = quadratic(T)(start)[0]
    res = inner_minimize(lying, None, start, SolverConfig())
    assert res.fun <= f0
    assert quadratic(T)(res.x)[0] <= f0


def test_inner_rejects_nonfinite_start():
    with pytest.raises(NonFiniteObjectiveError):
        inner_minimize(lambda B: (np.nan, B), None, np.zeros((2, 2)), SolverConfig())


def test_split_bounds_cover_every_case():
    lower = np.array([[0.0, 0.3, -np.inf], [-np.inf, 0.0, -0.5]])
    upper = np.array([[0.0, np.inf, -0.3], [np.inf, 0.0, 0.2]])
    (lp, lm), (up, um) = _split_bounds(lower, upper)
    # B = W+ - W- must be able to reach exactly the original box
    assert (lp[0, 0], up[0, 0], lm[0, 0], um[0, 0]) == (0, 0, 0, 0)
    assert lp[0, 1] == 0.3 and um[0, 1] == 0
    assert up[0, 2] == 0 and lm[0, 2] == 0.3
    assert up[1, 2] == 0.2 and um[1, 2] == 0.5


# -- fit ---------------------------------------------------------------------------------------

def test_two_variable_chain_recovery():
    data = chain_data(0)
    res = fit(data)
    assert res.graph.edges == {(0, 1)}
    assert abs(res.weights[0, 1] - 2.0) <= 0.1
    assert res.converged


def test_forbidden_edge_is_exactly_zero():
    data = chain_data(1)
    kset = KnowledgeSet.uniform(2, [KnowledgeItem("FC", 0, 1)])
    res = fit(data, kset=kset)
    assert res.weights[0, 1] == 0.0


def test_direct_cause_bound_holds_exactly():
    data = chain_data(2)
    kset = KnowledgeSet.uniform(2, [KnowledgeItem("DC", 1, 0, tau=0.3)])
    res = fit(data, kset=kset)
    assert res.weights[1, 0] >= 0.3


def test_bound_conflict_propagates():
    kset = KnowledgeSet.uniform(2, [KnowledgeItem("DC", 0, 1), KnowledgeItem("FC", 0, 1)])
    with pytest.raises(BoundConflictError):
        fit(chain_data(3, n=50), kset=kset)


def test_knowledge_dimension_mismatch():
    with pytest.raises(ValueError):
        fit(chain_data(3, n=50), kset=KnowledgeSet.uniform(3))


def test_nonfinite_term_is_named():
    cfg = SolverConfig(init_B=np.array([[0.0, 2e3], [1.0, 0.0]]))
    with pytest.raises(NonFiniteObjectiveError) as exc:
        fit(chain_data(4, n=50), cfg=cfg)
    assert exc.value.term == "acyclicity"


def _scenario(seed, D=6, n=5000):
    return synth.build_scenario(synth.ScenarioSpec(n_nodes=D, avg_degree=2, n_samples=n, seed=seed))


def test_fit_invariants_on_a_scenario():
    model, data = _scenario(5)
    res = fit(data)
    assert res.graph == threshold(res.weights, SolverConfig().threshold)
    assert res.converged and is_dag(res.graph)
    trace = res.objective_trace
    for prev, cur in zip(trace, trace[1:]):
        assert cur["h"] <= 0.25 * prev["h"] or cur["rho"] > cur["rho_inner"]
    assert trace[-1]["h"] <= 1e-8


def test_fit_not_dominated_by_truth():
    for seed in range(3):
        model, data = _scenario(10 + seed)
        res = fit(data)
        last = res.objective_trace[-1]
        obj = _Objective(data, [LatentDistribution()] * data.n_vars, KnowledgeSet.uniform(data.n_vars),
                         SolverConfig())
        obj.rho, obj.alpha = last["rho_inner"], last["alpha_inner"]
        assert obj.augmented(res.weights) <= obj.augmented(model.adjacency)


def test_fit_is_reproducible():
    _, data = _scenario(6, n=500)
    a, b = fit(data), fit(data)
    assert a.objective_trace == b.objective_trace
    assert np.array_equal(a.weights, b.weights)


def test_unconverged_fit_is_repaired_and_flagged():
    rng = np.random.default_rng(0)
    x = rng.normal(size=2000)
    data = MixedDataset(np.column_stack([x, x + 0.1 * rng.normal(size=2000)]), [False, False])
    res = fit(data, cfg=SolverConfig(max_outer=1))
    assert not res.converged
    assert is_dag(res.graph)
    assert res.repaired_edges == [(0, 1)]
    assert res.weights[0, 1] == 0.0


def test_default_noise_and_knowledge(rng):
    data = MixedDataset(rng.normal(size=(200, 3)), [False] * 3)
    res = fit(data)
    assert isinstance(res.graph, BinaryGraph)
    assert "objective_trace" in res.diagnostics()
