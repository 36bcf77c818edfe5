"""Replicated benchmark sweeps over scenarios and knowledge conditions.

A job is one (scenario, replicate): it simulates the data once, fits the
no-knowledge baseline, then fits every knowledge condition on the same data
so that baseline-missed pairs are defined per replicate. Jobs are
independent and may run in worker processes; aggregation sorts by key, so
the output does not depend on completion order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import metrics, solver, synth
from .graph import BinaryGraph
from .knowledge import DEFAULT_GAMMA, DEFAULT_L1, KINDS, KnowledgeSet, from_knowledge_graph

log = logging.getLogger(__name__)

BASELINE = "none"
SCORE_FIELDS = ("tpr", "fdr", "shd", "nnz")
CONDITION_KINDS = (BASELINE, "CCE") + tuple(k for k in KINDS if k not in ("CCE", "DC-"))


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 63-bit seed from the master seed and a path of identifiers."""
    payload = json.dumps([int(master_seed), *map(str, parts)]).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little") >> 1


@dataclass
class Scenario:
    name: str
    n_nodes: int
    avg_degree: float
    binary_ratio: float = 0.0
    n_samples: int = 500
    continuous_noise: str = "gaussian"
    binary_noise: str = "gaussian"
    noise_scale: float = 1.0

    def spec(self, seed: int) -> synth.ScenarioSpec:
        d = asdict(self)
        d.pop("name")
        return synth.ScenarioSpec(seed=seed, **d)


@dataclass
class Condition:
    name: str
    kind: str = BASELINE
    count: int = 3
    pos_rate: float = 0.5
    noise_rate: float = 0.05
    mode: str = "random"
    gamma: float = DEFAULT_GAMMA
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = BASELINE if self.kind.lower() == BASELINE else self.kind.upper()
        if self.kind not in CONDITION_KINDS:
            raise ValueError(f"condition {self.name!r}: unknown kind {self.kind!r}; "
                             f"choose from {', '.join(CONDITION_KINDS)}")
        if self.kind == "CCE":
            synth.KnowledgeGraphSpec(self.pos_rate, self.noise_rate, self.mode)
        if self.count < 0:
            raise ValueError(f"condition {self.name!r}: count must be nonnegative")


@dataclass
class SweepConfig:
    scenarios: list[Scenario]
    conditions: list[Condition]
    replicates: int = 10
    master_seed: int = 0
    l1: float = DEFAULT_L1
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError(f"replicates must be at least 1, got {self.replicates}")
        if not self.scenarios:
            raise ValueError("sweep needs at least one scenario")
        for c in self.conditions:
            if (c.name == BASELINE) != (c.kind == BASELINE):
                raise ValueError(f"condition {c.name!r}: only the condition named {BASELINE!r} "
                                 f"may have kind {BASELINE!r}")
        if not any(c.name == BASELINE for c in self.conditions):
            self.conditions.insert(0, Condition(BASELINE))
        # the baseline must be fitted first in each job
        self.conditions.sort(key=lambda c: c.name != BASELINE)
        for label, items in (("scenario", self.scenarios), ("condition", self.conditions)):
            names = [x.name for x in items]
            dup = {n for n in names if names.count(n) > 1}
            if dup:
                raise ValueError(f"duplicate {label} name(s): {sorted(dup)}")
            bad = [n for n in names if "__" in n or "/" in n]
            if bad:
                raise ValueError(f"{label} names may not contain '__' or '/': {bad}")
        solver.SolverConfig.from_dict(self.solver)
        for sc in self.scenarios:
            sc.spec(0)

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        raw = dict(raw)
        allowed = {f.name for f in fields(cls)} | {"grid"}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        scenarios = [_build(Scenario, s, "scenario") for s in raw.pop("scenarios", [])]
        conditions = [_build(Condition, c, "condition") for c in raw.pop("conditions", [])]
        grid = raw.pop("grid", None)
        if grid is not None:
            conditions.extend(expand_grid(grid))
        return cls(scenarios=scenarios, conditions=conditions, **raw)

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, raw: dict, label: str):
    raw = dict(raw)
    names = {f.name for f in fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ValueError(f"unknown {label} keys: {sorted(unknown)}")
    if "name" not in raw:
        if cls is Scenario:
            raw["name"] = "d{n_nodes}_deg{avg_degree:g}_br{br:g}_n{n}".format(
                n_nodes=raw.get("n_nodes"), avg_degree=raw.get("avg_degree", 0),
                br=raw.get("binary_ratio", 0.0), n=raw.get("n_samples", 500))
        else:
            raw["name"] = str(raw.get("kind", BASELINE)).lower()
    return cls(**raw)


def expand_grid(grid: dict) -> list[Condition]:
    """CCE conditions over every (pos_rate, noise_rate) combination."""
    grid = dict(grid)
    pos = grid.pop("pos_rate")
    noise = grid.pop("noise_rate")
    mode = grid.pop("mode", "random")
    gamma = grid.pop("gamma", DEFAULT_GAMMA)
    if grid:
        raise ValueError(f"unknown grid keys: {sorted(grid)}")
    return [Condition(f"cce_{mode}_p{p:g}_n{q:g}", "CCE", pos_rate=p, noise_rate=q, mode=mode, gamma=gamma)
            for p in pos for q in noise]


def condition_knowledge(cond: Condition, truth: np.ndarray, seed: int, l1: float) -> KnowledgeSet:
    D = truth.shape[0]
    if cond.kind == BASELINE:
        items = []
    elif cond.kind == "CCE":
        kg = synth.KnowledgeGraphSpec(cond.pos_rate, cond.noise_rate, cond.mode, seed)
        items = from_knowledge_graph(synth.generate_knowledge_graph(truth, kg), cond.gamma)
    else:
        items = synth.sample_knowledge_items(truth, cond.kind, cond.count, seed, **cond.params)
    return KnowledgeSet.uniform(D, items, l1)


def _interpretability(cond: Condition, kset: KnowledgeSet, est: BinaryGraph,
                      baseline: BinaryGraph | None, truth: BinaryGraph) -> dict:
    out = {"cp_hits": 0, "cp_instances": 0, "cd_hits": 0, "cd_instances": 0}
    if baseline is None or cond.kind not in ("ETE", "UCD"):
        return out
    pairs = [it.pair for it in kset.items]
    if cond.kind == "ETE":
        missed = metrics.missed_paths(baseline, truth, pairs)
        if missed:
            out["cp_instances"] = len(missed)
            out["cp_hits"] = round(metrics.cp_prop([(est, truth, pairs, missed)]) * len(missed))
    else:
        missed = metrics.missed_directions(baseline, truth, pairs)
        if missed:
            out["cd_instances"] = len(missed)
            out["cd_hits"] = round(metrics.cd_prop([(est, truth, pairs, missed)]) * len(missed))
    return out


def run_job(cfg: SweepConfig, scenario: Scenario, rep: int) -> list[dict]:
    """Simulate one replicate and fit every condition on it."""
    data_seed = derive_seed(cfg.master_seed, scenario.name, rep)
    model, data = synth.build_scenario(scenario.spec(data_seed))
    truth = model.adjacency
    true_graph = BinaryGraph.from_matrix(truth != 0)
    noise = synth.noise_for(scenario.spec(data_seed), data.binary)
    solver_cfg = solver.SolverConfig.from_dict(cfg.solver)

    records = []
    baseline = None
    for cond in cfg.conditions:  # baseline is first
        kseed = derive_seed(cfg.master_seed, f"{scenario.name}/{cond.name}", rep)
        rec = {"scenario": scenario.name, "condition": cond.name, "kind": cond.kind,
               "replicate": rep, "data_seed": data_seed, "knowledge_seed": kseed,
               "status": "ok", "error": ""}
        try:
            kset = condition_knowledge(cond, truth, kseed, cfg.l1)
            res = solver.fit(data, noise, kset, solver_cfg)
            s = metrics.score(res.graph, true_graph)
            if cond.kind == BASELINE:
                baseline = res.graph
            rec.update(s.to_dict())
            rec.update(n_items=len(kset.items), converged=res.converged,
                       wallclock_seconds=res.wallclock,
                       **_interpretability(cond, kset, res.graph, baseline, true_graph))
        except Exception as exc:  # recorded per cell, the sweep carries on
            rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
            log.warning("%s/%s rep %d failed: %s", scenario.name, cond.name, rep, exc)
        records.append(rec)
    return records


def _run_isolated(args) -> list[dict]:
    from threadpoolctl import threadpool_limits

    cfg, scenario, rep = args
    with threadpool_limits(limits=1):
        return run_job(cfg, scenario, rep)


def run_sweep(cfg: SweepConfig, workers: int = 1) -> list[dict]:
    jobs = [(cfg, sc, r) for sc in cfg.scenarios for r in range(cfg.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_isolated, jobs))
    else:
        batches = [_run_isolated(j) for j in jobs]
    records = [r for batch in batches for r in batch]
    return sorted(records, key=lambda r: (r["scenario"], r["condition"], r["replicate"]))


def _ratio(hits: int, total: int) -> float:
    return hits / total if total else math.nan


def aggregate(records: list[dict], cfg: SweepConfig) -> list[dict]:
    """One row per (scenario, condition) with mean/std columns and failure counts."""
    by_cell: dict[tuple[str, str], list[dict]] = {}
    for r in records:
        by_cell.setdefault((r["scenario"], r["condition"]), []).append(r)
    scen = {s.name: s for s in cfg.scenarios}
    rows = []
    for sc in cfg.scenarios:
        for cond in cfg.conditions:
            recs = sorted(by_cell.get((sc.name, cond.name), []), key=lambda r: r["replicate"])
            ok = [r for r in recs if r["status"] == "ok"]
            failed = [r for r in recs if r["status"] != "ok"]
            row = {"scenario": sc.name, "condition": cond.name, "kind": cond.kind}
            row.update({k: v for k, v in asdict(scen[sc.name]).items() if k != "name"})
            row.update(replicates=len(recs), n_ok=len(ok), n_failed=len(failed))
            for key in SCORE_FIELDS:
                mean, std = metrics.summarize([float(r[key]) for r in ok])
                row[f"{key}_mean"], row[f"{key}_std"] = mean, std
            row["converged_frac"] = _ratio(sum(bool(r["converged"]) for r in ok), len(ok))
            row["cp_prop"] = _ratio(sum(r["cp_hits"] for r in ok), sum(r["cp_instances"] for r in ok))
            row["cp_instances"] = sum(r["cp_instances"] for r in ok)
            row["cd_prop"] = _ratio(sum(r["cd_hits"] for r in ok), sum(r["cd_instances"] for r in ok))
            row["cd_instances"] = sum(r["cd_instances"] for r in ok)
            row["failures"] = " | ".join(f"rep {r['replicate']}: {r['error']}" for r in failed)
            rows.append(row)
    return rows


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_aggregate(path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(rows[0]))
        for row in rows:
            w.writerow([_cell(v) for v in row.values()])


def detail_name(rec: dict) -> str:
    return f"{rec['scenario']}__{rec['condition']}__r{rec['replicate']:03d}.json"


def write_details(run_dir: Path, records: list[dict]) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    for rec in records:
        (run_dir / detail_name(rec)).write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n",
                                                 encoding="utf-8")


def read_details(run_dir: Path) -> list[dict]:
    records = [json.loads(p.read_text(encoding="utf-8")) for p in sorted(Path(run_dir).glob("*.json"))]
    return sorted(records, key=lambda r: (r["scenario"], r["condition"], r["replicate"]))
