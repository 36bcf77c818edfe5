"""``fuzzydag`` command line: simulate, fit, eval, bench and sachs."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import nullcontext
from pathlib import Path


from . import __version__, bench, io, metrics, sachs, solver, synth
from .elcm import LatentDistribution, MixedDataset
from .graph import BinaryGraph
from .knowledge import DEFAULT_GAMMA, DEFAULT_L1, KnowledgeSet, format_knowledge, from_knowledge_graph, load_knowledge

log = logging.getLogger("fuzzydag")

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2

FIT_KEYS = ("l1", "continuous_noise", "binary_noise", "noise_scale", "standardize")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# -- manifest ----------------------------------------------------------------------

class Manifest:
    """Collects what is needed to re-run a command and writes it last."""

    def __init__(self, out: Path, subcommand: str, config: dict, seeds: dict):
        self.out = out
        self.record = {"subcommand": subcommand, "version": __version__, "config": config,
                       "seeds": seeds, "inputs": {}, "outputs": {}}

    def add_input(self, role: str, path) -> None:
        self.record["inputs"][role] = {"path": str(path), "digest": io.file_digest(path)}

    def add_output(self, name: str) -> None:
        self.record["outputs"][name] = io.file_digest(self.out / name)

    def write(self) -> None:
        io.write_json(self.out / "manifest.json", self.record)


def _out_dir(args) -> Path:
    if args.out is None:
        raise UsageError(f"{args.command} needs --out DIR")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> dict:
    return io.load_config(args.config) if args.config else {}


# -- simulate --------------------------------------------------------------------

def cmd_simulate(args) -> int:
    raw = _config(args)
    kg_raw = raw.pop("knowledge_graph", None)
    preset = raw.pop("preset", None)
    for flag, key in (("nodes", "n_nodes"), ("degree", "avg_degree"),
                      ("binary_ratio", "binary_ratio"), ("samples", "n_samples")):
        if getattr(args, flag) is not None:
            raw[key] = getattr(args, flag)
    if args.seed is not None:
        raw["seed"] = args.seed
    known = set(synth.ScenarioSpec.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown scenario fields: {sorted(unknown)}")
    missing = {"n_nodes", "avg_degree"} - set(raw)
    if missing:
        raise UsageError(f"scenario needs field(s): {sorted(missing)}")
    spec = synth.ScenarioSpec.with_preset(preset, **raw) if preset else synth.ScenarioSpec(**raw)
    kg = None
    if kg_raw is not None:
        kg_raw = dict(kg_raw)
        kg_raw.setdefault("seed", spec.seed + 1)
        gamma = kg_raw.pop("gamma", DEFAULT_GAMMA)
        kg = synth.KnowledgeGraphSpec(**kg_raw)

    out = _out_dir(args)
    model, data = synth.build_scenario(spec)
    names = data.names
    io.write_adjacency(out / "truth.csv", model.adjacency)
    io.write_edges(out / "truth_edges.csv", BinaryGraph.from_matrix(model.adjacency != 0).edges, names)
    io.write_dataset(out / "data.csv", data)
    io.write_schema(out / "schema.csv", data)
    outputs = ["truth.csv", "truth_edges.csv", "data.csv", "schema.csv"]
    config = {"scenario": spec.to_dict(), "preset": preset}
    if kg is not None:
        edges = synth.generate_knowledge_graph(model.adjacency, kg)
        io.write_edges(out / "knowledge_graph.csv", edges, names)
        (out / "knowledge.txt").write_text(format_knowledge(from_knowledge_graph(edges, gamma), names),
                                           encoding="utf-8")
        outputs += ["knowledge_graph.csv", "knowledge.txt"]
        config["knowledge_graph"] = {**vars(kg), "gamma": gamma}
    seeds = {"scenario": spec.seed, **({"knowledge_graph": kg.seed} if kg else {})}
    manifest = Manifest(out, "simulate", config, seeds)
    if args.config:
        manifest.add_input("config", args.config)
    for name in outputs:
        manifest.add_output(name)
    manifest.write()
    log.info("wrote %d x %d dataset with %d edges to %s", data.n_samples, data.n_vars, len(model.adjacency.nonzero()[0]), out)
    return EXIT_OK


# -- fit ------------------------------------------------------------------------

def _split_fit_config(raw: dict) -> tuple[dict, dict]:
    opts = {k: raw.pop(k) for k in FIT_KEYS if k in raw}
    return opts, raw


def _fit_options(args, opts: dict) -> dict:
    resolved = {"l1": DEFAULT_L1, "continuous_noise": "gaussian", "binary_noise": "gaussian",
                "noise_scale": 1.0, "standardize": False}
    resolved.update(opts)
    for key in FIT_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _noise(data: MixedDataset, opts: dict) -> list[LatentDistribution]:
    cont = LatentDistribution(opts["continuous_noise"], opts["noise_scale"])
    disc = LatentDistribution(opts["binary_noise"], opts["noise_scale"])
    return [disc if b else cont for b in data.binary]


def _write_fit(out: Path, data: MixedDataset, res: solver.FitResult, manifest: Manifest, extra=None) -> None:
    io.write_adjacency(out / "weights.csv", res.weights)
    io.write_edges(out / "edges.csv", res.graph.edges, data.names)
    diag = {"manifest": "manifest.json", "variables": data.names, **res.diagnostics(), **(extra or {})}
    io.write_json(out / "diagnostics.json", diag)
    for name in ("weights.csv", "edges.csv", "diagnostics.json"):
        manifest.add_output(name)


def cmd_fit(args) -> int:
    if args.data is None or args.schema is None:
        raise UsageError("fit needs --data and --schema")
    opts, solver_raw = _split_fit_config(_config(args))
    opts = _fit_options(args, opts)
    cfg = solver.SolverConfig.from_dict(solver_raw)
    data = io.read_dataset(args.data, args.schema)
    if opts["standardize"]:
        data = data.standardized()
    items = load_knowledge(args.knowledge, data.names) if args.knowledge else []
    kset = KnowledgeSet.uniform(data.n_vars, items, opts["l1"])
    out = _out_dir(args)

    res = solver.fit(data, _noise(data, opts), kset, cfg)
    manifest = Manifest(out, "fit", {"fit": opts, "solver": cfg.to_dict()}, {"seed": args.seed})
    for role, path in (("data", args.data), ("schema", args.schema), ("knowledge", args.knowledge),
                       ("config", args.config)):
        if path:
            manifest.add_input(role, path)
    _write_fit(out, data, res, manifest)
    manifest.write()
    log.info("fit %s: %d edges, converged=%s, %.2fs", args.data, len(res.graph), res.converged, res.wallclock)
    return EXIT_OK


# -- eval -----------------------------------------------------------------------

def _universe(est_edges, true_edges, schema_path) -> list[str]:
    used = sorted({n for e in (*est_edges, *true_edges) for n in e})
    if schema_path is None:
        return used
    names = list(io.read_schema(schema_path))
    stray = [n for n in used if n not in names]
    if stray:
        raise UsageError(f"edge lists name variables absent from {schema_path}: {', '.join(stray)}")
    return names


def cmd_eval(args) -> int:
    if args.estimated is None or args.truth is None:
        raise UsageError("eval needs --estimated and --truth")
    est_edges, true_edges = io.read_edges(args.estimated), io.read_edges(args.truth)
    names = _universe(est_edges, true_edges, args.schema)
    est = sachs.edges_to_graph(est_edges, names)
    truth = sachs.edges_to_graph(true_edges, names)
    result = metrics.score(est, truth).to_dict()
    json.dump(result, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")
    if args.out is not None:
        out = _out_dir(args)
        io.write_json(out / "score.json", {"manifest": "manifest.json", **result})
        manifest = Manifest(out, "eval", {"variables": names}, {})
        for role, path in (("estimated", args.estimated), ("truth", args.truth), ("schema", args.schema)):
            if path:
                manifest.add_input(role, path)
        manifest.add_output("score.json")
        manifest.write()
    log.info("TPR %.3f  FDR %.3f  SHD %d  NNZ %d", result["tpr"], result["fdr"], result["shd"], result["nnz"])
    return EXIT_OK


# -- bench ------------------------------------------------------------------------

def cmd_bench(args) -> int:
    if not args.config:
        raise UsageError("bench needs --config SWEEP")
    raw = _config(args)
    if args.seed is not None:
        raw["master_seed"] = args.seed
    if args.replicates is not None:
        raw["replicates"] = args.replicates
    cfg = bench.SweepConfig.from_dict(raw)
    out = _out_dir(args)
    workers = args.threads or 1
    n_jobs = len(cfg.scenarios) * cfg.replicates
    log.info("sweep: %d scenario(s) x %d condition(s) x %d replicate(s) on %d worker(s)",
             len(cfg.scenarios), len(cfg.conditions), cfg.replicates, workers)
    records = bench.run_sweep(cfg, workers)
    bench.write_details(out / "runs", records)
    rows = bench.aggregate(records, cfg)
    bench.write_aggregate(out / "aggregate.csv", rows)
    manifest = Manifest(out, "bench", cfg.to_dict(), {"master_seed": cfg.master_seed})
    manifest.add_input("config", args.config)
    manifest.add_output("aggregate.csv")
    for rec in records:
        manifest.add_output(f"runs/{bench.detail_name(rec)}")
    manifest.write()
    failed = sum(r["n_failed"] for r in rows)
    log.info("%d job(s), %d run(s), %d failed; aggregate in %s", n_jobs, len(records), failed,
             out / "aggregate.csv")
    return EXIT_OK


# -- sachs --------------------------------------------------------------------------

def cmd_sachs(args) -> int:
    if args.data is None:
        raise UsageError("sachs needs --data CSV")
    opts, solver_raw = _split_fit_config(_config(args))
    opts.setdefault("standardize", True)
    opts = _fit_options(args, opts)
    cfg = solver.SolverConfig.from_dict(solver_raw)
    data = sachs.load(args.data, standardize=opts["standardize"])
    truth_ctx = nullcontext(Path(args.truth)) if args.truth else _as_file(sachs.consensus_path())
    know_ctx = nullcontext(Path(args.knowledge)) if args.knowledge else _as_file(sachs.default_knowledge_path())
    with truth_ctx as truth_path, know_ctx as know_path:
        truth = sachs.edges_to_graph(io.read_edges(truth_path), data.names)
        items = load_knowledge(know_path, data.names)
        out = _out_dir(args)
        manifest = Manifest(out, "sachs", {}, {"seed": args.seed})
        manifest.add_input("data", args.data)
        manifest.add_input("truth", truth_path)
        manifest.add_input("knowledge", know_path)
    kset = KnowledgeSet.uniform(data.n_vars, items, opts["l1"])
    res = solver.fit(data, _noise(data, opts), kset, cfg)
    result = metrics.score(res.graph, truth).to_dict()
    manifest.record["config"] = {"fit": opts, "solver": cfg.to_dict(), "n_samples": data.n_samples,
                                 "binarized": list(sachs.BINARIZED)}
    if args.config:
        manifest.add_input("config", args.config)
    _write_fit(out, data, res, manifest, {"score": result})
    io.write_json(out / "score.json", {"manifest": "manifest.json", **result})
    manifest.add_output("score.json")
    manifest.write()
    json.dump(result, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")
    log.info("sachs (%d rows): TPR %.3f  FDR %.3f  SHD %d  NNZ %d", data.n_samples,
             result["tpr"], result["fdr"], result["shd"], result["nnz"])
    return EXIT_OK


def _as_file(traversable):
    from importlib import resources

    return resources.as_file(traversable)


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master random seed")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--config", type=Path, default=None, help="JSON or YAML config file")
    common.add_argument("--threads", type=int, default=None, help="worker processes (bench) or BLAS threads")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="fuzzydag", description="Knowledge-guided DAG learning on mixed data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic scenario")
    p.add_argument("--nodes", type=int)
    p.add_argument("--degree", type=float)
    p.add_argument("--binary-ratio", type=float)
    p.add_argument("--samples", type=int)

    fit_flags = _Parser(add_help=False)
    fit_flags.add_argument("--knowledge", type=Path, help="knowledge file (KIND,x,y[,key=value])")
    fit_flags.add_argument("--l1", type=float)
    fit_flags.add_argument("--continuous-noise", choices=sorted(synth.elcm.FAMILIES))
    fit_flags.add_argument("--binary-noise", choices=sorted(synth.elcm.FAMILIES))
    fit_flags.add_argument("--noise-scale", type=float)

    p = sub.add_parser("fit", parents=[common, fit_flags], help="learn a DAG from a dataset")
    p.add_argument("--data", type=Path)
    p.add_argument("--schema", type=Path)
    p.add_argument("--standardize", action="store_true", default=None)

    p = sub.add_parser("eval", parents=[common], help="score an estimated edge list")
    p.add_argument("--estimated", type=Path)
    p.add_argument("--truth", type=Path)
    p.add_argument("--schema", type=Path, help="fixes the variable universe")

    p = sub.add_parser("bench", parents=[common], help="run a replicated sweep")
    p.add_argument("--replicates", type=int)

    p = sub.add_parser("sachs", parents=[common, fit_flags], help="fit the protein-signalling dataset")
    p.add_argument("--data", type=Path)
    p.add_argument("--truth", type=Path, help="reference edge list (default: bundled 20-edge network)")
    p.add_argument("--raw-scale", dest="standardize", action="store_false", default=None,
                   help="skip standardizing the continuous columns")
    return parser


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "eval": cmd_eval, "bench": cmd_bench, "sachs": cmd_sachs}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("fuzzydag: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    if args.threads and args.command != "bench":
        from threadpoolctl import threadpool_limits

        limits = threadpool_limits(limits=args.threads)
    else:
        limits = nullcontext()
    try:
        with limits:
            return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"fuzzydag {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        log.debug("traceback", exc_info=True)
        print(f"fuzzydag {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
