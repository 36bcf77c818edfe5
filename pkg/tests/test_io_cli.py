import json

import numpy as np
import pytest

from fuzzydag import io
from fuzzydag.cli import EXIT_INVALID, EXIT_OK, main
from fuzzydag.elcm import MixedDataset


def simulate(out, *extra):
    return main(["simulate", "--nodes", "10", "--degree", "2", "--binary-ratio", "0.1",
                 "--samples", "500", "--seed", "3", "--out", str(out), *extra])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert simulate(out) == EXIT_OK
    return out


# -- io round trips ---------------------------------------------------------------------

def test_adjacency_and_edge_round_trip(tmp_path, rng):
    B = rng.normal(size=(4, 4))
    B[0, 1] = -0.0
    io.write_adjacency(tmp_path / "b.csv", B)
    back = io.read_adjacency(tmp_path / "b.csv")
    assert np.array_equal(back, B)
    io.write_edges(tmp_path / "e.csv", [(2, 0), (0, 1)], ["a", "b", "c"])
    assert io.read_edges(tmp_path / "e.csv") == [("a", "b"), ("c", "a")]


def test_dataset_round_trip(tmp_path, rng):
    X = rng.normal(size=(20, 3))
    X[:, 1] = (X[:, 1] > 0).astype(float)
    data = MixedDataset(X, [False, True, False], names=["u", "v", "w"])
    io.write_dataset(tmp_path / "d.csv", data)
    io.write_schema(tmp_path / "s.csv", data)
    back = io.read_dataset(tmp_path / "d.csv", tmp_path / "s.csv")
    assert back.names == ["u", "v", "w"]
    assert np.array_equal(back.values, X) and list(back.binary) == [False, True, False]


def test_table_rejects_missing_fields(tmp_path):
    (tmp_path / "d.csv").write_text("a,b\n1,2\n3\n")
    with pytest.raises(ValueError, match=r"d\.csv:3:"):
        io.read_table(tmp_path / "d.csv")
    (tmp_path / "d.csv").write_text("a,b\n1,x\n")
    with pytest.raises(ValueError, match=r"d\.csv:2:"):
        io.read_table(tmp_path / "d.csv")


def test_schema_rejects_bad_lines(tmp_path):
    (tmp_path / "s.csv").write_text("name,type\na,continuous\na,binary\n")
    with pytest.raises(ValueError):
        io.read_schema(tmp_path / "s.csv")
    (tmp_path / "s.csv").write_text("name,type\na,ordinal\n")
    with pytest.raises(ValueError):
        io.read_schema(tmp_path / "s.csv")


def test_load_config_yaml_and_errors(tmp_path):
    (tmp_path / "c.yaml").write_text("max_outer: 3\nl1: 0.1\n")
    assert io.load_config(tmp_path / "c.yaml") == {"max_outer": 3, "l1": 0.1}
    (tmp_path / "c.json").write_text("[1, 2]")
    with pytest.raises(ValueError):
        io.load_config(tmp_path / "c.json")
    (tmp_path / "c.json").write_text("{broken")
    with pytest.raises(ValueError):
        io.load_config(tmp_path / "c.json")


# -- simulate ---------------------------------------------------------------------------

def test_simulate_files_and_shape(sim_dir):
    names, X = io.read_table(sim_dir / "data.csv")
    assert X.shape == (500, 10) and len(names) == 10
    schema = io.read_schema(sim_dir / "schema.csv")
    assert list(schema.values()).count("binary") == 1
    truth = io.read_adjacency(sim_dir / "truth.csv")
    assert np.count_nonzero(truth) == 10
    assert len(io.read_edges(sim_dir / "truth_edges.csv")) == 10


def test_simulate_is_byte_identical(sim_dir, tmp_path):
    assert simulate(tmp_path) == EXIT_OK
    for name in ("truth.csv", "truth_edges.csv", "data.csv", "schema.csv", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (sim_dir / name).read_bytes()


def test_simulate_manifest_records_spec_seed_and_digests(sim_dir):
    m = json.loads((sim_dir / "manifest.json").read_text())
    assert m["subcommand"] == "simulate"
    assert m["seeds"]["scenario"] == 3
    assert m["config"]["scenario"]["n_nodes"] == 10
    for name, digest in m["outputs"].items():
        assert digest == io.file_digest(sim_dir / name)


def test_simulate_with_knowledge_graph(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_nodes": 8, "avg_degree": 2, "n_samples": 20,
                               "knowledge_graph": {"pos_rate": 1.0, "noise_rate": 0.0}}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    kg = io.read_edges(tmp_path / "o" / "knowledge_graph.csv")
    assert sorted(kg) == sorted(io.read_edges(tmp_path / "o" / "truth_edges.csv"))
    assert (tmp_path / "o" / "knowledge.txt").read_text().count("CCE") == len(kg)


def test_simulate_zero_samples_is_invalid(tmp_path, capsys):
    code = main(["simulate", "--nodes", "5", "--degree", "1", "--samples", "0", "--out", str(tmp_path)])
    assert code == EXIT_INVALID
    assert "n_samples" in capsys.readouterr().err


def test_usage_errors_exit_one(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--nodes", "many"])
    assert exc.value.code == EXIT_INVALID
    assert main(["simulate", "--nodes", "5"]) == EXIT_INVALID
    assert main(["fit", "--out", str(tmp_path)]) == EXIT_INVALID


# -- fit --------------------------------------------------------------------------------

def fit(sim, out, *extra):
    return main(["fit", "--data", str(sim / "data.csv"), "--schema", str(sim / "schema.csv"),
                 "--out", str(out), *extra])


@pytest.fixture(scope="module")
def fit_dir(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert fit(sim_dir, out) == EXIT_OK
    return out


def test_fit_outputs(fit_dir, sim_dir):
    W = io.read_adjacency(fit_dir / "weights.csv")
    edges = io.read_edges(fit_dir / "edges.csv")
    assert W.shape == (10, 10)
    names = list(io.read_schema(sim_dir / "schema.csv"))
    assert {(names[i], names[j]) for i, j in zip(*np.nonzero(np.abs(W) > 0.3))} == set(edges)
    diag = json.loads((fit_dir / "diagnostics.json").read_text())
    assert diag["manifest"] == "manifest.json" and "objective_trace" in diag
    m = json.loads((fit_dir / "manifest.json").read_text())
    assert set(m["inputs"]) == {"data", "schema"}
    assert set(m["outputs"]) == {"weights.csv", "edges.csv", "diagnostics.json"}


def test_fit_with_empty_knowledge_matches_no_knowledge(fit_dir, sim_dir, tmp_path):
    empty = tmp_path / "k.txt"
    empty.write_text("# nothing known\n")
    assert fit(sim_dir, tmp_path / "o", "--knowledge", str(empty)) == EXIT_OK
    for name in ("weights.csv", "edges.csv"):
        assert (tmp_path / "o" / name).read_bytes() == (fit_dir / name).read_bytes()


def test_fit_malformed_knowledge_reports_line(sim_dir, tmp_path, capsys):
    bad = tmp_path / "k.txt"
    bad.write_text("FC,X0,X1\nXYZ,X0,X1\n")
    assert fit(sim_dir, tmp_path / "o", "--knowledge", str(bad)) == EXIT_INVALID
    assert "line 2" in capsys.readouterr().err


def test_fit_forbidden_edge_is_exactly_zero(tmp_path):
    rng = np.random.default_rng(0)
    raf = rng.normal(size=400)
    data = MixedDataset(np.column_stack([raf, 1.5 * raf + rng.normal(size=400)]), [False, False],
                        names=["Raf", "Mek"])
    io.write_dataset(tmp_path / "d.csv", data)
    io.write_schema(tmp_path / "s.csv", data)
    (tmp_path / "k.txt").write_text("FC,Mek,Raf\n")
    code = main(["fit", "--data", str(tmp_path / "d.csv"), "--schema", str(tmp_path / "s.csv"),
                 "--knowledge", str(tmp_path / "k.txt"), "--out", str(tmp_path / "o")])
    assert code == EXIT_OK
    assert io.read_adjacency(tmp_path / "o" / "weights.csv")[1, 0] == 0.0


# -- eval -------------------------------------------------------------------------------

def _edges(path, edges):
    path.write_text("source,target\n" + "".join(f"{a},{b}\n" for a, b in edges))
    return str(path)


def test_eval_reconstructs_two_extra_edges(tmp_path, capsys):
    true = [(f"V{i}", f"V{i + 1}") for i in range(20)]
    t = _edges(tmp_path / "t.csv", true)
    e = _edges(tmp_path / "e.csv", true + [("V0", "V5"), ("V3", "V10")])
    assert main(["eval", "--estimated", e, "--truth", t, "--out", str(tmp_path / "o")]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert (result["tpr"], result["shd"], result["nnz"]) == (1.0, 2, 22)
    assert round(result["fdr"], 2) == 0.09
    stored = json.loads((tmp_path / "o" / "score.json").read_text())
    assert stored["manifest"] == "manifest.json" and stored["shd"] == 2
    assert (tmp_path / "o" / "manifest.json").exists()


def test_eval_identical_and_empty(tmp_path, capsys):
    t = _edges(tmp_path / "t.csv", [("a", "b"), ("b", "c")])
    assert main(["eval", "--estimated", t, "--truth", t]) == EXIT_OK
    r = json.loads(capsys.readouterr().out)
    assert (r["tpr"], r["fdr"], r["shd"]) == (1.0, 0.0, 0)
    e = _edges(tmp_path / "e.csv", [])
    assert main(["eval", "--estimated", e, "--truth", t]) == EXIT_OK
    r = json.loads(capsys.readouterr().out)
    assert (r["tpr"], r["shd"], r["nnz"]) == (0.0, 2, 0)


def test_eval_inconsistent_universe(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("name,type\na,continuous\nb,continuous\n")
    t = _edges(tmp_path / "t.csv", [("a", "b")])
    e = _edges(tmp_path / "e.csv", [("a", "z")])
    code = main(["eval", "--estimated", e, "--truth", t, "--schema", str(tmp_path / "s.csv")])
    assert code == EXIT_INVALID
    assert "z" in capsys.readouterr().err


def test_eval_rejects_bad_header(tmp_path):
    (tmp_path / "t.csv").write_text("from,to\na,b\n")
    assert main(["eval", "--estimated", str(tmp_path / "t.csv"), "--truth", str(tmp_path / "t.csv")]) == EXIT_INVALID


def test_missing_file_is_invalid(tmp_path):
    assert main(["eval", "--estimated", str(tmp_path / "no.csv"), "--truth", str(tmp_path / "no.csv")]) == EXIT_INVALID
