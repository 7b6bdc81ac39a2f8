import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from graphfold import io
from graphfold.cli import main
from graphfold.embed import uase
from graphfold.errors import ConfigError, DataError
from graphfold.inference import (RdpgNull, classification_error, gmm_fit, link_predict,
                                 score_new_edges)
from graphfold.models import (AdjacencyStack, GmsbmParams, LayerKind, gmsbm_latents,
                              sample_gmsbm, sample_mrdpg)

FIG1_CONFIG = """\
# two identical layers, two communities
b.0 = 0.42 0.42; 0.42 0.5
b.1 = 0.42 0.42; 0.42 0.5
pi = 0.6 0.4
n = {n}
"""


def write(path, text):
    path = Path(path)
    path.write_text(text)
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


# ----------------------------------------------------------------- config

def test_parse_config_and_values():
    cfg = io.parse_config("a = 1  # note\n\n# skip\nb.0 = 1 2; 3 4\n", {"a", "b.*"})
    assert cfg == {"a": "1", "b.0": "1 2; 3 4"}
    np.testing.assert_array_equal(io.parse_matrix(cfg["b.0"]), [[1, 2], [3, 4]])
    assert io.parse_window("10:") == (10, None)
    assert io.parse_bool("Yes") is True
    assert list(io.parse_layer_spec("L1:undirected, L2:bipartite").values()) == [
        LayerKind.UNDIRECTED, LayerKind.BIPARTITE]


@pytest.mark.parametrize("text", ["a = 1\na = 2", "zzz = 1", "no equals sign", "b.x = 1"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        io.parse_config(text, {"a", "b.*"})


@pytest.mark.parametrize("fn,arg", [(io.parse_matrix, "1 2; 3"), (io.parse_window, "5"),
                                    (io.parse_layer_spec, "L1"), (io.parse_bool, "maybe"),
                                    (io.parse_columns, "layer=0,source=0,target=1")])
def test_value_parse_errors(fn, arg):
    with pytest.raises(ConfigError):
        fn(arg)


# ----------------------------------------------------------------- ingest

def test_ingest_dedup_and_symmetry(tmp_path):
    f = write(tmp_path / "e.txt", "L1 a b\nL1 b a\nL1 a a\n")
    res = io.ingest(f, {"L1": "undirected"})
    np.testing.assert_array_equal(res.stack.layers[0], [[0, 1], [1, 0]])
    assert res.row_ids == ["a", "b"]


def test_ingest_window_excludes_everything(tmp_path):
    f = write(tmp_path / "e.txt", "L1 a b 5\nL2 a c 7\n")
    with pytest.warns(io.EmptyLayerWarning):
        res = io.ingest(f, {"L1": "undirected", "L2": "directed"}, window=(100, 200))
    assert all(not a.any() for a in res.stack.layers)
    no_time = write(tmp_path / "f.txt", "L1 a b\n")
    with pytest.raises(DataError):
        io.ingest(no_time, {"L1": "undirected"}, window=(0, 1))


def test_ingest_mixed_square_and_bipartite(tmp_path):
    f = write(tmp_path / "e.txt", "# layer source target\n"
              "L1 c1 c2\nL1 c2 c3\nL2 c1 p80\nL2 c3 p443\nL2 c3 p22\n")
    res = io.ingest(f, {"L1": "undirected", "L2": "bipartite"})
    assert [a.shape for a in res.stack.layers] == [(3, 3), (3, 3)]
    assert res.col_ids[1] == ["p22", "p443", "p80"]
    assert res.stack.layers[1][2, 0] == 1


def test_ingest_errors_carry_line_numbers(tmp_path):
    bad = write(tmp_path / "bad.txt", "L1 a b\n\nL1 a\n")
    with pytest.raises(DataError, match="line 3"):
        io.ingest(bad, {"L1": "undirected"})
    unknown = write(tmp_path / "unk.txt", "L1 a b\nL9 a b\n")
    with pytest.raises(ConfigError, match="line 2"):
        io.ingest(unknown, {"L1": "undirected"})
    bad_time = write(tmp_path / "t.txt", "L1 a b noon\n")
    with pytest.raises(DataError, match="line 1"):
        io.read_edge_list(bad_time)


def test_ingest_weighted_sum(tmp_path):
    f = write(tmp_path / "e.txt", "L1 a b 2.5\nL1 a b 1\nL1 b c 1\n")
    cols = io.parse_columns("layer=0,source=1,target=2,weight=3")
    res = io.ingest(f, {"L1": "directed"}, binarize=False, columns=cols)
    assert res.stack.layers[0][0, 1] == 3.5 and res.stack.layers[0][1, 0] == 0


def test_numeric_ids_sort_numerically():
    assert io.sort_ids(["10", "9", "100"]) == ["9", "10", "100"]
    assert io.sort_ids(["b", "a", "10"]) == ["10", "a", "b"]


def test_json_and_csv_emitters(tmp_path):
    io.write_json(tmp_path / "r.json", {"b": np.float64(0.1), "a": np.arange(2), "c": np.inf})
    assert read_json(tmp_path / "r.json") == {"a": [0, 1], "b": 0.1, "c": "inf"}
    x = np.random.default_rng(0).standard_normal((4, 2))
    io.write_embedding_csv(tmp_path / "x.csv", list("abcd"), x)
    ids, back = io.read_embedding_csv(tmp_path / "x.csv")
    assert ids == list("abcd")
    np.testing.assert_array_equal(back, x)


# ------------------------------------------------------------------ CLI

def simulate(tmp_path, name, config, *flags):
    cfg = write(tmp_path / f"{name}.cfg", config)
    out = tmp_path / name
    assert main(["simulate", "--config", str(cfg), "--out", str(out), *flags]) == 0
    return out


MIXED_CONFIG = """\
b.0 = 0.5 0.2; 0.2 0.4
b.1 = 0.3 0.6; 0.1 0.5
b.2 = 0.45 0.45 0.52; 0.51 0.51 0.54
pi = 0.5 0.5
pi_y.2 = 0.2 0.3 0.5
kinds = undirected, directed, bipartite
n = 60
n_r = 60 60 35
"""


def test_simulate_round_trip_is_exact(tmp_path):
    out = simulate(tmp_path, "sim", MIXED_CONFIG, "--seed", "7")
    layers = {"0": "undirected", "1": "directed", "2": "bipartite"}
    res = io.ingest(out / "edges.txt", layers, nodes=io.read_nodes(out / "nodes.txt"))
    params = GmsbmParams([[[0.5, 0.2], [0.2, 0.4]], [[0.3, 0.6], [0.1, 0.5]],
                          [[0.45, 0.45, 0.52], [0.51, 0.51, 0.54]]], [0.5, 0.5],
                         pi_y=[None, None, [0.2, 0.3, 0.5]],
                         kinds=list(layers.values()))
    stack, z, _ = sample_gmsbm(params, 60, [60, 60, 35], rng_seed=7)
    for got, want in zip(res.stack.layers, stack.layers):
        np.testing.assert_array_equal(got, want)
    labels = (out / "labels.csv").read_text().splitlines()[1:]
    assert [int(line.split(",")[1]) for line in labels] == list(z)
    manifest = read_json(out / "manifest.json")
    assert manifest["seed"] == 7 and "edges.txt" in manifest["outputs"]
    assert set(manifest["versions"]) >= {"python", "numpy", "scipy", "graphfold"}


def test_simulate_is_byte_identical_on_replay(tmp_path):
    a = simulate(tmp_path, "a", MIXED_CONFIG, "--seed", "3", "--trials", "2")
    b = simulate(tmp_path, "b", MIXED_CONFIG, "--seed", "3", "--trials", "2")
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()
    c = simulate(tmp_path, "c", MIXED_CONFIG, "--seed", "4")
    assert (c / "edges.txt").read_bytes() != (a / "trial_000" / "edges.txt").read_bytes()


def test_embed_noiseless_weighted_stack(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.uniform(0.1, 0.6, size=(30, 2))
    ys = [rng.uniform(0.1, 0.6, size=(20, 2)), rng.uniform(0.1, 0.6, size=(25, 2))]
    probs = [x @ y.T for y in ys]
    stack = AdjacencyStack(probs, [LayerKind.BIPARTITE] * 2)
    rows = [f"r{i}" for i in range(30)]
    cols = [[f"a{j}" for j in range(20)], [f"b{j}" for j in range(25)]]
    io.write_edge_list(tmp_path / "p.txt", stack, ["A", "B"], rows, cols, weighted=True)
    io.write_nodes(tmp_path / "nodes.txt", rows, {"A": cols[0], "B": cols[1]})
    cfg = write(tmp_path / "embed.cfg", "binarize = false\n"
                "columns = layer=0,source=1,target=2,weight=3\n"
                "input = p.txt\nnodes = nodes.txt\n")
    out = tmp_path / "emb"
    assert main(["embed", "--config", str(cfg), "--out", str(out), "--d", "2",
                 "--method", "uase", "--layers", "A:bipartite,B:bipartite"]) == 0
    ids, left = io.read_embedding_csv(out / "left.csv")
    assert ids == rows
    for lid, p in zip("AB", probs):
        _, right = io.read_embedding_csv(out / f"right_{lid}.csv")
        assert np.linalg.norm(left @ right.T - p) < 1e-8 * np.linalg.norm(p)


def test_predict_auc_matches_library(tmp_path):
    params = GmsbmParams([np.array([[0.3, 0.05], [0.05, 0.25]])] * 2, [0.5, 0.5])
    train, z, _ = sample_gmsbm(params, 150, rng_seed=1)
    # same communities in both periods
    test = sample_mrdpg(gmsbm_latents(params, z, [z, z]), rng_seed=2)
    ids = [str(i) for i in range(150)]
    io.write_edge_list(tmp_path / "train.txt", train, ["L1", "L2"], ids)
    io.write_edge_list(tmp_path / "test.txt", test, ["L1", "L2"], ids)
    out = tmp_path / "pred"
    assert main(["predict", "--input", str(tmp_path / "train.txt"),
                 "--test-input", str(tmp_path / "test.txt"), "--d", "2",
                 "--layers", "L1:undirected,L2:undirected", "--out", str(out)]) == 0
    scores = link_predict(train, 2)
    lib = score_new_edges(scores, sum(train.layers) > 0, sum(test.layers) > 0)
    report = read_json(out / "predict_report.json")
    assert abs(report["auc"] - lib.auc) <= 1e-12
    roc = np.loadtxt(out / "roc.csv", delimiter=",", skiprows=1)
    fpr, tpr = roc[:, 1], roc[:, 2]
    assert abs(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2) - lib.auc) <= 1e-12
    assert lib.auc > 0.6


def test_simulate_embed_cluster_pipeline(tmp_path):
    sim = simulate(tmp_path, "sim", FIG1_CONFIG.format(n=2000), "--seed", "11")
    out = tmp_path / "clu"
    assert main(["cluster", "--input", str(sim / "edges.txt"), "--nodes", str(sim / "nodes.txt"),
                 "--labels", str(sim / "labels.csv"), "--layers", "0:undirected,1:undirected",
                 "--d", "2", "--k", "2", "--seed", "0", "--out", str(out)]) == 0
    report = read_json(out / "cluster_report.json")
    # same result as the direct library call
    res = io.ingest(sim / "edges.txt", {"0": "undirected", "1": "undirected"},
                    nodes=io.read_nodes(sim / "nodes.txt"))
    pts = uase(res.stack, 2).left
    fit = gmm_fit(pts, 2, restarts=10, rng_seed=0)
    z = np.loadtxt(sim / "labels.csv", delimiter=",", skiprows=1, dtype=int)[:, 1]
    assert report["classification_error"] == classification_error(fit.predict(pts), z)
    assert report["classification_error"] < 0.05


def test_chernoff_command(tmp_path):
    cfg = write(tmp_path / "c.cfg", "b.0 = 0.67 0.46; 0.46 0.36\nb.1 = 0.98 0.49; 0.49 0.10\n"
                "pi = 0.6 0.4\nsubsets = 0; 1; 0 1\n")
    out = tmp_path / "ch"
    assert main(["chernoff", "--config", str(cfg), "--out", str(out)]) == 0
    rep = read_json(out / "chernoff_report.json")
    ratios = [s["ratio"] for s in rep["subsets"]]
    assert abs(ratios[0] / 11.98 - 1) < 0.02 and abs(ratios[1] / 0.96 - 1) < 0.02
    assert ratios[2] == pytest.approx(1.0)


def test_test_command_report(tmp_path):
    x = np.random.default_rng(5).dirichlet(np.ones(2), size=80)
    a1, a2 = RdpgNull(x).sample_pair(3)
    ids = [str(i) for i in range(80)]
    io.write_edge_list(tmp_path / "g.txt", AdjacencyStack([a1, a2]), ["g1", "g2"], ids)
    io.write_embedding_csv(tmp_path / "null.csv", ids, x)
    out = tmp_path / "t"
    assert main(["test", "--input", str(tmp_path / "g.txt"), "--layers",
                 "g1:undirected,g2:undirected", "--null-latents", str(tmp_path / "null.csv"),
                 "--mc", "100", "--out", str(out)]) == 0
    rep = read_json(out / "test_report.json")
    assert rep["reject"] == (rep["statistic"] > rep["critical_value"])


# ------------------------------------------------------------ exit codes

def test_exit_codes(tmp_path, capsys):
    bad_cfg = write(tmp_path / "bad.cfg", "frobnicate = 1\n")
    assert main(["simulate", "--config", str(bad_cfg), "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and err["exit_code"] == 2

    bad_edges = write(tmp_path / "bad.txt", "L1 a b\nL1 a\n")
    assert main(["embed", "--input", str(bad_edges), "--layers", "L1:undirected",
                 "--d", "1", "--out", str(tmp_path / "o2")]) == 3
    assert "line 2" in json.loads(capsys.readouterr().err)["message"]

    # rank two, distinct rows
    singular = write(tmp_path / "s.cfg", "b.0 = 0.1 0.2 0.3; 0.2 0.3 0.4; 0.3 0.4 0.5\n"
                     "pi = 0.3 0.3 0.4\n")
    assert main(["chernoff", "--config", str(singular), "--out", str(tmp_path / "o3")]) == 4

    assert main(["simulate", "--bogus-flag"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "graphfold", "chernoff", "--config",
                           str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["error"] == "ConfigError"
