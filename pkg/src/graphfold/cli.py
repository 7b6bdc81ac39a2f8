"""Command-line front end: ``graphfold <command> [options]``.

Settings come from built-in defaults, then an optional ``key = value``
config file, then command-line flags (later sources win). Every run writes
its artifacts and a ``manifest.json`` into the output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import warnings
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__, io
from .chernoff import DENSE, SPARSE, all_subsets, chernoff_gmsbm, subset_comparison
from .embed import ase, mase, mean_embedding, omnibus_embedding, uase
from .errors import ConfigError, DataError, GraphfoldError
from .inference.gmm import gmm_fit
from .inference.linkpred import AVERAGED, PER_LAYER, link_predict, score_new_edges
from .inference.metrics import classification_error
from .inference.testing import METHODS as TEST_METHODS
from .inference.testing import RdpgNull, two_graph_test
from .models import GmsbmParams, LayerKind, sample_gmsbm

COMMANDS = ("simulate", "embed", "cluster", "test", "chernoff", "predict")
EMBED_METHODS = ("uase", "ase", "mean", "omnibus", "mase")
PATH_KEYS = ("input", "test_input", "nodes", "labels", "null_latents")

ALLOWED_KEYS = {
    "n", "n_r", "k", "d", "d_r", "method", "mode", "seed", "trials", "alpha", "mc",
    "truncated", "regime", "b.*", "pi", "pi_y.*", "kinds", "rho", "eps", "c_r",
    "subsets", "column_groups", "input", "test_input", "nodes", "labels",
    "null_latents", "null_lambda", "layers", "window", "test_window", "columns",
    "binarize", "restarts", "out",
}

DEFAULTS = {"seed": "0", "trials": "1", "alpha": "0.05", "mc": "2000", "truncated": "true",
            "regime": DENSE, "binarize": "true", "restarts": "10", "mode": AVERAGED,
            "out": "graphfold-out"}


# ------------------------------------------------------------- settings

class Settings:
    """Merged string settings with typed accessors."""

    def __init__(self, values: dict):
        self.values = dict(values)

    def has(self, key) -> bool:
        return key in self.values

    def str(self, key, default=None):
        v = self.values.get(key, default)
        if v is None:
            raise ConfigError(f"missing setting {key!r}")
        return v

    def int(self, key, default=None) -> int:
        v = self.str(key, default)
        try:
            return int(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be an integer, got {v!r}") from None

    def float(self, key, default=None) -> float:
        v = self.str(key, default)
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a number, got {v!r}") from None

    def bool(self, key, default=None) -> bool:
        return io.parse_bool(self.str(key, default))

    def vector(self, key):
        return io.parse_vector(self.str(key))

    def matrix(self, key):
        return io.parse_matrix(self.str(key))

    def indexed(self, stem) -> dict:
        """``stem.0``, ``stem.1``, ... as ``{index: value}``."""
        out = {}
        for key, value in self.values.items():
            head, _, idx = key.partition(".")
            if head == stem and idx.isdigit():
                out[int(idx)] = value
        return out

    def path(self, key) -> Path:
        return Path(self.str(key))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphfold",
                                     description="Multilayer graph embedding experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--d", type=int, help="embedding dimension")
        p.add_argument("--method", choices=EMBED_METHODS)
        p.add_argument("--layers", help="layer spec, e.g. L1:undirected,L2:bipartite")
        p.add_argument("--window", help="time window START:END (end exclusive)")
        p.add_argument("--trials", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--mc", type=int, help="Monte Carlo iterates")
        p.add_argument("--truncated", choices=("true", "false"))
        p.add_argument("--input", help="edge-list file")
        p.add_argument("--nodes", help="node list file")
        if name == "cluster":
            p.add_argument("--k", type=int, help="number of communities")
            p.add_argument("--labels", help="CSV of true communities (node_id,community)")
        if name == "test":
            p.add_argument("--null-latents", dest="null_latents",
                           help="CSV of null latent positions (node_id, coordinates)")
        if name == "predict":
            p.add_argument("--test-input", dest="test_input")
            p.add_argument("--test-window", dest="test_window")
    return parser


def resolve_settings(args) -> Settings:
    values = dict(DEFAULTS)
    base = Path.cwd()
    if args.config:
        cfg_path = Path(args.config)
        cfg = io.load_config(cfg_path, ALLOWED_KEYS)
        base_cfg = cfg_path.resolve().parent
        for key in PATH_KEYS:
            if key in cfg:
                cfg[key] = str((base_cfg / cfg[key]).resolve())
        if "out" in cfg:
            cfg["out"] = str((base_cfg / cfg["out"]).resolve())
        values.update(cfg)
    for key in ("seed", "out", "d", "method", "layers", "window", "trials", "alpha", "mc",
                "truncated", "input", "nodes", "k", "labels", "null_latents", "test_input",
                "test_window"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = str(v)
            if key in PATH_KEYS or key == "out":
                values[key] = str((base / v).resolve())
    for key in PATH_KEYS:
        if key in values:
            values[key] = str(Path(values[key]).resolve())
    return Settings(values)


def config_hash(settings: Settings) -> tuple:
    """Hash of the settings with paths replaced by content digests.

    The output directory is left out so a replay into another directory
    produces the same manifest.
    """
    canon, inputs = {}, {}
    for key, value in sorted(settings.values.items()):
        if key == "out":
            continue
        if key in PATH_KEYS:
            digest = io.file_digest(value) if Path(value).is_file() else "missing"
            inputs[key] = digest
            value = "sha256:" + digest
        canon[key] = value
    blob = json.dumps(canon, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest(), canon, inputs


def versions() -> dict:
    out = {"python": platform.python_version(), "graphfold": __version__}
    for pkg in ("numpy", "scipy", "scikit-learn"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


# ------------------------------------------------------------- helpers

def gmsbm_params(s: Settings) -> GmsbmParams:
    blocks = s.indexed("b")
    if not blocks or sorted(blocks) != list(range(len(blocks))):
        raise ConfigError("block matrices must be given as b.0, b.1, ... without gaps")
    b_blocks = [io.parse_matrix(blocks[r]) for r in range(len(blocks))]
    k = len(b_blocks)
    kinds = None
    if s.has("kinds"):
        kinds = [t.strip() for t in s.str("kinds").split(",") if t.strip()]
        if len(kinds) != k:
            raise ConfigError(f"kinds lists {len(kinds)} layers, found {k} block matrices")
    pi_y_raw = s.indexed("pi_y")
    if any(r >= k for r in pi_y_raw):
        raise ConfigError("pi_y index beyond the number of layers")
    pi_y = [io.parse_vector(pi_y_raw[r]) if r in pi_y_raw else None for r in range(k)]
    eps = list(s.vector("eps")) if s.has("eps") else None
    groups = [int(g) for g in s.vector("column_groups")] if s.has("column_groups") else None
    return GmsbmParams(b_blocks, s.vector("pi"), pi_y=pi_y, kinds=kinds,
                       rho=s.float("rho", "1"), eps=eps, column_groups=groups)


def load_stack(s: Settings, window_key="window", nodes=None, drop_unknown=False,
               input_key="input") -> io.IngestResult:
    spec = io.parse_layer_spec(s.str("layers"))
    columns = io.parse_columns(s.str("columns")) if s.has("columns") else None
    if nodes is None and s.has("nodes"):
        nodes = io.read_nodes(s.path("nodes"))
    window = io.parse_window(s.str(window_key)) if s.has(window_key) else None
    return io.ingest(s.path(input_key), spec, window=window, binarize=s.bool("binarize"),
                     columns=columns, nodes=nodes, drop_unknown=drop_unknown)


def read_labels(path, row_ids) -> np.ndarray:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    table = {}
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DataError("expected node_id,community", line=lineno)
        table[parts[0]] = parts[1].strip()
    missing = [r for r in row_ids if r not in table]
    if missing:
        raise DataError(f"{len(missing)} nodes have no label, e.g. {missing[0]!r}")
    return np.array([table[r] for r in row_ids])


def embed_points(stack, d, method, s: Settings):
    """Node coordinates used for clustering."""
    if method == "uase":
        return uase(stack, d).left
    if method == "mean":
        return mean_embedding(stack, d)
    if method == "mase":
        d_r = [int(v) for v in s.vector("d_r")] if s.has("d_r") else [d] * stack.k
        return mase(stack, d, d_r)
    if method == "ase":
        if stack.k != 1:
            raise ConfigError("ase clustering needs a single layer")
        return ase(stack.layers[0], d)
    raise ConfigError(f"method {method!r} cannot be used for clustering")


# ------------------------------------------------------------- commands

def cmd_simulate(s: Settings, out: Path) -> dict:
    params = gmsbm_params(s)
    n = s.int("n")
    n_r = [int(v) for v in s.vector("n_r")] if s.has("n_r") else None
    trials = s.int("trials")
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    seed = s.int("seed")
    layer_ids = [str(r) for r in range(params.k)]
    spec = ",".join(f"{lid}:{kind.value}" for lid, kind in zip(layer_ids, params.kinds))
    for t in range(trials):
        target = out if trials == 1 else out / f"trial_{t:03d}"
        target.mkdir(parents=True, exist_ok=True)
        stack, z, w = sample_gmsbm(params, n, n_r, rng_seed=seed + t)
        row_ids = [str(i) for i in range(n)]
        col_ids = [row_ids if kind is not LayerKind.BIPARTITE
                   else [str(j) for j in range(stack.sizes[r])]
                   for r, kind in enumerate(stack.kinds)]
        io.write_edge_list(target / "edges.txt", stack, layer_ids, row_ids, col_ids)
        io.write_nodes(target / "nodes.txt", row_ids,
                       {layer_ids[r]: col_ids[r] for r, kind in enumerate(stack.kinds)
                        if kind is LayerKind.BIPARTITE})
        io.write_csv(target / "labels.csv", ["node_id", "community"],
                     ([rid, int(c)] for rid, c in zip(row_ids, z)))
        bip = [r for r, kind in enumerate(stack.kinds) if kind is LayerKind.BIPARTITE]
        if bip:
            io.write_csv(target / "column_labels.csv", ["layer", "node_id", "community"],
                         ([layer_ids[r], col_ids[r][j], int(c)]
                          for r in bip for j, c in enumerate(w[r])))
    return {"layers": spec, "trials": trials}


def cmd_embed(s: Settings, out: Path) -> dict:
    data = load_stack(s)
    stack, d = data.stack, s.int("d")
    method = s.str("method", "uase")
    report = {"method": method, "d": d, "layers": data.layer_ids}
    if method == "uase":
        emb = uase(stack, d)
        io.write_embedding_csv(out / "left.csv", data.row_ids, emb.left)
        for r, lid in enumerate(data.layer_ids):
            io.write_embedding_csv(out / f"right_{lid}.csv", data.col_ids[r], emb.rights[r])
        io.write_csv(out / "singular_values.csv", ["index", "sigma"],
                     ([j + 1, v] for j, v in enumerate(emb.sigma)))
        report["rank_deficient"] = emb.rank_deficient
    elif method == "ase":
        sigs = {}
        for r, lid in enumerate(data.layer_ids):
            x, sig = ase(stack.layers[r], d, return_signature=True)
            io.write_embedding_csv(out / f"ase_{lid}.csv", data.row_ids, x)
            sigs[lid] = list(sig)
        report["signature"] = sigs
    elif method == "mean":
        io.write_embedding_csv(out / "left.csv", data.row_ids, mean_embedding(stack, d))
    elif method == "omnibus":
        if stack.k != 2:
            raise ConfigError("omnibus embedding needs exactly two layers")
        e1, e2 = omnibus_embedding(stack.layers[0], stack.layers[1], d)
        for lid, e in zip(data.layer_ids, (e1, e2)):
            io.write_embedding_csv(out / f"omnibus_{lid}.csv", data.row_ids, e)
    elif method == "mase":
        d_r = [int(v) for v in s.vector("d_r")] if s.has("d_r") else [d] * stack.k
        u, sigma = mase(stack, d, d_r, return_sigma=True)
        io.write_embedding_csv(out / "left.csv", data.row_ids, u)
        report["sigma"] = sigma
    else:
        raise ConfigError(f"unknown method {method!r}")
    io.write_json(out / "embed_report.json", report)
    return report


def cmd_cluster(s: Settings, out: Path) -> dict:
    data = load_stack(s)
    d = s.int("d")
    k = s.int("k", str(d))
    method = s.str("method", "uase")
    points = embed_points(data.stack, d, method, s)
    fit = gmm_fit(points, k, restarts=s.int("restarts"), rng_seed=s.int("seed"))
    labels = fit.predict(points)
    io.write_csv(out / "clusters.csv", ["node_id", "cluster"],
                 ([rid, int(c)] for rid, c in zip(data.row_ids, labels)))
    report = {"method": method, "d": d, "k": k, "log_likelihood": fit.log_likelihood,
              "n_iter": fit.n_iter, "converged": fit.converged, "degenerate": fit.degenerate,
              "weights": fit.weights}
    if s.has("labels"):
        truth = read_labels(s.path("labels"), data.row_ids)
        report["classification_error"] = classification_error(labels, truth)
    io.write_json(out / "cluster_report.json", report)
    return report


def cmd_test(s: Settings, out: Path) -> dict:
    data = load_stack(s)
    stack = data.stack
    if stack.k != 2 or any(kind is not LayerKind.UNDIRECTED for kind in stack.kinds):
        raise ConfigError("the two-graph test needs exactly two undirected layers")
    method = s.str("method", "uase")
    if method not in TEST_METHODS:
        raise ConfigError(f"test method must be one of {TEST_METHODS}")
    ids, x = io.read_embedding_csv(s.path("null_latents"))
    pos = {node: i for i, node in enumerate(ids)}
    missing = [r for r in data.row_ids if r not in pos]
    if missing:
        raise DataError(f"{len(missing)} nodes have no null latent position, "
                        f"e.g. {missing[0]!r}")
    x = x[[pos[r] for r in data.row_ids]]
    lam = s.matrix("null_lambda") if s.has("null_lambda") else None
    d = s.int("d", str(x.shape[1]))
    report = two_graph_test(stack.layers[0], stack.layers[1], d, method=method,
                            n_mc=s.int("mc"), alpha=s.float("alpha"),
                            null_sampler=RdpgNull(x, lam), rng_seed=s.int("seed"))
    record = report.as_record()
    record["d"] = d
    io.write_json(out / "test_report.json", record)
    return record


def _parse_subsets(text, k):
    if text.strip() == "all":
        return all_subsets(k)
    out = []
    for part in text.split(";"):
        if part.strip():
            try:
                out.append(tuple(int(v) for v in part.replace(",", " ").split()))
            except ValueError:
                raise ConfigError(f"bad subset {part!r}") from None
    return out


def cmd_chernoff(s: Settings, out: Path) -> dict:
    params = gmsbm_params(s)
    pis = [params.column_pi(r) for r in range(params.k)]
    c_r = list(s.vector("c_r")) if s.has("c_r") else None
    regime = s.str("regime")
    if regime not in (DENSE, SPARSE):
        raise ConfigError(f"regime must be {DENSE!r} or {SPARSE!r}")
    truncated = s.bool("truncated")
    n = s.float("n") if s.has("n") else None
    rep = chernoff_gmsbm(params.b_blocks, pis, c_r, regime=regime, truncated=truncated, n=n)
    report = {"value": rep.value, "critical_pair": list(rep.critical_pair),
              "pairwise": rep.pairwise, "t_star": rep.t_star, "truncated": truncated,
              "regime": regime}
    if s.has("subsets"):
        results = subset_comparison(params.b_blocks, pis, c_r,
                                    _parse_subsets(s.str("subsets"), params.k), regime=regime)
        io.write_csv(out / "subsets.csv", ["subset", "rank", "value", "ratio"],
                     ([" ".join(str(v) for v in r.subset), r.rank,
                       "" if r.value is None else io.fmt(r.value),
                       "" if r.ratio is None else io.fmt(r.ratio)] for r in results))
        report["subsets"] = [{"subset": list(r.subset), "rank": r.rank, "value": r.value,
                              "ratio": r.ratio} for r in results]
    io.write_json(out / "chernoff_report.json", report)
    return report


def _write_roc(path, roc):
    io.write_csv(path, ["threshold", "fpr", "tpr"], zip(roc.thresholds, roc.fpr, roc.tpr))


def cmd_predict(s: Settings, out: Path) -> dict:
    train = load_stack(s)
    nodes = (train.row_ids, {lid: train.col_ids[r] for r, lid in enumerate(train.layer_ids)
                             if train.stack.kinds[r] is LayerKind.BIPARTITE})
    test_key = "test_input" if s.has("test_input") else "input"
    if test_key == "input" and not s.has("test_window"):
        raise ConfigError("predict needs test_input or test_window")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", io.EmptyLayerWarning)
        test = load_stack(s, window_key="test_window", nodes=nodes, drop_unknown=True,
                          input_key=test_key)
    mode = s.str("mode")
    d = s.int("d")
    scores = link_predict(train.stack, d, mode=mode)
    kinds = train.stack.kinds
    report = {"mode": mode, "d": d}
    if mode == AVERAGED:
        symmetric = all(kind is LayerKind.UNDIRECTED for kind in kinds)
        train_any = sum(a != 0 for a in train.stack.layers) > 0
        test_any = sum(a != 0 for a in test.stack.layers) > 0
        roc = score_new_edges(scores, train_any, test_any, symmetric=symmetric)
        _write_roc(out / "roc.csv", roc)
        report["auc"] = roc.auc
    elif mode == PER_LAYER:
        report["auc"] = {}
        for r, lid in enumerate(train.layer_ids):
            roc = score_new_edges(scores[r], train.stack.layers[r], test.stack.layers[r],
                                  symmetric=kinds[r] is LayerKind.UNDIRECTED)
            _write_roc(out / f"roc_{lid}.csv", roc)
            report["auc"][lid] = roc.auc
    else:
        raise ConfigError(f"mode must be {AVERAGED!r} or {PER_LAYER!r}")
    io.write_json(out / "predict_report.json", report)
    return report


HANDLERS = {"simulate": cmd_simulate, "embed": cmd_embed, "cluster": cmd_cluster,
            "test": cmd_test, "chernoff": cmd_chernoff, "predict": cmd_predict}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    s = resolve_settings(args)
    out = Path(s.str("out"))
    out.mkdir(parents=True, exist_ok=True)
    digest, canon, inputs = config_hash(s)
    summary = HANDLERS[args.command](s, out)
    outputs = {}
    for f in sorted(out.rglob("*")):
        if f.is_file() and f.name != "manifest.json":
            outputs[f.relative_to(out).as_posix()] = io.file_digest(f)
    io.write_json(out / "manifest.json", {
        "command": args.command, "seed": s.int("seed"), "config_hash": digest,
        "config": canon, "inputs": inputs, "outputs": outputs, "versions": versions(),
        "summary": summary if args.command in ("simulate", "test") else {},
    })
    return 0


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, GraphfoldError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return 3
    if isinstance(exc, (np.linalg.LinAlgError, ArithmeticError)):
        return 4
    return 4


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else 2
    except Exception as exc:
        code = exit_code(exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc),
                          "exit_code": code}), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
