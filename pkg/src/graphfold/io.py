"""Plain-text configs, edge lists, node lists and CSV/JSON emitters."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .models import AdjacencyStack, LayerKind

EDGE_HEADER = "# layer source target"
DEFAULT_COLUMNS = {"layer": 0, "source": 1, "target": 2, "time": 3}
FIELDS = ("layer", "source", "target", "time", "weight")


class EmptyLayerWarning(UserWarning):
    pass


# ------------------------------------------------------------------ configs

def parse_config(text: str, allowed=None) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Values stay strings. Keys outside ``allowed`` (when given) are rejected,
    as are duplicate keys.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        if allowed is not None and not _key_allowed(key, allowed):
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _key_allowed(key, allowed):
    if key in allowed:
        return True
    # indexed keys such as b.0 or pi_y.1
    stem, _, idx = key.partition(".")
    return bool(idx) and idx.isdigit() and f"{stem}.*" in allowed


def load_config(path, allowed=None) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, allowed)


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r}") from None


def parse_matrix(text: str) -> np.ndarray:
    """Rows separated by ``;``, entries by whitespace or commas."""
    rows = [parse_vector(r) for r in text.split(";") if r.strip()]
    if not rows or len({r.size for r in rows}) != 1:
        raise ConfigError(f"ragged or empty matrix {text!r}")
    return np.vstack(rows)


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected true or false, got {text!r}")


def parse_layer_spec(text: str) -> dict:
    """``"L1:undirected,L2:bipartite"`` to an ordered ``{layer_id: kind}``."""
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, kind = item.rpartition(":")
        if not sep or not name:
            raise ConfigError(f"layer spec item {item!r} must look like NAME:KIND")
        try:
            out[name] = LayerKind.parse(kind)
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
    if not out:
        raise ConfigError("empty layer spec")
    return out


def parse_window(text: str):
    """``"START:END"`` (either side may be empty) to ``(start, end)``; end exclusive."""
    if text is None:
        return None
    start, sep, end = str(text).partition(":")
    if not sep:
        raise ConfigError(f"window {text!r} must look like START:END")
    try:
        lo = int(start) if start.strip() else None
        hi = int(end) if end.strip() else None
    except ValueError:
        raise ConfigError(f"window bounds must be integers, got {text!r}") from None
    return lo, hi


def parse_columns(text: str) -> dict:
    """Column mapping such as ``"layer=0,source=2,target=3,time=1"``.

    An optional ``weight`` column gives each record a numeric weight.
    """
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        name, sep, idx = item.partition("=")
        name = name.strip()
        if not sep or name not in FIELDS:
            raise ConfigError(f"bad column mapping item {item!r}")
        try:
            out[name] = int(idx)
        except ValueError:
            raise ConfigError(f"bad column index in {item!r}") from None
    for need in ("layer", "source", "target"):
        if need not in out:
            raise ConfigError(f"column mapping lacks {need!r}")
    if len(set(out.values())) != len(out) or min(out.values()) < 0:
        raise ConfigError("column indices must be distinct and nonnegative")
    return out


# --------------------------------------------------------------- edge lists

@dataclass(frozen=True)
class EdgeRecord:
    layer: str
    source: str
    target: str
    time: Optional[int]
    line: int
    weight: float = 1.0


def read_edge_list(path, columns: Optional[dict] = None) -> list:
    """Whitespace-separated records; blank lines and ``#`` lines are skipped."""
    cols = dict(DEFAULT_COLUMNS) if columns is None else dict(columns)
    time_col = cols.get("time")
    weight_col = cols.get("weight")
    need = max(cols["layer"], cols["source"], cols["target"],
               -1 if weight_col is None else weight_col) + 1
    out = []
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < need:
                raise DataError(f"expected at least {need} fields, got {len(parts)}", line=lineno)
            t = None
            if time_col is not None and len(parts) > time_col:
                try:
                    t = int(parts[time_col])
                except ValueError:
                    raise DataError(f"timestamp {parts[time_col]!r} is not an integer",
                                    line=lineno) from None
            wt = 1.0
            if weight_col is not None:
                try:
                    wt = float(parts[weight_col])
                except ValueError:
                    raise DataError(f"weight {parts[weight_col]!r} is not a number",
                                    line=lineno) from None
                if not np.isfinite(wt):
                    raise DataError("weight is not finite", line=lineno)
            out.append(EdgeRecord(parts[cols["layer"]], parts[cols["source"]],
                                  parts[cols["target"]], t, lineno, wt))
    return out


def sort_ids(ids) -> list:
    """Numeric order when every id is an integer, string order otherwise."""
    ids = set(ids)
    try:
        return sorted(ids, key=lambda s: (int(s), s))
    except ValueError:
        return sorted(ids)


@dataclass
class IngestResult:
    stack: AdjacencyStack
    layer_ids: list
    row_ids: list
    col_ids: list

    def row_index(self) -> dict:
        return {node: i for i, node in enumerate(self.row_ids)}


def read_nodes(path) -> tuple:
    """Node list file: ``row ID`` and ``col LAYER ID`` lines, in index order."""
    rows, cols = [], {}
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "row" and len(parts) == 2:
                rows.append(parts[1])
            elif parts[0] == "col" and len(parts) == 3:
                cols.setdefault(parts[1], []).append(parts[2])
            else:
                raise DataError("expected 'row ID' or 'col LAYER ID'", line=lineno)
    return rows, cols


def write_nodes(path, row_ids, col_ids: dict) -> None:
    lines = ["# kind [layer] id"] + [f"row {r}" for r in row_ids]
    for layer, ids in col_ids.items():
        lines += [f"col {layer} {c}" for c in ids]
    Path(path).write_text("\n".join(lines) + "\n")


def ingest(path, layer_spec: dict, window=None, binarize: bool = True,
           columns: Optional[dict] = None, nodes=None, drop_unknown: bool = False) -> IngestResult:
    """Build an adjacency stack from an edge-list file.

    Parameters
    ----------
    path : path-like
    layer_spec : dict
        Ordered ``{layer_id: LayerKind}``; the stack follows this order.
    window : (int or None, int or None), optional
        Keep records with ``start <= time < end``.
    binarize : bool
        Collapse repeated records to a single edge; otherwise sum the record
        weights (1 unless a weight column is mapped).
    columns : dict, optional
        Field positions, see :func:`parse_columns`.
    nodes : (list, dict), optional
        Fixed row ids and per-layer column ids (see :func:`read_nodes`).
        Without it, ids are collected from every record in the file
        (before windowing) and sorted.
    drop_unknown : bool
        With ``nodes`` given, silently skip records touching unlisted ids
        instead of raising.

    Returns
    -------
    IngestResult
    """
    kinds = {name: LayerKind.parse(kind) for name, kind in layer_spec.items()}
    records = read_edge_list(path, columns)
    for rec in records:
        if rec.layer not in kinds:
            raise ConfigError(f"line {rec.line}: layer id {rec.layer!r} is not in the layer spec")
    square = {name for name, kind in kinds.items() if kind is not LayerKind.BIPARTITE}
    if nodes is None:
        row_set, col_sets = set(), {name: set() for name in kinds if name not in square}
        for rec in records:
            row_set.add(rec.source)
            if rec.layer in square:
                row_set.add(rec.target)
            else:
                col_sets[rec.layer].add(rec.target)
        row_ids = sort_ids(row_set)
        col_ids = {name: sort_ids(ids) for name, ids in col_sets.items()}
    else:
        row_ids, col_ids = list(nodes[0]), {k: list(v) for k, v in nodes[1].items()}
        for name in kinds:
            if name not in square and name not in col_ids:
                col_ids[name] = []
    row_idx = {node: i for i, node in enumerate(row_ids)}
    col_idx = {name: {node: j for j, node in enumerate(ids)} for name, ids in col_ids.items()}
    n = len(row_ids)
    if n == 0:
        raise DataError("no nodes found")
    mats = {}
    for name, kind in kinds.items():
        if kind is LayerKind.BIPARTITE:
            if not col_ids[name]:
                raise DataError(f"bipartite layer {name!r} has no column nodes")
            mats[name] = np.zeros((n, len(col_ids[name])))
        else:
            mats[name] = np.zeros((n, n))
    lo, hi = window if window is not None else (None, None)
    for rec in records:
        if window is not None:
            if rec.time is None:
                raise DataError("a time window was given but the record has no timestamp",
                                line=rec.line)
            if (lo is not None and rec.time < lo) or (hi is not None and rec.time >= hi):
                continue
        kind = kinds[rec.layer]
        i = row_idx.get(rec.source)
        if kind is LayerKind.BIPARTITE:
            j = col_idx[rec.layer].get(rec.target)
        else:
            j = row_idx.get(rec.target)
        if i is None or j is None:
            if drop_unknown:
                continue
            raise DataError("record refers to a node outside the node list", line=rec.line)
        if kind is not LayerKind.BIPARTITE and i == j:
            continue
        mats[rec.layer][i, j] += rec.weight
        if kind is LayerKind.UNDIRECTED:
            mats[rec.layer][j, i] += rec.weight
    layers = []
    for name, kind in kinds.items():
        a = mats[name]
        if binarize:
            a = (a != 0).astype(float)
        if not a.any():
            warnings.warn(f"layer {name!r} has no edges", EmptyLayerWarning, stacklevel=2)
        layers.append(a)
    stack = AdjacencyStack(layers, [kinds[name] for name in kinds])
    return IngestResult(stack, list(kinds), row_ids,
                        [col_ids.get(name, row_ids) if name not in square else row_ids
                         for name in kinds])


def write_edge_list(path, stack: AdjacencyStack, layer_ids, row_ids, col_ids=None,
                    times=None, weighted: bool = False) -> None:
    """Write a stack as an edge list; undirected edges are written once (i < j).

    ``times`` gives one timestamp per layer. With ``weighted`` the nonzero
    entries are written as a trailing weight column (after the time column
    when both are present).
    """
    header = EDGE_HEADER + (" time" if times is not None else "") + (" weight" if weighted else "")
    lines = [header]
    for r, (a, kind) in enumerate(zip(stack.layers, stack.kinds)):
        cols = row_ids if kind is not LayerKind.BIPARTITE else col_ids[r]
        mat = np.triu(a, 1) if kind is LayerKind.UNDIRECTED else a
        ii, jj = np.nonzero(mat)
        for i, j in zip(ii, jj):
            suffix = f" {times[r]}" if times is not None else ""
            if weighted:
                suffix += f" {fmt(mat[i, j])}"
            lines.append(f"{layer_ids[r]} {row_ids[i]} {cols[j]}{suffix}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- emitters

def fmt(x) -> str:
    """Shortest repr that round-trips a float exactly."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(v if isinstance(v, str) else fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_embedding_csv(path, node_ids, coords) -> None:
    """One row per node: ``node_id`` then the coordinates."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    header = ["node_id"] + [f"x{j + 1}" for j in range(coords.shape[1])]
    write_csv(path, header, ([str(node)] + list(row) for node, row in zip(node_ids, coords)))


def read_embedding_csv(path) -> tuple:
    ids, rows = [], []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError:
            raise DataError("non-numeric coordinate", line=lineno) from None
        ids.append(parts[0])
    if not rows or len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: empty or ragged coordinate file")
    return ids, np.asarray(rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
