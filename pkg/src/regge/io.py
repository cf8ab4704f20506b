"""JSON files for complexes and metrics.

Complex file: ``{"dim": n, "top_simplexes": [[v, ...], ...]}``.
Metric file:  ``{"z": {"i-j": value, ...}}`` keyed by sorted vertex pairs,
using the vertex ids of the complex file.
"""
from __future__ import annotations

import json
import math
import re

import numpy as np

from .complex import SimplicialComplex, build_complex

__all__ = [
    "FormatError",
    "dumps",
    "complex_to_dict",
    "complex_from_dict",
    "metric_to_dict",
    "metric_from_dict",
    "save_complex",
    "load_complex",
    "save_metric",
    "load_metric",
]


class FormatError(ValueError):
    pass


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int | None = 2) -> str:
    """JSON text with every float written at 17 significant digits."""

    def conv(o):
        if isinstance(o, (float, np.floating)):
            return _Raw(_fmt_float(float(o)))
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.bool_,)):
            return bool(o)
        if isinstance(o, np.ndarray):
            return [conv(x) for x in o.tolist()]
        if isinstance(o, dict):
            return {str(k): conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [conv(x) for x in o]
        return o

    marks: list = []

    class Enc(json.JSONEncoder):
        def default(self, o):
            if isinstance(o, _Raw):
                marks.append(o.text)
                return f"\x00{len(marks) - 1}\x00"
            return super().default(o)

    text = json.dumps(conv(obj), indent=indent, cls=Enc)
    return _MARK.sub(lambda m: marks[int(m.group(1))], text)


_MARK = re.compile(r'"\\u0000(\d+)\\u0000"')


class _Raw:
    __slots__ = ("text",)

    def __init__(self, text):
        self.text = text


# -- complexes --------------------------------------------------------------

def complex_to_dict(K: SimplicialComplex) -> dict:
    lab = K.labels
    return {"dim": K.dim,
            "top_simplexes": [[int(lab[v]) for v in s] for s in K.top_simplexes]}


def complex_from_dict(d: dict) -> SimplicialComplex:
    if not isinstance(d, dict) or "top_simplexes" not in d:
        raise FormatError("complex file needs a 'top_simplexes' list")
    tops = d["top_simplexes"]
    if not isinstance(tops, list) or not all(isinstance(s, list) for s in tops):
        raise FormatError("'top_simplexes' must be a list of vertex lists")
    K = build_complex(tops)
    if "dim" in d and d["dim"] != K.dim:
        raise FormatError(f"declared dim {d['dim']} but top simplexes have dim {K.dim}")
    return K


def save_complex(path, K: SimplicialComplex):
    with open(path, "w") as fh:
        fh.write(dumps(complex_to_dict(K), indent=None))
        fh.write("\n")


def load_complex(path) -> SimplicialComplex:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    return complex_from_dict(d)


# -- metrics ----------------------------------------------------------------

def metric_to_dict(K: SimplicialComplex, z) -> dict:
    lab = K.labels
    z = np.asarray(z, dtype=float)
    out = {}
    for (i, j), val in zip(K.edges, z):
        a, b = sorted((int(lab[i]), int(lab[j])))
        out[f"{a}-{b}"] = float(val)
    return {"z": out}


def metric_from_dict(K: SimplicialComplex, d: dict) -> np.ndarray:
    """Metric vector in the edge order of ``K``. Missing or extra edges are
    errors."""
    if not isinstance(d, dict) or not isinstance(d.get("z"), dict):
        raise FormatError("metric file needs a 'z' mapping")
    vid = {int(lbl): i for i, lbl in enumerate(K.labels)}
    z = np.full(K.n_edges, np.nan)
    extra = []
    for key, val in d["z"].items():
        try:
            a, b = (int(t) for t in str(key).split("-"))
        except ValueError as exc:
            raise FormatError(f"bad edge key {key!r}") from exc
        if a not in vid or b not in vid or a == b:
            extra.append(key)
            continue
        i, j = sorted((vid[a], vid[b]))
        try:
            e = K.edge_index(i, j)
        except KeyError:
            extra.append(key)
            continue
        if not np.isnan(z[e]):
            raise FormatError(f"edge {key!r} given twice")
        z[e] = float(val)
    if extra:
        raise FormatError(f"metric has edges not in the complex: {sorted(extra)}")
    missing = np.flatnonzero(np.isnan(z))
    if missing.size:
        lab = K.labels
        names = [f"{lab[K.edges[e][0]]}-{lab[K.edges[e][1]]}" for e in missing[:5]]
        raise FormatError(f"metric is missing {missing.size} edges, e.g. {names}")
    return z


def save_metric(path, K: SimplicialComplex, z):
    with open(path, "w") as fh:
        fh.write(dumps(metric_to_dict(K, z)))
        fh.write("\n")


def load_metric(path, K: SimplicialComplex) -> np.ndarray:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    return metric_from_dict(K, d)
