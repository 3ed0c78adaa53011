"""File formats: JSON for data and reports, CSV for plot data."""
import csv
import json
import math
from pathlib import Path

import numpy as np

from .measure import DiscreteMeasure, density_from_config
from .polytope import Polytope


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        # JSON has no inf or nan; keep the information as a string
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(data) -> str:
    """Deterministic JSON text (fixed key order as built, repr floats)."""
    return json.dumps(_clean(data), indent=2, allow_nan=False) + "\n"


def write_json(path, data):
    text = dumps(data)
    if path is None or str(path) == "-":
        import sys
        sys.stdout.write(text)
        return
    Path(path).write_text(text)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def load_measure(path) -> DiscreteMeasure:
    return DiscreteMeasure.from_json(read_json(path))


def load_polytope(path) -> Polytope:
    return Polytope.from_json(read_json(path))


def load_density(path):
    return density_from_config(read_json(path))


def polygon_rows(P: Polytope):
    """Vertices of a polygon in counter-clockwise boundary order."""
    order, _ = P.boundary_cycle()
    return [["index", "x", "y"]] + [[k, *P.vertices[i].tolist()] for k, i in enumerate(order)]


def triangle_rows(P: Polytope):
    """Triangulated facets of a 3-polytope, one triangle per row."""
    header = ["facet", "x0", "y0", "z0", "x1", "y1", "z1", "x2", "y2", "z2"]
    rows = [header]
    for f in P.facets:
        if f.empty:
            continue
        for tri in f.simplices:
            rows.append([f.normal_index, *np.asarray(tri).reshape(-1).tolist()])
    return rows


def plot_rows(P: Polytope):
    if P.dim == 2:
        return polygon_rows(P)
    if P.dim == 3:
        return triangle_rows(P)
    raise ValueError("plot data is only produced for n = 2 and n = 3")


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow([repr(float(c)) if isinstance(c, float) else c for c in row])
