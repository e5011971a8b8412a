"""CSV/JSON layout shared by simulated ensembles and limit-process paths.

CSV: header ``replicate,t=<t_1>,...,t=<t_m>``, one row per replicate, values
written with ``%.17g`` so a re-read reproduces the floats exactly. JSON holds the
same matrix under ``values`` plus ``t_grid``, ``meta`` and an optional ``plan``.
"""

import csv
import json
import os

import numpy as np

FORMAT_VERSION = 1


def _fmt(x):
    return "%.17g" % x


def write_csv(path, values, t_grid):
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate"] + [f"t={_fmt(t)}" for t in t_grid])
        for i, row in enumerate(values):
            w.writerow([i] + [_fmt(v) for v in row])


def read_csv(path):
    """``(values, t_grid)`` from a file written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    t_grid = np.array([float(h.split("=", 1)[1]) for h in rows[0][1:]])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(-1, len(t_grid))
    return values, t_grid


def ensemble_document(values, t_grid, meta=None, plan=None):
    doc = {
        "format_version": FORMAT_VERSION,
        "t_grid": [float(t) for t in t_grid],
        "values": np.asarray(values, dtype=np.float64).tolist(),
        "meta": dict(meta or {}),
    }
    if plan is not None:
        doc["plan"] = plan
    return doc


def write_json(path, document):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
