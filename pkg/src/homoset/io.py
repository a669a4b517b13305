"""JSON and CSV formats for correspondences, homographies and reports.

JSON output is canonical: keys sorted, no insignificant whitespace and
every float written with 17 significant digits, so that a file read back
and written again is byte-identical.  Non-finite floats become ``null``.
"""

import csv
import json
import math

import numpy as np

from .errors import MalformedInput
from .linalg import canonical_sign
from .synth import CorrespondenceSet

FORMAT_VERSION = 1


def _encode(obj):
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(json.dumps(k) + ":" + _encode(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return "%.17g" % x
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj):
    """Canonical JSON text with a trailing newline."""
    return _encode(obj) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}: not valid JSON ({exc})") from exc


def _check_version(doc, path):
    if not isinstance(doc, dict):
        raise MalformedInput(f"{path}: top level must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise MalformedInput(f"{path}: unsupported version {doc.get('version')!r}")


def _matrices(value, what):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"{what} must be numeric 3x3 arrays") from exc
    if arr.ndim != 3 or arr.shape[1:] != (3, 3):
        raise MalformedInput(f"{what} must be a list of 3x3 arrays, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MalformedInput(f"{what} contain non-finite entries")
    return arr


# correspondences


def correspondences_to_dict(data, meta=None):
    planes = []
    for x1, x2 in zip(data.x1, data.x2):
        pairs = [
            {"x1": a[0], "y1": a[1], "x2": b[0], "y2": b[1]}
            for a, b in zip(x1.tolist(), x2.tolist())
        ]
        planes.append({"pairs": pairs})
    doc = {"version": FORMAT_VERSION, "planes": planes}
    if data.truth is not None:
        doc["truth"] = {"homographies": [canonical_sign(h).tolist() for h in data.truth]}
    if meta:
        doc["meta"] = dict(meta)
    return doc


def correspondences_from_dict(doc, path="<input>"):
    _check_version(doc, path)
    planes = doc.get("planes")
    if not isinstance(planes, list) or not planes:
        raise MalformedInput(f"{path}: 'planes' must be a non-empty list")
    x1, x2 = [], []
    for i, plane in enumerate(planes):
        pairs = plane.get("pairs") if isinstance(plane, dict) else None
        if not isinstance(pairs, list):
            raise MalformedInput(f"{path}: plane {i} has no 'pairs' list")
        try:
            rows = [[p["x1"], p["y1"], p["x2"], p["y2"]] for p in pairs]
            arr = np.array(rows, dtype=float).reshape(-1, 4)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"{path}: plane {i} has a malformed pair") from exc
        if not np.all(np.isfinite(arr)):
            raise MalformedInput(f"{path}: plane {i} has non-finite coordinates")
        x1.append(arr[:, :2])
        x2.append(arr[:, 2:])
    truth = None
    if doc.get("truth") is not None:
        t = doc["truth"]
        if not isinstance(t, dict) or "homographies" not in t:
            raise MalformedInput(f"{path}: 'truth' must hold 'homographies'")
        truth = _matrices(t["homographies"], "truth homographies")
        if len(truth) != len(x1):
            raise MalformedInput(f"{path}: truth lists {len(truth)} planes, data {len(x1)}")
    return CorrespondenceSet(x1, x2, truth=truth, meta=dict(doc.get("meta") or {}))


def write_correspondences(path, data, meta=None):
    write_json(path, correspondences_to_dict(data, meta))


def read_correspondences(path):
    return correspondences_from_dict(read_json(path), path)


# homographies and estimation reports


def _rms_dict(rms):
    if rms is None:
        return None
    return {"per_plane": list(rms.per_plane), "overall": rms.overall, "excluded": rms.excluded}


def report_to_dict(report):
    """Homography file contents for an estimation report."""
    hs = np.array([canonical_sign(h) for h in report.homographies])
    settings = {k: v for k, v in report.settings.items() if k != "history"}
    return {
        "version": FORMAT_VERSION,
        "method": report.method,
        "homographies": hs.tolist(),
        "cost": report.cost,
        "psi": report.psi,
        "rms": _rms_dict(report.rms),
        "rms_test": _rms_dict(report.rms_test),
        "iterations": report.iterations,
        "outer_rounds": report.outer_rounds,
        "converged": report.converged,
        "constraint_residual_max": report.constraint_residual_max,
        "settings": settings,
    }


def homographies_to_dict(hs):
    hs = np.array([canonical_sign(h) for h in np.asarray(hs, dtype=float)])
    return {"version": FORMAT_VERSION, "homographies": hs.tolist()}


def homographies_from_dict(doc, path="<input>"):
    _check_version(doc, path)
    if "homographies" not in doc:
        raise MalformedInput(f"{path}: missing 'homographies'")
    return _matrices(doc["homographies"], "homographies")


def read_homographies(path):
    return homographies_from_dict(read_json(path), path)


# CSV conversion

CSV_FIELDS = ("plane", "x1", "y1", "x2", "y2")


def correspondences_from_csv(path):
    """Read ``plane,x1,y1,x2,y2`` rows (header required) into a correspondence set.

    Planes are numbered from zero and must be contiguous.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        if reader.fieldnames is None or set(CSV_FIELDS) - set(reader.fieldnames):
            raise MalformedInput(f"{path}: header must contain {', '.join(CSV_FIELDS)}")
        rows = []
        for n, row in enumerate(reader, start=2):
            try:
                rows.append((int(row["plane"]), *(float(row[k]) for k in CSV_FIELDS[1:])))
            except (TypeError, ValueError) as exc:
                raise MalformedInput(f"{path}: bad value on line {n}") from exc
    if not rows:
        raise MalformedInput(f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    planes = arr[:, 0].astype(int)
    n_planes = planes.max() + 1
    if planes.min() < 0 or set(planes) != set(range(n_planes)):
        raise MalformedInput(f"{path}: plane numbers must run 0..{n_planes - 1} without gaps")
    x1 = [arr[planes == i, 1:3] for i in range(n_planes)]
    x2 = [arr[planes == i, 3:5] for i in range(n_planes)]
    return CorrespondenceSet(x1, x2)
