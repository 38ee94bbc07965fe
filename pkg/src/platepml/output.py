"""Deterministic JSON, CSV and legacy-VTK writers."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        # strict JSON has no NaN; undefined fits are written as null
        return float(obj) if np.isfinite(obj) else None
    return obj


def dumps(payload: dict, config=None) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    if config is not None:
        body["config"] = config.to_dict()
    body.update(payload)
    return json.dumps(_plain(body), indent=2, sort_keys=True) + "\n"


def write_json(path, payload: dict, config=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload, config))
    return path


def write_rows(path, header, rows, config=None) -> Path:
    """CSV with a leading comment line carrying the schema version and config."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        meta = {"schema_version": SCHEMA_VERSION}
        if config is not None:
            meta["config"] = config.to_dict()
        fh.write("# " + json.dumps(_plain(meta), sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])
    return path


def write_field_csv(path, mesh, u, lap_u, config=None) -> Path:
    header = ["x1", "x2", "re_u", "im_u", "re_lap_u", "im_lap_u"]
    rows = zip(mesh.nodes[:, 0], mesh.nodes[:, 1], np.real(u), np.imag(u),
               np.real(lap_u), np.imag(lap_u))
    return write_rows(path, header, rows, config)


def write_vtk(path, mesh, point_data: dict, title="platepml field") -> Path:
    """Legacy ASCII VTK unstructured grid with real/imaginary point arrays."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [f"{float(x)!r} {float(y)!r} 0.0" for x, y in mesh.nodes]
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles]
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines += ["5"] * mesh.n_triangles
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    for name, values in point_data.items():
        values = np.asarray(values)
        for part, arr in (("re", values.real), ("im", values.imag)):
            lines.append(f"SCALARS {name}_{part} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [repr(float(v)) for v in arr]
    path.write_text("\n".join(lines) + "\n")
    return path
