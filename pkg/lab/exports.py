"""VTK, CSV and JSON sidecar writers (and the readers used to check them)."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from obstacle_fem.mesh import Mesh

from .reports import ConvergenceReport

logger = logging.getLogger("obstaclelab.exports")

FieldValue = Union[np.ndarray, Sequence[np.ndarray]]
VTK_TRIANGLE = 5


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _as_point_field(name: str, value: FieldValue, size: int) -> np.ndarray:
    if " " in name or not name:
        raise ValueError(f"Field names must be nonempty and contain no spaces, got {name!r}")
    if isinstance(value, (list, tuple)):
        array = np.column_stack([np.asarray(v, dtype=float) for v in value])
    else:
        array = np.asarray(value, dtype=float)
    if array.shape[0] != size or array.ndim > 2 or (array.ndim == 2 and array.shape[1] not in (1, 2, 3)):
        raise ValueError(f"Field {name!r} of shape {array.shape} does not match {size} mesh vertices")
    if array.ndim == 2 and array.shape[1] == 1:
        array = array[:, 0]
    if array.ndim == 2 and array.shape[1] == 2:
        array = np.column_stack((array, np.zeros(size)))
    return array


def export_vtk(
    mesh: Mesh,
    fields: Mapping[str, FieldValue],
    path: Path,
    *,
    points: Optional[np.ndarray] = None,
    title: str = "obstaclelab solution",
) -> Path:
    """Write a legacy ASCII (3.0) unstructured grid of triangles with point data.

    ``points`` overrides the vertex positions (shape (V, 2) or (V, 3)), which
    is how a deformed surface is written. 2-vector fields are padded with a
    zero third component.
    """
    size = mesh.num_vertices
    coords = mesh.vertices if points is None else np.asarray(points, dtype=float)
    if coords.shape[0] != size or coords.shape[1] not in (2, 3):
        raise ValueError(f"Point array of shape {coords.shape} does not match the mesh")
    if coords.shape[1] == 2:
        coords = np.column_stack((coords, np.zeros(size)))
    prepared = {name: _as_point_field(name, value, size) for name, value in fields.items()}

    lines: List[str] = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {size} double",
    ]
    lines.extend(" ".join(_fmt(c) for c in p) for p in coords)
    tris = mesh.triangles
    lines.append(f"CELLS {len(tris)} {4 * len(tris)}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in tris)
    lines.append(f"CELL_TYPES {len(tris)}")
    lines.extend([str(VTK_TRIANGLE)] * len(tris))
    if prepared:
        lines.append(f"POINT_DATA {size}")
    for name, array in prepared.items():
        if array.ndim == 1:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in array)
        else:
            lines.append(f"VECTORS {name} double")
            lines.extend(" ".join(_fmt(c) for c in row) for row in array)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug("Wrote VTK %s (%d points, %d fields)", path, size, len(prepared))
    return path


def read_vtk(path: Path) -> Tuple[np.ndarray, np.ndarray, Dict[str, np.ndarray]]:
    """Parse a file written by ``export_vtk`` into (points, triangles, point data)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# vtk DataFile Version"):
        raise ValueError(f"{path} is not a legacy VTK file")
    if lines[2].strip() != "ASCII":
        raise ValueError(f"{path} is not ASCII VTK")
    i = 4
    points = np.empty((0, 3))
    triangles = np.empty((0, 3), dtype=np.int64)
    data: Dict[str, np.ndarray] = {}
    npoints = 0
    while i < len(lines):
        head = lines[i].split()
        i += 1
        if not head:
            continue
        key = head[0]
        if key == "POINTS":
            npoints = int(head[1])
            points = np.array([[float(v) for v in lines[i + k].split()] for k in range(npoints)])
            i += npoints
        elif key == "CELLS":
            count = int(head[1])
            cells = [[int(v) for v in lines[i + k].split()] for k in range(count)]
            if any(c[0] != 3 for c in cells):
                raise ValueError(f"{path} holds non-triangle cells")
            triangles = np.array([c[1:] for c in cells], dtype=np.int64)
            i += count
        elif key == "CELL_TYPES":
            count = int(head[1])
            types = {int(lines[i + k]) for k in range(count)}
            if types - {VTK_TRIANGLE}:
                raise ValueError(f"{path} has cell types {sorted(types)}")
            i += count
        elif key == "POINT_DATA":
            if int(head[1]) != npoints:
                raise ValueError(f"{path}: POINT_DATA count {head[1]} != {npoints} points")
        elif key == "SCALARS":
            i += 1  # LOOKUP_TABLE
            data[head[1]] = np.array([float(lines[i + k]) for k in range(npoints)])
            i += npoints
        elif key == "VECTORS":
            data[head[1]] = np.array([[float(v) for v in lines[i + k].split()] for k in range(npoints)])
            i += npoints
        else:
            raise ValueError(f"{path}: unexpected section {key!r}")
    return points, triangles, data


def read_vtk_point_data(path: Path) -> Dict[str, np.ndarray]:
    return read_vtk(path)[2]


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9e")
    return str(value)


def export_csv(report: ConvergenceReport, path: Path) -> Path:
    """One header row, then one row per report row. Floats use ``.9e``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([format_cell(row.get(c)) for c in report.columns])
    logger.info("Wrote %s (%d rows)", path, len(report.rows))
    return path


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv_report(path: Path) -> Tuple[List[str], List[Dict[str, Any]]]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [{name: _parse_cell(cell) for name, cell in zip(header, record)} for record in reader]
    return header, rows


def meta_path_for(csv_path: Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".meta.json")


def write_meta(report: ConvergenceReport, csv_path: Path, extra: Optional[Dict[str, Any]] = None) -> Path:
    """Sidecar with the run metadata; wall times live here so the CSV stays byte-stable.

    ``config`` and ``config_hash`` sit at the top level; everything else the
    sweep recorded stays under ``metadata``.
    """
    payload = report.to_dict()
    metadata = dict(payload.pop("metadata"))
    payload = {
        "config": metadata.pop("config", None),
        "config_hash": metadata.pop("config_hash", None),
        **payload,
        "metadata": metadata,
    }
    if extra:
        payload.update(extra)
    path = meta_path_for(csv_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, default=_json_default)
        fh.write("\n")
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
