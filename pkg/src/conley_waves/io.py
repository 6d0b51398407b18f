"""CSV tables, JSON reports, CWF1 field snapshots and run manifests."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import Field, Grid

CWF_MAGIC = b"CWF1"
_HEADER = struct.Struct("<4sdQ")


class SnapshotFormatError(ValueError):
    pass


def fmt(value) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_cwf(path: Path, field: Field) -> Path:
    """Magic ``CWF1``, half-length L (f64), point count M (u64), M little-endian f64 values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = field.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CWF_MAGIC, grid.half_length, grid.points))
        fh.write(np.asarray(field.values, dtype="<f8").tobytes())
    return path


def read_cwf(path: Path) -> Field:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError("file too short for a CWF1 header")
    magic, half_length, points = _HEADER.unpack_from(data)
    if magic != CWF_MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    body = data[_HEADER.size:]
    if len(body) != 8 * points:
        raise SnapshotFormatError(f"expected {points} values, found {len(body) / 8:g}")
    values = np.frombuffer(body, dtype="<f8").astype(float)
    return Field(Grid(half_length, int(points)), values)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


MANIFEST_NAME = "run_manifest.json"


def write_manifest(out_dir: Path, *, config_text: str, config_path: Path | None, version: str,
                   command: str, started: str, seed: int) -> Path:
    """Inventory every file under ``out_dir`` (except the manifest itself) with its digest."""
    out_dir = Path(out_dir)
    outputs = []
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != MANIFEST_NAME:
            outputs.append({"path": p.relative_to(out_dir).as_posix(), "sha256": sha256_file(p), "bytes": p.stat().st_size})
    inputs = {}
    if config_path is not None:
        inputs[Path(config_path).as_posix()] = sha256_file(Path(config_path))
    manifest = {
        "command": command,
        "config_sha256": hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
        "version": version,
        "seed": seed,
        "started": started,
        "finished": utc_now(),
        "inputs": inputs,
        "outputs": outputs,
    }
    return write_json(out_dir / MANIFEST_NAME, manifest)
