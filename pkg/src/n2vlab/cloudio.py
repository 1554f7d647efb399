"""PointCloud files.

Two versioned variants share one header ``{graph_id, n, d, provenance}``:

* text (``.pct``): ``#n2vlab-pointcloud-text v1`` line, a JSON header line,
  then one row of ``d`` floats per node. ``digits=None`` writes shortest
  round-trip reprs; an integer gives a lossy fixed precision.
* binary (``.pcb``): ``N2VPCB1\\n`` magic, a JSON header line, then the
  matrix as little-endian float64, row major. Always exact.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .skipgram import PointCloud

TEXT_MAGIC = "#n2vlab-pointcloud-text v1"
BINARY_MAGIC = b"N2VPCB1\n"


def _header(pc: PointCloud) -> str:
    return json.dumps(
        {"graph_id": pc.graph_id, "n": pc.n, "d": pc.dim, "provenance": pc.provenance},
        sort_keys=True,
    )


def dumps_text(pc: PointCloud, digits: int | None = None) -> str:
    fmt = repr if digits is None else (lambda v: f"{v:.{digits}g}")
    lines = [TEXT_MAGIC, _header(pc)]
    lines += [" ".join(fmt(float(v)) for v in row) for row in pc.matrix]
    return "\n".join(lines) + "\n"


def loads_text(text: str) -> PointCloud:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TEXT_MAGIC:
        raise ValueError("not a text point cloud file (bad magic)")
    head = json.loads(lines[1])
    rows = [list(map(float, ln.split())) for ln in lines[2:] if ln.strip()]
    m = np.array(rows, dtype=np.float64).reshape(head["n"], head["d"])
    return PointCloud(m, head["graph_id"], head["provenance"])


def dumps_binary(pc: PointCloud) -> bytes:
    body = np.ascontiguousarray(pc.matrix, dtype="<f8").tobytes()
    return BINARY_MAGIC + _header(pc).encode("utf-8") + b"\n" + body


def loads_binary(data: bytes) -> PointCloud:
    if not data.startswith(BINARY_MAGIC):
        raise ValueError("not a binary point cloud file (bad magic)")
    rest = data[len(BINARY_MAGIC):]
    nl = rest.index(b"\n")
    head = json.loads(rest[:nl])
    m = np.frombuffer(rest[nl + 1:], dtype="<f8").reshape(head["n"], head["d"]).astype(np.float64)
    return PointCloud(m, head["graph_id"], head["provenance"])


def atomic_write(path: Path, data: bytes | str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def save(pc: PointCloud, path, digits: int | None = None) -> None:
    path = Path(path)
    if path.suffix == ".pcb":
        atomic_write(path, dumps_binary(pc))
    else:
        atomic_write(path, dumps_text(pc, digits))


def load(path) -> PointCloud:
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(BINARY_MAGIC):
        return loads_binary(data)
    return loads_text(data.decode("utf-8"))
