"""Reading and writing point clouds (ASCII PCD, OFF, XYZ) and voxel-grid downsampling."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .geometry import Points, RigidTransform, as_cloud

FORMATS = ("pcd", "off", "xyz")
_EXTENSIONS = {".pcd": "pcd", ".off": "off", ".xyz": "xyz", ".txt": "xyz"}
ANCHORS = ("origin", "min-corner")

PCD_HEADER_LINES = 11
OFF_HEADER_LINES = 2


class CloudFormatError(ValueError):
    """Malformed cloud file; the message carries path and line number."""

    def __init__(self, path: str, line: int | None, detail: str) -> None:
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"parse error: {where}: {detail}")
        self.path, self.line = path, line


class UnsupportedEncodingError(CloudFormatError):
    def __init__(self, path: str, line: int, encoding: str) -> None:
        ValueError.__init__(self, f"unsupported encoding: {path}:{line}: DATA {encoding}")
        self.path, self.line = path, line


def infer_format(path: str | os.PathLike, fmt: str | None = None) -> str:
    if fmt is not None:
        if fmt not in FORMATS:
            raise ValueError(f"unknown cloud format {fmt!r}; expected one of {FORMATS}")
        return fmt
    ext = os.path.splitext(os.fspath(path))[1].lower()
    try:
        return _EXTENSIONS[ext]
    except KeyError:
        raise ValueError(f"cannot infer cloud format from extension {ext!r} of {path}") from None


def read_cloud(path: str | os.PathLike, fmt: str | None = None) -> Points:
    """Load the points of ``path`` in file order."""
    fmt = infer_format(path, fmt)
    path = os.fspath(path)
    with open(path) as f:
        lines = f.read().splitlines()
    reader = {"pcd": _read_pcd, "off": _read_off, "xyz": _read_xyz}[fmt]
    pts, first_line = reader(path, lines)
    if not pts:
        raise CloudFormatError(path, None, "no points")
    arr = np.array(pts, dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(arr).all(axis=1))
    if len(bad):
        raise CloudFormatError(path, first_line[bad[0]], "non-finite coordinate")
    return arr


def _floats(path: str, lineno: int, tokens: list[str]) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise CloudFormatError(path, lineno, f"expected numbers, got {' '.join(tokens)!r}") from None


def _int(path: str, lineno: int, token: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise CloudFormatError(path, lineno, f"expected an integer, got {token!r}") from None


def _read_pcd(path: str, lines: list[str]) -> tuple[list[list[float]], list[int]]:
    header: dict[str, tuple[int, list[str]]] = {}
    data_at = None
    for n, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, *vals = line.split()
        key = key.upper()
        header[key] = (n, vals)
        if key == "DATA":
            data_at = n
            break
    if data_at is None:
        raise CloudFormatError(path, len(lines), "missing DATA line")
    encoding = header["DATA"][1][0].lower() if header["DATA"][1] else ""
    if encoding != "ascii":
        raise UnsupportedEncodingError(path, data_at, encoding or "<empty>")
    for key in ("FIELDS", "POINTS"):
        if key not in header:
            raise CloudFormatError(path, data_at, f"missing {key} line")

    fields_line, fields = header["FIELDS"]
    if "COUNT" in header:
        count_line, counts_tok = header["COUNT"]
        counts = [_int(path, count_line, t) for t in counts_tok]
        if len(counts) != len(fields):
            raise CloudFormatError(path, count_line, "COUNT has a different length than FIELDS")
    else:
        counts = [1] * len(fields)
    for key in ("SIZE", "TYPE"):
        if key in header and len(header[key][1]) != len(fields):
            raise CloudFormatError(path, header[key][0], f"{key} has a different length than FIELDS")
    try:
        offsets = np.concatenate([[0], np.cumsum(counts)])
        cols = [int(offsets[fields.index(axis)]) for axis in ("x", "y", "z")]
    except ValueError:
        raise CloudFormatError(path, fields_line, "FIELDS must include x y z") from None
    width = sum(counts)

    points_line, points_tok = header["POINTS"]
    if len(points_tok) != 1:
        raise CloudFormatError(path, points_line, "POINTS takes one value")
    npts = _int(path, points_line, points_tok[0])
    if "WIDTH" in header and "HEIGHT" in header:
        w = _int(path, header["WIDTH"][0], header["WIDTH"][1][0])
        h = _int(path, header["HEIGHT"][0], header["HEIGHT"][1][0])
        if w * h != npts:
            raise CloudFormatError(path, points_line, f"WIDTH*HEIGHT = {w * h} but POINTS = {npts}")

    pts, where = [], []
    for n in range(data_at + 1, len(lines) + 1):
        tokens = lines[n - 1].split()
        if not tokens:
            continue
        if len(tokens) != width:
            raise CloudFormatError(path, n, f"expected {width} values, got {len(tokens)}")
        row = _floats(path, n, tokens)
        pts.append([row[c] for c in cols])
        where.append(n)
    if len(pts) != npts:
        raise CloudFormatError(path, len(lines), f"POINTS = {npts} but {len(pts)} data rows")
    return pts, where


def _content(lines: list[str]):
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line


def _read_off(path: str, lines: list[str]) -> tuple[list[list[float]], list[int]]:
    it = _content(lines)
    try:
        n, first = next(it)
    except StopIteration:
        raise CloudFormatError(path, 1, "empty file") from None
    if not first.startswith("OFF"):
        raise CloudFormatError(path, n, "first line must be 'OFF'")
    rest = first[3:].split()  # some exporters glue the counts onto the OFF keyword
    if not rest:
        try:
            n, line = next(it)
        except StopIteration:
            raise CloudFormatError(path, n, "missing vertex/face counts") from None
        rest = line.split()
    if len(rest) < 2:
        raise CloudFormatError(path, n, "expected 'nv nf ne'")
    nv = _int(path, n, rest[0])
    _int(path, n, rest[1])
    pts, where = [], []
    for _ in range(nv):
        try:
            n, line = next(it)
        except StopIteration:
            raise CloudFormatError(path, len(lines), f"expected {nv} vertices, found {len(pts)}") from None
        tokens = line.split()
        if len(tokens) < 3:
            raise CloudFormatError(path, n, "vertex needs three coordinates")
        pts.append(_floats(path, n, tokens[:3]))
        where.append(n)
    return pts, where


def _read_xyz(path: str, lines: list[str]) -> tuple[list[list[float]], list[int]]:
    pts, where = [], []
    for n, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 3:
            raise CloudFormatError(path, n, f"expected 3 values, got {len(tokens)}")
        pts.append(_floats(path, n, tokens))
        where.append(n)
    return pts, where


def _fmt(row: np.ndarray) -> str:
    return f"{row[0]:.17g} {row[1]:.17g} {row[2]:.17g}\n"


def write_cloud(cloud: ArrayLike, path: str | os.PathLike, fmt: str | None = None) -> None:
    """Write with 17 significant digits, so :func:`read_cloud` returns identical floats."""
    pts = as_cloud(cloud)
    fmt = infer_format(path, fmt)
    n = len(pts)
    with open(path, "w") as f:
        if fmt == "pcd":
            f.write("# .PCD v0.7 - Point Cloud Data file format\n"
                    "VERSION 0.7\nFIELDS x y z\nSIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1\n"
                    f"WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA ascii\n")
        elif fmt == "off":
            f.write(f"OFF\n{n} 0 0\n")
        f.writelines(_fmt(p) for p in pts)


def convert(src: str | os.PathLike, dst: str | os.PathLike) -> int:
    """Re-encode ``src`` as ``dst`` (formats from extensions); returns the point count."""
    pts = read_cloud(src)
    write_cloud(pts, dst)
    return len(pts)


@dataclass(frozen=True)
class VoxelFilterParams:
    """Cubic voxels of side ``leaf``.

    ``anchor="origin"`` puts grid planes at integer multiples of ``leaf``, as
    PCL's VoxelGrid does. ``anchor="min-corner"`` starts the grid at the
    cloud's bounding-box minimum instead.
    """

    leaf: float
    anchor: str = "origin"

    def __post_init__(self) -> None:
        if not (self.leaf > 0 and np.isfinite(self.leaf)):
            raise ValueError(f"leaf must be a positive finite number, got {self.leaf}")
        if self.anchor not in ANCHORS:
            raise ValueError(f"anchor must be one of {ANCHORS}, got {self.anchor!r}")


def voxel_keys(pts: Points, params: VoxelFilterParams) -> np.ndarray:
    """Integer (i, j, k) voxel coordinates of every point."""
    base = pts.min(axis=0) if params.anchor == "min-corner" else 0.0
    scaled = np.floor((pts - base) / params.leaf)
    if np.abs(scaled).max() > 2.0**52:
        raise ValueError("leaf is too small for the extent of the cloud")
    return scaled.astype(np.int64)


def voxel_downsample(cloud: ArrayLike, params: VoxelFilterParams | float) -> Points:
    """Replace the points of each occupied voxel by their centroid.

    Output is ordered by voxel coordinate with x varying fastest, then y, then z.
    """
    if not isinstance(params, VoxelFilterParams):
        params = VoxelFilterParams(float(params))
    pts = as_cloud(cloud)
    keys = voxel_keys(pts, params)
    order = np.lexsort((keys[:, 0], keys[:, 1], keys[:, 2]))
    sk = keys[order]
    starts = np.flatnonzero(np.r_[True, (sk[1:] != sk[:-1]).any(axis=1)])
    counts = np.diff(np.r_[starts, len(sk)])
    sums = np.add.reduceat(pts[order], starts, axis=0)
    return sums / counts[:, None]


def write_transform(T: RigidTransform, path: str | os.PathLike) -> None:
    """Four lines of four values: the row-major homogeneous matrix."""
    with open(path, "w") as f:
        for row in T.matrix():
            f.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_transform(path: str | os.PathLike) -> RigidTransform:
    path = os.fspath(path)
    with open(path) as f:
        tokens = f.read().split()
    if len(tokens) != 16:
        raise CloudFormatError(path, None, f"expected 16 values, got {len(tokens)}")
    return RigidTransform.from_matrix(np.array(_floats(path, 1, tokens)).reshape(4, 4))
