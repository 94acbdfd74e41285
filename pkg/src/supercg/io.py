"""Binary image/sinogram files, metadata sidecars, PGM export and CSV output.

All writes go to a temporary file in the target directory followed by an
atomic rename, so readers never observe a partial file.
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .operators import Image, Sinogram

IMG_MAGIC = b"IMG1"
SGM_MAGIC = b"SGM1"
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    """Raised for malformed or truncated input files."""


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pack(magic: bytes, a: int, b: int, values) -> bytes:
    vals = np.ascontiguousarray(values, dtype="<f8").ravel()
    if vals.size != a * b:
        raise ValueError(f"expected {a * b} values, got {vals.size}")
    return _HEADER.pack(magic, a, b) + vals.tobytes()


def _unpack(path, magic: bytes):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: file too short")
    got, a, b = _HEADER.unpack_from(data)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    body = data[_HEADER.size:]
    if len(body) != 8 * a * b:
        raise FormatError(f"{path}: expected {a * b} float64 values, found {len(body) / 8:g}")
    return a, b, np.frombuffer(body, dtype="<f8").astype(np.float64)


def write_image(path, image: Image) -> None:
    atomic_write(path, _pack(IMG_MAGIC, image.width, image.height, image.values))


def read_image(path) -> Image:
    w, h, vals = _unpack(path, IMG_MAGIC)
    return Image(vals, width=w, height=h)


def write_sinogram(path, sino: Sinogram) -> None:
    atomic_write(path, _pack(SGM_MAGIC, sino.n_angles, sino.n_rays, sino.values))


def read_sinogram(path) -> Sinogram:
    na, nr, vals = _unpack(path, SGM_MAGIC)
    return Sinogram(vals, n_angles=na, n_rays=nr)


def meta_path(sino_path) -> Path:
    p = Path(sino_path)
    return p.with_name(p.stem + ".meta")


def write_meta(path, meta: dict) -> None:
    text = "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n"
                   for k, v in meta.items())
    atomic_write(path, text.encode("utf-8"))


def read_meta(path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def write_pgm(path, img: np.ndarray) -> None:
    """Binary 16-bit PGM with linear min-max scaling noted in a comment."""
    img = np.asarray(img, dtype=np.float64)
    lo, hi = float(img.min()), float(img.max())
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    q = np.rint((img - lo) * scale).astype(">u2")
    h, w = img.shape
    head = f"P5\n# linear scaling: min={lo!r} max={hi!r}\n{w} {h}\n65535\n".encode("ascii")
    atomic_write(path, head + q.tobytes())


def write_csv(path, rows) -> None:
    buf = io.StringIO(newline="")
    csv.writer(buf, lineterminator="\n").writerows(rows)
    atomic_write(path, buf.getvalue().encode("utf-8"))
