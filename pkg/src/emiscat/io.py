"""Binary persistence for grid fields, sphere data, and harmonic coefficients.

Three single-file container formats, all structured as one UTF-8 JSON
header line (newline-terminated) followed by a raw block of little-endian
complex float64 values:

* ``MVSC-FLD v1`` — cube-grid fields: values row-major with the z index
  fastest, components interleaved per point.
* ``MVSC-DAT v1`` — near/far sphere data: the (n_rec, n_src, 3, 3) block
  in C order, with both sphere quadratures in the header.
* ``MVSC-ALF v1`` — far-field harmonic coefficients: 3x3 blocks ordered
  lexicographically by (l1, k1, l2, k2).
"""

from __future__ import annotations

import json

import numpy as np

from .forward import FarFieldData, NearFieldData, SphereGrid
from .fourier import CubeGrid
from .spherical import FarCoeffs

_DTYPE = np.dtype("<c16")


def _write(path, header: dict, block: np.ndarray):
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(block, dtype=_DTYPE).tobytes())


def _read(path, fmt: str):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        raw = fh.read()
    if header.get("format") != fmt or header.get("version") != 1:
        raise ValueError(f"{path}: not a {fmt} v1 file")
    return header, np.frombuffer(raw, dtype=_DTYPE)


def write_field(path, values: np.ndarray, grid: CubeGrid,
                kind: str = "field"):
    """Persist a scalar or component-valued cube-grid field (MVSC-FLD v1)."""
    values = np.asarray(values, dtype=complex)
    if values.shape[:3] != (grid.n,) * 3 or values.ndim not in (3, 4):
        raise ValueError("values must be (N,N,N) or (N,N,N,C)")
    components = 1 if values.ndim == 3 else values.shape[3]
    header = {"format": "MVSC-FLD", "version": 1,
              "half_side": grid.half_side, "n": grid.n,
              "kind": kind, "components": components}
    _write(path, header, values)


def read_field(path):
    """Load an MVSC-FLD v1 file -> (values, grid, kind)."""
    header, flat = _read(path, "MVSC-FLD")
    grid = CubeGrid(header["half_side"], header["n"])
    comps = header["components"]
    shape = (grid.n,) * 3 if comps == 1 else (grid.n,) * 3 + (comps,)
    if flat.size != int(np.prod(shape)):
        raise ValueError(f"{path}: block size does not match header")
    return flat.reshape(shape).copy(), grid, header["kind"]


def _sphere_header(sphere: SphereGrid) -> dict:
    return {"radius": sphere.radius,
            "nodes": sphere.nodes.tolist(),
            "weights": sphere.weights.tolist()}


def _sphere_from_header(h: dict) -> SphereGrid:
    return SphereGrid(radius=h["radius"],
                      nodes=np.asarray(h["nodes"], dtype=float),
                      weights=np.asarray(h["weights"], dtype=float))


def write_data(path, data):
    """Persist near- or far-field sphere data (MVSC-DAT v1)."""
    if isinstance(data, NearFieldData):
        header = {"format": "MVSC-DAT", "version": 1, "kind": "near",
                  "receivers": _sphere_header(data.receivers),
                  "sources": _sphere_header(data.sources),
                  "part": data.part}
    elif isinstance(data, FarFieldData):
        header = {"format": "MVSC-DAT", "version": 1, "kind": "far",
                  "receivers": _sphere_header(data.receivers),
                  "sources": _sphere_header(data.incidences),
                  "part": "far"}
    else:
        raise TypeError("data must be NearFieldData or FarFieldData")
    _write(path, header, data.matrices)


def read_data(path):
    """Load an MVSC-DAT v1 file -> NearFieldData or FarFieldData."""
    header, flat = _read(path, "MVSC-DAT")
    receivers = _sphere_from_header(header["receivers"])
    other = _sphere_from_header(header["sources"])
    shape = (receivers.nodes.shape[0], other.nodes.shape[0], 3, 3)
    if flat.size != int(np.prod(shape)):
        raise ValueError(f"{path}: block size does not match header")
    mats = flat.reshape(shape).copy()
    if header["kind"] == "near":
        return NearFieldData(receivers=receivers, sources=other,
                             matrices=mats, part=header["part"])
    if header["kind"] == "far":
        return FarFieldData(receivers=receivers, incidences=other,
                            matrices=mats)
    raise ValueError(f"{path}: unknown data kind {header['kind']!r}")


def write_far_coeffs(path, coeffs: FarCoeffs):
    """Persist harmonic far-field coefficients (MVSC-ALF v1).

    The flat harmonic index l*l+l+k is itself lexicographic in (l, k),
    so the C-order block is ordered by (l1, k1, l2, k2)."""
    header = {"format": "MVSC-ALF", "version": 1, "L": coeffs.L,
              "layout": "lex(l1,k1,l2,k2) x 3 x 3"}
    _write(path, header, coeffs.alpha)


def read_far_coeffs(path) -> FarCoeffs:
    """Load an MVSC-ALF v1 file."""
    header, flat = _read(path, "MVSC-ALF")
    n = (header["L"] + 1) ** 2
    if flat.size != n * n * 9:
        raise ValueError(f"{path}: block size does not match header")
    return FarCoeffs(L=header["L"], alpha=flat.reshape(n, n, 3, 3).copy())
