"""Bit-exact file formats: a JSON header next to a raw little-endian payload.

=============  ==========================  =====================================
artifact       header                      payload
=============  ==========================  =====================================
image          ``<name>.cimg.json``        ``<name>.cimg``: complex128 (re, im)
                                           pairs, row-major, coil-major if
                                           ``coil_count`` is present
mask           ``<name>.mask.json``        ``<name>.mask``: rows*cols bytes 0/1
measurements   ``<name>.meas.json``        ``<name>.meas``: complex128 pairs
=============  ==========================  =====================================
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import (
    DTypeMismatchError,
    MalformedHeaderError,
    MaskMismatchError,
    PayloadSizeError,
    TruncatedPayloadError,
)
from .image import ComplexImage
from .operators import CoilSensitivities, SamplingMask

PathLike = Union[str, os.PathLike]

IMAGE_SUFFIX = ".cimg"
MASK_SUFFIX = ".mask"
MEAS_SUFFIX = ".meas"
DTYPE_TAG = "c128"
LAYOUT_TAG = "row-major-interleaved"
_C128 = np.dtype("<c16")


def _base(path: PathLike, suffix: str) -> Path:
    p = Path(path)
    if p.name.endswith(suffix + ".json"):
        return p.with_name(p.name[: -len(suffix + ".json")])
    if p.name.endswith(suffix):
        return p.with_name(p.name[: -len(suffix)])
    return p


def image_paths(path: PathLike) -> tuple[Path, Path]:
    base = _base(path, IMAGE_SUFFIX)
    return Path(f"{base}{IMAGE_SUFFIX}.json"), Path(f"{base}{IMAGE_SUFFIX}")


def mask_paths(path: PathLike) -> tuple[Path, Path]:
    base = _base(path, MASK_SUFFIX)
    return Path(f"{base}{MASK_SUFFIX}.json"), Path(f"{base}{MASK_SUFFIX}")


def measurement_paths(path: PathLike) -> tuple[Path, Path]:
    base = _base(path, MEAS_SUFFIX)
    return Path(f"{base}{MEAS_SUFFIX}.json"), Path(f"{base}{MEAS_SUFFIX}")


def _write_header(path: Path, header: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def _read_header(path: Path, required: dict) -> dict:
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(header, dict):
        raise MalformedHeaderError(f"{path}: header must be a JSON object")
    for key, kind in required.items():
        if key not in header:
            raise MalformedHeaderError(f"{path}: missing field {key!r}")
        value = header[key]
        if kind is int and (isinstance(value, bool) or not isinstance(value, int) or value < 1):
            raise MalformedHeaderError(f"{path}: field {key!r} must be a positive integer, got {value!r}")
        if kind is str and not isinstance(value, str):
            raise MalformedHeaderError(f"{path}: field {key!r} must be a string, got {value!r}")
    return header


def _read_complex(path: Path, count: int) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) % _C128.itemsize:
        raise TruncatedPayloadError(
            f"{path}: {len(raw)} bytes is not a whole number of complex128 values (truncated?)"
        )
    if len(raw) != count * _C128.itemsize:
        raise PayloadSizeError(
            f"{path}: payload holds {len(raw) // _C128.itemsize} values, header declares {count}"
        )
    return np.frombuffer(raw, dtype=_C128).astype(np.complex128)


def _check_dtype(path: Path, header: dict) -> None:
    if header.get("dtype") != DTYPE_TAG:
        raise DTypeMismatchError(f"{path}: dtype {header.get('dtype')!r} unsupported (expected {DTYPE_TAG!r})")
    if header.get("layout") != LAYOUT_TAG:
        raise DTypeMismatchError(f"{path}: layout {header.get('layout')!r} unsupported (expected {LAYOUT_TAG!r})")


# images


def write_image(path: PathLike, img: Union[ComplexImage, CoilSensitivities, np.ndarray]) -> tuple[Path, Path]:
    """Write a 2-D image, or a ``(coils, rows, cols)`` stack (with ``coil_count``)."""
    if isinstance(img, ComplexImage):
        data = img.data
    elif isinstance(img, CoilSensitivities):
        data = img.maps
    else:
        data = np.asarray(img, dtype=np.complex128)
    header = {"rows": int(data.shape[-2]), "cols": int(data.shape[-1]), "dtype": DTYPE_TAG, "layout": LAYOUT_TAG}
    if data.ndim == 3:
        header["coil_count"] = int(data.shape[0])
    elif data.ndim != 2:
        raise ValueError(f"image data must be 2-D or 3-D, got shape {data.shape}")
    hpath, dpath = image_paths(path)
    _write_header(hpath, header)
    dpath.write_bytes(np.ascontiguousarray(data, dtype=_C128).tobytes())
    return hpath, dpath


def _read_image_array(path: PathLike) -> np.ndarray:
    hpath, dpath = image_paths(path)
    header = _read_header(hpath, {"rows": int, "cols": int, "dtype": str, "layout": str})
    _check_dtype(hpath, header)
    rows, cols = header["rows"], header["cols"]
    coils = header.get("coil_count")
    if coils is not None and (isinstance(coils, bool) or not isinstance(coils, int) or coils < 1):
        raise MalformedHeaderError(f"{hpath}: coil_count must be a positive integer, got {coils!r}")
    data = _read_complex(dpath, rows * cols * (coils or 1))
    return data.reshape((coils, rows, cols) if coils else (rows, cols))


def read_image(path: PathLike) -> ComplexImage:
    data = _read_image_array(path)
    if data.ndim != 2:
        raise MalformedHeaderError(f"{image_paths(path)[0]}: expected a single image, found {data.shape[0]} coils")
    return ComplexImage(data)


def read_coil_maps(path: PathLike) -> CoilSensitivities:
    data = _read_image_array(path)
    if data.ndim == 2:
        data = data[None]
    return CoilSensitivities(data)


# masks


def mask_hash(mask: SamplingMask) -> str:
    """SHA-256 over the mask shape and its raw byte payload."""
    h = hashlib.sha256(f"{mask.rows}x{mask.cols}:".encode())
    h.update(mask.kept.astype(np.uint8).tobytes())
    return h.hexdigest()


def write_mask(path: PathLike, mask: SamplingMask) -> tuple[Path, Path]:
    header = {
        "rows": mask.rows,
        "cols": mask.cols,
        "m": mask.m,
        "seed": mask.seed,
        "acceleration": mask.acceleration,
        "center_lines": mask.center_lines,
    }
    hpath, dpath = mask_paths(path)
    _write_header(hpath, header)
    dpath.write_bytes(mask.kept.astype(np.uint8).tobytes())
    return hpath, dpath


def read_mask(path: PathLike) -> SamplingMask:
    hpath, dpath = mask_paths(path)
    header = _read_header(hpath, {"rows": int, "cols": int, "m": int})
    rows, cols = header["rows"], header["cols"]
    raw = dpath.read_bytes()
    if len(raw) < rows * cols:
        raise TruncatedPayloadError(f"{dpath}: {len(raw)} bytes, header declares {rows * cols}")
    if len(raw) != rows * cols:
        raise PayloadSizeError(f"{dpath}: {len(raw)} bytes, header declares {rows * cols}")
    values = np.frombuffer(raw, dtype=np.uint8)
    if np.any(values > 1):
        raise MalformedHeaderError(f"{dpath}: mask bytes must be 0 or 1")
    kept = values.reshape(rows, cols).astype(bool)
    if int(kept.sum()) != header["m"]:
        raise PayloadSizeError(f"{dpath}: {int(kept.sum())} kept samples, header declares m={header['m']}")
    return SamplingMask(kept, seed=header.get("seed"), acceleration=header.get("acceleration"),
                        center_lines=header.get("center_lines"))


# measurements


def write_measurements(
    path: PathLike, b: np.ndarray, mask: SamplingMask, kind: str, coil_count: Optional[int] = None
) -> tuple[Path, Path]:
    b = np.asarray(b, dtype=np.complex128)
    header = {"length": int(b.size), "mask_hash": mask_hash(mask), "operator_kind": kind,
              "dtype": DTYPE_TAG, "layout": LAYOUT_TAG}
    if coil_count is not None:
        header["coil_count"] = int(coil_count)
    hpath, dpath = measurement_paths(path)
    _write_header(hpath, header)
    dpath.write_bytes(np.ascontiguousarray(b, dtype=_C128).tobytes())
    return hpath, dpath


def read_measurements(path: PathLike, mask: Optional[SamplingMask] = None) -> tuple[np.ndarray, dict]:
    """Read a measurement vector; with ``mask`` given, check it matches the recorded hash."""
    hpath, dpath = measurement_paths(path)
    header = _read_header(hpath, {"length": int, "mask_hash": str, "operator_kind": str})
    _check_dtype(hpath, header)
    if mask is not None and header["mask_hash"] != mask_hash(mask):
        raise MaskMismatchError(f"measurement/mask mismatch: {hpath} was not acquired with this mask")
    return _read_complex(dpath, header["length"]), header
