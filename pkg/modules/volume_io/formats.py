"""
Volume File Formats
JSON header + raw little-endian sidecar for volumes, masks and label maps;
single-file header + payload for patch sets.

Headers are normalized on write: keys in dims/spacing_mm/dtype order and
spacing as floats, so a header from another tool (e.g. integer spacing)
comes back in that canonical form. Sidecar payloads are copied bit for bit,
and files written here round-trip byte-identically.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from config.settings import settings
from config.logger_config import setup_logger
from utils.errors import FormatError, PipelineIOError

logger = setup_logger("VolumeIO", settings.log_level)

# dtype tag -> (numpy dtype, sidecar suffix)
DTYPES = {
    "f32le": (np.dtype("<f4"), ".f32"),
    "u8": (np.dtype("u1"), ".u8"),
}


@dataclass
class Volume:
    """3D scalar field; voxels are stored z, y, x so x runs fastest."""
    voxels: np.ndarray
    spacing_mm: Tuple[float, float, float]

    def __post_init__(self):
        if self.voxels.ndim != 3 or min(self.voxels.shape) < 1:
            raise FormatError(f"volume must be 3-d with extents ≥ 1, got {self.voxels.shape}", "dims")
        if len(self.spacing_mm) != 3 or any(s <= 0 for s in self.spacing_mm):
            raise FormatError(f"spacing must be 3 positive values, got {self.spacing_mm}", "spacing_mm")
        self.spacing_mm = tuple(float(s) for s in self.spacing_mm)

    @property
    def dims(self) -> Tuple[int, int, int]:
        """(nx, ny, nz)"""
        nz, ny, nx = self.voxels.shape
        return nx, ny, nz


@dataclass
class RoiMask:
    """Binary region of interest paired with a Volume."""
    voxels: np.ndarray
    spacing_mm: Tuple[float, float, float]

    def __post_init__(self):
        if self.voxels.ndim != 3:
            raise FormatError(f"mask must be 3-d, got {self.voxels.shape}", "dims")
        if not np.isin(self.voxels, (0, 1)).all():
            raise FormatError("mask values must be 0 or 1", "values")
        self.voxels = self.voxels.astype(np.uint8, copy=False)
        self.spacing_mm = tuple(float(s) for s in self.spacing_mm)

    @property
    def dims(self) -> Tuple[int, int, int]:
        nz, ny, nx = self.voxels.shape
        return nx, ny, nz

    @property
    def count(self) -> int:
        return int(self.voxels.sum())


def check_pair(volume: Volume, mask: RoiMask) -> None:
    """A mask must cover exactly its volume's voxel grid."""
    if volume.dims != mask.dims:
        raise FormatError(f"mask dims {mask.dims} differ from volume dims {volume.dims}", "dims")


def sidecar_path(header_path: Path, dtype: str) -> Path:
    return Path(header_path).with_suffix(DTYPES[dtype][1])


# ============== GENERIC FIELD I/O ==============

def _write_field(path: Path, voxels: np.ndarray, spacing_mm, dtype: str) -> None:
    path = Path(path)
    np_dtype, _ = DTYPES[dtype]
    nz, ny, nx = voxels.shape
    header = {"dims": [nx, ny, nz], "spacing_mm": [float(s) for s in spacing_mm], "dtype": dtype}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(header) + "\n")
        with open(sidecar_path(path, dtype), "wb") as f:
            f.write(np.ascontiguousarray(voxels, dtype=np_dtype).tobytes())
    except OSError as e:
        raise PipelineIOError(path, f"cannot write: {e}") from e


def _read_header(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            header = json.loads(f.read())
    except OSError as e:
        raise PipelineIOError(path, f"cannot read: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: header is not valid JSON ({e})", "header") from e
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header must be a JSON object", "header")
    return header


def _read_field(path: Path, expected_dtype: str) -> Tuple[np.ndarray, Tuple[float, float, float]]:
    path = Path(path)
    header = _read_header(path)

    dims = header.get("dims")
    if not (isinstance(dims, list) and len(dims) == 3 and all(isinstance(d, int) and d >= 1 for d in dims)):
        raise FormatError(f"{path}: dims must be three integers ≥ 1, got {dims!r}", "dims")
    spacing = header.get("spacing_mm")
    if not (isinstance(spacing, list) and len(spacing) == 3
            and all(isinstance(s, (int, float)) and s > 0 for s in spacing)):
        raise FormatError(f"{path}: spacing_mm must be three positive numbers, got {spacing!r}", "spacing_mm")
    if header.get("dtype") != expected_dtype:
        raise FormatError(f"{path}: dtype must be {expected_dtype!r}, got {header.get('dtype')!r}", "dtype")

    np_dtype, _ = DTYPES[expected_dtype]
    raw_path = sidecar_path(path, expected_dtype)
    try:
        payload = raw_path.read_bytes()
    except OSError as e:
        raise PipelineIOError(raw_path, f"cannot read sidecar: {e}") from e

    nx, ny, nz = dims
    expected = nx * ny * nz * np_dtype.itemsize
    if len(payload) != expected:
        raise FormatError(f"{raw_path}: payload has {len(payload)} bytes, header implies {expected}", "payload")
    voxels = np.frombuffer(payload, dtype=np_dtype).reshape(nz, ny, nx).copy()
    return voxels, tuple(float(s) for s in spacing)


# ============== VOLUMES / MASKS / LABEL MAPS ==============

def write_volume(path: Path, volume: Volume) -> None:
    _write_field(path, volume.voxels, volume.spacing_mm, "f32le")


def read_volume(path: Path) -> Volume:
    voxels, spacing = _read_field(path, "f32le")
    return Volume(voxels.astype(np.float32, copy=False), spacing)


def write_mask(path: Path, mask: RoiMask) -> None:
    _write_field(path, mask.voxels, mask.spacing_mm, "u8")


def read_mask(path: Path) -> RoiMask:
    voxels, spacing = _read_field(path, "u8")
    bad = np.flatnonzero(voxels > 1)
    if bad.size:
        raise FormatError(f"{path}: mask holds value {int(voxels.reshape(-1)[bad[0]])}; only 0/1 allowed", "values")
    return RoiMask(voxels, spacing)


def write_label_map(path: Path, labels: np.ndarray, spacing_mm) -> None:
    """Integer label volume (e.g. texture ids) in the mask layout."""
    _write_field(path, labels, spacing_mm, "u8")


def read_label_map(path: Path) -> Tuple[np.ndarray, Tuple[float, float, float]]:
    return _read_field(path, "u8")


# ============== PATCH SETS ==============

def write_patchset_pixels(path: Path, pixels: np.ndarray) -> None:
    """Header line {"count":N,"px":P} followed by N·P·P little-endian float32 values."""
    path = Path(path)
    if pixels.ndim != 3 or pixels.shape[1] != pixels.shape[2]:
        raise FormatError(f"patch pixels must be N×P×P, got {pixels.shape}", "px")
    header = {"count": int(pixels.shape[0]), "px": int(pixels.shape[1])}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write((json.dumps(header) + "\n").encode("utf-8"))
            f.write(np.ascontiguousarray(pixels, dtype="<f4").tobytes())
    except OSError as e:
        raise PipelineIOError(path, f"cannot write: {e}") from e


def read_patchset_pixels(path: Path) -> np.ndarray:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise PipelineIOError(path, f"cannot read: {e}") from e
    newline = blob.find(b"\n")
    if newline < 0:
        raise FormatError(f"{path}: missing header line", "header")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
        count, px = int(header["count"]), int(header["px"])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"{path}: bad patch set header ({e})", "header") from e
    if count < 0 or px < 1:
        raise FormatError(f"{path}: count/px out of range", "count")
    payload = blob[newline + 1:]
    if len(payload) != count * px * px * 4:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, header implies {count * px * px * 4}", "payload")
    return np.frombuffer(payload, dtype="<f4").reshape(count, px, px).astype(np.float32)
