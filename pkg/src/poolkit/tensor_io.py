"""Bit-exact NPY (v1.0 subset) I/O and the JSON run configuration."""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, FileFormatError
from .framework import FeatureMap
from .meanfam import GAMMA_CONV_DEFAULT, GAMMA_TRANSFORMER_DEFAULT

MAGIC = b"\x93NUMPY"

METHOD_NAMES = (
    "gap",
    "max",
    "gem",
    "lse",
    "how",
    "sinkhorn-otk",
    "kmeans",
    "slot",
    "se",
    "cbam",
    "vit",
    "cait",
    "simpool",
)


@dataclass(frozen=True)
class NpyHeader:
    dtype: str
    fortran_order: bool
    shape: tuple[int, ...]


def _parse_header(path, fh) -> NpyHeader:
    magic = fh.read(6)
    if magic != MAGIC:
        raise FileFormatError(f"{path}: bad magic bytes {magic!r}")
    version = fh.read(2)
    if version != b"\x01\x00":
        raise FileFormatError(f"{path}: unsupported version {tuple(version)}")
    (hlen,) = struct.unpack("<H", fh.read(2))
    raw = fh.read(hlen)
    if len(raw) != hlen:
        raise FileFormatError(f"{path}: truncated header")
    try:
        meta = ast.literal_eval(raw.decode("latin1").strip())
        header = NpyHeader(
            dtype=meta["descr"],
            fortran_order=meta["fortran_order"],
            shape=tuple(meta["shape"]),
        )
    except Exception as exc:
        raise FileFormatError(f"{path}: unparseable header: {exc}") from exc
    if header.fortran_order:
        raise FileFormatError(f"{path}: fortran_order arrays are not supported")
    if header.dtype not in ("<f8", "<f4"):
        raise FileFormatError(f"{path}: unsupported dtype {header.dtype!r}")
    if not (1 <= len(header.shape) <= 3):
        raise FileFormatError(f"{path}: shape {header.shape} has unsupported rank")
    return header


def read_npy(path) -> tuple[np.ndarray, NpyHeader]:
    """Read a little-endian float NPY v1.0 array (rank 1-3, C order).

    '<f4' payloads are widened to float64.
    """
    path = Path(path)
    with path.open("rb") as fh:
        header = _parse_header(path, fh)
        itemsize = 8 if header.dtype == "<f8" else 4
        count = int(np.prod(header.shape)) if header.shape else 1
        payload = fh.read(count * itemsize + 1)
    if len(payload) < count * itemsize:
        raise FileFormatError(f"{path}: truncated payload "
                              f"({len(payload)} of {count * itemsize} bytes)")
    if len(payload) > count * itemsize:
        raise FileFormatError(f"{path}: trailing bytes after payload")
    arr = np.frombuffer(payload, dtype=header.dtype).reshape(header.shape)
    return arr.astype(np.float64), header


def write_npy(arr, path) -> None:
    """Write float64 C-order NPY v1.0 with a 64-byte-aligned header."""
    arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    shape = arr.shape
    shape_str = "(" + ", ".join(str(s) for s in shape) + ("," if len(shape) == 1 else "") + ")"
    body = f"{{'descr': '<f8', 'fortran_order': False, 'shape': {shape_str}, }}"
    # pad with spaces so that 10-byte preamble + header is a multiple of 64,
    # newline-terminated
    total = 10 + len(body) + 1
    pad = (64 - total % 64) % 64
    header = (body + " " * pad + "\n").encode("latin1")
    try:
        with Path(path).open("wb") as fh:
            fh.write(MAGIC)
            fh.write(b"\x01\x00")
            fh.write(struct.pack("<H", len(header)))
            fh.write(header)
            fh.write(arr.tobytes())
    except OSError as exc:
        raise OSError(f"write_npy: cannot write {path}: {exc}") from exc


def load_feature_map(path, width: Optional[int] = None, height: Optional[int] = None) -> FeatureMap:
    """Load features: 2-d (d, p) arrays directly, 3-d (d, H, W) flattened."""
    arr, _ = read_npy(path)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim == 3:
        d, h, w = arr.shape
        if width is not None and width != w or height is not None and height != h:
            raise ConfigError(f"{path}: 3-d shape {arr.shape} conflicts with "
                              f"requested grid {width}x{height}")
        return FeatureMap(arr.reshape(d, h * w), width=w, height=h)
    return FeatureMap.from_array(arr, width=width, height=height)


# --- run configuration -----------------------------------------------------

_CONFIG_KEYS = {
    "method", "family", "gamma", "k", "iters", "heads", "epsilon", "r",
    "seed", "mass", "weights", "input", "output", "attention_output",
    "width", "height",
}


@dataclass(frozen=True)
class RunConfig:
    method: str = "simpool"
    family: str = "conv"           # conv | transformer; selects the gamma default
    gamma: Optional[float] = None  # resolved against family when absent
    k: int = 1
    iters: int = 3
    heads: int = 1
    epsilon: float = 0.1
    r: float = 1.0
    seed: int = 0
    mass: float = 0.6
    weights: dict = field(default_factory=dict)  # role -> NPY path
    input: Optional[str] = None
    output: Optional[str] = None
    attention_output: Optional[str] = None
    width: Optional[int] = None
    height: Optional[int] = None

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ConfigError(f"unknown method {self.method!r}; "
                              f"choose from {', '.join(METHOD_NAMES)}")
        if self.family not in ("conv", "transformer"):
            raise ConfigError(f"family must be 'conv' or 'transformer', got {self.family!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if abs(self.r) < 1e-9:
            raise ConfigError(f"|r| must be >= 1e-9, got {self.r}")
        if self.k < 1 or self.iters < 1 or self.heads < 1:
            raise ConfigError("k, iters and heads must all be >= 1")
        if not (0.0 < self.mass <= 1.0):
            raise ConfigError(f"mass must be in (0, 1], got {self.mass}")

    @property
    def resolved_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        if self.family == "transformer":
            return GAMMA_TRANSFORMER_DEFAULT
        return GAMMA_CONV_DEFAULT


def load_config(path) -> RunConfig:
    """Strict JSON parse: unknown keys are rejected, defaults applied."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise OSError(f"load_config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(raw, origin=str(path))


def config_from_dict(raw: dict, origin: str = "config") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{origin}: top level must be an object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{origin}: unknown keys {sorted(unknown)}")
    return RunConfig(**raw)
