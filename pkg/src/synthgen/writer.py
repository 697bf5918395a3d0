"""BPC1 keyed binary container, one file per keyframe.

Layout (all integers little-endian)::

    b"BPC1"                      magic
    u32                          entry count
    per entry:
      u16                        key length in bytes
      bytes                      UTF-8 key
      u8                         dtype code (0=u8, 1=i32, 2=f32, 3=f64, 4=utf8-json)
      u8                         ndim
      ndim x u64                 dims
      u64                        payload length in bytes
      bytes                      row-major little-endian payload

For utf8-json entries the shape is ``[byte length]``.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass
from math import prod
from pathlib import Path
from typing import Any

import numpy as np

from synthgen.errors import BadDtype, BadMagic, ContainerError, DuplicateKey, Truncated

log = logging.getLogger(__name__)

MAGIC = b"BPC1"
SUFFIX = ".bpc"

DTYPES: dict[str, tuple[int, np.dtype | None]] = {
    "u8": (0, np.dtype("<u1")),
    "i32": (1, np.dtype("<i4")),
    "f32": (2, np.dtype("<f4")),
    "f64": (3, np.dtype("<f8")),
    "utf8-json": (4, None),
}
_BY_CODE = {code: name for name, (code, _) in DTYPES.items()}
_FROM_NUMPY = {"u1": "u8", "i4": "i32", "f4": "f32", "f8": "f64"}


@dataclass(frozen=True)
class ContainerEntry:
    key: str
    dtype: str
    shape: tuple[int, ...]
    payload: bytes

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise BadDtype(f"unknown dtype '{self.dtype}'")
        expected = self.shape[0] if self.dtype == "utf8-json" else prod(self.shape) * DTYPES[self.dtype][1].itemsize
        if self.dtype == "utf8-json" and len(self.shape) != 1:
            raise ContainerError(f"entry '{self.key}': utf8-json shape must be [byte length]")
        if len(self.payload) != expected:
            raise ContainerError(
                f"entry '{self.key}': payload is {len(self.payload)} bytes, shape needs {expected}"
            )

    @classmethod
    def from_array(cls, key: str, array: np.ndarray) -> ContainerEntry:
        array = np.asarray(array)
        name = _FROM_NUMPY.get(array.dtype.str[1:])
        if name is None:
            raise BadDtype(f"entry '{key}': unsupported array dtype {array.dtype}")
        data = np.ascontiguousarray(array, dtype=DTYPES[name][1])
        return cls(key, name, tuple(int(d) for d in array.shape), data.tobytes())

    @classmethod
    def from_json(cls, key: str, value: Any) -> ContainerEntry:
        payload = json.dumps(value, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return cls(key, "utf8-json", (len(payload),), payload)

    def value(self) -> Any:
        """Decoded payload: an ndarray, or the parsed JSON value."""
        if self.dtype == "utf8-json":
            return json.loads(self.payload.decode("utf-8"))
        return np.frombuffer(self.payload, dtype=DTYPES[self.dtype][1]).reshape(self.shape)


@dataclass(frozen=True)
class ContainerFile:
    entries: tuple[ContainerEntry, ...]

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if entry.key in seen:
                raise DuplicateKey(entry.key)
            seen.add(entry.key)

    def keys(self) -> list[str]:
        return [e.key for e in self.entries]

    def __getitem__(self, key: str) -> Any:
        for entry in self.entries:
            if entry.key == key:
                return entry.value()
        raise KeyError(key)

    def __contains__(self, key: str) -> bool:
        return any(e.key == key for e in self.entries)


def encode_container(container: ContainerFile) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(container.entries))]
    for entry in container.entries:
        key = entry.key.encode("utf-8")
        if len(key) > 0xFFFF:
            raise ContainerError(f"key too long: {entry.key[:40]}...")
        parts.append(struct.pack("<H", len(key)))
        parts.append(key)
        parts.append(struct.pack("<BB", DTYPES[entry.dtype][0], len(entry.shape)))
        parts.append(struct.pack(f"<{len(entry.shape)}Q", *entry.shape))
        parts.append(struct.pack("<Q", len(entry.payload)))
        parts.append(entry.payload)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise Truncated(self.offset, self.offset + n - len(self.data))
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_container(data: bytes) -> ContainerFile:
    if data[:4] != MAGIC:
        raise BadMagic(f"not a BPC1 container (starts with {data[:4]!r})")
    reader = _Reader(data)
    reader.take(4)
    (count,) = reader.unpack("<I")
    entries = []
    for _ in range(count):
        (key_len,) = reader.unpack("<H")
        key = reader.take(key_len).decode("utf-8")
        code, ndim = reader.unpack("<BB")
        if code not in _BY_CODE:
            raise BadDtype(f"entry '{key}': unknown dtype code {code}")
        shape = reader.unpack(f"<{ndim}Q")
        (length,) = reader.unpack("<Q")
        payload = reader.take(length)
        entries.append(ContainerEntry(key, _BY_CODE[code], tuple(shape), payload))
    if reader.offset != len(data):
        raise ContainerError(f"{len(data) - reader.offset} trailing bytes after last entry")
    return ContainerFile(tuple(entries))


def read_container(path: str | Path) -> ContainerFile:
    return decode_container(Path(path).read_bytes())


def write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def frames_to_container(frames) -> ContainerFile:
    """Entries for all frame buffers of one keyframe.

    Stereo buffers get ``_L``/``_R`` key suffixes. Instance segmentation
    buffers also produce a ``<key>_mapping`` JSON entry.
    """
    indices = {f.keyframe for f in frames}
    if len(indices) > 1:
        raise ContainerError(f"frames from several keyframes: {sorted(indices)}")
    suffix = {"mono": "", "left": "_L", "right": "_R"}
    entries = []
    for frame in frames:
        key = frame.key + suffix[frame.eye]
        entries.append(ContainerEntry.from_array(key, frame.data))
        if frame.mapping is not None:
            entries.append(ContainerEntry.from_json(f"{frame.key}_mapping{suffix[frame.eye]}", frame.mapping))
    return ContainerFile(tuple(entries))


def write_container(frames, out_dir: str | Path, index: int | None = None) -> Path:
    """Write ``{index}.bpc`` for one keyframe's frames, atomically."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if index is None:
        if not frames:
            raise ContainerError("cannot infer the keyframe index without frames")
        index = frames[0].keyframe
    container = frames_to_container(frames)
    path = out_dir / f"{index}{SUFFIX}"
    write_atomic(path, encode_container(container))
    return path


# -- previews ---------------------------------------------------------------


def _to_srgb(linear: np.ndarray) -> np.ndarray:
    linear = np.clip(linear, 0.0, 1.0)
    return np.where(linear <= 0.0031308, 12.92 * linear, 1.055 * linear ** (1 / 2.4) - 0.055)


def _normalize(values: np.ndarray) -> np.ndarray:
    finite = np.isfinite(values)
    out = np.zeros(values.shape)
    if finite.any():
        lo, hi = values[finite].min(), values[finite].max()
        out[finite] = (values[finite] - lo) / (hi - lo) if hi > lo else 0.0
    return out


def preview_image(pass_name: str, data: np.ndarray) -> np.ndarray:
    """8-bit preview; the encoding is for eyeballing only."""
    if pass_name == "colors":
        img = _to_srgb(data)
    elif pass_name == "segmap":
        return ((data.astype(np.int64) * 37) % 255).astype(np.uint8)
    else:
        img = _normalize(data)
    return np.round(img * 255).astype(np.uint8)


def export_png(frames, out_dir: str | Path) -> list[Path]:
    from PIL import Image

    out_dir = Path(out_dir)
    paths = []
    suffix = {"mono": "", "left": "_L", "right": "_R"}
    for frame in frames:
        path = out_dir / f"{frame.keyframe}_{frame.key}{suffix[frame.eye]}.png"
        Image.fromarray(preview_image(frame.pass_name, frame.data)).save(path)
        paths.append(path)
    return paths
