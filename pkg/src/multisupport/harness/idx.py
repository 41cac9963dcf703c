"""Reader and writer for the IDX container used by the handwritten-digit sets."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
# refuse headers that would describe more than this many bytes of payload
MAX_ELEMENTS = 1 << 31


class IdxError(ValueError):
    """Base class for malformed IDX input."""


class IdxMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxDimensionError(IdxError):
    pass


@dataclass
class IdxImages:
    count: int
    rows: int
    cols: int
    pixels: np.ndarray  # (count, rows, cols) in [0, 1]
    raw: np.ndarray  # (count, rows, cols) uint8


@dataclass
class IdxLabels:
    count: int
    labels: np.ndarray


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def parse_idx_bytes(data: bytes):
    if len(data) < 4:
        raise IdxTruncatedError("file shorter than the magic number")
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IMAGES_MAGIC:
        ndim, kind = 3, "images"
    elif magic == LABELS_MAGIC:
        ndim, kind = 1, "labels"
    else:
        raise IdxMagicError(f"unknown magic 0x{magic:08x}")
    head = 4 + 4 * ndim
    if len(data) < head:
        raise IdxTruncatedError("header is truncated")
    dims = struct.unpack(f">{ndim}I", data[4:head])
    total = 1
    for dim in dims:
        total *= dim
    if total > MAX_ELEMENTS:
        raise IdxDimensionError(f"dimensions {dims} exceed {MAX_ELEMENTS} elements")
    if len(data) < head + total:
        raise IdxTruncatedError(f"expected {total} payload bytes, found {len(data) - head}")
    payload = np.frombuffer(data, dtype=np.uint8, count=total, offset=head)
    if kind == "labels":
        return IdxLabels(count=dims[0], labels=payload.astype(np.int64))
    raw = payload.reshape(dims).copy()
    return IdxImages(count=dims[0], rows=dims[1], cols=dims[2],
                     pixels=raw.astype(np.float64) / 255.0, raw=raw)


def parse_idx(path):
    """Parse an image (``0x803``) or label (``0x801``) IDX file, gzip or plain."""
    return parse_idx_bytes(_read_bytes(path))


def idx_bytes(obj) -> bytes:
    if isinstance(obj, IdxImages):
        raw = np.asarray(obj.raw, dtype=np.uint8)
        return struct.pack(">IIII", IMAGES_MAGIC, *raw.shape) + raw.tobytes()
    if isinstance(obj, IdxLabels):
        lab = np.asarray(obj.labels)
        if lab.size and (lab.min() < 0 or lab.max() > 255):
            raise ValueError("labels must fit in one byte")
        return struct.pack(">II", LABELS_MAGIC, lab.size) + lab.astype(np.uint8).tobytes()
    raise TypeError("expected IdxImages or IdxLabels")


def write_idx(obj, path) -> None:
    data = idx_bytes(obj)
    if str(path).endswith(".gz"):
        data = gzip.compress(data, mtime=0)
    with open(path, "wb") as fh:
        fh.write(data)


def images_from_array(raw) -> IdxImages:
    raw = np.asarray(raw, dtype=np.uint8)
    if raw.ndim != 3:
        raise ValueError("images must be (count, rows, cols)")
    return IdxImages(raw.shape[0], raw.shape[1], raw.shape[2], raw.astype(np.float64) / 255.0, raw)


def labels_from_array(labels) -> IdxLabels:
    lab = np.asarray(labels, dtype=np.int64)
    return IdxLabels(lab.size, lab)
