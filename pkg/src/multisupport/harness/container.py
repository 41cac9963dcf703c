"""The ``MSR1`` binary dataset container.

Layout, little-endian: magic ``b"MSR1"``, one version byte, five ``u32``
(``n, m, d, l, k``), then per sample the ``m x d`` matrix as row-major
``f64`` followed by the ``m`` measurements as ``f64``, then ``n`` labels as
``u8`` and finally ``l`` supports of ``k`` coordinates each as ``u32``.
Absent labels are stored as ``0xFF`` and absent supports as ``0xFFFFFFFF``.
"""

from __future__ import annotations

import struct

import numpy as np

from ..model import Dataset, ModelParams, SupportTuple

MAGIC = b"MSR1"
VERSION = 1
NO_LABEL = 0xFF
NO_COORD = 0xFFFFFFFF
_HEADER = struct.Struct("<4sB5I")


def write_container(dataset: Dataset, path) -> None:
    p = dataset.params
    n = dataset.n
    if p.l > NO_LABEL:
        raise ValueError("l must be below 255 to store labels in one byte")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, p.m, p.d, p.l, p.k))
        body = np.concatenate([dataset.phis.reshape(n, -1), dataset.ys], axis=1)
        fh.write(body.astype("<f8").tobytes())
        if dataset.labels is None:
            lab = np.full(n, NO_LABEL, dtype=np.uint8)
        else:
            lab = dataset.labels.astype(np.uint8)
        fh.write(lab.tobytes())
        if dataset.truth is None:
            sup = np.full(p.l * p.k, NO_COORD, dtype="<u4")
        else:
            sup = np.asarray(dataset.truth.sorted_lists(), dtype="<u4").reshape(-1)
            if sup.size != p.l * p.k:
                raise ValueError("truth must hold l supports of k coordinates")
        fh.write(sup.tobytes())


def read_container(path, lambda0: float = 1.0, ensemble: str = "gaussian") -> Dataset:
    """Load a container.  The ensemble and ``lambda0`` are not stored and are taken from the arguments."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError("container header is truncated")
    magic, version, n, m, d, l, k = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported container version {version}")
    body = n * m * (d + 1) * 8
    expected = _HEADER.size + body + n + l * k * 4
    if len(data) != expected:
        raise ValueError(f"container has {len(data)} bytes, expected {expected}")
    off = _HEADER.size
    block = np.frombuffer(data, dtype="<f8", count=n * m * (d + 1), offset=off).reshape(n, m * d + m)
    off += body
    lab = np.frombuffer(data, dtype=np.uint8, count=n, offset=off)
    off += n
    sup = np.frombuffer(data, dtype="<u4", count=l * k, offset=off)
    params = ModelParams(d=d, k=k, l=l, m=m, lambda0=lambda0, sample_dist=ensemble, matrix_dist=ensemble)
    labels = None if np.all(lab == NO_LABEL) else lab.astype(np.int64)
    truth = None if np.all(sup == NO_COORD) else SupportTuple(sup.astype(np.int64).reshape(l, k))
    return Dataset(phis=block[:, :m * d].reshape(n, m, d).copy(), ys=block[:, m * d:].copy(),
                   params=params, labels=labels, truth=truth)
